import numpy as np

from exceptions import ShapeError
from qnet.features import FeatureSpec
from qnet.layers import DenseLayer, DenseStack
from qnet.network import QNetwork


class MlpNetwork(QNetwork):
    """
    Dueling MLP baseline over the flattened observation; bound to the m it was built for.
    """
    arch = "mlp"

    def __init__(self, dim, m, features, trunk, value_head, adv_head, center_advantage=False):
        super().__init__(dim, features, center_advantage)
        self.m = m
        self.trunk = trunk
        self.value_head = value_head
        self.adv_head = adv_head

    @classmethod
    def init(cls, dim, m, features, rng, hidden=32, center_advantage=False):
        n_in = m * 2 * dim + features.width(dim)
        trunk = DenseStack([
            DenseLayer.init(n_in, hidden, rng, "relu"),
            DenseLayer.init(hidden, hidden, rng, "relu"),
        ])
        value_head = DenseStack([DenseLayer.init(hidden, 1, rng, "identity")])
        adv_head = DenseStack([DenseLayer.init(hidden, 2 * m, rng, "identity")])
        return cls(dim, m, features, trunk, value_head, adv_head, center_advantage)

    @classmethod
    def from_config(cls, config, dim, m, seed):
        return cls.init(
            dim,
            m,
            FeatureSpec.from_config(config),
            np.random.default_rng(seed),
            hidden=int(config.MLP_HIDDEN),
            center_advantage=bool(config.CENTER_ADVANTAGE),
        )

    def _heads(self, util, feats):
        batch, m = util.shape[0], util.shape[1]
        if m != self.m:
            raise ShapeError(f"MLP architecture bound to m={self.m}, got an observation with m={m}")
        x = np.concatenate([util.reshape(batch, m * 2 * self.dim), feats], axis=1)
        hidden, trunk_cache = self.trunk.forward(x)
        value, value_cache = self.value_head.forward(hidden)
        adv, adv_cache = self.adv_head.forward(hidden)
        return value[:, 0], adv, (trunk_cache, value_cache, adv_cache)

    def _heads_backward(self, grad_v, grad_adv, cache):
        trunk_cache, value_cache, adv_cache = cache
        grad_hidden_v, value_grads = self.value_head.backward(grad_v[:, None], value_cache)
        grad_hidden_a, adv_grads = self.adv_head.backward(grad_adv, adv_cache)
        _, trunk_grads = self.trunk.backward(grad_hidden_v + grad_hidden_a, trunk_cache)
        grads = {}
        grads.update(DenseStack.named_gradients("trunk", trunk_grads))
        grads.update(DenseStack.named_gradients("value", value_grads))
        grads.update(DenseStack.named_gradients("adv", adv_grads))
        return grads

    def parameters(self):
        params = {}
        params.update(self.trunk.named_parameters("trunk"))
        params.update(self.value_head.named_parameters("value"))
        params.update(self.adv_head.named_parameters("adv"))
        return params

    def meta(self):
        return {
            "arch": self.arch,
            "dim": self.dim,
            "m": self.m,
            "hidden": self.trunk.layers[0].n_out,
            "features": self.features.as_dict(),
            "center_advantage": self.center_advantage,
        }

    @classmethod
    def from_meta(cls, meta):
        return cls.init(
            int(meta["dim"]),
            int(meta["m"]),
            FeatureSpec(**meta["features"]),
            np.random.default_rng(0),
            hidden=int(meta["hidden"]),
            center_advantage=bool(meta["center_advantage"]),
        )
