import numpy as np

from qnet.features import FeatureSpec
from qnet.layers import DenseStack
from qnet.network import QNetwork


class SpaneNetwork(QNetwork):
    """
    Symmetry-preserving dueling Q-network.

    One PM embedding network is shared by all PMs; the cluster embedding is the
    mean of the PM embeddings; the value head sees only the cluster embedding
    and the pending-VM features; one advantage network scores each PM's two
    actions from (PM embedding, cluster embedding, VM features). No parameter
    shape depends on m, so the same weights serve any cluster size.
    """
    arch = "spane"

    def __init__(self, dim, features, embed_net, value_net, adv_net,
                 vm_features_in_embed=True, center_advantage=False):
        super().__init__(dim, features, center_advantage)
        self.embed_net = embed_net
        self.value_net = value_net
        self.adv_net = adv_net
        self.vm_features_in_embed = vm_features_in_embed

    @classmethod
    def init(cls, dim, features, rng, embed_hidden=8, embed_dim=8, value_hidden=8,
             adv_hidden=16, vm_features_in_embed=True, center_advantage=False):
        """
        Build a randomly initialized SPANE network.

        Args:
            dim (int): Resource dimension D.
            features (FeatureSpec): Pending-VM feature layout.
            rng (numpy.random.Generator): Initialization stream.

        Returns:
            SpaneNetwork: New network.
        """
        width = features.width(dim)
        embed_in = 2 * dim + (width if vm_features_in_embed else 0)
        return cls(
            dim,
            features,
            DenseStack.init((embed_in, embed_hidden, embed_dim), rng),
            DenseStack.init((embed_dim + width, value_hidden, 1), rng),
            DenseStack.init((2 * embed_dim + width, adv_hidden, 2), rng),
            vm_features_in_embed=vm_features_in_embed,
            center_advantage=center_advantage,
        )

    @classmethod
    def from_config(cls, config, dim, seed):
        return cls.init(
            dim,
            FeatureSpec.from_config(config),
            np.random.default_rng(seed),
            embed_hidden=int(config.EMBED_HIDDEN),
            embed_dim=int(config.EMBED_DIM),
            value_hidden=int(config.VALUE_HIDDEN),
            adv_hidden=int(config.ADV_HIDDEN),
            vm_features_in_embed=bool(config.VM_FEATURES_IN_EMBED),
            center_advantage=bool(config.CENTER_ADVANTAGE),
        )

    def _heads(self, util, feats):
        batch, m = util.shape[0], util.shape[1]
        pm_state = util.reshape(batch, m, 2 * self.dim)
        per_pm_feats = np.broadcast_to(feats[:, None, :], (batch, m, feats.shape[1]))
        embed_in = np.concatenate([pm_state, per_pm_feats], axis=2) if self.vm_features_in_embed else pm_state
        pm_embed, embed_cache = self.embed_net.forward(embed_in)
        cluster = pm_embed.mean(axis=1)

        value, value_cache = self.value_net.forward(np.concatenate([cluster, feats], axis=1))
        cluster_per_pm = np.broadcast_to(cluster[:, None, :], pm_embed.shape)
        adv_in = np.concatenate([pm_embed, cluster_per_pm, per_pm_feats], axis=2)
        adv, adv_cache = self.adv_net.forward(adv_in)
        cache = (m, embed_cache, value_cache, adv_cache)
        return value[:, 0], adv.reshape(batch, 2 * m), cache

    def _heads_backward(self, grad_v, grad_adv, cache):
        m, embed_cache, value_cache, adv_cache = cache
        batch = grad_v.shape[0]
        embed_dim = self.embed_net.layers[-1].n_out

        grad_adv_in, adv_grads = self.adv_net.backward(grad_adv.reshape(batch, m, 2), adv_cache)
        grad_embed = grad_adv_in[:, :, :embed_dim]
        grad_cluster = grad_adv_in[:, :, embed_dim:2 * embed_dim].sum(axis=1)

        grad_value_in, value_grads = self.value_net.backward(grad_v[:, None], value_cache)
        grad_cluster = grad_cluster + grad_value_in[:, :embed_dim]

        # mean pooling hands 1/m of the cluster gradient to every PM branch
        grad_embed = grad_embed + grad_cluster[:, None, :] / m
        _, embed_grads = self.embed_net.backward(grad_embed, embed_cache)

        grads = {}
        grads.update(DenseStack.named_gradients("embed", embed_grads))
        grads.update(DenseStack.named_gradients("value", value_grads))
        grads.update(DenseStack.named_gradients("adv", adv_grads))
        return grads

    def parameters(self):
        params = {}
        params.update(self.embed_net.named_parameters("embed"))
        params.update(self.value_net.named_parameters("value"))
        params.update(self.adv_net.named_parameters("adv"))
        return params

    def meta(self):
        return {
            "arch": self.arch,
            "dim": self.dim,
            "features": self.features.as_dict(),
            "vm_features_in_embed": self.vm_features_in_embed,
            "center_advantage": self.center_advantage,
            "widths": {
                "embed": [self.embed_net.layers[0].n_in] + [l.n_out for l in self.embed_net.layers],
                "value": [self.value_net.layers[0].n_in] + [l.n_out for l in self.value_net.layers],
                "adv": [self.adv_net.layers[0].n_in] + [l.n_out for l in self.adv_net.layers],
            },
        }

    @classmethod
    def from_meta(cls, meta):
        rng = np.random.default_rng(0)
        widths = meta["widths"]
        return cls(
            int(meta["dim"]),
            FeatureSpec(**meta["features"]),
            DenseStack.init(widths["embed"], rng),
            DenseStack.init(widths["value"], rng),
            DenseStack.init(widths["adv"], rng),
            vm_features_in_embed=bool(meta["vm_features_in_embed"]),
            center_advantage=bool(meta["center_advantage"]),
        )
