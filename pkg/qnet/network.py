import copy
from dataclasses import dataclass

import numpy as np

from exceptions import ModelError


@dataclass
class QOutput:
    v: float
    adv: np.ndarray  # [2m]
    q: np.ndarray  # [2m]


class QNetwork:
    """
    Dueling Q-network: subclasses provide the value and advantage heads.
    """
    arch = None

    def __init__(self, dim, features, center_advantage=False):
        self.dim = dim
        self.features = features
        self.center_advantage = center_advantage

    def _heads(self, util, feats):
        """
        Returns:
            tuple: (v [B], adv [B, 2m], cache).
        """
        raise NotImplementedError

    def _heads_backward(self, grad_v, grad_adv, cache):
        """
        Returns:
            dict: Parameter name to gradient.
        """
        raise NotImplementedError

    def parameters(self):
        raise NotImplementedError

    def meta(self):
        raise NotImplementedError

    def compose(self, v, adv):
        q = v[:, None] + adv
        if self.center_advantage:
            q = q - adv.mean(axis=1, keepdims=True)
        return q

    def forward_batch(self, util, feats):
        v, adv, cache = self._heads(util, feats)
        q = self.compose(v, adv)
        if not np.all(np.isfinite(q)):
            raise ModelError("Non-finite activation in Q-network forward pass")
        return v, adv, q, cache

    def forward(self, obs):
        """
        Evaluate the network on a single observation.

        Args:
            obs (ObservableState): Observation with any supported m.

        Returns:
            QOutput: Value, advantages and Q values.
        """
        util, feats = self.features.encode_batch([obs])
        v, adv, q, _ = self.forward_batch(util, feats)
        return QOutput(v=float(v[0]), adv=adv[0], q=q[0])

    def q_values(self, obs):
        return self.forward(obs).q

    def q_batch(self, observations):
        util, feats = self.features.encode_batch(observations)
        return self.forward_batch(util, feats)[2]

    def backward(self, observations, actions, targets):
        """
        Gradient of L = mean_b (Q(a_b, s_b) - y_b)^2 with respect to every parameter.

        Args:
            observations (sequence): Batch of ObservableState objects.
            actions (sequence): 1-based actions taken.
            targets (sequence): TD targets y_b.

        Returns:
            tuple: (loss, dict of parameter name to gradient).
        """
        util, feats = self.features.encode_batch(observations)
        v, adv, q, cache = self.forward_batch(util, feats)
        batch = len(observations)
        rows = np.arange(batch)
        cols = np.asarray(actions, dtype=np.int64) - 1
        error = q[rows, cols] - np.asarray(targets, dtype=np.float64)
        loss = float(np.mean(error ** 2))
        grad_q = np.zeros_like(q)
        grad_q[rows, cols] = 2.0 * error / batch
        grad_v = grad_q.sum(axis=1)
        grad_adv = grad_q
        if self.center_advantage:
            grad_adv = grad_q - grad_q.mean(axis=1, keepdims=True)
        return loss, self._heads_backward(grad_v, grad_adv, cache)

    def copy(self):
        return copy.deepcopy(self)

    def load_parameters(self, values):
        """
        Copy arrays into the network's parameters in place.
        """
        params = self.parameters()
        for name, value in values.items():
            target = params[name]
            target[...] = np.asarray(value, dtype=np.float64).reshape(target.shape)
