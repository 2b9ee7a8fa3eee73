from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamMoments:
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params, grads, moments, lr=0.01, l2=1e-8, betas=(0.9, 0.999), eps=1e-8):
    """
    One Adam update with decoupled L2 weight decay, applied in place.

    Args:
        params (dict): Parameter name to array (updated in place).
        grads (dict): Parameter name to gradient.
        moments (AdamMoments): Running moment estimates (updated in place).
        lr (float): Learning rate.
        l2 (float): Weight decay coefficient.
        betas (tuple): Exponential decay rates of the moments.
        eps (float): Denominator guard.

    Returns:
        dict: The updated parameters.
    """
    beta1, beta2 = betas
    moments.step += 1
    correction1 = 1.0 - beta1 ** moments.step
    correction2 = 1.0 - beta2 ** moments.step
    for name, param in params.items():
        grad = grads[name]
        first = moments.first.get(name)
        if first is None:
            first = moments.first[name] = np.zeros_like(param)
            moments.second[name] = np.zeros_like(param)
        second = moments.second[name]
        first *= beta1
        first += (1.0 - beta1) * grad
        second *= beta2
        second += (1.0 - beta2) * grad * grad
        update = (first / correction1) / (np.sqrt(second / correction2) + eps)
        param -= lr * (update + l2 * param)
    return params


class Adam:
    """
    Adam optimizer bound to one network's parameter dict.
    """

    def __init__(self, params, lr=0.01, l2=1e-8, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.l2 = l2
        self.betas = tuple(betas)
        self.eps = eps
        self.moments = AdamMoments()

    @classmethod
    def from_config(cls, params, config):
        return cls(
            params,
            lr=float(config.LEARNING_RATE),
            l2=float(config.L2_WEIGHT_DECAY),
            betas=tuple(config.ADAM_BETAS),
            eps=float(config.ADAM_EPS),
        )

    def step(self, grads):
        return adam_step(self.params, grads, self.moments, self.lr, self.l2, self.betas, self.eps)
