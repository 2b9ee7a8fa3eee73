from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    """
    Fully connected layer applied along the last axis of its input.
    """
    weight: np.ndarray  # [out, in]
    bias: np.ndarray  # [out]
    activation: str = "relu"

    @classmethod
    def init(cls, n_in, n_out, rng, activation="relu"):
        """
        He-style uniform fan-in initialization.

        Args:
            n_in (int): Input width.
            n_out (int): Output width.
            rng (numpy.random.Generator): Random stream.
            activation (str): relu or identity.

        Returns:
            DenseLayer: New layer with zero bias.
        """
        if activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation {activation}")
        bound = np.sqrt(6.0 / n_in)
        weight = rng.uniform(-bound, bound, size=(n_out, n_in))
        return cls(weight, np.zeros(n_out), activation)

    @property
    def n_in(self):
        return self.weight.shape[1]

    @property
    def n_out(self):
        return self.weight.shape[0]

    def forward(self, x):
        """
        Returns:
            tuple: (output, cache) where cache feeds `backward`.
        """
        z = x @ self.weight.T + self.bias
        out = np.maximum(z, 0.0) if self.activation == "relu" else z
        return out, (x, z)

    def backward(self, grad_out, cache):
        """
        Propagate the gradient of the loss w.r.t. the layer output.

        Args:
            grad_out (numpy.ndarray): dL/d(output), same shape as the output.
            cache (tuple): Cache returned by `forward`.

        Returns:
            tuple: (dL/dx, dL/dW, dL/db).
        """
        x, z = cache
        grad_z = grad_out * (z > 0.0) if self.activation == "relu" else grad_out
        flat_g = grad_z.reshape(-1, self.n_out)
        flat_x = x.reshape(-1, self.n_in)
        return grad_z @ self.weight, flat_g.T @ flat_x, flat_g.sum(axis=0)


class DenseStack:
    """
    Sequence of dense layers; ReLU hidden layers and an identity output layer.
    """

    def __init__(self, layers):
        self.layers = list(layers)

    @classmethod
    def init(cls, widths, rng):
        """
        Args:
            widths (sequence): Input width, hidden widths..., output width.
            rng (numpy.random.Generator): Random stream.
        """
        layers = []
        for k, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
            last = k == len(widths) - 2
            layers.append(DenseLayer.init(n_in, n_out, rng, "identity" if last else "relu"))
        return cls(layers)

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, grad_out, caches):
        """
        Returns:
            tuple: (dL/dx, list of (dW, db) per layer).
        """
        grads = [None] * len(self.layers)
        for k in reversed(range(len(self.layers))):
            grad_out, d_w, d_b = self.layers[k].backward(grad_out, caches[k])
            grads[k] = (d_w, d_b)
        return grad_out, grads

    def named_parameters(self, prefix):
        params = {}
        for k, layer in enumerate(self.layers):
            params[f"{prefix}.{k}.weight"] = layer.weight
            params[f"{prefix}.{k}.bias"] = layer.bias
        return params

    @staticmethod
    def named_gradients(prefix, grads):
        named = {}
        for k, (d_w, d_b) in enumerate(grads):
            named[f"{prefix}.{k}.weight"] = d_w
            named[f"{prefix}.{k}.bias"] = d_b
        return named

    def activations(self):
        return [layer.activation for layer in self.layers]
