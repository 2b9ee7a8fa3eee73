import logging

import numpy as np
import orjson

from exceptions import ConfigurationError, ShapeError
from qnet.mlp import MlpNetwork
from qnet.spane import SpaneNetwork

ARCHITECTURES = {"spane": SpaneNetwork, "mlp": MlpNetwork}


def build_network(arch, config, dim, m, seed):
    """
    Create a freshly initialized network for an architecture name.

    Args:
        arch (str): spane, mlp or mlp_aug (same network as mlp).
        config (Config or type): Network settings.
        dim (int): Resource dimension.
        m (int): PM count; only the MLP is bound to it.
        seed (int): Initialization seed.

    Returns:
        QNetwork: New network.
    """
    if arch == "spane":
        return SpaneNetwork.from_config(config, dim, seed)
    if arch in ("mlp", "mlp_aug"):
        return MlpNetwork.from_config(config, dim, m, seed)
    raise ConfigurationError(f"Unknown architecture '{arch}'")


def checkpoint_payload(network, config_hash=None, extra=None):
    tensors = [
        {"name": name, "shape": list(value.shape), "values": value.reshape(-1).tolist()}
        for name, value in sorted(network.parameters().items())
    ]
    return {
        "meta": network.meta(),
        "config_hash": config_hash,
        "extra": extra or {},
        "tensors": tensors,
    }


def save_checkpoint(network, path, config_hash=None, extra=None):
    """
    Write a network as self-describing JSON of named row-major tensors.

    Args:
        network (QNetwork): Network to save.
        path (str): Destination file.
        config_hash (str): Hash of the configuration that produced it.
        extra (dict): Additional metadata (seed, validation score, ...).
    """
    try:
        with open(path, 'wb') as file:
            file.write(orjson.dumps(checkpoint_payload(network, config_hash, extra),
                                    option=orjson.OPT_SORT_KEYS))
        logging.info(f"Checkpoint written to {path}")
    except OSError as e:
        logging.error(f"Error writing checkpoint {path}: {e}")
        raise


def network_from_payload(payload):
    meta = payload["meta"]
    if meta.get("arch") not in ARCHITECTURES:
        raise ConfigurationError(f"Unknown checkpoint architecture {meta.get('arch')}")
    network = ARCHITECTURES[meta["arch"]].from_meta(meta)
    params = network.parameters()
    for tensor in payload["tensors"]:
        name = tensor["name"]
        if name not in params:
            raise ShapeError(f"Checkpoint tensor {name} does not belong to {meta['arch']}")
        if list(params[name].shape) != list(tensor["shape"]):
            raise ShapeError(f"Tensor {name} has shape {tensor['shape']}, expected {list(params[name].shape)}")
        params[name][...] = np.asarray(tensor["values"], dtype=np.float64).reshape(tensor["shape"])
    return network


def load_checkpoint(path):
    """
    Read a checkpoint written by `save_checkpoint`.

    Args:
        path (str): Checkpoint file.

    Returns:
        tuple: (network, payload without tensors).
    """
    try:
        with open(path, 'rb') as file:
            payload = orjson.loads(file.read())
    except (OSError, orjson.JSONDecodeError) as e:
        logging.error(f"Error reading checkpoint {path}: {e}")
        raise
    network = network_from_payload(payload)
    logging.info(f"Loaded {payload['meta']['arch']} checkpoint from {path}")
    return network, {k: v for k, v in payload.items() if k != "tensors"}
