import hashlib
import logging
import os

import orjson
import yaml
from dotenv import load_dotenv

from exceptions import ConfigurationError

# Load environment variables from .env file
load_dotenv()


class Config:
    # Cluster settings
    PM_COUNT = 5
    RESOURCE_DIM = 2
    CAPACITIES = (40.0, 90.0)  # per NUMA node
    D_DIV = 2  # 1-based resource index
    C_DIV = 10.0

    # Training settings
    LEARNING_RATE = 0.01
    L2_WEIGHT_DECAY = 1e-8
    N_STEP = 50
    BATCH_SIZE = 1024
    EPOCHS = 5000
    VALID_INTERVAL = 250
    VALID_EPISODES = 150
    TEST_EPISODES = 1000
    WARMUP_EPISODES = 100
    EPS_START = 0.6
    EPS_END = 0.0
    GAMMA = 0.99
    TARGET_SYNC_INTERVAL = 100
    REPLAY_CAPACITY = 200000
    UPDATES_PER_EPOCH = 1
    AUGMENT_COUNT = 23
    AUG_COLLECT_INTERVAL = 24
    ADAM_BETAS = (0.9, 0.999)
    ADAM_EPS = 1e-8

    # Network settings
    EMBED_HIDDEN = 8
    EMBED_DIM = 8
    VALUE_HIDDEN = 8
    ADV_HIDDEN = 16
    MLP_HIDDEN = 32
    CENTER_ADVANTAGE = False
    VM_FEATURES_IN_EMBED = True
    INCLUDE_DIV_FEATURE = True
    INCLUDE_WAIT_FEATURE = True
    WAIT_SCALE = 100.0

    # Workload settings
    EPISODE_LEN = 1000
    TRUNCATE_EPISODES = True
    SPLIT_BOUNDS = (0, 50000, 70000, 110000)
    SYNTHETIC_REQUESTS = 110000
    ARRIVAL_RATE = 1.0  # mean arrivals per tick
    MEAN_LIFETIME = 20.0  # ticks
    FLAVORS = (
        (1, 1), (1, 2), (1, 4), (2, 2), (2, 4), (2, 8), (4, 4), (4, 8),
        (4, 16), (8, 16), (8, 32), (16, 32), (16, 64), (32, 64), (64, 128),
    )

    # Runtime settings
    SEED = 0
    WORKERS = os.cpu_count() or 1
    OUTPUT_ROOT = os.getenv("DVAMP_OUTPUT_ROOT", "results")


# YAML section -> attribute names it may override
CONFIG_SECTIONS = {
    "cluster": ("PM_COUNT", "RESOURCE_DIM", "CAPACITIES", "D_DIV", "C_DIV"),
    "train": (
        "LEARNING_RATE", "L2_WEIGHT_DECAY", "N_STEP", "BATCH_SIZE", "EPOCHS",
        "VALID_INTERVAL", "VALID_EPISODES", "TEST_EPISODES", "WARMUP_EPISODES",
        "EPS_START", "EPS_END", "GAMMA", "TARGET_SYNC_INTERVAL", "REPLAY_CAPACITY",
        "UPDATES_PER_EPOCH", "AUGMENT_COUNT", "AUG_COLLECT_INTERVAL",
        "ADAM_BETAS", "ADAM_EPS",
    ),
    "network": (
        "EMBED_HIDDEN", "EMBED_DIM", "VALUE_HIDDEN", "ADV_HIDDEN", "MLP_HIDDEN",
        "CENTER_ADVANTAGE", "VM_FEATURES_IN_EMBED", "INCLUDE_DIV_FEATURE",
        "INCLUDE_WAIT_FEATURE", "WAIT_SCALE",
    ),
    "workload": (
        "EPISODE_LEN", "TRUNCATE_EPISODES", "SPLIT_BOUNDS", "SYNTHETIC_REQUESTS",
        "ARRIVAL_RATE", "MEAN_LIFETIME", "FLAVORS",
    ),
    "runtime": ("SEED", "WORKERS", "OUTPUT_ROOT"),
}


def config_values(config=None):
    """
    Collect the upper-case settings of a config object.

    Args:
        config (Config or type): Configuration object. Defaults to Config.

    Returns:
        dict: Setting name to value.
    """
    config = config or Config
    return {name: getattr(config, name) for name in dir(config) if name.isupper()}


def make_config(overrides=None, base=None):
    """
    Build a Config-shaped object with the given overrides applied.

    Args:
        overrides (dict): Upper-case setting names to new values.
        base (Config or type): Configuration to start from. Defaults to Config.

    Returns:
        type: Config-like class carrying the merged settings.
    """
    values = config_values(base)
    for key, value in (overrides or {}).items():
        name = key.upper()
        if name not in values:
            raise ConfigurationError(f"Unknown configuration key: {key}")
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        values[name] = value
    return type('Config', (object,), values)


def load_config(path=None, overrides=None):
    """
    Load a YAML config file with flat sections and merge flag overrides on top.

    Args:
        path (str): Path to a YAML file with `cluster`, `train`, `network`,
            `workload` and `runtime` sections. Optional.
        overrides (dict): Values taken from command-line flags; they win over the file.

    Returns:
        type: Config-like class.
    """
    file_values = {}
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as file:
                raw = yaml.safe_load(file) or {}
        except (OSError, yaml.YAMLError) as e:
            logging.error(f"Error reading config file {path}: {e}")
            raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
        for section, entries in raw.items():
            if section not in CONFIG_SECTIONS:
                raise ConfigurationError(f"Unknown config section: {section}")
            for key, value in (entries or {}).items():
                if key.upper() not in CONFIG_SECTIONS[section]:
                    raise ConfigurationError(f"Unknown key '{key}' in section '{section}'")
                file_values[key.upper()] = value
        logging.info(f"Loaded {len(file_values)} settings from {path}")
    merged = dict(file_values)
    merged.update({k.upper(): v for k, v in (overrides or {}).items() if v is not None})
    return make_config(merged)


def config_hash(config=None):
    """
    Hash every setting except runtime-only ones into a short hex digest.

    Args:
        config (Config or type): Configuration object.

    Returns:
        str: First 16 hex characters of the SHA-256 digest.
    """
    values = {k: v for k, v in config_values(config).items()
              if k not in ("WORKERS", "OUTPUT_ROOT")}
    payload = orjson.dumps(values, option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(payload).hexdigest()[:16]
