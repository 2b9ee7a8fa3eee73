from dataclasses import dataclass

import numpy as np

from exceptions import EpisodeError

SPLITS = ("train", "valid", "test")
DEFAULT_SPLIT_BOUNDS = (0, 50000, 70000, 110000)


@dataclass(frozen=True)
class EpisodeSpec:
    start_index: int
    length: int
    split: str = None

    def __post_init__(self):
        if self.start_index < 0 or self.length < 0:
            raise EpisodeError(f"Invalid episode spec: start={self.start_index}, length={self.length}")


def split_range(trace_length, split, bounds=DEFAULT_SPLIT_BOUNDS):
    """
    Request-index range [lo, hi) of a split, scaled down for traces shorter than the bounds.

    Args:
        trace_length (int): Number of requests in the trace.
        split (str): One of train, valid, test.
        bounds (sequence): Four increasing boundaries of the three splits.

    Returns:
        tuple: (lo, hi).
    """
    if split not in SPLITS:
        raise EpisodeError(f"Unknown split '{split}', expected one of {SPLITS}")
    total = bounds[-1]
    scale = min(1.0, trace_length / total) if total else 1.0
    index = SPLITS.index(split)
    lo = int(round(bounds[index] * scale))
    hi = int(round(bounds[index + 1] * scale))
    hi = min(hi, trace_length)
    if hi <= lo:
        raise EpisodeError(f"Split '{split}' is empty for a trace of {trace_length} requests")
    return lo, hi


def sample_episode(trace, split, length, rng, truncate=True, bounds=DEFAULT_SPLIT_BOUNDS):
    """
    Draw an episode with a uniform start index inside the split range.

    Args:
        trace (WorkloadTrace): Source trace.
        split (str): One of train, valid, test.
        length (int): Requested number of requests.
        rng (numpy.random.Generator): Random stream.
        truncate (bool): Shorten episodes running past the end of the trace
            instead of raising.
        bounds (sequence): Split boundaries.

    Returns:
        EpisodeSpec: The sampled episode.
    """
    lo, hi = split_range(len(trace), split, bounds)
    start = int(rng.integers(lo, hi))
    if start + length > len(trace):
        if not truncate:
            raise EpisodeError(
                f"Episode of {length} requests starting at {start} exceeds trace length {len(trace)}")
        length = len(trace) - start
    return EpisodeSpec(start, length, split)


def frozen_episodes(trace, split, count, length, seed, truncate=True, bounds=DEFAULT_SPLIT_BOUNDS):
    """
    Materialize a fixed episode set for a split; the same seed always yields the same set.

    Args:
        trace (WorkloadTrace): Source trace.
        split (str): Usually valid or test.
        count (int): Number of episodes.
        length (int): Requests per episode.
        seed (int): Seed of the set.

    Returns:
        list: EpisodeSpec objects.
    """
    rng = np.random.default_rng([seed, SPLITS.index(split)])
    return [sample_episode(trace, split, length, rng, truncate, bounds) for _ in range(count)]
