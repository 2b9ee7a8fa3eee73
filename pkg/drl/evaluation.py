import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from environment.simulator import run_episode
from workload.episodes import frozen_episodes


@dataclass
class EvaluationStats:
    scheduler: str
    split: str
    per_episode: list = field(default_factory=list)
    mean: float = float("nan")
    median: float = float("nan")
    p90: float = float("nan")
    minimum: float = float("nan")
    maximum: float = float("nan")

    @classmethod
    def from_totals(cls, scheduler, split, totals):
        totals = [int(t) for t in totals]
        if not totals:
            return cls(scheduler, split)
        values = np.asarray(totals, dtype=np.float64)
        return cls(
            scheduler=scheduler,
            split=split,
            per_episode=totals,
            mean=float(values.mean()),
            median=float(np.percentile(values, 50)),
            p90=float(np.percentile(values, 90)),
            minimum=float(values.min()),
            maximum=float(values.max()),
        )

    def summary(self):
        return {k: v for k, v in self.__dict__.items() if k != "per_episode"}


def run_episode_results(trace, specs, scheduler, config, workers=1):
    """
    Run a scheduler over a list of episodes and return their results.

    Deterministic schedulers are fanned out over a thread pool; seeded random
    ones run sequentially so their stream stays reproducible.

    Args:
        trace (WorkloadTrace): Source trace.
        specs (list): EpisodeSpec objects.
        scheduler (Scheduler): Policy.
        config (ClusterConfig): Cluster block.
        workers (int): Thread pool size.

    Returns:
        list: EpisodeResult per episode, in the order of `specs`.
    """
    if workers > 1 and scheduler.deterministic and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(lambda spec: run_episode(trace, spec, scheduler, config), specs))
    else:
        results = [run_episode(trace, spec, scheduler, config) for spec in specs]
    return results


def run_episodes(trace, specs, scheduler, config, workers=1):
    """
    Total wait per episode, in the order of `specs`.
    """
    return [r.total_wait for r in run_episode_results(trace, specs, scheduler, config, workers)]


def evaluate(scheduler, trace, config, split, episodes, episode_len, seed, workers=1,
             truncate=True, bounds=None):
    """
    Evaluate a scheduler on the frozen episode set of a split.

    Args:
        scheduler (Scheduler): Heuristic or greedy Q policy.
        trace (WorkloadTrace): Source trace.
        config (ClusterConfig): Cluster block; may differ in m from training.
        split (str): valid or test.
        episodes (int): Number of frozen episodes.
        episode_len (int): Requests per episode.
        seed (int): Seed of the frozen set.
        workers (int): Thread pool size.

    Returns:
        EvaluationStats: Per-episode totals and summary statistics.
    """
    kwargs = {"bounds": bounds} if bounds is not None else {}
    specs = frozen_episodes(trace, split, episodes, episode_len, seed, truncate, **kwargs)
    totals = run_episodes(trace, specs, scheduler, config, workers)
    stats = EvaluationStats.from_totals(scheduler.name, split, totals)
    logging.info(f"{scheduler.name} on {episodes} {split} episodes (m={config.m}): mean wait {stats.mean:.2f}")
    return stats
