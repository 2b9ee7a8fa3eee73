import numpy as np

from cluster.state import encode_action
from exceptions import InfeasibleActionError


def _require_feasible(feasible):
    if not feasible:
        raise InfeasibleActionError("Scheduler called with an empty feasible action set")


def first_fit(obs, feasible):
    """
    Lowest-numbered feasible action: PM order first, NUMA 0 before NUMA 1.
    """
    _require_feasible(feasible)
    return min(feasible)


def balance_fit(obs, feasible):
    """
    Balance Fit heuristic.

    Split VMs go to the first PM that can host them. Single-node VMs go to the
    PM with the largest capacity-normalized NUMA imbalance
    sum_d |u_k0 - u_k1| / R_d, on its less utilized feasible NUMA node.

    Args:
        obs (ObservableState): Observation; utilizations are already divided by R_d.
        feasible (list): Feasible 1-based actions.

    Returns:
        int: Chosen action.
    """
    _require_feasible(feasible)
    if obs.div:
        return min(feasible)
    by_pm = {}
    for action in sorted(feasible):
        by_pm.setdefault((action + 1) // 2 - 1, []).append((action + 1) % 2)
    util = obs.numa_util
    best_pm, best_score = None, -np.inf
    for pm in sorted(by_pm):
        score = float(np.abs(util[pm, 0] - util[pm, 1]).sum())
        if score > best_score:
            best_pm, best_score = pm, score
    load = util[best_pm].sum(axis=1)
    numa = min(by_pm[best_pm], key=lambda i: (load[i], i))
    return encode_action(best_pm, numa)


def random_policy(obs, feasible, rng):
    _require_feasible(feasible)
    return int(feasible[int(rng.integers(len(feasible)))])


class Scheduler:
    """
    Contract shared by every policy: pick one action out of the feasible set.
    """
    name = "scheduler"
    deterministic = True

    def choose(self, obs, feasible):
        raise NotImplementedError

    def reset(self):
        """
        Restore the initial (seeded) state; a no-op for stateless policies.
        """


class FirstFit(Scheduler):
    name = "first_fit"

    def choose(self, obs, feasible):
        return first_fit(obs, feasible)


class BalanceFit(Scheduler):
    name = "balance_fit"

    def choose(self, obs, feasible):
        return balance_fit(obs, feasible)


class RandomPolicy(Scheduler):
    name = "random"
    deterministic = False

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def choose(self, obs, feasible):
        return random_policy(obs, feasible, self.rng)

    def reset(self):
        self.rng = np.random.default_rng(self.seed)
