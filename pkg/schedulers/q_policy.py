import numpy as np

from exceptions import InfeasibleActionError, ModelError
from schedulers.heuristics import Scheduler


def masked_argmax(values, feasible):
    """
    Action with the largest value among the feasible ones; ties go to the lowest id.

    Args:
        values (numpy.ndarray): Length-2m vector, index a-1 holds action a.
        feasible (iterable): Feasible 1-based actions.

    Returns:
        int: Chosen action.
    """
    best, best_value = None, -np.inf
    for action in sorted(feasible):
        value = values[action - 1]
        if best is None or value > best_value:
            best, best_value = action, value
    if best is None:
        raise InfeasibleActionError("Masked argmax over an empty feasible set")
    return int(best)


def greedy_q_policy(network, obs, feasible):
    q = network.q_values(obs)
    if not np.all(np.isfinite(q)):
        raise ModelError(f"Non-finite Q values: {q}")
    return masked_argmax(q, feasible)


class GreedyQPolicy(Scheduler):
    """
    Wraps a Q-network as a deterministic greedy scheduler.
    """
    name = "qnet"

    def __init__(self, network):
        self.network = network

    def choose(self, obs, feasible):
        return greedy_q_policy(self.network, obs, feasible)
