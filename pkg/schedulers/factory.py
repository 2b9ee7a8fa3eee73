from exceptions import ConfigurationError
from schedulers.heuristics import BalanceFit, FirstFit, RandomPolicy
from schedulers.q_policy import GreedyQPolicy

SCHEDULER_NAMES = ("first_fit", "balance_fit", "random", "qnet")


def make_scheduler(name, seed=0, network=None):
    """
    Build a scheduler by name.

    Args:
        name (str): first_fit, balance_fit, random or qnet.
        seed (int): Seed of the random policy.
        network (QNetwork): Network wrapped by the qnet policy.

    Returns:
        Scheduler: The scheduler.
    """
    if name == "first_fit":
        return FirstFit()
    if name == "balance_fit":
        return BalanceFit()
    if name == "random":
        return RandomPolicy(seed)
    if name == "qnet":
        if network is None:
            raise ConfigurationError("The qnet scheduler needs a checkpoint")
        return GreedyQPolicy(network)
    raise ConfigurationError(f"Unknown scheduler '{name}', expected one of {SCHEDULER_NAMES}")
