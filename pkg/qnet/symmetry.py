from dataclasses import replace

import numpy as np

from exceptions import PermutationError


def check_permutation(sigma, m):
    """
    Validate a 1-based permutation (alpha_1, ..., alpha_m) of 1..m.
    """
    sigma = tuple(int(a) for a in sigma)
    if len(sigma) != m or sorted(sigma) != list(range(1, m + 1)):
        raise PermutationError(f"{sigma} is not a permutation of 1..{m}")
    return sigma


def inverse_permutation(sigma):
    inverse = [0] * len(sigma)
    for k, alpha in enumerate(sigma, start=1):
        inverse[alpha - 1] = k
    return tuple(inverse)


def compose_permutations(sigma, tau):
    """
    Permutation rho with K_rho = K_sigma o K_tau (and L_rho = L_sigma o L_tau).
    """
    return tuple(tau[alpha - 1] for alpha in sigma)


def random_permutation(m, rng):
    return tuple(int(a) + 1 for a in rng.permutation(m))


def permute_obs(obs, sigma):
    """
    Reorder PM blocks: position k of the result holds PM alpha_k's utilization.

    Args:
        obs (ObservableState): Observation.
        sigma (sequence): 1-based permutation (alpha_1, ..., alpha_m).

    Returns:
        ObservableState: Relabeled observation; pending-VM fields untouched.
    """
    sigma = check_permutation(sigma, obs.m)
    order = np.asarray(sigma) - 1
    return replace(obs, numa_util=obs.numa_util[order])


def permute_action_vector(vec, sigma):
    """
    Apply the action relabeling: out[2k-1] = vec[2 alpha_k - 1], out[2k] = vec[2 alpha_k].
    """
    vec = np.asarray(vec)
    if vec.shape[0] % 2:
        raise PermutationError(f"Action vector of odd length {vec.shape[0]}")
    m = vec.shape[0] // 2
    order = np.asarray(check_permutation(sigma, m)) - 1
    return vec.reshape(m, 2)[order].reshape(-1)


def relabel_action(action, sigma):
    """
    Move an action from PM k to PM sigma(k), keeping its NUMA node.

    Args:
        action (int): 1-based action.
        sigma (sequence): 1-based permutation.

    Returns:
        int: 2 sigma(k) - i with k = floor((a+1)/2) and i = a mod 2.
    """
    k = sigma[(action + 1) // 2 - 1]
    return 2 * k - action % 2
