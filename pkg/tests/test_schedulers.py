import unittest
from collections import Counter

import numpy as np

from environment.observation import ObservableState
from exceptions import ConfigurationError, InfeasibleActionError, ModelError
from schedulers.factory import make_scheduler
from schedulers.heuristics import BalanceFit, FirstFit, RandomPolicy, balance_fit, first_fit, random_policy
from schedulers.q_policy import GreedyQPolicy, greedy_q_policy, masked_argmax


def obs_from_util(util, capacities=(40.0, 90.0), resources=(1.0, 1.0), div=0):
    capacity = np.asarray(capacities, dtype=np.float64)
    return ObservableState(
        numa_util=np.asarray(util, dtype=np.float64) / capacity,
        vm_resources=np.asarray(resources, dtype=np.float64) / capacity,
        div=div,
        wait_so_far=0,
    )


class FixedQ:
    def __init__(self, q):
        self.q = np.asarray(q, dtype=np.float64)

    def q_values(self, obs):
        return self.q


class TestFirstFit(unittest.TestCase):

    def test_lowest_action(self):
        obs = obs_from_util(np.zeros((3, 2, 2)))
        self.assertEqual(first_fit(obs, list(range(1, 7))), 1)

    def test_skips_infeasible(self):
        obs = obs_from_util(np.zeros((3, 2, 2)))
        self.assertEqual(first_fit(obs, [2, 3, 4, 5, 6]), 2)
        self.assertEqual(first_fit(obs, [3, 4]), 3)

    def test_empty_feasible(self):
        with self.assertRaises(InfeasibleActionError):
            FirstFit().choose(obs_from_util(np.zeros((1, 2, 2))), [])


class TestBalanceFit(unittest.TestCase):
    """
    Unit tests for the imbalance-driven heuristic.
    """

    def test_prefers_most_imbalanced_pm(self):
        """
        Test that PM1 with score 0.8333 beats PM2 and its less loaded node 0 is chosen.
        """
        util = [[[10, 20], [30, 50]], [[4, 0], [0, 0]]]
        obs = obs_from_util(util)
        score = abs(10 - 30) / 40 + abs(20 - 50) / 90
        self.assertAlmostEqual(score, 0.8333, places=4)
        self.assertEqual(balance_fit(obs, [1, 2, 3, 4]), 1)

    def test_less_loaded_node_of_chosen_pm(self):
        util = [[[30, 50], [10, 20]], [[0, 0], [0, 0]]]
        self.assertEqual(balance_fit(obs_from_util(util), [1, 2, 3, 4]), 2)

    def test_only_feasible_node_of_chosen_pm(self):
        util = [[[30, 50], [10, 20]], [[0, 0], [0, 0]]]
        self.assertEqual(balance_fit(obs_from_util(util), [1, 3, 4]), 1)

    def test_ties_go_to_lowest_pm(self):
        obs = obs_from_util(np.zeros((3, 2, 2)))
        self.assertEqual(balance_fit(obs, [3, 4, 5, 6]), 3)

    def test_split_vm_matches_first_fit(self):
        util = [[[40, 90], [40, 90]], [[10, 0], [0, 0]], [[0, 0], [0, 0]]]
        obs = obs_from_util(util, resources=(16, 64), div=1)
        self.assertEqual(balance_fit(obs, [3, 4, 5, 6]), first_fit(obs, [3, 4, 5, 6]))

    def test_pure_function(self):
        rng = np.random.default_rng(0)
        util = rng.uniform(0, 20, size=(4, 2, 2))
        obs = obs_from_util(util)
        choices = {BalanceFit().choose(obs, list(range(1, 9))) for _ in range(5)}
        self.assertEqual(len(choices), 1)


class TestRandomPolicy(unittest.TestCase):

    def test_singleton(self):
        rng = np.random.default_rng(0)
        self.assertEqual(random_policy(None, [5], rng), 5)

    def test_uniform(self):
        """
        Test that each of four feasible actions is drawn with frequency 0.25 +- 0.02.
        """
        rng = np.random.default_rng(1)
        counts = Counter(random_policy(None, [1, 2, 3, 4], rng) for _ in range(100000))
        for action in (1, 2, 3, 4):
            self.assertAlmostEqual(counts[action] / 100000, 0.25, delta=0.02)

    def test_reset_replays_stream(self):
        policy = RandomPolicy(seed=3)
        first = [policy.choose(None, list(range(1, 9))) for _ in range(20)]
        policy.reset()
        second = [policy.choose(None, list(range(1, 9))) for _ in range(20)]
        self.assertEqual(first, second)
        self.assertFalse(policy.deterministic)

    def test_empty(self):
        with self.assertRaises(InfeasibleActionError):
            random_policy(None, [], np.random.default_rng(0))


class TestGreedyQPolicy(unittest.TestCase):

    def test_masked_argmax(self):
        self.assertEqual(masked_argmax(np.array([0.1, 0.9, 0.3, 0.2]), [1, 3, 4]), 3)

    def test_ties_to_lowest(self):
        self.assertEqual(masked_argmax(np.zeros(6), [6, 4, 2]), 2)

    def test_non_finite(self):
        with self.assertRaises(ModelError):
            greedy_q_policy(FixedQ([0.0, np.nan]), None, [1, 2])

    def test_wraps_network(self):
        policy = GreedyQPolicy(FixedQ([0.0, 1.0, 2.0, 0.5]))
        self.assertEqual(policy.choose(None, [1, 2, 4]), 2)
        self.assertEqual(policy.name, "qnet")


class TestFactory(unittest.TestCase):

    def test_names(self):
        self.assertIsInstance(make_scheduler("first_fit"), FirstFit)
        self.assertIsInstance(make_scheduler("balance_fit"), BalanceFit)
        self.assertIsInstance(make_scheduler("random", seed=2), RandomPolicy)

    def test_qnet_needs_network(self):
        with self.assertRaises(ConfigurationError):
            make_scheduler("qnet")

    def test_unknown(self):
        with self.assertRaises(ConfigurationError):
            make_scheduler("best_fit")


if __name__ == "__main__":
    unittest.main()
