import os
import tempfile
import unittest

import numpy as np

from config import Config, make_config
from exceptions import ConfigurationError, PermutationError, ShapeError
from qnet.checkpoint import build_network, load_checkpoint, save_checkpoint
from qnet.features import FeatureSpec
from qnet.mlp import MlpNetwork
from qnet.optim import Adam, AdamMoments, adam_step
from qnet.spane import SpaneNetwork
from qnet.symmetry import (
    check_permutation,
    compose_permutations,
    inverse_permutation,
    permute_action_vector,
    permute_obs,
    random_permutation,
    relabel_action,
)

from fixtures import random_obs


def zero_network(network):
    network.load_parameters({name: np.zeros_like(p) for name, p in network.parameters().items()})
    return network


def central_difference(network, flat, idx, batch, actions, targets, h):
    saved = flat[idx]
    flat[idx] = saved + h
    up, _ = network.backward(batch, actions, targets)
    flat[idx] = saved - h
    down, _ = network.backward(batch, actions, targets)
    flat[idx] = saved
    return (up - down) / (2 * h)


class TestSpaneNetwork(unittest.TestCase):
    """
    Unit tests for the symmetry-preserving Q-network.
    """

    def setUp(self):
        self.network = SpaneNetwork.from_config(Config, dim=2, seed=0)

    def test_output_shapes(self):
        out = self.network.forward(random_obs(np.random.default_rng(0), 4))
        self.assertEqual(out.q.shape, (8,))
        self.assertEqual(out.adv.shape, (8,))
        self.assertIsInstance(out.v, float)

    def test_zero_parameters_give_zero_q(self):
        zero_network(self.network)
        q = self.network.q_values(random_obs(np.random.default_rng(1), 5))
        np.testing.assert_array_equal(q, np.zeros(10))

    def test_value_invariance_and_q_equivariance(self):
        """
        Test that relabeling PMs leaves V unchanged and permutes advantages, Q and the greedy action on 200 random cases.
        """
        rng = np.random.default_rng(2)
        unique = 0
        for case in range(200):
            m = int(rng.integers(2, 9))
            network = SpaneNetwork.from_config(Config, dim=2, seed=case)
            obs = random_obs(rng, m)
            sigma = random_permutation(m, rng)
            base = network.forward(obs)
            permuted = network.forward(permute_obs(obs, sigma))
            self.assertAlmostEqual(permuted.v, base.v, places=9)
            np.testing.assert_allclose(permuted.adv, permute_action_vector(base.adv, sigma), atol=1e-9)
            np.testing.assert_allclose(permuted.q, permute_action_vector(base.q, sigma), atol=1e-9)
            top = np.sort(base.q)
            if top[-1] - top[-2] > 1e-6:
                unique += 1
                best = int(np.argmax(permuted.q)) + 1
                self.assertEqual(relabel_action(best, sigma), int(np.argmax(base.q)) + 1)
        self.assertGreater(unique, 50)

    def test_any_cluster_size(self):
        rng = np.random.default_rng(3)
        for m in range(1, 12):
            self.assertEqual(self.network.q_values(random_obs(rng, m)).shape, (2 * m,))

    def test_gradients_match_finite_differences(self):
        """
        Test backpropagated gradients against central differences on a few entries per tensor.
        """
        rng = np.random.default_rng(4)
        for center in (False, True):
            network = SpaneNetwork.init(2, FeatureSpec(), np.random.default_rng(5), center_advantage=center)
            batch = [random_obs(rng, 3) for _ in range(4)]
            actions = [int(a) for a in rng.integers(1, 7, size=4)]
            targets = rng.normal(size=4)
            _, grads = network.backward(batch, actions, targets)
            for name, param in network.parameters().items():
                flat = param.reshape(-1)
                for idx in rng.choice(flat.size, size=min(3, flat.size), replace=False):
                    saved = flat[idx]
                    flat[idx] = saved + 1e-6
                    up, _ = network.backward(batch, actions, targets)
                    flat[idx] = saved - 1e-6
                    down, _ = network.backward(batch, actions, targets)
                    flat[idx] = saved
                    numeric = (up - down) / 2e-6
                    self.assertAlmostEqual(grads[name].reshape(-1)[idx], numeric, delta=1e-4 + 1e-3 * abs(numeric))

    def test_copy_is_independent(self):
        clone = self.network.copy()
        clone.parameters()["adv.0.bias"][...] = 5.0
        self.assertFalse(np.allclose(self.network.parameters()["adv.0.bias"], 5.0))


class TestMlpNetwork(unittest.TestCase):

    def test_bound_to_m(self):
        network = MlpNetwork.from_config(Config, dim=2, m=5, seed=0)
        with self.assertRaises(ShapeError):
            network.forward(random_obs(np.random.default_rng(0), 4))

    def test_not_equivariant(self):
        rng = np.random.default_rng(1)
        network = MlpNetwork.from_config(Config, dim=2, m=4, seed=1)
        obs = random_obs(rng, 4)
        sigma = (2, 3, 4, 1)
        q = network.q_values(obs)
        permuted = network.q_values(permute_obs(obs, sigma))
        self.assertFalse(np.allclose(permuted, permute_action_vector(q, sigma)))

    def test_not_equivariant_on_random_cases(self):
        """
        Test that non-identity PM relabelings break MLP equivariance on nearly every case.
        """
        rng = np.random.default_rng(2)
        failures = 0
        for case in range(200):
            m = int(rng.integers(2, 9))
            network = MlpNetwork.from_config(Config, dim=2, m=m, seed=case)
            obs = random_obs(rng, m)
            sigma = random_permutation(m, rng)
            while sigma == tuple(range(1, m + 1)):
                sigma = random_permutation(m, rng)
            q = network.q_values(obs)
            permuted = network.q_values(permute_obs(obs, sigma))
            failures += not np.allclose(permuted, permute_action_vector(q, sigma), atol=1e-6)
        self.assertGreaterEqual(failures, 190)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(6)
        network = MlpNetwork.init(1, 2, FeatureSpec(), np.random.default_rng(7), hidden=6)
        batch = [random_obs(rng, 2, dim=1) for _ in range(3)]
        actions = [1, 4, 2]
        targets = [0.5, -1.0, 0.0]
        _, grads = network.backward(batch, actions, targets)
        for name, param in network.parameters().items():
            flat = param.reshape(-1)
            idx = int(rng.integers(flat.size))
            saved = flat[idx]
            flat[idx] = saved + 1e-6
            up, _ = network.backward(batch, actions, targets)
            flat[idx] = saved - 1e-6
            down, _ = network.backward(batch, actions, targets)
            flat[idx] = saved
            numeric = (up - down) / 2e-6
            self.assertAlmostEqual(grads[name].reshape(-1)[idx], numeric, delta=1e-4 + 1e-3 * abs(numeric))


class TestGradients(unittest.TestCase):

    def test_random_configurations(self):
        """
        Test analytic gradients against central differences on 50 random small networks of both architectures.
        """
        rng = np.random.default_rng(40)
        worst, checked = 0.0, 0
        for case in range(50):
            m, dim = int(rng.integers(1, 5)), int(rng.integers(1, 3))
            center = bool(rng.integers(2))
            init_rng = np.random.default_rng(case)
            if case % 3 == 2:
                network = MlpNetwork.init(dim, m, FeatureSpec(), init_rng, hidden=6, center_advantage=center)
            else:
                network = SpaneNetwork.init(dim, FeatureSpec(), init_rng, embed_hidden=4, embed_dim=4,
                                            value_hidden=4, adv_hidden=6, center_advantage=center)
            size = int(rng.integers(1, 5))
            batch = [random_obs(rng, m, dim=dim) for _ in range(size)]
            actions = [int(a) for a in rng.integers(1, 2 * m + 1, size=size)]
            targets = rng.normal(size=size)
            _, grads = network.backward(batch, actions, targets)
            for name, param in network.parameters().items():
                flat = param.reshape(-1)
                for idx in rng.choice(flat.size, size=min(2, flat.size), replace=False):
                    numeric = central_difference(network, flat, idx, batch, actions, targets, 1e-6)
                    half = central_difference(network, flat, idx, batch, actions, targets, 5e-7)
                    if abs(numeric - half) > 1e-7:
                        # a ReLU kink lies inside the step
                        continue
                    analytic = grads[name].reshape(-1)[idx]
                    worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-2))
                    checked += 1
        self.assertGreater(checked, 500)
        self.assertLessEqual(worst, 1e-4)


class TestSymmetry(unittest.TestCase):
    """
    Unit tests for PM relabeling helpers.
    """

    def test_permute_action_vector(self):
        np.testing.assert_array_equal(permute_action_vector(np.array([1, 2, 3, 4]), (2, 1)), [3, 4, 1, 2])

    def test_relabel_action(self):
        self.assertEqual(relabel_action(1, (2, 1)), 3)
        self.assertEqual(relabel_action(4, (2, 1)), 2)
        self.assertEqual(relabel_action(2, (1, 2)), 2)

    def test_permute_obs(self):
        obs = random_obs(np.random.default_rng(0), 3)
        permuted = permute_obs(obs, (3, 1, 2))
        np.testing.assert_array_equal(permuted.numa_util[0], obs.numa_util[2])
        np.testing.assert_array_equal(permuted.vm_resources, obs.vm_resources)
        self.assertEqual(permuted.wait_so_far, obs.wait_so_far)

    def test_composition(self):
        """
        Test that permuting by tau and then sigma equals one permutation by their composition.
        """
        rng = np.random.default_rng(1)
        obs = random_obs(rng, 5)
        for _ in range(20):
            sigma = random_permutation(5, rng)
            tau = random_permutation(5, rng)
            twice = permute_obs(permute_obs(obs, tau), sigma)
            once = permute_obs(obs, compose_permutations(sigma, tau))
            np.testing.assert_array_equal(twice.numa_util, once.numa_util)

    def test_inverse(self):
        sigma = (3, 1, 4, 2)
        identity = compose_permutations(sigma, inverse_permutation(sigma))
        self.assertEqual(identity, (1, 2, 3, 4))

    def test_invalid_permutation(self):
        with self.assertRaises(PermutationError):
            check_permutation((1, 1, 2), 3)
        with self.assertRaises(PermutationError):
            permute_obs(random_obs(np.random.default_rng(0), 2), (1, 2, 3))


class TestAdam(unittest.TestCase):

    def test_zero_gradient_only_decays(self):
        params = {"w": np.array([1.0, -2.0, 0.5])}
        adam_step(params, {"w": np.zeros(3)}, AdamMoments(), lr=0.01, l2=0.1)
        np.testing.assert_allclose(params["w"], np.array([1.0, -2.0, 0.5]) * (1 - 0.01 * 0.1))

    def test_first_step_moves_by_lr(self):
        params = {"w": np.array([0.0, 0.0])}
        Adam(params, lr=0.01, l2=0.0).step({"w": np.array([3.0, -0.2])})
        np.testing.assert_allclose(params["w"], [-0.01, 0.01], atol=1e-8)

    def test_from_config(self):
        optimizer = Adam.from_config({}, Config)
        self.assertEqual((optimizer.lr, optimizer.l2), (0.01, 1e-8))


class TestCheckpoint(unittest.TestCase):
    """
    Unit tests for checkpoint files.
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "net.ckpt.json")

    def tearDown(self):
        self.tmp.cleanup()

    def test_spane_serves_other_cluster_sizes(self):
        """
        Test that a saved SPANE network reproduces its outputs for every m from 4 to 8.
        """
        network = build_network("spane", Config, dim=2, m=5, seed=9)
        save_checkpoint(network, self.path, config_hash="abc", extra={"seed": 9})
        loaded, payload = load_checkpoint(self.path)
        self.assertEqual(payload["config_hash"], "abc")
        self.assertEqual(payload["extra"], {"seed": 9})
        self.assertNotIn("tensors", payload)
        rng = np.random.default_rng(0)
        for m in range(4, 9):
            obs = random_obs(rng, m)
            np.testing.assert_array_equal(loaded.q_values(obs), network.q_values(obs))

    def test_mlp_round_trip_keeps_binding(self):
        network = build_network("mlp_aug", Config, dim=2, m=5, seed=1)
        save_checkpoint(network, self.path)
        loaded, payload = load_checkpoint(self.path)
        self.assertEqual(payload["meta"]["m"], 5)
        obs = random_obs(np.random.default_rng(2), 5)
        np.testing.assert_array_equal(loaded.q_values(obs), network.q_values(obs))
        with self.assertRaises(ShapeError):
            loaded.q_values(random_obs(np.random.default_rng(3), 6))

    def test_settings_change_network_shape(self):
        config = make_config({"EMBED_DIM": 4, "INCLUDE_WAIT_FEATURE": False})
        network = build_network("spane", config, dim=2, m=3, seed=0)
        self.assertEqual(network.parameters()["embed.1.weight"].shape, (4, 8))
        self.assertEqual(network.features.width(2), 3)

    def test_unknown_architecture(self):
        with self.assertRaises(ConfigurationError):
            build_network("transformer", Config, dim=2, m=5, seed=0)


if __name__ == "__main__":
    unittest.main()
