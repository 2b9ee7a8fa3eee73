import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from cluster.state import ClusterState
from drl.evaluation import run_episode_results
from environment.episode_log import LOG_COLUMNS, write_episode_log
from environment.simulator import DvampEnv, earliest_start, run_episode
from exceptions import EpisodeError, UnschedulableError
from schedulers.heuristics import BalanceFit, FirstFit, RandomPolicy
from workload.episodes import EpisodeSpec
from workload.generator import gen_adversarial
from workload.requests import VmRequest

from fixtures import DEFAULT_CLUSTER, make_trace, random_trace, small_config


def whole(trace):
    return EpisodeSpec(0, len(trace))


class TestEarliestStart(unittest.TestCase):

    def test_empty_cluster(self):
        state = ClusterState(small_config())
        vm = VmRequest(id=0, resources=(2.0,), arrival=4, lifetime=1, div=0)
        self.assertEqual(earliest_start(state, vm, 4), 4)

    def test_waits_for_the_release_that_frees_room(self):
        """
        Test a VM blocked by releases at ticks 3 and 5 where only the second one frees enough room.
        """
        config = small_config(m=1, c_div=10.0)
        state = ClusterState(config)
        state.deploy(VmRequest(id=0, resources=(2.0,), arrival=0, lifetime=3, div=0), 1, 0)
        state.deploy(VmRequest(id=1, resources=(2.0,), arrival=0, lifetime=5, div=0), 1, 0)
        state.deploy(VmRequest(id=2, resources=(4.0,), arrival=0, lifetime=5, div=0), 2, 0)
        released = []
        vm = VmRequest(id=3, resources=(3.0,), arrival=0, lifetime=1, div=0)
        self.assertEqual(earliest_start(state, vm, 0, released), 5)
        self.assertEqual(released, [0, 1, 2])

    def test_unplaceable_vm(self):
        state = ClusterState(small_config(c_div=10.0))
        vm = VmRequest(id=0, resources=(5.0,), arrival=0, lifetime=1, div=0)
        with self.assertRaises(UnschedulableError):
            earliest_start(state, vm, 0)


class TestDvampEnv(unittest.TestCase):
    """
    Unit tests for the online episode loop.
    """

    def test_reset_starts_empty(self):
        trace = make_trace([((1,), 2, 3), ((2,), 2, 1)], small_config())
        env = DvampEnv(trace, small_config())
        obs = env.reset(whole(trace))
        np.testing.assert_allclose(obs.numa_util, 0.0)
        self.assertEqual(obs.wait_so_far, 0)
        np.testing.assert_allclose(obs.vm_resources, [0.25])
        self.assertFalse(hasattr(obs, "lifetime"))

    def test_empty_episode(self):
        trace = make_trace([((1,), 0, 1)], small_config())
        env = DvampEnv(trace, small_config())
        self.assertIsNone(env.reset(EpisodeSpec(0, 0)))
        self.assertTrue(env.done)
        self.assertEqual(env.result.total_wait, 0)

    def test_episode_past_trace_end(self):
        trace = make_trace([((1,), 0, 1)], small_config())
        with self.assertRaises(EpisodeError):
            DvampEnv(trace, small_config()).reset(EpisodeSpec(0, 2))

    def test_step_reward_is_negative_wait(self):
        """
        Test that a VM arriving at 3 and started at 5 yields reward -2.
        """
        config = small_config(m=1, c_div=10.0)
        trace = make_trace([((4,), 0, 5), ((4,), 0, 5), ((4,), 3, 1)], config)
        env = DvampEnv(trace, config)
        obs = env.reset(whole(trace))
        self.assertEqual(env.step(1).reward, 0)
        outcome = env.step(2)
        self.assertEqual(outcome.reward, 0)
        self.assertEqual(outcome.next_obs.wait_so_far, 2)
        self.assertEqual(env.current_start, 5)
        last = env.step(1)
        self.assertEqual(last.reward, -2)
        self.assertTrue(last.done)
        self.assertEqual(env.result.total_wait, 2)
        self.assertIsNotNone(obs)

    def test_feasible_mask_matches_state(self):
        rng = np.random.default_rng(5)
        config = small_config(m=3)
        trace = random_trace(rng, 80, config)
        env = DvampEnv(trace, config, check_invariants=True)
        obs = env.reset(whole(trace))
        while obs is not None:
            feasible = env.feasible_actions()
            self.assertEqual(obs.feasible_actions(), feasible)
            obs = env.step(int(rng.choice(feasible))).next_obs

    def test_start_ticks_are_greedy_and_ordered(self):
        """
        Test that start ticks never decrease and no earlier tick could have hosted the VM.
        """
        rng = np.random.default_rng(8)
        config = small_config(m=2)
        for _ in range(20):
            trace = random_trace(rng, 30, config)
            result = run_episode(trace, whole(trace), RandomPolicy(seed=1), config, check_invariants=True)
            starts = [r.st for r in result.records]
            self.assertEqual(starts, sorted(starts))
            state = ClusterState(config)
            previous = 0
            for vm, record in zip(trace, result.records):
                for t in range(max(vm.arrival, previous), record.st):
                    state.release_expired(t)
                    self.assertEqual(state.feasible_actions(vm), [])
                state.release_expired(record.st)
                state.deploy(vm, record.action, record.st)
                previous = record.st
            self.assertEqual(result.total_wait, sum(r.wait for r in result.records))


class TestRunEpisode(unittest.TestCase):

    def test_single_vm(self):
        trace = make_trace([((1,), 0, 1)], small_config())
        self.assertEqual(run_episode(trace, whole(trace), FirstFit(), small_config()).total_wait, 0)

    def test_adversarial_first_fit(self):
        instance = gen_adversarial(2, 2, 3, FirstFit())
        result = run_episode(instance.trace, whole(instance.trace), FirstFit(), instance.config)
        self.assertEqual(result.total_wait, 2)

    def test_adversarial_long_vm_blocks_until_two(self):
        instance = gen_adversarial(2, 1, 2, FirstFit())
        result = run_episode(instance.trace, whole(instance.trace), FirstFit(), instance.config)
        self.assertEqual(result.records[-1].st, 2)
        self.assertEqual(result.total_wait, 1)

    def test_adversarial_balance_fit_large(self):
        instance = gen_adversarial(5, 50, 10, BalanceFit())
        result = run_episode(instance.trace, whole(instance.trace), BalanceFit(), instance.config)
        self.assertEqual(result.total_wait, 36)

    def test_deterministic_logs(self):
        """
        Test that First Fit episode logs are byte-identical across reruns.
        """
        trace = random_trace(np.random.default_rng(2), 50, small_config(m=3))
        with tempfile.TemporaryDirectory() as tmp:
            contents = []
            for k in range(2):
                result = run_episode(trace, whole(trace), FirstFit(), small_config(m=3))
                path = os.path.join(tmp, f"log{k}.csv")
                write_episode_log(result, path, header="config_hash=x,seed=0")
                with open(path, "rb") as file:
                    contents.append(file.read())
            self.assertEqual(contents[0], contents[1])
            frame = pd.read_csv(os.path.join(tmp, "log0.csv"), comment="#")
        self.assertEqual(list(frame.columns), LOG_COLUMNS)
        self.assertEqual(len(frame), 50)
        self.assertEqual(frame["wait"].sum(), result.total_wait)

    def test_recorded_heuristic_logs(self):
        """
        Test First Fit and Balance Fit against their recorded totals and log bytes.
        """
        config = small_config(m=2, capacity=4.0, c_div=3.5)
        trace = make_trace([((2,), 0, 3), ((2,), 0, 1), ((3.5,), 0, 2), ((3,), 1, 2), ((3,), 1, 1), ((2,), 2, 2)],
                           config)
        header = "# config_hash=x,seed=0\nj,at,st,wait,action,pm,numa_mask\n"
        recorded = {
            "first_fit": (1, header + "0,0,0,0,1,1,0\n1,0,0,0,1,1,0\n2,0,0,0,3,2,0|1\n"
                                      "3,1,1,0,2,1,1\n4,1,2,1,3,2,0\n5,2,2,0,1,1,0\n"),
            "balance_fit": (0, header + "0,0,0,0,1,1,0\n1,0,0,0,2,1,1\n2,0,0,0,1,1,0|1\n"
                                        "3,1,1,0,3,2,0\n4,1,1,0,4,2,1\n5,2,2,0,4,2,1\n"),
        }
        with tempfile.TemporaryDirectory() as tmp:
            for scheduler in (FirstFit(), BalanceFit()):
                total, log = recorded[scheduler.name]
                results = run_episode_results(trace, [whole(trace)] * 3, scheduler, config, workers=3)
                for k, result in enumerate(results):
                    self.assertEqual(result.total_wait, total)
                    path = os.path.join(tmp, f"{scheduler.name}{k}.csv")
                    write_episode_log(result, path, header="config_hash=x,seed=0")
                    with open(path, "rb") as file:
                        self.assertEqual(file.read(), log.encode())

    def test_default_cluster(self):
        trace = make_trace([((4, 8), 0, 3), ((16, 64), 0, 3)], DEFAULT_CLUSTER)
        result = run_episode(trace, whole(trace), FirstFit(), DEFAULT_CLUSTER)
        self.assertEqual([r.numa_mask for r in result.records], [(0,), (0, 1)])


if __name__ == "__main__":
    unittest.main()
