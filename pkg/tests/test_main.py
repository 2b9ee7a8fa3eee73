import contextlib
import io
import os
import tempfile
import unittest

import orjson
import pandas as pd

from main import main

TINY_CONFIG = """\
train:
  epochs: 2
  batch_size: 8
  n_step: 3
  valid_interval: 1
  valid_episodes: 2
  test_episodes: 2
  warmup_episodes: 1
workload:
  episode_len: 10
"""


class TestCommandLine(unittest.TestCase):
    """
    End-to-end tests of the command-line entry point.
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def run_cli(self, *argv, out=None):
        return main(["--out", out or self.out, "--log", "warning", *argv])

    def read(self, name, out=None):
        with open(os.path.join(out or self.out, name), "rb") as file:
            return file.read()

    def gen_synthetic(self, out=None):
        self.assertEqual(self.run_cli("--seed", "3", "gen", "synthetic", "--n", "300", out=out), 0)
        return os.path.join(out or self.out, "synthetic_n300.csv")

    def test_bounds(self):
        code = self.run_cli("bounds", "--m-list", "2", "--q-list", "2", "--mu-list", "3")
        self.assertEqual(code, 0)
        lines = self.read("bounds.csv").decode().splitlines()
        self.assertTrue(lines[0].startswith("# config_hash="))
        self.assertEqual(lines[1:], ["m,q,mu,ON,TR,ratio,limit", "2,2,3,2,4,0.5,0.6667"])

    def test_bounds_with_oracle(self):
        code = self.run_cli("bounds", "--m-list", "2,3,5", "--q-list", "2", "--mu-list", "3", "--verify-opt")
        self.assertEqual(code, 0)
        lines = self.read("bounds.csv").decode().splitlines()
        self.assertEqual([line.split(",")[3] for line in lines[2:]], ["2", "4", "8"])

    def test_gen_adversarial(self):
        self.assertEqual(self.run_cli("--m", "2", "gen", "adversarial", "--q", "2", "--mu", "3"), 0)
        summary = orjson.loads(self.read("adversarial_m2_q2_mu3.json"))
        self.assertEqual((summary["on_target"], summary["opt_target"]), (2, 0))
        frame = pd.read_csv(os.path.join(self.out, "adversarial_m2_q2_mu3.csv"), comment="#")
        self.assertEqual(int((frame["type"] == 0).sum()), 9)

    def test_gen_and_simulate_are_deterministic(self):
        """
        Test that generation and simulation write identical files under the same seed.
        """
        other = os.path.join(self.out, "second")
        first = self.gen_synthetic()
        second = self.gen_synthetic(out=other)
        self.assertEqual(self.read("synthetic_n300.csv"), self.read("synthetic_n300.csv", out=other))
        for trace, out in ((first, self.out), (second, other)):
            self.assertEqual(self.run_cli("simulate", "--trace", trace, "--scheduler", "balance_fit",
                                          "--episodes", "4", out=out), 0)
        self.assertEqual(self.read("simulate_balance_fit_test.csv"),
                         self.read("simulate_balance_fit_test.csv", out=other))
        frame = pd.read_csv(os.path.join(self.out, "simulate_balance_fit_test.csv"), comment="#")
        self.assertEqual(list(frame["episode"]), [0, 1, 2, 3])

    def test_train_evaluate_aggregate(self):
        """
        Test a tiny training run, its evaluation on another PM count and the seed aggregation.
        """
        trace = self.gen_synthetic()
        config = os.path.join(self.out, "tiny.yaml")
        with open(config, "w", encoding="utf-8") as file:
            file.write(TINY_CONFIG)
        self.assertEqual(self.run_cli("--config", config, "--seed", "1", "train", "--trace", trace, "--test"), 0)
        manifest = orjson.loads(self.read("spane_seed1_manifest.json"))
        self.assertIsNotNone(manifest["test_score"])
        curves = pd.read_csv(os.path.join(self.out, "spane_seed1_curves.csv"), comment="#")
        self.assertEqual(list(curves["epoch"]), [0, 1, 2])

        checkpoint = os.path.join(self.out, "spane_seed1.ckpt.json")
        self.assertEqual(self.run_cli("--config", config, "--m", "3", "evaluate", "--trace", trace,
                                      "--checkpoint", checkpoint, "--episodes", "2"), 0)
        summary = orjson.loads(self.read("evaluate_qnet_test_m3.json"))
        self.assertEqual(summary["m"], 3)

        manifest_path = os.path.join(self.out, "spane_seed1_manifest.json")
        self.assertEqual(self.run_cli("aggregate", manifest_path), 0)
        aggregate = orjson.loads(self.read("aggregate.json"))
        self.assertEqual(aggregate["runs"], 1)
        self.assertEqual(aggregate["mean"], manifest["test_score"])

    def test_mlp_checkpoint_on_other_cluster_size(self):
        trace = self.gen_synthetic()
        config = os.path.join(self.out, "tiny.yaml")
        with open(config, "w", encoding="utf-8") as file:
            file.write(TINY_CONFIG)
        self.assertEqual(self.run_cli("--config", config, "train", "--trace", trace, "--arch", "mlp"), 0)
        checkpoint = os.path.join(self.out, "mlp_seed0.ckpt.json")
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = self.run_cli("--m", "4", "evaluate", "--trace", trace, "--checkpoint", checkpoint)
        self.assertEqual(code, 1)
        self.assertEqual(orjson.loads(stderr.getvalue())["error"], "ShapeError")

    def test_export_milp(self):
        self.assertEqual(self.run_cli("--m", "2", "gen", "adversarial", "--q", "1", "--mu", "2"), 0)
        trace = os.path.join(self.out, "adversarial_m2_q1_mu2.csv")
        self.assertEqual(self.run_cli("export-milp", "--trace", trace), 0)
        text = self.read("adversarial_m2_q1_mu2.lp").decode()
        self.assertTrue(text.startswith("\\* config_hash="))

    def test_error_exit_code(self):
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = self.run_cli("bounds", "--m-list", "0")
        self.assertEqual(code, 1)
        self.assertEqual(orjson.loads(stderr.getvalue())["error"], "ConfigurationError")


if __name__ == "__main__":
    unittest.main()
