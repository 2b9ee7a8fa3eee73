import argparse
import logging
import os
import sys

import numpy as np
import orjson
import pandas as pd

from cluster.state import ClusterConfig
from config import config_hash, load_config, make_config
from drl.evaluation import evaluate, run_episode_results
from drl.trainer import TrainConfig, train
from environment.episode_log import write_csv, write_episode_log
from exceptions import ConfigurationError, DvampError, ShapeError
from metrics.bounds import ORACLE_N_LIMIT, bound_sweep, write_bound_sweep
from metrics.stats import aggregate_runs
from oracle.brute_force import validate_solution
from oracle.milp import export_milp, min_horizon, solution_from_values, solve_milp
from qnet.checkpoint import ARCHITECTURES, load_checkpoint, save_checkpoint
from schedulers.factory import SCHEDULER_NAMES, make_scheduler
from workload.episodes import frozen_episodes
from workload.generator import gen_adversarial, gen_synthetic
from workload.trace_io import load_sidecar_config, load_trace, save_trace

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')


def int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def ensure_directories(path):
    """
    Ensure the output directory exists.
    """
    os.makedirs(path, exist_ok=True)
    logging.debug(f"Output directory {path} ensured.")


class Run:
    """
    Resolved configuration of one command: settings, cluster block, seed and output naming.
    """

    def __init__(self, args):
        overrides = {"SEED": args.seed, "WORKERS": args.workers, "PM_COUNT": args.m}
        self.args = args
        self.config = load_config(args.config, overrides)
        self.trace = None
        trace_path = getattr(args, "trace", None)
        if trace_path:
            sidecar = load_sidecar_config(trace_path)
            if sidecar is not None:
                self.config = make_config({
                    "PM_COUNT": args.m or sidecar.m,
                    "RESOURCE_DIM": sidecar.dim,
                    "CAPACITIES": sidecar.capacities,
                    "D_DIV": sidecar.d_div,
                    "C_DIV": sidecar.c_div,
                }, base=self.config)
        self.cluster = ClusterConfig.from_config(self.config)
        if trace_path:
            self.trace = load_trace(trace_path, self.cluster)
        self.seed = int(self.config.SEED)
        self.hash = config_hash(self.config)
        self.out = args.out or self.config.OUTPUT_ROOT
        ensure_directories(self.out)

    @property
    def header(self):
        return f"config_hash={self.hash},seed={self.seed}"

    def path(self, name):
        return os.path.join(self.out, name)

    def write_json(self, name, payload):
        path = self.path(name)
        payload = {"config_hash": self.hash, "seed": self.seed, **payload}
        try:
            with open(path, 'wb') as file:
                file.write(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2
                                        | orjson.OPT_SERIALIZE_NUMPY))
        except OSError as e:
            logging.error(f"Error writing {path}: {e}")
            raise
        logging.info(f"Wrote {path}")
        return path

    def require_trace(self):
        if self.trace is None:
            raise ConfigurationError("This command needs --trace")
        return self.trace


def cmd_gen(run):
    """
    Generate an adversarial or synthetic trace with its sidecar.
    """
    args = run.args
    if args.kind == "adversarial":
        scheduler = make_scheduler(args.scheduler, seed=run.seed)
        instance = gen_adversarial(args.m or 2, args.q, args.mu, scheduler)
        trace, cluster = instance.trace, instance.config
        name = args.name or f"adversarial_m{instance.m}_q{instance.q}_mu{instance.mu}"
        run.write_json(f"{name}.json", {
            "m": instance.m, "q": instance.q, "mu": instance.mu,
            "scheduler": scheduler.name,
            "on_target": instance.on_target,
            "opt_target": instance.opt_target,
            "tr_target": instance.tr_target,
            "survivors": list(instance.survivors),
        })
    else:
        cluster = run.cluster
        rng = np.random.default_rng(run.seed)
        n = args.n or int(run.config.SYNTHETIC_REQUESTS)
        trace = gen_synthetic(n, cluster, rng, run.config.FLAVORS,
                              float(run.config.ARRIVAL_RATE), float(run.config.MEAN_LIFETIME))
        name = args.name or f"synthetic_n{n}"
    path = run.path(f"{name}.csv")
    save_trace(trace, path, cluster, header=run.header)
    return path


def load_policy(run, name=None, checkpoint=None):
    """
    Build the scheduler for simulate/evaluate: a heuristic or a greedy Q policy from a checkpoint.
    """
    network = None
    if checkpoint:
        network, payload = load_checkpoint(checkpoint)
        meta = payload["meta"]
        if meta["arch"] == "mlp" and int(meta["m"]) != run.cluster.m:
            raise ShapeError(f"MLP architecture bound to m={meta['m']}, cluster has m={run.cluster.m}")
        name = "qnet"
    return make_scheduler(name or "first_fit", seed=run.seed, network=network)


def cmd_simulate(run):
    """
    Run a scheduler over frozen episodes and write per-episode totals.
    """
    args = run.args
    trace = run.require_trace()
    scheduler = load_policy(run, args.scheduler, args.checkpoint)
    episodes = args.episodes or int(run.config.TEST_EPISODES)
    specs = frozen_episodes(trace, args.split, episodes, int(run.config.EPISODE_LEN), run.seed,
                            bool(run.config.TRUNCATE_EPISODES), tuple(run.config.SPLIT_BOUNDS))
    results = run_episode_results(trace, specs, scheduler, run.cluster, int(run.config.WORKERS))
    rows = []
    for index, (spec, result) in enumerate(zip(specs, results)):
        rows.append({"episode": index, "start_index": spec.start_index, "length": spec.length,
                     "total_wait": result.total_wait})
        if args.episode_logs:
            write_episode_log(result, run.path(f"episode_{scheduler.name}_{args.split}_{index}.csv"), run.header)
    frame = pd.DataFrame(rows, columns=["episode", "start_index", "length", "total_wait"])
    path = run.path(f"simulate_{scheduler.name}_{args.split}.csv")
    write_csv(frame, path, run.header)
    total = int(frame["total_wait"].sum()) if len(frame) else 0
    logging.info(f"{scheduler.name}: total wait {total} over {len(frame)} {args.split} episodes")
    return path


def cmd_train(run):
    """
    Train one architecture and write its checkpoint, curves and manifest.
    """
    args = run.args
    trace = run.require_trace()
    train_config = TrainConfig.from_config(run.config)
    result = train(train_config, trace, args.arch, run.cluster, run.config, workers=int(run.config.WORKERS))
    stem = f"{args.arch}_seed{run.seed}"
    extra = {"valid_score": result.best_score, "best_epoch": result.best_epoch, "arch": args.arch}
    if args.test:
        stats = evaluate(make_scheduler("qnet", network=result.network), trace, run.cluster, "test",
                         train_config.test_episodes, train_config.episode_len, run.seed,
                         int(run.config.WORKERS), train_config.truncate, train_config.split_bounds)
        extra["test_score"] = stats.mean
    save_checkpoint(result.network, run.path(f"{stem}.ckpt.json"), run.hash, extra)
    result.write_curves(run.path(f"{stem}_curves.csv"), run.header)
    result.write_manifest(run.path(f"{stem}_manifest.json"), run.hash, {"test_score": extra.get("test_score")})
    return run.path(f"{stem}.ckpt.json")


def cmd_evaluate(run):
    """
    Evaluate a checkpoint or heuristic on a frozen split, optionally at another PM count.
    """
    args = run.args
    trace = run.require_trace()
    scheduler = load_policy(run, args.scheduler, args.checkpoint)
    episodes = args.episodes or int(run.config.TEST_EPISODES)
    stats = evaluate(scheduler, trace, run.cluster, args.split, episodes, int(run.config.EPISODE_LEN),
                     run.seed, int(run.config.WORKERS), bool(run.config.TRUNCATE_EPISODES),
                     tuple(run.config.SPLIT_BOUNDS))
    stem = f"evaluate_{scheduler.name}_{args.split}_m{run.cluster.m}"
    frame = pd.DataFrame({"episode": range(len(stats.per_episode)), "total_wait": stats.per_episode})
    write_csv(frame, run.path(f"{stem}.csv"), run.header)
    return run.write_json(f"{stem}.json", {"m": run.cluster.m, "checkpoint": args.checkpoint, **stats.summary()})


def cmd_aggregate(run):
    """
    Combine the manifests of several seeded training runs.
    """
    test_scores, valid_scores = [], []
    for path in run.args.manifests:
        with open(path, 'rb') as file:
            manifest = orjson.loads(file.read())
        if manifest.get("test_score") is None:
            raise ConfigurationError(f"Manifest {path} has no test score; train with --test")
        test_scores.append(manifest["test_score"])
        valid_scores.append(manifest["best_score"])
    summary = aggregate_runs(test_scores, valid_scores)
    return run.write_json(run.args.name or "aggregate.json", {"manifests": run.args.manifests, **summary})


def cmd_bounds(run):
    """
    Sweep worst-case instances and write the gap table.
    """
    args = run.args
    scheduler = make_scheduler(args.scheduler, seed=run.seed)
    reports = bound_sweep(args.m_list, args.q_list, args.mu_list, scheduler, args.verify_opt,
                          n_limit=args.oracle_n_limit)
    path = run.path("bounds.csv")
    write_bound_sweep(reports, path, run.header)
    return path


def cmd_export_milp(run):
    """
    Export the offline model of a trace, optionally solving it with CBC.
    """
    args = run.args
    trace = run.require_trace()
    horizon = args.horizon or min_horizon(trace)
    name = args.name or os.path.splitext(os.path.basename(args.trace))[0]
    path = run.path(f"{name}.lp")
    prob = export_milp(trace, run.cluster, horizon, path, args.strict_order, header=run.header)
    if args.solve:
        solution = solution_from_values(trace, run.cluster, solve_milp(prob), args.strict_order)
        validate_solution(trace, run.cluster, solution)
        run.write_json(f"{name}_solution.json", {
            "total_wait": solution.total_wait,
            "entries": [{"vm_id": e.vm_id, "pm": e.pm, "numa_mask": list(e.numa_mask), "start": e.start}
                        for e in solution.entries],
        })
    return path


COMMANDS = {
    "gen": cmd_gen,
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "aggregate": cmd_aggregate,
    "bounds": cmd_bounds,
    "export-milp": cmd_export_milp,
}


def build_parser():
    parser = argparse.ArgumentParser(description="DVAMP simulator and solver stack")
    parser.add_argument('--config', type=str, help='YAML file overriding the default settings')
    parser.add_argument('--seed', type=int, help='Seed for every random stream')
    parser.add_argument('--out', type=str, help='Output directory (default $DVAMP_OUTPUT_ROOT or results/)')
    parser.add_argument('--log', type=str, default='info', help='Logging level (debug, info, warning, error, critical)')
    parser.add_argument('--workers', type=int, help='Worker threads for episode fan-out')
    parser.add_argument('--m', type=int, help='PM count (overrides config and trace sidecar)')
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a trace")
    gen.add_argument("kind", choices=["adversarial", "synthetic"])
    gen.add_argument("--n", type=int, help="Synthetic request count")
    gen.add_argument("--q", type=int, default=2, help="Adversarial granularity")
    gen.add_argument("--mu", type=int, default=3, help="Adversarial long lifetime")
    gen.add_argument("--scheduler", choices=SCHEDULER_NAMES[:3], default="first_fit")
    gen.add_argument("--name", type=str)

    for command in ("simulate", "evaluate"):
        p = sub.add_parser(command, help=f"{command.capitalize()} a scheduler on frozen episodes")
        p.add_argument("--trace", type=str, required=True)
        p.add_argument("--scheduler", choices=SCHEDULER_NAMES, default="first_fit")
        p.add_argument("--checkpoint", type=str)
        p.add_argument("--split", choices=["train", "valid", "test"], default="test")
        p.add_argument("--episodes", type=int)
        if command == "simulate":
            p.add_argument("--episode-logs", action="store_true", help="Write one CSV log per episode")

    tr = sub.add_parser("train", help="Train a Q-network")
    tr.add_argument("--trace", type=str, required=True)
    tr.add_argument("--arch", choices=sorted(ARCHITECTURES) + ["mlp_aug"], default="spane")
    tr.add_argument("--test", action="store_true", help="Evaluate the selected parameters on the test split")

    agg = sub.add_parser("aggregate", help="Aggregate seeded training runs")
    agg.add_argument("manifests", nargs="+")
    agg.add_argument("--name", type=str)

    bounds = sub.add_parser("bounds", help="Verify the worst-case gap on adversarial instances")
    bounds.add_argument("--m-list", type=int_list, default=[2, 3, 5])
    bounds.add_argument("--q-list", type=int_list, default=[2, 50])
    bounds.add_argument("--mu-list", type=int_list, default=[3, 10])
    bounds.add_argument("--scheduler", choices=SCHEDULER_NAMES[:3], default="first_fit")
    bounds.add_argument("--verify-opt", action="store_true", help="Confirm OPT with the exhaustive oracle")
    bounds.add_argument("--oracle-n-limit", type=int, default=ORACLE_N_LIMIT,
                        help="Largest instance the oracle confirms; larger ones keep OPT=0")

    milp = sub.add_parser("export-milp", help="Export the offline MILP of a trace")
    milp.add_argument("--trace", type=str, required=True)
    milp.add_argument("--horizon", type=int)
    milp.add_argument("--strict-order", action="store_true")
    milp.add_argument("--solve", action="store_true", help="Solve with CBC and validate the schedule")
    milp.add_argument("--name", type=str)
    return parser


def main(argv=None):
    """
    Main entry point for the application.
    """
    args = build_parser().parse_args(argv)

    logging_level = getattr(logging, args.log.upper(), logging.INFO)
    logging.getLogger().setLevel(logging_level)

    try:
        run = Run(args)
        output = COMMANDS[args.command](run)
        logging.info(f"{args.command} finished: {output}")
        return 0
    except DvampError as e:
        logging.error(f"{args.command} failed: {e}")
        sys.stderr.write(orjson.dumps({"error": type(e).__name__, "message": str(e)}).decode() + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
