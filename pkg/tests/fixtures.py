import numpy as np

from cluster.state import ClusterConfig
from environment.observation import ObservableState
from workload.requests import WorkloadTrace, build_requests

DEFAULT_CLUSTER = ClusterConfig(m=5, dim=2, capacities=(40.0, 90.0), d_div=2, c_div=10.0)


def small_config(m=2, capacity=4.0, c_div=3.0):
    """
    One-resource cluster: demands >= c_div are split over both NUMA nodes.
    """
    return ClusterConfig(m=m, dim=1, capacities=(capacity,), d_div=1, c_div=c_div)


def make_trace(rows, config):
    """
    Build a trace from (resources, arrival, lifetime) rows.
    """
    return WorkloadTrace(build_requests([(r, at, lt, None) for r, at, lt in rows], config))


def random_trace(rng, n, config, max_gap=2, max_lifetime=6):
    """
    Random placeable instance with small integer demands.
    """
    capacity = config.capacities[0]
    arrivals = np.cumsum(rng.integers(0, max_gap + 1, size=n))
    rows = []
    for at in arrivals:
        demand = float(rng.integers(1, int(2 * capacity) + 1))
        if demand < config.c_div and demand > capacity:
            demand = capacity
        rows.append(((demand,), int(at), int(rng.integers(1, max_lifetime + 1))))
    return make_trace(rows, config)


def random_obs(rng, m, dim=2, div=None):
    return ObservableState(
        numa_util=rng.uniform(0.0, 1.0, size=(m, 2, dim)),
        vm_resources=rng.uniform(0.0, 0.5, size=dim),
        div=int(rng.integers(0, 2)) if div is None else div,
        wait_so_far=int(rng.integers(0, 20)),
    )
