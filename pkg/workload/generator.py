import logging
from dataclasses import dataclass

import numpy as np

from cluster.state import ClusterConfig
from environment.simulator import DvampEnv
from exceptions import AdversaryError, ConfigurationError
from workload.episodes import EpisodeSpec
from workload.requests import WorkloadTrace, build_requests, classify_div

# Split rule that makes r=1 VMs split and r=1/(2q) VMs single-node
ADVERSARIAL_D_DIV = 1
ADVERSARIAL_C_DIV = 0.6
ADVERSARIAL_CAPACITY = 0.5


@dataclass(frozen=True)
class AdversarialInstance:
    trace: WorkloadTrace
    config: ClusterConfig
    m: int
    q: int
    mu: int
    on_target: int
    opt_target: int
    tr_target: float
    probe_pms: tuple  # PM chosen for each t=0 VM during the probe run
    survivors: tuple  # ids of the t=0 VMs given lifetime mu


def adversarial_config(m):
    return ClusterConfig(
        m=m,
        dim=1,
        capacities=(ADVERSARIAL_CAPACITY,),
        d_div=ADVERSARIAL_D_DIV,
        c_div=ADVERSARIAL_C_DIV,
    )


def adversarial_targets(m, q, mu):
    """
    Closed-form greedy wait time and total time-resource of the worst-case instance.

    Returns:
        tuple: (ON, TR).
    """
    on = (m - 1) * (mu - 1)
    tr = m * (mu / (2 * q)) + (2 * q * m - m) / (2 * q) + (m - 1)
    return on, tr


def _probe_placements(batch, config, scheduler):
    """
    Run the scheduler on the t=0 batch and return the PM chosen for each VM.
    """
    env = DvampEnv(batch, config)
    if hasattr(scheduler, "reset"):
        scheduler.reset()
    obs = env.reset(EpisodeSpec(0, len(batch)))
    pms = []
    while obs is not None:
        action = scheduler.choose(obs, env.feasible_actions())
        outcome = env.step(action)
        if outcome.info["st"] != 0:
            raise AdversaryError(
                f"Scheduler {scheduler.name} delayed VM {outcome.info['vm_id']} of the t=0 batch "
                f"to tick {outcome.info['st']}")
        pms.append(outcome.info["pm"])
        obs = outcome.next_obs
    return pms


def gen_adversarial(m, q, mu, scheduler):
    """
    Build the worst-case request set for greedy online schedulers.

    The scheduler is first run on the t=0 batch of 2qm small VMs; the first
    VM it placed on each PM then receives lifetime mu and every other one
    lifetime 1, so a single long-lived VM blocks each PM when the m-1 full-PM
    VMs arrive at t=1.

    Args:
        m (int): PM count (>= 1).
        q (int): Granularity; small VMs have r = 1/(2q).
        mu (int): Longest lifetime (>= 1, integral).
        scheduler (Scheduler): Scheduler the instance is built against.

    Returns:
        AdversarialInstance: Trace, forced cluster block and closed-form targets.
    """
    if m < 1 or q < 1:
        raise ConfigurationError(f"Adversarial instance needs m >= 1 and q >= 1, got m={m}, q={q}")
    if mu < 1 or int(mu) != mu:
        raise ConfigurationError(f"mu must be an integer >= 1, got {mu}")
    mu = int(mu)
    config = adversarial_config(m)
    small = 1.0 / (2 * q)
    batch = WorkloadTrace(build_requests(
        [((small,), 0, 1, None) for _ in range(2 * q * m)], config))

    pms = _probe_placements(batch, config, scheduler)
    survivors = {}
    for vm_id, pm in enumerate(pms):
        survivors.setdefault(pm, vm_id)
    if len(survivors) != m:
        raise AdversaryError(f"Probe run left {m - len(survivors)} PMs empty")

    rows = [((small,), 0, mu if vm_id in survivors.values() else 1, None)
            for vm_id in range(2 * q * m)]
    rows += [((1.0,), 1, 1, None) for _ in range(m - 1)]
    trace = WorkloadTrace(build_requests(rows, config))
    on, tr = adversarial_targets(m, q, mu)
    logging.info(f"Adversarial instance m={m} q={q} mu={mu} built against {scheduler.name}: "
                 f"{len(trace)} VMs, ON target {on}, TR {tr:.6g}")
    return AdversarialInstance(
        trace=trace,
        config=config,
        m=m,
        q=q,
        mu=mu,
        on_target=on,
        opt_target=0,
        tr_target=tr,
        probe_pms=tuple(pms),
        survivors=tuple(sorted(survivors.values())),
    )


def placeable_flavors(flavors, config):
    """
    Keep the flavors that fit an empty PM under the cluster block, truncated to D resources.
    """
    kept = []
    for flavor in flavors:
        resources = tuple(float(r) for r in flavor[:config.dim])
        gamma = 1.0 - classify_div(resources, config.d_div, config.c_div) / 2.0
        if all(gamma * r <= c for r, c in zip(resources, config.capacities)):
            kept.append(resources)
    if not kept:
        raise ConfigurationError("No flavor fits the configured NUMA capacities")
    return kept


def gen_synthetic(n, config, rng, flavors, arrival_rate=1.0, mean_lifetime=20.0):
    """
    Sample a flavor-based synthetic trace with Poisson arrivals.

    Args:
        n (int): Number of requests.
        config (ClusterConfig): Cluster block (D and split rule).
        rng (numpy.random.Generator): Random stream.
        flavors (sequence): (cpu, memory) flavor list.
        arrival_rate (float): Mean arrivals per tick (Poisson process).
        mean_lifetime (float): Mean of the geometric lifetime distribution (>= 1).

    Returns:
        WorkloadTrace: Synthetic trace.
    """
    if arrival_rate <= 0 or mean_lifetime < 1:
        raise ConfigurationError("arrival_rate must be > 0 and mean_lifetime >= 1")
    kept = placeable_flavors(flavors, config)
    gaps = rng.exponential(1.0 / arrival_rate, size=n)
    arrivals = np.floor(np.cumsum(gaps)).astype(np.int64)
    lifetimes = rng.geometric(1.0 / mean_lifetime, size=n)
    choices = rng.integers(0, len(kept), size=n)
    rows = [(kept[c], int(a), int(lt), f"syn-{j}")
            for j, (c, a, lt) in enumerate(zip(choices, arrivals, lifetimes))]
    trace = WorkloadTrace(build_requests(rows, config), stats={"generated": n})
    logging.info(f"Generated synthetic trace with {n} requests over {trace.horizon} ticks")
    return trace
