import logging
from dataclasses import dataclass, field

import numpy as np

from cluster.state import TOLERANCE, ClusterState, encode_action
from environment.simulator import run_episode
from exceptions import InfeasibleActionError, OracleLimitError, UnschedulableError
from schedulers.heuristics import FirstFit
from workload.episodes import EpisodeSpec


@dataclass(frozen=True)
class SolutionEntry:
    vm_id: int
    pm: int
    numa_mask: tuple
    start: int

    @property
    def action(self):
        return encode_action(self.pm, self.numa_mask[0])


@dataclass(frozen=True)
class OfflineSolution:
    entries: tuple  # one SolutionEntry per request, in request order
    total_wait: int
    nodes: int = 0
    strict_order: bool = False
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def starts(self):
        return [e.start for e in self.entries]


def _incumbent(trace, config):
    result = run_episode(trace, EpisodeSpec(0, len(trace)), FirstFit(), config)
    entries = tuple(SolutionEntry(r.j, r.pm, r.numa_mask, r.st) for r in result.records)
    return entries, result.total_wait


class _Search:
    """
    Depth-first branch and bound over (placement, event-aligned start) per request.
    """

    def __init__(self, trace, config, strict_order):
        self.requests = trace.requests
        self.config = config
        self.capacity = config.capacity_array
        self.strict_order = strict_order
        self.arrivals = [vm.arrival for vm in self.requests]
        self.shares = [np.asarray(vm.resources, dtype=np.float64) * vm.gamma for vm in self.requests]
        self.placed = []  # (pm, mask, start, end, share)
        self.best_wait = np.inf
        self.best_entries = None
        self.nodes = 0

    def _util_at(self, t):
        util = np.zeros((self.config.m, 2, self.config.dim), dtype=np.float64)
        for pm, mask, _, end, share in self.placed:
            if end > t:
                for i in mask:
                    util[pm, i] += share
        return util

    def _signatures(self, t):
        """
        Future occupancy per PM and per NUMA node; equal signatures mean interchangeable nodes.
        """
        numa_sig = [[[], []] for _ in range(self.config.m)]
        for pm, mask, _, end, share in self.placed:
            if end > t:
                key = (end, tuple(share.tolist()), len(mask))
                for i in mask:
                    numa_sig[pm][i].append(key)
        numa_sig = [(tuple(sorted(a)), tuple(sorted(b))) for a, b in numa_sig]
        # a PM is determined up to swapping its NUMA nodes by the pair of node multisets
        pm_sig = [tuple(sorted(pair)) for pair in numa_sig]
        return pm_sig, numa_sig

    def _candidates(self, j, t):
        vm = self.requests[j]
        util = self._util_at(t)
        fits = np.all(util + self.shares[j] <= self.capacity + TOLERANCE, axis=2)
        pm_sig, numa_sig = self._signatures(t)
        seen = set()
        out = []
        for pm in range(self.config.m):
            if pm_sig[pm] in seen:
                continue
            seen.add(pm_sig[pm])
            if vm.div:
                if fits[pm].all():
                    out.append((pm, (0, 1)))
                continue
            numas = (0,) if numa_sig[pm][0] == numa_sig[pm][1] else (0, 1)
            out.extend((pm, (i,)) for i in numas if fits[pm, i])
        return out

    def _tail_bound(self, j, t):
        return sum(max(0, t - at) for at in self.arrivals[j:])

    def run(self, j=0, prev_start=None, partial=0):
        self.nodes += 1
        n = len(self.requests)
        if j == n:
            if partial < self.best_wait:
                self.best_wait = partial
                self.best_entries = tuple(
                    SolutionEntry(self.requests[k].id, pm, mask, start)
                    for k, (pm, mask, start, _, _) in enumerate(self.placed))
            return
        vm = self.requests[j]
        floor = vm.arrival
        if prev_start is not None:
            floor = max(floor, prev_start + 1 if self.strict_order else prev_start)
        if partial + self._tail_bound(j, floor) >= self.best_wait:
            return
        times = {floor}
        times.update(end for _, _, _, end, _ in self.placed if end > floor)
        times.update(at for at in self.arrivals[j + 1:] if at > floor)
        for t in sorted(times):
            wait = t - vm.arrival
            if partial + wait + self._tail_bound(j + 1, t) >= self.best_wait:
                break
            for pm, mask in self._candidates(j, t):
                self.placed.append((pm, mask, t, t + vm.lifetime, self.shares[j]))
                self.run(j + 1, t, partial + wait)
                self.placed.pop()


def brute_force_opt(trace, config, n_limit=8, m_limit=3, strict_order=False):
    """
    Exact offline minimum of the total wait for a small instance.

    Requests keep their order (start ticks non-decreasing, or strictly
    increasing with strict_order). Start ticks are restricted to event ticks:
    the earliest allowed tick, release ticks of placed VMs and later
    arrivals. Partial waits plus the unavoidable wait of the remaining
    requests are pruned against the incumbent, which starts as the First Fit
    schedule. Interchangeable PMs and NUMA nodes are explored once.

    Args:
        trace (WorkloadTrace): Instance.
        config (ClusterConfig): Cluster block.
        n_limit (int): Largest accepted request count.
        m_limit (int): Largest accepted PM count.
        strict_order (bool): Require strictly increasing start ticks.

    Returns:
        OfflineSolution: Optimal placements and start ticks.
    """
    n, m = len(trace), config.m
    if n > n_limit or m > m_limit:
        report = {"n": n, "m": m, "n_limit": n_limit, "m_limit": m_limit}
        raise OracleLimitError(f"Instance with n={n}, m={m} exceeds oracle limits n<={n_limit}, m<={m_limit}",
                               report)
    for vm in trace:
        if not config.placeable(vm):
            raise UnschedulableError(f"VM {vm.id} with demand {vm.resources} exceeds PM capacity")
    if n == 0:
        return OfflineSolution(entries=(), total_wait=0, strict_order=strict_order)

    search = _Search(trace, config, strict_order)
    if not strict_order:
        search.best_entries, incumbent = _incumbent(trace, config)
        # ties keep the incumbent, so search for strictly better schedules
        search.best_wait = incumbent
    search.run()
    logging.info(f"Oracle explored {search.nodes} nodes for n={n}, m={m}: optimal wait {search.best_wait}")
    return OfflineSolution(
        entries=search.best_entries,
        total_wait=int(search.best_wait),
        nodes=search.nodes,
        strict_order=strict_order,
        stats={"n": n, "m": m, "nodes": search.nodes},
    )


def validate_solution(trace, config, solution, strict_order=None):
    """
    Replay a solution through the cluster state and check every constraint.

    Args:
        trace (WorkloadTrace): Instance the solution belongs to.
        config (ClusterConfig): Cluster block.
        solution (OfflineSolution): Placements and start ticks.
        strict_order (bool): Require strictly increasing starts; defaults to the solution's mode.

    Returns:
        int: The recomputed total wait.
    """
    strict = solution.strict_order if strict_order is None else strict_order
    if len(solution.entries) != len(trace):
        raise InfeasibleActionError(f"Solution covers {len(solution.entries)} of {len(trace)} requests")
    total = 0
    previous = None
    for vm, entry in zip(trace, solution.entries):
        if entry.vm_id != vm.id:
            raise InfeasibleActionError(f"Solution entry for VM {entry.vm_id} where VM {vm.id} was expected")
        if tuple(entry.numa_mask) != ((0, 1) if vm.div else (entry.numa_mask[0],)):
            raise InfeasibleActionError(f"NUMA mask {entry.numa_mask} does not match div={vm.div} of VM {vm.id}")
        if previous is not None and (entry.start < previous or (strict and entry.start == previous)):
            raise InfeasibleActionError(f"VM {vm.id} starts at {entry.start} before its predecessor at {previous}")
        previous = entry.start
        total += entry.start - vm.arrival

    state = ClusterState(config)
    order = sorted(range(len(trace)), key=lambda k: (solution.entries[k].start, k))
    for k in order:
        vm, entry = trace[k], solution.entries[k]
        state.release_expired(entry.start)
        state.deploy(vm, entry.action, entry.start)
        state.check_invariants()
    if total != solution.total_wait:
        raise InfeasibleActionError(f"Solution reports wait {solution.total_wait}, replay gives {total}")
    return total
