import logging
from dataclasses import dataclass, field

import numpy as np

from cluster.state import ClusterState
from environment.observation import ObservableState
from exceptions import EpisodeError, UnschedulableError


@dataclass(frozen=True)
class StepOutcome:
    reward: int
    next_obs: ObservableState  # None once the episode is over
    info: dict

    @property
    def done(self):
        return self.next_obs is None


@dataclass(frozen=True)
class EpisodeRecord:
    j: int
    at: int
    st: int
    wait: int
    action: int
    pm: int
    numa_mask: tuple


@dataclass
class EpisodeResult:
    total_wait: int = 0
    per_vm_wait: list = field(default_factory=list)
    requests_served: int = 0
    records: list = field(default_factory=list)


def earliest_start(state, vm, t_min, released=None):
    """
    Smallest tick >= t_min at which some action can host the VM.

    Time only advances through release events, so feasibility is checked at
    t_min and then at each successive end tick of the active placements.

    Args:
        state (ClusterState): Cluster state; expired placements are released in place.
        vm (VmRequest): Pending VM.
        t_min (int): Lower bound, at least the arrival and the previous start.
        released (list): Optional list collecting the released VM ids.

    Returns:
        int: Earliest feasible start tick.
    """
    if not state.config.placeable(vm):
        raise UnschedulableError(f"VM {vm.id} with demand {vm.resources} exceeds PM capacity")
    t = t_min
    while True:
        ids = state.release_expired(t)
        if released is not None:
            released.extend(ids)
        if state.feasible_actions(vm):
            return t
        next_tick = state.next_release_tick()
        if next_tick is None:
            raise UnschedulableError(f"VM {vm.id} does not fit an empty cluster")
        t = max(t, next_tick)


class DvampEnv:
    """
    Online episode loop: FIFO requests, greedy earliest start, reward -(st - at).
    """

    def __init__(self, trace, config, check_invariants=False):
        """
        Initialize the environment.

        Args:
            trace (WorkloadTrace): Trace episodes are cut from.
            config (ClusterConfig): Cluster block.
            check_invariants (bool): Recompute utilization after every mutation.
        """
        self.trace = trace
        self.config = config
        self.check_invariants = check_invariants
        self.state = None
        self._requests = ()
        self._cursor = 0
        self._st = None
        self.result = None

    @property
    def done(self):
        return self._cursor >= len(self._requests)

    @property
    def current_vm(self):
        return None if self.done else self._requests[self._cursor]

    @property
    def current_start(self):
        return self._st

    def reset(self, spec):
        """
        Start a new episode on an empty cluster.

        Args:
            spec (EpisodeSpec): Slice of the trace to serve.

        Returns:
            ObservableState: Observation for the first request, or None for an empty episode.
        """
        if spec.start_index + spec.length > len(self.trace):
            raise EpisodeError(
                f"Episode [{spec.start_index}, {spec.start_index + spec.length}) exceeds "
                f"trace length {len(self.trace)}")
        self.state = ClusterState(self.config)
        self._requests = self.trace.requests[spec.start_index:spec.start_index + spec.length]
        self._cursor = 0
        self.result = EpisodeResult()
        if self.done:
            return None
        vm = self.current_vm
        self._st = earliest_start(self.state, vm, vm.arrival)
        return self.observation()

    def observation(self):
        vm = self.current_vm
        capacity = self.state.capacity
        return ObservableState(
            numa_util=self.state.util / capacity,
            vm_resources=np.asarray(vm.resources, dtype=np.float64) / capacity,
            div=vm.div,
            wait_so_far=self._st - vm.arrival,
        )

    def feasible_actions(self):
        if self.done:
            return []
        return self.state.feasible_actions(self.current_vm)

    def step(self, action):
        """
        Deploy the pending VM at its earliest start and advance to the next request.

        Args:
            action (int): Feasible 1-based action id.

        Returns:
            StepOutcome: Reward, next observation (None when done) and step info.
        """
        if self.done:
            raise EpisodeError("step() called on a finished episode")
        vm = self.current_vm
        st = self._st
        placement = self.state.deploy(vm, action, st)
        wait = st - vm.arrival
        self.result.per_vm_wait.append(wait)
        self.result.total_wait += wait
        self.result.requests_served += 1
        self.result.records.append(EpisodeRecord(
            j=vm.id, at=vm.arrival, st=st, wait=wait, action=placement.action,
            pm=placement.pm, numa_mask=placement.numa_mask))
        self._cursor += 1

        released = []
        next_obs = None
        if not self.done:
            nxt = self.current_vm
            self._st = earliest_start(self.state, nxt, max(nxt.arrival, st), released)
            next_obs = self.observation()
        if self.check_invariants:
            self.state.check_invariants()
        info = {
            "vm_id": vm.id,
            "st": st,
            "action": placement.action,
            "pm": placement.pm,
            "numa_mask": placement.numa_mask,
            "released": released,
        }
        return StepOutcome(reward=-wait, next_obs=next_obs, info=info)


def run_episode(trace, spec, scheduler, config, check_invariants=False, reset_scheduler=True):
    """
    Drive one episode with the scheduler's choices.

    Args:
        trace (WorkloadTrace): Source trace.
        spec (EpisodeSpec): Episode slice.
        scheduler (Scheduler): Policy choosing among feasible actions.
        config (ClusterConfig): Cluster block.
        check_invariants (bool): Recompute utilization after every step.
        reset_scheduler (bool): Restore the scheduler's seeded state first.

    Returns:
        EpisodeResult: Wait totals and per-VM records.
    """
    env = DvampEnv(trace, config, check_invariants=check_invariants)
    if reset_scheduler and hasattr(scheduler, "reset"):
        scheduler.reset()
    obs = env.reset(spec)
    while obs is not None:
        action = scheduler.choose(obs, env.feasible_actions())
        obs = env.step(action).next_obs
    logging.debug(f"Episode {spec} with {scheduler.name}: total wait {env.result.total_wait}")
    return env.result
