import heapq
import logging
from dataclasses import asdict, dataclass, replace

import numpy as np
import orjson

from exceptions import AccountingError, ConfigurationError, InfeasibleActionError

TOLERANCE = 1e-9


@dataclass(frozen=True)
class ClusterConfig:
    m: int
    dim: int
    capacities: tuple
    d_div: int
    c_div: float

    def __post_init__(self):
        object.__setattr__(self, 'capacities', tuple(float(c) for c in self.capacities))
        if self.m < 1:
            raise ConfigurationError(f"PM count must be >= 1, got {self.m}")
        if self.dim < 1:
            raise ConfigurationError(f"Resource dimension must be >= 1, got {self.dim}")
        if len(self.capacities) != self.dim:
            raise ConfigurationError(
                f"Expected {self.dim} capacities, got {len(self.capacities)}")
        if any(c <= 0 for c in self.capacities):
            raise ConfigurationError(f"Capacities must be positive: {self.capacities}")
        if not 1 <= self.d_div <= self.dim:
            raise ConfigurationError(f"d_div={self.d_div} out of range for D={self.dim}")

    @classmethod
    def from_config(cls, config):
        """
        Build the cluster block from a Config-like object.

        Args:
            config (Config or type): Provides PM_COUNT, RESOURCE_DIM, CAPACITIES, D_DIV, C_DIV.

        Returns:
            ClusterConfig: Validated cluster configuration.
        """
        return cls(
            m=int(config.PM_COUNT),
            dim=int(config.RESOURCE_DIM),
            capacities=tuple(config.CAPACITIES),
            d_div=int(config.D_DIV),
            c_div=float(config.C_DIV),
        )

    @property
    def capacity_array(self):
        return np.asarray(self.capacities, dtype=np.float64)

    @property
    def action_count(self):
        return 2 * self.m

    def with_pm_count(self, m):
        return replace(self, m=int(m))

    def placeable(self, vm):
        """
        Whether the VM fits on an empty PM at all.
        """
        demand = np.asarray(vm.resources, dtype=np.float64) * vm.gamma
        return bool(np.all(demand <= self.capacity_array + TOLERANCE))

    def as_dict(self):
        return asdict(self)


def decode_action(action, m):
    """
    Map a 1-based action id to 0-based (pm, numa) array positions.

    Args:
        action (int): Action in 1..2m.
        m (int): PM count.

    Returns:
        tuple: (pm, numa).
    """
    if not 1 <= action <= 2 * m:
        raise InfeasibleActionError(f"Action {action} outside 1..{2 * m}")
    return (action + 1) // 2 - 1, (action + 1) % 2


def encode_action(pm, numa):
    return 2 * pm + numa + 1


def normalize_action(action, div):
    """
    Split VMs use both NUMA nodes; both action ids of a PM collapse to the odd one.
    """
    if div and action % 2 == 0:
        return action - 1
    return action


@dataclass(frozen=True)
class Placement:
    vm_id: int
    pm: int
    numa_mask: tuple
    start: int
    end: int
    gamma: float
    resources: tuple
    action: int

    def contribution(self):
        return self.gamma * np.asarray(self.resources, dtype=np.float64)


class ClusterState:
    """
    Ground-truth per-NUMA utilization with the ledger of active placements.
    """

    def __init__(self, config):
        """
        Initialize an empty cluster.

        Args:
            config (ClusterConfig): Cluster shape and capacities.
        """
        self.config = config
        self.capacity = config.capacity_array
        self.util = np.zeros((config.m, 2, config.dim), dtype=np.float64)
        self._heap = []
        self._seq = 0
        self.last_release_tick = None

    @property
    def active(self):
        """
        Active placements ordered by end tick, then deployment order.
        """
        return [entry[2] for entry in sorted(self._heap)]

    def __len__(self):
        return len(self._heap)

    def _fits(self, vm):
        """
        Boolean [m, 2] grid: whether the VM's per-node share fits on each NUMA node.
        """
        demand = np.asarray(vm.resources, dtype=np.float64) * vm.gamma
        return np.all(self.util + demand <= self.capacity + TOLERANCE, axis=2)

    def feasible(self, vm, action):
        """
        Check whether deploying the VM via the given action respects capacity now.

        Args:
            vm (VmRequest): VM to place.
            action (int): 1-based action id.

        Returns:
            bool: True if every affected NUMA node keeps utilization within R_d.
        """
        pm, numa = decode_action(action, self.config.m)
        fits = self._fits(vm)
        if vm.div:
            return bool(fits[pm].all())
        return bool(fits[pm, numa])

    def feasible_actions(self, vm):
        """
        List every feasible action id in ascending order.

        For split VMs both ids of a feasible PM are listed; they are synonyms.
        """
        fits = self._fits(vm)
        if vm.div:
            fits = np.repeat(fits.all(axis=1, keepdims=True), 2, axis=1)
        return [int(a) + 1 for a in np.flatnonzero(fits.reshape(-1))]

    def deploy(self, vm, action, t):
        """
        Deploy a VM at tick t and record the placement.

        Args:
            vm (VmRequest): VM to place.
            action (int): Feasible 1-based action id.
            t (int): Start tick, not earlier than the VM's arrival.

        Returns:
            Placement: The recorded placement.
        """
        if t < vm.arrival:
            raise InfeasibleActionError(f"VM {vm.id} cannot start at {t} before arrival {vm.arrival}")
        if not self.feasible(vm, action):
            raise InfeasibleActionError(f"Action {action} is infeasible for VM {vm.id} at tick {t}")
        action = normalize_action(action, vm.div)
        pm, numa = decode_action(action, self.config.m)
        mask = (0, 1) if vm.div else (numa,)
        placement = Placement(
            vm_id=vm.id,
            pm=pm,
            numa_mask=mask,
            start=int(t),
            end=int(t) + vm.lifetime,
            gamma=vm.gamma,
            resources=tuple(vm.resources),
            action=action,
        )
        contribution = placement.contribution()
        for i in mask:
            self.util[pm, i] += contribution
        heapq.heappush(self._heap, (placement.end, self._seq, placement))
        self._seq += 1
        logging.debug(f"Deployed VM {vm.id} on PM {pm} NUMA {mask} at {t} until {placement.end}")
        return placement

    def release_expired(self, t):
        """
        Remove every placement whose end tick is <= t.

        Args:
            t (int): Current tick; must not decrease between calls.

        Returns:
            list: Released VM ids in end-tick order.
        """
        if self.last_release_tick is not None and t < self.last_release_tick:
            raise AccountingError(f"Release tick went backwards: {t} < {self.last_release_tick}")
        self.last_release_tick = t
        released = []
        while self._heap and self._heap[0][0] <= t:
            _, _, placement = heapq.heappop(self._heap)
            contribution = placement.contribution()
            for i in placement.numa_mask:
                self.util[placement.pm, i] -= contribution
                row = self.util[placement.pm, i]
                if np.any(row < -TOLERANCE):
                    raise AccountingError(
                        f"Negative utilization on PM {placement.pm} NUMA {i} after releasing "
                        f"VM {placement.vm_id}: {row}")
                np.maximum(row, 0.0, out=row)
            released.append(placement.vm_id)
        return released

    def next_release_tick(self):
        return self._heap[0][0] if self._heap else None

    def recompute_util(self):
        """
        Rebuild utilization from the active ledger.
        """
        util = np.zeros_like(self.util)
        for _, _, placement in self._heap:
            contribution = placement.contribution()
            for i in placement.numa_mask:
                util[placement.pm, i] += contribution
        return util

    def check_invariants(self):
        """
        Verify capacity bounds and that incremental utilization matches recomputation.
        """
        if np.any(self.util < -TOLERANCE) or np.any(self.util > self.capacity + TOLERANCE):
            raise AccountingError(f"Utilization out of bounds: {self.util.tolist()}")
        drift = np.max(np.abs(self.recompute_util() - self.util), initial=0.0)
        if drift > TOLERANCE:
            raise AccountingError(f"Incremental utilization drifted by {drift}")

    def snapshot(self, tick):
        return {
            "tick": tick,
            "util": self.util.tolist(),
            "active": [asdict(p) for p in self.active],
        }

    def dump_snapshot(self, tick, path):
        """
        Write the JSON snapshot used for debugging and golden tests.

        Args:
            tick (int): Current tick.
            path (str): Destination file.
        """
        try:
            with open(path, 'wb') as file:
                file.write(orjson.dumps(self.snapshot(tick), option=orjson.OPT_SORT_KEYS))
            logging.info(f"Cluster snapshot written to {path}")
        except OSError as e:
            logging.error(f"Error writing cluster snapshot {path}: {e}")
            raise
