from dataclasses import dataclass, field

from exceptions import ConfigurationError, TraceDataError


def classify_div(resources, d_div, c_div):
    """
    Decide whether a VM is split evenly across both NUMA nodes of a PM.

    Args:
        resources (sequence): Resource demand vector of length D.
        d_div (int): 1-based index of the resource compared against the threshold.
        c_div (float): Split threshold.

    Returns:
        int: 1 if resources[d_div] >= c_div, else 0.
    """
    if not 1 <= d_div <= len(resources):
        raise ConfigurationError(f"d_div={d_div} out of range for D={len(resources)}")
    return 1 if resources[d_div - 1] >= c_div else 0


@dataclass(frozen=True)
class VmRequest:
    id: int
    resources: tuple
    arrival: int
    lifetime: int
    div: int
    source_id: str = None

    def __post_init__(self):
        if self.lifetime < 1:
            raise TraceDataError(f"VM {self.id}: lifetime must be >= 1, got {self.lifetime}")
        if self.arrival < 0:
            raise TraceDataError(f"VM {self.id}: negative arrival {self.arrival}")
        if any(r < 0 for r in self.resources):
            raise TraceDataError(f"VM {self.id}: negative resource demand {self.resources}")
        if self.div not in (0, 1):
            raise TraceDataError(f"VM {self.id}: div must be 0 or 1, got {self.div}")

    @property
    def gamma(self):
        return 1.0 - self.div / 2.0

    @property
    def departure(self):
        return self.arrival + self.lifetime


@dataclass(frozen=True)
class WorkloadTrace:
    """
    Immutable, arrival-ordered sequence of VM requests.
    """
    requests: tuple
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'requests', tuple(self.requests))
        for prev, cur in zip(self.requests, self.requests[1:]):
            if cur.arrival < prev.arrival:
                raise TraceDataError(
                    f"Arrivals must be non-decreasing: VM {cur.id} arrives at {cur.arrival} "
                    f"after VM {prev.id} at {prev.arrival}"
                )

    def __len__(self):
        return len(self.requests)

    def __getitem__(self, index):
        return self.requests[index]

    def __iter__(self):
        return iter(self.requests)

    @property
    def horizon(self):
        """
        Largest tick referenced by the trace (latest departure), 0 when empty.
        """
        return max((vm.departure for vm in self.requests), default=0)

    def slice(self, start, length):
        return WorkloadTrace(self.requests[start:start + length])


def build_requests(rows, config):
    """
    Turn (resources, arrival, lifetime, source_id) rows into ordered VmRequests.

    Rows are stably sorted by arrival; ordinal ids follow the sorted order.

    Args:
        rows (iterable): Tuples of (resources, arrival, lifetime, source_id).
        config (ClusterConfig): Provides D, d_div and c_div.

    Returns:
        list: VmRequest objects with ids 0..n-1.
    """
    ordered = sorted(rows, key=lambda row: row[1])
    requests = []
    for j, (resources, arrival, lifetime, source_id) in enumerate(ordered):
        resources = tuple(float(r) for r in resources[:config.dim])
        requests.append(VmRequest(
            id=j,
            resources=resources,
            arrival=int(arrival),
            lifetime=int(lifetime),
            div=classify_div(resources, config.d_div, config.c_div),
            source_id=source_id,
        ))
    return requests
