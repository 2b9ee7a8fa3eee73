from dataclasses import dataclass

import numpy as np

from cluster.state import TOLERANCE


@dataclass(frozen=True, eq=False)
class ObservableState:
    """
    What a scheduler may see when deciding for the pending VM.

    Utilizations and demands are normalized by the per-NUMA capacity R_d. No
    lifetime of any VM, active or pending, is part of the observation.
    """
    numa_util: np.ndarray  # [m, 2, D]
    vm_resources: np.ndarray  # [D]
    div: int
    wait_so_far: int
    pending: bool = True

    @property
    def m(self):
        return self.numa_util.shape[0]

    @property
    def dim(self):
        return self.numa_util.shape[2]

    def feasible_mask(self):
        """
        Feasibility of every action reconstructed from normalized headroom.

        Returns:
            numpy.ndarray: Boolean vector of length 2m; index a-1 holds action a.
        """
        if not self.pending:
            return np.zeros(2 * self.m, dtype=bool)
        share = self.vm_resources * (0.5 if self.div else 1.0)
        fits = np.all(self.numa_util + share <= 1.0 + TOLERANCE, axis=2)
        if self.div:
            fits = np.repeat(fits.all(axis=1, keepdims=True), 2, axis=1)
        return fits.reshape(-1)

    def feasible_actions(self):
        return [int(a) + 1 for a in np.flatnonzero(self.feasible_mask())]
