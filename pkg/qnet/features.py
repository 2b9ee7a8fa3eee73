from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureSpec:
    """
    Which pending-VM quantities enter the networks besides the normalized demand.
    """
    include_div: bool = True
    include_wait: bool = True
    wait_scale: float = 100.0

    @classmethod
    def from_config(cls, config):
        return cls(
            include_div=bool(config.INCLUDE_DIV_FEATURE),
            include_wait=bool(config.INCLUDE_WAIT_FEATURE),
            wait_scale=float(config.WAIT_SCALE),
        )

    def width(self, dim):
        return dim + int(self.include_div) + int(self.include_wait)

    def vm_features(self, obs):
        parts = [np.asarray(obs.vm_resources, dtype=np.float64)]
        if self.include_div:
            parts.append([float(obs.div)])
        if self.include_wait:
            parts.append([obs.wait_so_far / self.wait_scale])
        return np.concatenate(parts)

    def encode_batch(self, observations):
        """
        Stack observations into network inputs.

        Args:
            observations (sequence): ObservableState objects sharing m and D.

        Returns:
            tuple: (utilization [B, m, 2, D], vm features [B, F]).
        """
        util = np.stack([obs.numa_util for obs in observations]).astype(np.float64)
        feats = np.stack([self.vm_features(obs) for obs in observations])
        return util, feats

    def as_dict(self):
        return asdict(self)
