from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Transition:
    obs: object
    action: int
    nstep_reward: float
    next_obs: object  # observation n steps later; None when the episode ended first
    steps: int

    @property
    def truncated(self):
        return self.next_obs is None


class NStepWindow:
    """
    Sliding window turning per-step rewards into n-step transitions.
    """

    def __init__(self, n, gamma):
        self.n = n
        self.gamma = gamma
        self.buf = deque()

    def _emit(self, next_obs):
        reward = sum((self.gamma ** l) * r for l, (_, _, r) in enumerate(self.buf))
        obs, action, _ = self.buf[0]
        transition = Transition(obs, action, reward, next_obs, len(self.buf))
        self.buf.popleft()
        return transition

    def push(self, obs, action, reward, next_obs):
        """
        Add one step; returns the transitions that became complete.

        Args:
            obs (ObservableState): Observation the action was taken in.
            action (int): Action taken.
            reward (float): Reward of the step.
            next_obs (ObservableState): Following observation, None at episode end.

        Returns:
            list: Completed transitions (all remaining ones at episode end).
        """
        self.buf.append((obs, action, reward))
        out = []
        if len(self.buf) == self.n:
            out.append(self._emit(next_obs))
        if next_obs is None:
            while self.buf:
                out.append(self._emit(None))
        return out


class ReplayMemory:
    """
    Ring buffer of transitions with FIFO eviction and seeded uniform sampling.
    """

    def __init__(self, capacity, seed=0):
        self.capacity = capacity
        self.items = []
        self.index = 0
        self.total_pushed = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self):
        return len(self.items)

    def push(self, transition):
        if len(self.items) < self.capacity:
            self.items.append(transition)
        else:
            self.items[self.index] = transition
        self.index = (self.index + 1) % self.capacity
        self.total_pushed += 1

    def sample(self, batch_size):
        idxs = self.rng.integers(0, len(self.items), size=batch_size)
        return [self.items[i] for i in idxs]
