"""Episodic MDP/MRP primitives: steps, trajectories, returns, replay storage.

Trajectories are immutable once built and safe to share between workers.
The replay buffer is a plain FIFO ring over whole trajectories; whole
episodes are kept because downstream estimators need full episode context
and the recorded behavior probabilities.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np


class EmptyBufferError(RuntimeError):
    """Raised when sampling from a replay buffer that holds no trajectories."""


@dataclass(frozen=True)
class Step:
    """One transition: the state we were in, what happened, and the reward r_{t+1}.

    ``state_id`` is an opaque handle: an integer for tabular chains, a full
    environment state for gridworlds. ``action_id`` is None for reward
    processes without actions. ``behavior_prob`` is the probability the
    behavior policy assigned to the action actually taken (1.0 for
    action-free processes). ``phi`` optionally records the causal-variable
    probability at the state when the step was collected; estimators
    recompute it live and treat this field as a log.
    """

    state_id: object
    action_id: Optional[int]
    behavior_prob: float
    reward: float
    terminal: bool = False
    phi: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.behavior_prob <= 1.0):
            raise ValueError(f"behavior_prob must be in (0, 1], got {self.behavior_prob}")
        if not np.isfinite(self.reward):
            raise ValueError(f"reward must be finite, got {self.reward}")


@dataclass(frozen=True)
class Trajectory:
    """An episode: ordered steps plus its terminal outcome Y and the seed that produced it."""

    steps: tuple[Step, ...]
    outcome_y: float
    episode_seed: int = 0

    def __post_init__(self):
        if len(self.steps) == 0:
            raise ValueError("a trajectory must contain at least one step")
        for i, step in enumerate(self.steps):
            if step.terminal and i != len(self.steps) - 1:
                raise ValueError("only the last step of a trajectory may be terminal")

    def __len__(self) -> int:
        return len(self.steps)

    @classmethod
    def from_steps(cls, steps: Sequence[Step], gamma: float, episode_seed: int = 0) -> "Trajectory":
        """Build a trajectory whose outcome is the discounted return of its own rewards."""
        steps = tuple(steps)
        if not steps:
            raise ValueError("a trajectory must contain at least one step")
        g = 0.0
        for step in reversed(steps):
            g = step.reward + gamma * g
        return cls(steps=steps, outcome_y=g, episode_seed=episode_seed)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=float)

    @property
    def states(self) -> np.ndarray:
        return np.array([s.state_id for s in self.steps], dtype=int)

    @property
    def behavior_probs(self) -> np.ndarray:
        return np.array([s.behavior_prob for s in self.steps], dtype=float)


def compute_returns(trajectory: Trajectory, gamma: float) -> np.ndarray:
    """Discounted returns G_t for every step, via G_t = r_{t+1} + gamma * G_{t+1}.

    The return after the final step is zero (episodic setting).
    """
    if len(trajectory.steps) == 0:
        raise ValueError("cannot compute returns of an empty trajectory")
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    returns = np.empty(len(trajectory.steps), dtype=float)
    g = 0.0
    for t in range(len(trajectory.steps) - 1, -1, -1):
        g = trajectory.steps[t].reward + gamma * g
        returns[t] = g
    return returns


class ReplayBuffer:
    """FIFO ring of trajectories with uniform with-replacement sampling.

    Single writer; concurrent readers are fine between writes.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._entries: deque[Trajectory] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, trajectory: Trajectory) -> None:
        """Store a trajectory, evicting the oldest if the ring is full."""
        self._entries.append(trajectory)

    def sample(self, k: int, rng: np.random.Generator) -> list[Trajectory]:
        """Draw k trajectories uniformly with replacement, deterministically per rng state."""
        if len(self._entries) == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        idx = rng.integers(0, len(self._entries), size=k)
        return [self._entries[i] for i in idx]

    def entries(self) -> list[Trajectory]:
        return list(self._entries)


# --- line-delimited JSON serialization for harness logging ---

def trajectory_to_json(trajectory: Trajectory, state_fn=None) -> str:
    """One JSON record per episode: {seed, outcome_y, steps:[{s,a,mu,r,phi}]}.

    ``state_fn`` maps an opaque state handle to something JSON-serializable
    (identity for integer states).
    """
    encode = (lambda s: s) if state_fn is None else state_fn
    record = {
        "seed": trajectory.episode_seed,
        "outcome_y": trajectory.outcome_y,
        "steps": [
            {
                "s": encode(step.state_id),
                "a": step.action_id,
                "mu": step.behavior_prob,
                "r": step.reward,
                "phi": step.phi,
            }
            for step in trajectory.steps
        ],
    }
    return json.dumps(record, separators=(",", ":"))


def trajectory_from_json(line: str) -> Trajectory:
    record = json.loads(line)
    steps = []
    raw_steps = record["steps"]
    for i, raw in enumerate(raw_steps):
        steps.append(
            Step(
                state_id=raw["s"],
                action_id=raw["a"],
                behavior_prob=raw["mu"],
                reward=raw["r"],
                terminal=(i == len(raw_steps) - 1),
                phi=raw.get("phi"),
            )
        )
    return Trajectory(steps=tuple(steps), outcome_y=record["outcome_y"], episode_seed=record["seed"])


def write_jsonl(path, trajectories: Iterable[Trajectory], state_fn=None) -> None:
    with open(path, "w") as fh:
        for traj in trajectories:
            fh.write(trajectory_to_json(traj, state_fn=state_fn) + "\n")


def read_jsonl(path) -> list[Trajectory]:
    with open(path) as fh:
        return [trajectory_from_json(line) for line in fh if line.strip()]
