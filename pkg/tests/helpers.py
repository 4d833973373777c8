"""Shared test utilities: finite differences and episode fabrication."""

from __future__ import annotations

import numpy as np

from nierl.mdp import Step, Trajectory
from nierl.vtrace import GeneralizedStep


def central_difference(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        up = x.copy()
        up[i] += h
        dn = x.copy()
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))))


def make_trajectory(rewards, gamma: float = 1.0, states=None, seed: int = 0) -> Trajectory:
    """Episode with the given rewards; the last step is terminal."""
    rewards = list(rewards)
    states = list(states) if states is not None else list(range(len(rewards)))
    steps = [
        Step(
            state_id=s,
            action_id=None,
            behavior_prob=1.0,
            reward=float(r),
            terminal=(i == len(rewards) - 1),
        )
        for i, (s, r) in enumerate(zip(states, rewards))
    ]
    return Trajectory.from_steps(steps, gamma=gamma, episode_seed=seed)


def consistent_generalized_steps(rng: np.random.Generator, T: int, on_policy: bool = True):
    """A chain whose bootstrap values agree across adjacent steps (one value
    function evaluated along one state sequence; terminal bootstrap zero)."""
    vals = np.append(rng.normal(size=T), 0.0)
    steps = []
    for t in range(T):
        ratio = 1.0 if on_policy else float(rng.random() * 1.5)
        steps.append(
            GeneralizedStep(
                h=float(rng.normal()),
                g=float(rng.random()),
                rho=min(1.0, ratio) if not on_policy else 1.0,
                c=min(1.0, ratio) if not on_policy else 1.0,
                v_here=float(vals[t]),
                v_next=float(vals[t + 1]),
            )
        )
    return steps
