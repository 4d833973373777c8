"""A two-set episodic chain with a bottleneck transition.

States are split into a first set (indices 0 .. n_a-1) and a second set
(n_a .. n_a+n_b-1). Episodes start uniformly in the first set. Each step
either stays inside the current set (uniformly over it), crosses from the
first set into the second (uniformly), terminates successfully with reward
1 (second set only), or terminates with reward 0. Crossing into the second
set is the bottleneck that separates successful from failed episodes, and
the small size makes every value function exactly solvable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..mdp import Step, Trajectory
from ..values import MrpKernel, OracleSolution, exact_solve
from .base import InvalidConfigError, InvalidStateError

_TRIPLE_TOL = 1e-9


@dataclass(frozen=True)
class TwoStageConfig:
    """Per-step transition probabilities; each set's triple must sum to one."""

    n_a: int = 2
    n_b: int = 2
    p_stay_a: float = 0.4
    p_ab: float = 0.4
    p_fail_a: float = 0.2
    p_stay_b: float = 0.4
    p_succ: float = 0.4
    p_fail_b: float = 0.2
    gamma: float = 1.0

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 1:
            raise InvalidConfigError("both state sets need at least one state")
        for name in ("p_stay_a", "p_ab", "p_fail_a", "p_stay_b", "p_succ", "p_fail_b"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be nonnegative")
        if abs(self.p_stay_a + self.p_ab + self.p_fail_a - 1.0) > _TRIPLE_TOL:
            raise InvalidConfigError("first-set probabilities must sum to 1")
        if abs(self.p_stay_b + self.p_succ + self.p_fail_b - 1.0) > _TRIPLE_TOL:
            raise InvalidConfigError("second-set probabilities must sum to 1")
        if not (0.0 <= self.gamma <= 1.0):
            raise InvalidConfigError("gamma must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return self.n_a + self.n_b

    def in_second_set(self, state: int) -> bool:
        return state >= self.n_a

    def second_set_indicator(self) -> np.ndarray:
        phi = np.zeros(self.n_states)
        phi[self.n_a :] = 1.0
        return phi

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TwoStageConfig":
        return cls(**json.loads(text))


def twostage_step(
    state: Optional[int], rng: np.random.Generator, config: TwoStageConfig
) -> tuple[Optional[int], float]:
    """Sample one transition; returns (next_state, reward) with None marking termination."""
    if state is None:
        raise InvalidStateError("cannot step a terminated episode")
    if not (0 <= state < config.n_states):
        raise InvalidStateError(f"state {state} outside 0..{config.n_states - 1}")
    u = rng.random()
    if not config.in_second_set(state):
        if u < config.p_stay_a:
            return int(rng.integers(0, config.n_a)), 0.0
        if u < config.p_stay_a + config.p_ab:
            return int(config.n_a + rng.integers(0, config.n_b)), 0.0
        return None, 0.0
    if u < config.p_stay_b:
        return int(config.n_a + rng.integers(0, config.n_b)), 0.0
    if u < config.p_stay_b + config.p_succ:
        return None, 1.0
    return None, 0.0


def initial_state(rng: np.random.Generator, config: TwoStageConfig) -> int:
    return int(rng.integers(0, config.n_a))


PhiSource = Union[np.ndarray, Sequence[float], Callable[[int], float], None]


def _phi_at(phi: PhiSource, state: int) -> Optional[float]:
    if phi is None:
        return None
    if callable(phi):
        return float(phi(state))
    return float(phi[state])


def rollout(
    config: TwoStageConfig,
    rng: np.random.Generator,
    phi: PhiSource = None,
    episode_seed: int = 0,
    episode_cap: int = 10_000,
) -> Trajectory:
    """Simulate one episode and package it as a trajectory (no actions, behavior prob 1)."""
    state = initial_state(rng, config)
    steps: list[Step] = []
    for _ in range(episode_cap):
        next_state, reward = twostage_step(state, rng, config)
        terminal = next_state is None
        steps.append(
            Step(
                state_id=state,
                action_id=None,
                behavior_prob=1.0,
                reward=reward,
                terminal=terminal,
                phi=_phi_at(phi, state),
            )
        )
        if terminal:
            break
        state = next_state
    else:
        # cap reached: close the episode with a zero-reward terminal step
        steps[-1] = Step(
            state_id=steps[-1].state_id,
            action_id=None,
            behavior_prob=1.0,
            reward=steps[-1].reward,
            terminal=True,
            phi=steps[-1].phi,
        )
    return Trajectory.from_steps(steps, gamma=config.gamma, episode_seed=episode_seed)


def simulate_outcomes(
    config: TwoStageConfig,
    n_episodes: int,
    rng: np.random.Generator,
    start_in_second_set: bool = False,
    max_steps: int = 10_000,
) -> np.ndarray:
    """Vectorized absorption simulation; returns the 0/1 success outcome per episode."""
    in_b = np.full(n_episodes, start_in_second_set)
    done = np.zeros(n_episodes, dtype=bool)
    success = np.zeros(n_episodes, dtype=bool)
    for _ in range(max_steps):
        active = ~done
        if not active.any():
            break
        u = rng.random(n_episodes)
        a_active = active & ~in_b
        b_active = active & in_b
        # first set: stay / cross / fail
        cross = a_active & (u >= config.p_stay_a) & (u < config.p_stay_a + config.p_ab)
        fail_a = a_active & (u >= config.p_stay_a + config.p_ab)
        in_b[cross] = True
        done[fail_a] = True
        # second set: stay / succeed / fail
        succ = b_active & (u >= config.p_stay_b) & (u < config.p_stay_b + config.p_succ)
        fail_b = b_active & (u >= config.p_stay_b + config.p_succ)
        success[succ] = True
        done[succ | fail_b] = True
    return success.astype(float)


def twostage_kernel(config: TwoStageConfig) -> MrpKernel:
    """Explicit transition kernel: rows leak termination probability."""
    n = config.n_states
    p = np.zeros((n, n))
    for s in range(n):
        if not config.in_second_set(s):
            p[s, : config.n_a] += config.p_stay_a / config.n_a
            p[s, config.n_a :] += config.p_ab / config.n_b
        else:
            p[s, config.n_a :] += config.p_stay_b / config.n_b
    r_trans = np.zeros((n, n))
    r_term = np.zeros(n)
    r_term[config.n_a :] = config.p_succ  # success reward 1 weighted by its probability
    return MrpKernel(p=p, r_trans=r_trans, r_term_exp=r_term)


def twostage_oracle(config: TwoStageConfig, phi: np.ndarray) -> OracleSolution:
    """Exact values of all four tables for a fixed per-state event probability."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (config.n_states,):
        raise InvalidConfigError(
            f"phi must have {config.n_states} entries, got shape {phi.shape}"
        )
    return exact_solve(twostage_kernel(config), phi, config.gamma)


# --- a two-action variant used for off-policy and policy-learning checks ---


@dataclass
class DiscreteMdp:
    """Small explicit-kernel MDP with per-(state, action) termination.

    ``p[s, a, s']`` is substochastic in s'; the row deficit is the
    termination probability, whose expected reward is ``r_term_exp[s, a]``.
    """

    p: np.ndarray
    r_trans: np.ndarray
    r_term_exp: np.ndarray
    start_dist: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.r_trans = np.asarray(self.r_trans, dtype=float)
        self.r_term_exp = np.asarray(self.r_term_exp, dtype=float)
        self.start_dist = np.asarray(self.start_dist, dtype=float)
        n, a = self.p.shape[0], self.p.shape[1]
        if self.p.shape != (n, a, n) or self.r_trans.shape != (n, a, n):
            raise InvalidConfigError("inconsistent MDP shapes")
        if self.r_term_exp.shape != (n, a) or self.start_dist.shape != (n,):
            raise InvalidConfigError("inconsistent MDP shapes")
        if np.any(self.p.sum(axis=2) > 1.0 + 1e-9) or np.any(self.p < -1e-12):
            raise InvalidConfigError("p must be substochastic per (state, action)")
        if abs(self.start_dist.sum() - 1.0) > 1e-9:
            raise InvalidConfigError("start distribution must sum to 1")

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def n_actions(self) -> int:
        return self.p.shape[1]

    def reset(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_states, p=self.start_dist))

    def step(
        self, state: Optional[int], action: int, rng: np.random.Generator
    ) -> tuple[Optional[int], float]:
        if state is None:
            raise InvalidStateError("cannot step a terminated episode")
        row = self.p[state, action]
        stay_mass = row.sum()
        u = rng.random()
        if u >= stay_mass:
            # terminating transition; sample its reward as 0/1 with the right mean
            term_prob = 1.0 - stay_mass
            mean_reward = self.r_term_exp[state, action] / term_prob if term_prob > 0 else 0.0
            reward = 1.0 if rng.random() < mean_reward else 0.0
            return None, reward
        next_state = int(rng.choice(self.n_states, p=row / stay_mass))
        return next_state, float(self.r_trans[state, action, next_state])

    def rollout(
        self,
        policy: Callable[[int], np.ndarray],
        rng: np.random.Generator,
        phi: PhiSource = None,
        episode_seed: int = 0,
        episode_cap: int = 10_000,
    ) -> Trajectory:
        """Sample an episode under ``policy`` (state -> action probabilities)."""
        state = self.reset(rng)
        steps: list[Step] = []
        for _ in range(episode_cap):
            probs = np.asarray(policy(state), dtype=float)
            action = int(rng.choice(self.n_actions, p=probs))
            next_state, reward = self.step(state, action, rng)
            terminal = next_state is None
            steps.append(
                Step(
                    state_id=state,
                    action_id=action,
                    behavior_prob=float(probs[action]),
                    reward=reward,
                    terminal=terminal,
                    phi=_phi_at(phi, state),
                )
            )
            if terminal:
                break
            state = next_state
        else:
            steps[-1] = Step(
                state_id=steps[-1].state_id,
                action_id=steps[-1].action_id,
                behavior_prob=steps[-1].behavior_prob,
                reward=steps[-1].reward,
                terminal=True,
                phi=steps[-1].phi,
            )
        return Trajectory.from_steps(steps, gamma=self.gamma, episode_seed=episode_seed)

    def induced_kernel(self, policy_probs: np.ndarray) -> MrpKernel:
        """Reward-process kernel obtained by averaging actions under a fixed policy."""
        policy_probs = np.asarray(policy_probs, dtype=float)
        if policy_probs.shape != (self.n_states, self.n_actions):
            raise InvalidConfigError("policy must be (n_states, n_actions)")
        p = np.einsum("sa,sat->st", policy_probs, self.p)
        weighted_r = np.einsum("sa,sat,sat->st", policy_probs, self.p, self.r_trans)
        with np.errstate(invalid="ignore", divide="ignore"):
            r_trans = np.where(p > 0, weighted_r / np.where(p > 0, p, 1.0), 0.0)
        r_term = np.einsum("sa,sa->s", policy_probs, self.r_term_exp)
        return MrpKernel(p=p, r_trans=r_trans, r_term_exp=r_term)


def twostage_mdp(config: TwoStageConfig, risky_continue_scale: float = 0.5) -> DiscreteMdp:
    """Two-action variant: action 0 keeps the configured dynamics, action 1
    scales the continue/succeed probabilities down and fails with the rest,
    so action 0 is strictly better everywhere."""
    n = config.n_states
    p = np.zeros((n, 2, n))
    r_term = np.zeros((n, 2))
    scale = risky_continue_scale
    for s in range(n):
        if not config.in_second_set(s):
            p[s, 0, : config.n_a] += config.p_stay_a / config.n_a
            p[s, 0, config.n_a :] += config.p_ab / config.n_b
            p[s, 1, : config.n_a] += scale * config.p_stay_a / config.n_a
            p[s, 1, config.n_a :] += scale * config.p_ab / config.n_b
        else:
            p[s, 0, config.n_a :] += config.p_stay_b / config.n_b
            p[s, 1, config.n_a :] += scale * config.p_stay_b / config.n_b
            r_term[s, 0] = config.p_succ
            r_term[s, 1] = scale * config.p_succ
    start = np.zeros(n)
    start[: config.n_a] = 1.0 / config.n_a
    return DiscreteMdp(
        p=p,
        r_trans=np.zeros((n, 2, n)),
        r_term_exp=r_term,
        start_dist=start,
        gamma=config.gamma,
    )
