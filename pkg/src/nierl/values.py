"""The four coupled value functions over an episodic reward process.

For a per-state event probability phi(s), the stopped process Z fires the
first time the per-step Bernoulli(phi(s_t)) draw comes up true. Alongside
the ordinary value v we track:

  v_inf(s)  probability the event fires now or later, given it has not yet
  v1(s)     expected return given the event fires now or later
  v0(s)     expected return given the event never fires

All four satisfy Bellman-style recursions and admit exact linear solutions
when the transition kernel is explicit (small chains); online they are
learned by stochastic approximation from sampled transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

DEFAULT_GUARD_EPS = 1e-3


@dataclass
class ValueTables:
    """Per-state estimates of v, v_inf, v1, v0 under one discount factor."""

    v: np.ndarray
    v_inf: np.ndarray
    v1: np.ndarray
    v0: np.ndarray
    gamma: float

    def __post_init__(self):
        n = len(self.v)
        for name in ("v_inf", "v1", "v0"):
            if len(getattr(self, name)) != n:
                raise ValueError("all value tables must have the same length")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @classmethod
    def constant(cls, n_states: int, gamma: float, value: float = 0.5) -> "ValueTables":
        """Uniform initialization; 0.5 keeps conditional denominators alive from the start."""
        return cls(
            v=np.full(n_states, value, dtype=float),
            v_inf=np.full(n_states, value, dtype=float),
            v1=np.full(n_states, value, dtype=float),
            v0=np.full(n_states, value, dtype=float),
            gamma=gamma,
        )

    @property
    def n_states(self) -> int:
        return len(self.v)

    def copy(self) -> "ValueTables":
        return ValueTables(self.v.copy(), self.v_inf.copy(), self.v1.copy(), self.v0.copy(), self.gamma)


@dataclass
class LearningRateSchedule:
    """Step-size rule. The harmonic option satisfies the Robbins-Monro conditions."""

    alpha0: float
    rule: str = "constant"
    t0: float = 1000.0
    breakpoints: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.rule not in ("constant", "harmonic", "piecewise"):
            raise ValueError(f"unknown learning-rate rule {self.rule!r}")

    def __call__(self, t: int) -> float:
        if self.rule == "constant":
            return self.alpha0
        if self.rule == "harmonic":
            return self.alpha0 * self.t0 / (self.t0 + t)
        alpha = self.alpha0
        for step, value in self.breakpoints:
            if t >= step:
                alpha = value
        return alpha


@dataclass
class MrpKernel:
    """Explicit transition model of an episodic reward process.

    ``p[s, s']`` is the probability of moving to non-terminal state s';
    rows may sum to less than one, the deficit being the per-step
    termination probability. ``r_trans[s, s']`` is the reward on that
    transition and ``r_term_exp[s]`` the expected reward collected on
    terminating transitions out of s (already probability weighted).
    """

    p: np.ndarray
    r_trans: np.ndarray
    r_term_exp: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.r_trans = np.asarray(self.r_trans, dtype=float)
        self.r_term_exp = np.asarray(self.r_term_exp, dtype=float)
        n = self.p.shape[0]
        if self.p.shape != (n, n) or self.r_trans.shape != (n, n) or self.r_term_exp.shape != (n,):
            raise ValueError("inconsistent kernel shapes")
        rows = self.p.sum(axis=1)
        if np.any(self.p < -1e-12) or np.any(rows > 1.0 + 1e-9):
            raise ValueError("p must be substochastic")

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def term_prob(self) -> np.ndarray:
        return 1.0 - self.p.sum(axis=1)

    @property
    def expected_reward(self) -> np.ndarray:
        """Expected one-step reward including terminating transitions."""
        return (self.p * self.r_trans).sum(axis=1) + self.r_term_exp


@dataclass
class OracleSolution:
    """Exact fixed point plus masks for states whose conditional value is undefined.

    v1 is undefined where the event is impossible (v_inf = 0) and v0 where it
    is certain (v_inf = 1); those entries are reported as 0.0 and flagged.
    """

    tables: ValueTables
    v1_defined: np.ndarray
    v0_defined: np.ndarray


def exact_solve(kernel: MrpKernel, phi: np.ndarray, gamma: float) -> OracleSolution:
    """Solve the four coupled fixed points by direct linear solves: v, then v_inf, then v1/v0."""
    phi = np.asarray(phi, dtype=float)
    n = kernel.n_states
    if phi.shape != (n,):
        raise ValueError(f"phi must have one entry per state, got shape {phi.shape}")
    if np.any(phi < 0) or np.any(phi > 1):
        raise ValueError("phi entries must lie in [0, 1]")
    p = kernel.p
    eye = np.eye(n)

    v = np.linalg.solve(eye - gamma * p, kernel.expected_reward)

    one_minus_phi = 1.0 - phi
    v_inf = np.linalg.solve(eye - one_minus_phi[:, None] * p, phi)
    v_inf = np.clip(v_inf, 0.0, 1.0)

    tol = 1e-9
    v1_defined = v_inf > tol
    v0_defined = v_inf < 1.0 - tol

    # conditional on the event firing eventually:
    #   v_inf(s) v1(s) = phi(s) v(s)
    #                  + (1-phi(s)) sum_s' p(s,s') v_inf(s') (r(s,s') + gamma v1(s'))
    v1 = np.zeros(n)
    if np.any(v1_defined):
        idx = np.where(v1_defined)[0]
        m = one_minus_phi[:, None] * p * v_inf[None, :]
        a = np.diag(v_inf)[np.ix_(idx, idx)] - gamma * m[np.ix_(idx, idx)]
        b = phi[idx] * v[idx] + (m * kernel.r_trans)[idx].sum(axis=1)
        v1[idx] = np.linalg.solve(a, b)

    # conditional on the event never firing; terminating transitions keep full
    # weight because the event cannot fire after the episode ends
    #   (1-v_inf(s)) v0(s) = (1-phi(s)) [ sum_s' p(s,s') (1-v_inf(s')) (r + gamma v0(s'))
    #                                     + E[terminal reward | s] ]
    v0 = np.zeros(n)
    if np.any(v0_defined):
        idx = np.where(v0_defined)[0]
        w = one_minus_phi[:, None] * p * (1.0 - v_inf)[None, :]
        a = np.diag(1.0 - v_inf)[np.ix_(idx, idx)] - gamma * w[np.ix_(idx, idx)]
        b = one_minus_phi[idx] * ((p * (1.0 - v_inf)[None, :] * kernel.r_trans)[idx].sum(axis=1) + kernel.r_term_exp[idx])
        v0[idx] = np.linalg.solve(a, b)

    tables = ValueTables(v=v, v_inf=v_inf, v1=v1, v0=v0, gamma=gamma)
    return OracleSolution(tables=tables, v1_defined=v1_defined, v0_defined=v0_defined)


class UpdateSkips(NamedTuple):
    """Which conditional updates a single transition skipped due to the division guard."""

    v1_skipped: bool
    v0_skipped: bool


def tabular_update(
    tables: ValueTables,
    phi: np.ndarray,
    transition: tuple[int, float, Optional[int], bool],
    alpha: float,
    eps: float = DEFAULT_GUARD_EPS,
) -> UpdateSkips:
    """One stochastic-approximation step x <- (1-alpha) x + alpha * target on all four tables.

    ``transition`` is (s, reward, s_next, terminal); s_next is ignored when
    terminal. Updates run in the order v, v_inf, then v1/v0 against the
    just-updated v and v_inf. The conditional updates divide by the
    estimated probability of their conditioning event; when that estimate
    is within ``eps`` of impossible (v1) or certain (v0) the update is
    skipped and reported, not raised.
    """
    s, r, s_next, terminal = transition
    gamma = tables.gamma

    v_next = 0.0 if terminal else tables.v[s_next]
    tables.v[s] += alpha * (r + gamma * v_next - tables.v[s])

    vinf_next = 0.0 if terminal else tables.v_inf[s_next]
    phi_s = phi[s]
    tables.v_inf[s] += alpha * (phi_s + (1.0 - phi_s) * vinf_next - tables.v_inf[s])

    vinf_s = tables.v_inf[s]
    v1_skipped = vinf_s <= eps
    if not v1_skipped:
        v1_next = 0.0 if terminal else tables.v1[s_next]
        denom = min(max(vinf_s, eps), 1.0)
        target = (phi_s * tables.v[s] + (1.0 - phi_s) * vinf_next * (r + gamma * v1_next)) / denom
        tables.v1[s] += alpha * (target - tables.v1[s])

    v0_skipped = vinf_s >= 1.0 - eps
    if not v0_skipped:
        v0_next = 0.0 if terminal else tables.v0[s_next]
        denom = min(max(1.0 - vinf_s, eps), 1.0)
        target = (1.0 - phi_s) * (1.0 - vinf_next) * (r + gamma * v0_next) / denom
        tables.v0[s] += alpha * (target - tables.v0[s])

    return UpdateSkips(v1_skipped=v1_skipped, v0_skipped=v0_skipped)


def fixed_point_sweep(
    tables: ValueTables,
    phi: np.ndarray,
    kernel: MrpKernel,
    eps: float = DEFAULT_GUARD_EPS,
) -> tuple[ValueTables, float]:
    """One synchronous (Jacobi) application of the expectation-form recursions.

    Every state's new value is computed from the previous tables only.
    Returns the new tables and the sup-norm change; guarded states keep
    their previous conditional values.
    """
    phi = np.asarray(phi, dtype=float)
    gamma = tables.gamma
    p = kernel.p
    one_minus_phi = 1.0 - phi

    new_v = kernel.expected_reward + gamma * (p @ tables.v)
    new_vinf = phi + one_minus_phi * (p @ tables.v_inf)

    # carried values v(s'), v_inf(s') weight each successor inside the
    # conditional expectations; terminal transitions carry v_inf = 0
    v1_rhs = phi * tables.v + one_minus_phi * (p * tables.v_inf[None, :] * (kernel.r_trans + gamma * tables.v1[None, :])).sum(axis=1)
    v0_rhs = one_minus_phi * (
        (p * (1.0 - tables.v_inf)[None, :] * (kernel.r_trans + gamma * tables.v0[None, :])).sum(axis=1)
        + kernel.r_term_exp
    )

    v1_ok = tables.v_inf > eps
    v0_ok = tables.v_inf < 1.0 - eps
    denom1 = np.clip(tables.v_inf, eps, 1.0)
    denom0 = np.clip(1.0 - tables.v_inf, eps, 1.0)

    new_v1 = np.where(v1_ok, v1_rhs / denom1, tables.v1)
    new_v0 = np.where(v0_ok, v0_rhs / denom0, tables.v0)

    new_tables = ValueTables(v=new_v, v_inf=new_vinf, v1=new_v1, v0=new_v0, gamma=gamma)
    residual = max(
        np.max(np.abs(new_v - tables.v)),
        np.max(np.abs(new_vinf - tables.v_inf)),
        np.max(np.abs(new_v1 - tables.v1)),
        np.max(np.abs(new_v0 - tables.v0)),
    )
    return new_tables, float(residual)


def fit_geometric_rate(residuals: np.ndarray, burn_in: int = 0, floor: float = 1e-13) -> tuple[float, float]:
    """Least-squares fit of log residual against iteration index.

    Returns (rate, r_squared) where rate = exp(slope); entries at or below
    ``floor`` are excluded (they sit in the float noise).
    """
    residuals = np.asarray(residuals, dtype=float)
    idx = np.arange(len(residuals))
    keep = (idx >= burn_in) & (residuals > floor)
    x = idx[keep].astype(float)
    y = np.log(residuals[keep])
    if len(x) < 3:
        raise ValueError("not enough residuals above the floor to fit a rate")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), r2
