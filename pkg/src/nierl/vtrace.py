"""Generic n-step and trace-corrected return estimation.

Every recursion we estimate has the one-step shape

    value(s_t) = E[ h_t + g_t * value(s_{t+1}) ]

for per-step terms (h, g): the plain return uses (reward, gamma), the
event-occurrence probability uses (phi, 1 - phi), and the two conditional
returns use ratios of bootstrapped values (builders below). Off-policy
corrections follow the truncated importance-weight scheme: rho scales the
one-step error, c gates how far corrections propagate backwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .values import DEFAULT_GUARD_EPS


@dataclass(frozen=True)
class GeneralizedStep:
    """One step of an (h, g) recursion with its correction weights and bootstraps."""

    h: float
    g: float
    rho: float
    c: float
    v_here: float
    v_next: float

    def __post_init__(self):
        for name in ("h", "g", "rho", "c", "v_here", "v_next"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.rho < 0 or self.c < 0:
            raise ValueError("importance weights must be nonnegative")


@dataclass(frozen=True)
class VTraceConfig:
    rho_bar: float = 1.0
    c_bar: float = 1.0
    n: Optional[int] = None  # None: full episode

    def __post_init__(self):
        if not (self.rho_bar >= self.c_bar > 0):
            raise ValueError(
                f"need rho_bar >= c_bar > 0, got rho_bar={self.rho_bar}, c_bar={self.c_bar}"
            )


def is_weights(pi_prob: float, mu_prob: float, config: VTraceConfig) -> tuple[float, float]:
    """Truncated importance-sampling weights (rho, c) for one action."""
    if mu_prob <= 0:
        raise ValueError(f"behavior probability must be positive, got {mu_prob}")
    if pi_prob < 0:
        raise ValueError(f"target probability must be nonnegative, got {pi_prob}")
    ratio = pi_prob / mu_prob
    return min(config.rho_bar, ratio), min(config.c_bar, ratio)


def nstep_return(steps: Sequence[GeneralizedStep], t: int, n: Optional[int] = None) -> float:
    """Unrolled estimate sum_i h_i * prod(g) plus the bootstrapped tail.

    The horizon is truncated at the end of the episode, where the bootstrap
    value is the final step's v_next (zero for terminal episodes).
    """
    if not (0 <= t < len(steps)):
        raise ValueError(f"t={t} outside the episode of length {len(steps)}")
    horizon = len(steps) - t if n is None else min(n, len(steps) - t)
    total = 0.0
    carry = 1.0
    for i in range(t, t + horizon):
        total += carry * steps[i].h
        carry *= steps[i].g
    total += carry * steps[t + horizon - 1].v_next
    return total


def vtrace_targets(steps: Sequence[GeneralizedStep]) -> np.ndarray:
    """Trace-corrected targets for every step via one backward pass.

    V_t = v_t + delta_t + g_t c_t (V_{t+1} - v_{t+1}), with
    delta_t = rho_t (h_t + g_t v_{t+1} - v_t) and V at the episode end
    anchored to the final bootstrap value.
    """
    T = len(steps)
    targets = np.empty(T)
    excess = 0.0  # V_{t+1} - v_{t+1}
    for t in range(T - 1, -1, -1):
        step = steps[t]
        delta = step.rho * (step.h + step.g * step.v_next - step.v_here)
        correction = delta + step.g * step.c * excess
        targets[t] = step.v_here + correction
        excess = correction
    return targets


def vtrace_targets_direct(steps: Sequence[GeneralizedStep]) -> np.ndarray:
    """Summation form of the corrected target, quadratic time; kept as a cross-check."""
    T = len(steps)
    deltas = [s.rho * (s.h + s.g * s.v_next - s.v_here) for s in steps]
    targets = np.empty(T)
    for t in range(T):
        total = steps[t].v_here
        carry = 1.0
        for i in range(t, T):
            if i > t:
                carry *= steps[i - 1].c * steps[i - 1].g
            total += carry * deltas[i]
        targets[t] = total
    return targets


# --- (h, g) builders for each recursion ---


def hg_standard(reward: float, gamma: float) -> tuple[float, float]:
    """Plain discounted return."""
    return reward, gamma


def hg_vinf(phi_s: float) -> tuple[float, float]:
    """Probability the event fires now or later: h = phi(s), g = 1 - phi(s)."""
    return phi_s, 1.0 - phi_s


def hg_v1(
    reward: float,
    phi_s: float,
    v_s: float,
    vinf_s: float,
    vinf_next: float,
    gamma: float,
    eps: float = DEFAULT_GUARD_EPS,
) -> tuple[float, float]:
    """Return conditioned on the event firing eventually.

    The bootstrapped v and v_inf values entering h and g are constants of
    the target; the denominator is clamped away from zero.
    """
    denom = min(max(vinf_s, eps), 1.0)
    h = (v_s * phi_s + (1.0 - phi_s) * vinf_next * reward) / denom
    g = (1.0 - phi_s) * vinf_next * gamma / denom
    return h, g


def hg_v0(
    reward: float,
    phi_s: float,
    vinf_s: float,
    vinf_next: float,
    gamma: float,
    eps: float = DEFAULT_GUARD_EPS,
) -> tuple[float, float]:
    """Return conditioned on the event never firing."""
    denom = min(max(1.0 - vinf_s, eps), 1.0)
    weight = (1.0 - phi_s) * (1.0 - vinf_next)
    return weight * reward / denom, weight * gamma / denom


# --- whole-trajectory builders over per-state arrays (tabular) or per-step values ---


def steps_standard(
    rewards: np.ndarray,
    v_here: np.ndarray,
    v_next: np.ndarray,
    gamma: float,
    rhos: np.ndarray,
    cs: np.ndarray,
) -> list[GeneralizedStep]:
    return [
        GeneralizedStep(h=float(r), g=gamma, rho=float(rho), c=float(c), v_here=float(vh), v_next=float(vn))
        for r, rho, c, vh, vn in zip(rewards, rhos, cs, v_here, v_next)
    ]


def steps_vinf(
    phis: np.ndarray,
    vinf_here: np.ndarray,
    vinf_next: np.ndarray,
    rhos: np.ndarray,
    cs: np.ndarray,
) -> list[GeneralizedStep]:
    return [
        GeneralizedStep(h=float(p), g=float(1.0 - p), rho=float(rho), c=float(c), v_here=float(vh), v_next=float(vn))
        for p, rho, c, vh, vn in zip(phis, rhos, cs, vinf_here, vinf_next)
    ]


def steps_v1(
    rewards: np.ndarray,
    phis: np.ndarray,
    v_here: np.ndarray,
    vinf_here: np.ndarray,
    vinf_next: np.ndarray,
    v1_here: np.ndarray,
    v1_next: np.ndarray,
    gamma: float,
    rhos: np.ndarray,
    cs: np.ndarray,
    eps: float = DEFAULT_GUARD_EPS,
) -> list[GeneralizedStep]:
    out = []
    for i in range(len(rewards)):
        h, g = hg_v1(rewards[i], phis[i], v_here[i], vinf_here[i], vinf_next[i], gamma, eps)
        out.append(
            GeneralizedStep(h=h, g=g, rho=float(rhos[i]), c=float(cs[i]), v_here=float(v1_here[i]), v_next=float(v1_next[i]))
        )
    return out


def steps_v0(
    rewards: np.ndarray,
    phis: np.ndarray,
    vinf_here: np.ndarray,
    vinf_next: np.ndarray,
    v0_here: np.ndarray,
    v0_next: np.ndarray,
    gamma: float,
    rhos: np.ndarray,
    cs: np.ndarray,
    eps: float = DEFAULT_GUARD_EPS,
) -> list[GeneralizedStep]:
    out = []
    for i in range(len(rewards)):
        h, g = hg_v0(rewards[i], phis[i], vinf_here[i], vinf_next[i], gamma, eps)
        out.append(
            GeneralizedStep(h=h, g=g, rho=float(rhos[i]), c=float(cs[i]), v_here=float(v0_here[i]), v_next=float(v0_next[i]))
        )
    return out
