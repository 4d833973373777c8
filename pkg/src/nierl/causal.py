"""The causal-variable model and the objectives built on it.

The binary event process fires, at each visited state, with probability
phi(s); the episode-level event Z records whether it ever fired. The
toolkit scores a candidate phi by the natural indirect effect: how much the
switch from the return-maximizing policy to the event-seeking policy moves
the outcome *through* Z,

    nie = (E[Y | Z=1] - E[Y | Z=0]) * (P(Z=1 | pi_b) - P(Z=1 | pi_a)).

Both factors are estimated from trace-corrected targets whose per-step
terms contain phi explicitly, so the whole product is differentiable in
the phi parameters; bootstrapped table values inside the targets are
treated as constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .nn import GradientBuffer, Mlp
from .values import DEFAULT_GUARD_EPS
from .vtrace import GeneralizedStep

PROB_FLOOR = 1e-7

POLICY_A = "a"
POLICY_B = "b"


# --- phi model backends ---


class TabularPhi:
    """Per-state weights squashed through a sigmoid, so phi stays inside (0, 1).

    Outputs are clamped one float step short of the boundary so extreme
    weights cannot round to exactly 0 or 1.
    """

    def __init__(self, n_states: int, init_weight: float = 0.0):
        self.weights = np.full(n_states, float(init_weight))

    def phi(self, state: int) -> float:
        return float(self.phi_all()[state])

    def phi_all(self) -> np.ndarray:
        return np.clip(1.0 / (1.0 + np.exp(-self.weights)), PROB_FLOOR, 1.0 - PROB_FLOOR)

    def weight_grad(self, phi_grad_per_state: np.ndarray) -> np.ndarray:
        """Chain dL/dphi(s) through the sigmoid to dL/dw_s."""
        p = self.phi_all()
        return np.asarray(phi_grad_per_state, dtype=float) * p * (1.0 - p)

    def weight_grad_steps(self, phis: np.ndarray, phi_grads: np.ndarray) -> np.ndarray:
        """Per-step chain rule: dL/dw at the visited state is dL/dphi_t * phi_t (1 - phi_t)."""
        phis = np.asarray(phis, dtype=float)
        return np.asarray(phi_grads, dtype=float) * phis * (1.0 - phis)


class NeuralPhi:
    """Feature-based event probability: a sigmoid-headed network over observations."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: Optional[np.random.Generator] = None):
        self.net = Mlp(input_dim, hidden_dim, 1, head="sigmoid", rng=rng)

    def phi(self, features: np.ndarray) -> float:
        raw = self.net.forward(np.asarray(features, dtype=float)).ravel()[0]
        return float(min(max(raw, PROB_FLOOR), 1.0 - PROB_FLOOR))

    def phi_batch(self, features: np.ndarray) -> np.ndarray:
        raw = self.net.forward(np.asarray(features, dtype=float)).ravel()
        return np.clip(raw, PROB_FLOOR, 1.0 - PROB_FLOOR)

    def backward(self, features: np.ndarray, phi_grad: np.ndarray) -> GradientBuffer:
        """Parameter gradients given dL/dphi for each row of ``features``."""
        return self.net.backward(features, np.asarray(phi_grad, dtype=float).reshape(-1, 1))


PhiModel = Union[TabularPhi, NeuralPhi]


def phi_eval(model: PhiModel, state_or_features) -> float:
    """Evaluate the event probability; deterministic for fixed inputs."""
    return model.phi(state_or_features)


# --- the stopped process ---


def sample_z_online(phi_value: float, rng: np.random.Generator) -> bool:
    """One Bernoulli draw of the per-step event."""
    if not (0.0 < phi_value < 1.0):
        raise ValueError(f"phi must lie strictly inside (0, 1), got {phi_value}")
    return bool(rng.random() < phi_value)


def z_posterior(phis: Sequence[float]) -> float:
    """P(Z = 1 | trajectory) = 1 - prod_t (1 - phi(s_t))."""
    phis = np.asarray(phis, dtype=float)
    return float(1.0 - np.prod(1.0 - phis))


def z_posterior_grad(phis: Sequence[float]) -> tuple[float, np.ndarray]:
    """Episode event probability and its exact per-step gradient,
    dP/dphi_t = prod_{k != t} (1 - phi_k), via exclusive products."""
    phis = np.asarray(phis, dtype=float)
    one_minus = 1.0 - phis
    prefix = np.concatenate(([1.0], np.cumprod(one_minus)[:-1]))
    suffix = np.concatenate((np.cumprod(one_minus[::-1])[:-1][::-1], [1.0]))
    posterior = float(1.0 - prefix[-1] * one_minus[-1])
    return posterior, prefix * suffix


def stick_breaking_rewards(phis: Sequence[float]) -> np.ndarray:
    """Per-step reward phi(s_t) * prod_{k<t} (1 - phi(s_k)); sums to the Z posterior."""
    phis = np.asarray(phis, dtype=float)
    survive = np.concatenate(([1.0], np.cumprod(1.0 - phis)[:-1]))
    return phis * survive


def combined_policy_prob(
    choice: str,
    z_running: bool,
    state,
    action: int,
    pi_a: Callable[..., np.ndarray],
    pi_b: Callable[..., np.ndarray],
) -> float:
    """Action probability of the treatment policy: the 'a' arm always follows
    pi_a; the 'b' arm follows pi_b until the event has fired, then pi_a."""
    if choice not in (POLICY_A, POLICY_B):
        raise ValueError(f"choice must be {POLICY_A!r} or {POLICY_B!r}, got {choice!r}")
    if choice == POLICY_A or z_running:
        return float(np.asarray(pi_a(state))[action])
    return float(np.asarray(pi_b(state))[action])


# --- objectives ---


def nie(e_y_z1: float, e_y_z0: float, p_z_b: float, p_z_a: float) -> float:
    """Natural indirect effect of switching policy arms, for a binary mediator."""
    return (e_y_z1 - e_y_z0) * (p_z_b - p_z_a)


def delta_y_objective(v1_0: Sequence[float], v0_0: Sequence[float]) -> float:
    """Outcome separation: mean over start states of v1(s_0) - v0(s_0)."""
    v1_0 = np.asarray(v1_0, dtype=float)
    v0_0 = np.asarray(v0_0, dtype=float)
    if v1_0.shape != v0_0.shape:
        raise ValueError(f"mismatched lengths: {v1_0.shape} vs {v0_0.shape}")
    return float(np.mean(v1_0 - v0_0))


def cross_entropy_loss(phi_sequences: Sequence[Sequence[float]], outcomes: Sequence[float]) -> float:
    """Binary cross-entropy of the episode event posterior against the outcome."""
    loss, _ = cross_entropy_loss_grad(phi_sequences, outcomes)
    return loss


def cross_entropy_loss_grad(
    phi_sequences: Sequence[Sequence[float]], outcomes: Sequence[float]
) -> tuple[float, list[np.ndarray]]:
    """Loss plus dLoss/dphi_t per trajectory (mean over the batch)."""
    if len(phi_sequences) != len(outcomes):
        raise ValueError("one outcome per phi sequence required")
    n = len(phi_sequences)
    total = 0.0
    grads: list[np.ndarray] = []
    for phis, y in zip(phi_sequences, outcomes):
        if y not in (0.0, 1.0):
            raise ValueError(f"outcomes must be binary, got {y}")
        phis = np.asarray(phis, dtype=float)
        one_minus = 1.0 - phis
        # exclusive products around each step, stable even when some phi -> 1
        prefix = np.concatenate(([1.0], np.cumprod(one_minus)[:-1]))
        suffix = np.concatenate((np.cumprod(one_minus[::-1])[:-1][::-1], [1.0]))
        survive_all = prefix[-1] * one_minus[-1] if len(phis) else 1.0
        p = min(max(1.0 - survive_all, PROB_FLOOR), 1.0 - PROB_FLOOR)
        total += -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
        dloss_dp = -(y / p - (1.0 - y) / (1.0 - p))
        dp_dphi = prefix * suffix
        grads.append(dloss_dp * dp_dphi / n)
    return total / n, grads


def posterior_weighted_separation(
    phi_sequences: Sequence[Sequence[float]], outcomes: Sequence[float], tol: float = 1e-6
) -> tuple[float, list[np.ndarray]]:
    """Marginalized outcome separation over a batch of episodes.

    E[Y | Z=1] is estimated as sum(Y * p) / sum(p) with p the per-episode
    event posterior (and the complement for Z=0); the gradient in each
    per-step phi is exact. Returns 0 with zero gradients when either
    conditioning cell carries no posterior mass.
    """
    pairs = [z_posterior_grad(p) for p in phi_sequences]
    posteriors = np.array([p for p, _ in pairs])
    ys = np.asarray(outcomes, dtype=float)
    b1 = float(posteriors.sum())
    b0 = float((1.0 - posteriors).sum())
    if b1 < tol or b0 < tol:
        return 0.0, [np.zeros_like(g) for _, g in pairs]
    a1 = float((ys * posteriors).sum())
    a0 = float((ys * (1.0 - posteriors)).sum())
    separation = a1 / b1 - a0 / b0
    grads = []
    for (p, dp), y in zip(pairs, ys):
        dsep_dp = (y * b1 - a1) / b1**2 - (a0 - y * b0) / b0**2
        grads.append(dsep_dp * dp)
    return separation, grads


def bernoulli_entropy(phi: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(phi, dtype=float), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return -(p * np.log(p) + (1.0 - p) * np.log1p(-p))


def bernoulli_entropy_grad(phi: np.ndarray) -> np.ndarray:
    """d entropy / d phi = log((1-phi)/phi)."""
    p = np.clip(np.asarray(phi, dtype=float), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return np.log1p(-p) - np.log(p)


# --- trace-corrected targets with gradients in the per-step phi values ---


@dataclass
class TrajectoryValues:
    """Per-step quantities a surrogate needs from one stored trajectory.

    Bootstrap arrays hold the value at the visited state and at its
    successor (zero after a terminal step). ``rho``/``c`` carry the
    truncated ratios toward the return-maximizing arm, ``rho_b``/``c_b``
    toward the event-seeking arm (equal to rho/c for action-free
    processes).
    """

    rewards: np.ndarray
    phis: np.ndarray
    v: np.ndarray
    v_next: np.ndarray
    vinf: np.ndarray
    vinf_next: np.ndarray
    v1: np.ndarray
    v1_next: np.ndarray
    v0: np.ndarray
    v0_next: np.ndarray
    rho: np.ndarray
    c: np.ndarray
    rho_b: Optional[np.ndarray] = None
    c_b: Optional[np.ndarray] = None


def target_sensitivities(steps: Sequence[GeneralizedStep]) -> tuple[float, np.ndarray, np.ndarray]:
    """First-step target V_0 and its partials wrt every h_t and g_t.

    Uses V_0 = v_0 + sum_t A_t delta_t with A_t the running product of
    c * g before t, so dV_0/dh_t = A_t rho_t and
    dV_0/dg_t = A_t (rho_t v_{t+1} + c_t (V_{t+1} - v_{t+1})).
    """
    T = len(steps)
    a = np.empty(T)
    running = 1.0
    for t, step in enumerate(steps):
        a[t] = running
        running *= step.c * step.g
    excess = np.zeros(T + 1)  # V_t - v_t, zero past the end
    for t in range(T - 1, -1, -1):
        step = steps[t]
        delta = step.rho * (step.h + step.g * step.v_next - step.v_here)
        excess[t] = delta + step.g * step.c * excess[t + 1]
    v0_target = steps[0].v_here + excess[0]
    dh = a * np.array([s.rho for s in steps])
    dg = a * (
        np.array([s.rho * s.v_next for s in steps])
        + np.array([s.c for s in steps]) * excess[1:]
    )
    return float(v0_target), dh, dg


@dataclass
class VinfChain:
    """Trace targets of the event-occurrence probability along one episode,
    plus their exact sensitivity to every per-step phi.

    ``jac[t, k]`` is d target_t / d phi_k (zero for k < t); the extra last
    row stands for the value past the episode end, which is identically 0.
    """

    targets: np.ndarray  # (T,)
    jac: np.ndarray  # (T + 1, T)


def vinf_chain(tv: TrajectoryValues, toward_b: bool = False) -> VinfChain:
    """Backward pass of the (h=phi, g=1-phi) recursion with its phi Jacobian."""
    rho = tv.rho_b if toward_b else tv.rho
    c = tv.c_b if toward_b else tv.c
    phis, vh, vn = tv.phis, tv.vinf, tv.vinf_next
    T = len(phis)
    g = 1.0 - phis
    excess = np.zeros(T + 1)
    for t in range(T - 1, -1, -1):
        delta = rho[t] * (phis[t] + g[t] * vn[t] - vh[t])
        excess[t] = delta + g[t] * c[t] * excess[t + 1]
    targets = vh + excess[:T]
    # one-step sensitivity, then propagate backwards through the c*g products
    u = rho * (1.0 - vn) - c * excess[1:]
    jac = np.zeros((T + 1, T))
    for t in range(T):
        carry = 1.0
        for k in range(t, T):
            jac[t, k] = carry * u[k]
            carry *= c[k] * g[k]
    return VinfChain(targets=targets, jac=jac)


def _conditional_start_grad(
    kind: str,
    tv: TrajectoryValues,
    gamma: float,
    eps: float,
    x_here: np.ndarray,
    x_next: np.ndarray,
    jac_here: np.ndarray,
    jac_next: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Start-state target of one conditional return and its total phi gradient.

    ``x_here``/``x_next`` are the event-probability values entering the h/g
    terms (at the visited state and its successor); their phi sensitivities
    are supplied explicitly, so the gradient covers both the explicit phi
    appearances and the pathway through the event-probability estimates.
    """
    r, phis = tv.rewards, tv.phis
    T = len(r)
    one_minus = 1.0 - phis
    if kind == "1":
        denom = np.clip(x_here, eps, 1.0)
        interior = ((x_here > eps) & (x_here < 1.0)).astype(float)
        h = (phis * tv.v + one_minus * x_next * r) / denom
        g = one_minus * x_next * gamma / denom
        eh = (tv.v - x_next * r) / denom
        eg = -x_next * gamma / denom
        hx_next = one_minus * r / denom
        gx_next = one_minus * gamma / denom
        hx_here = -h / denom * interior
        gx_here = -g / denom * interior
        vh, vn = tv.v1, tv.v1_next
    elif kind == "0":
        denom = np.clip(1.0 - x_here, eps, 1.0)
        interior = ((1.0 - x_here > eps) & (x_here > 0.0)).astype(float)
        weight = one_minus * (1.0 - x_next)
        h = weight * r / denom
        g = weight * gamma / denom
        eh = -(1.0 - x_next) * r / denom
        eg = -(1.0 - x_next) * gamma / denom
        hx_next = -one_minus * r / denom
        gx_next = -one_minus * gamma / denom
        hx_here = h / denom * interior
        gx_here = g / denom * interior
        vh, vn = tv.v0, tv.v0_next
    else:
        raise ValueError(f"kind must be '1' or '0', got {kind!r}")

    rho, c = tv.rho, tv.c
    excess = np.zeros(T + 1)
    for t in range(T - 1, -1, -1):
        delta = rho[t] * (h[t] + g[t] * vn[t] - vh[t])
        excess[t] = delta + g[t] * c[t] * excess[t + 1]
    target0 = vh[0] + excess[0]

    a = np.empty(T)
    carry = 1.0
    for t in range(T):
        a[t] = carry
        carry *= c[t] * g[t]
    p_h = a * rho
    p_g = a * (rho * vn + c * excess[1:])

    dphi = p_h * eh + p_g * eg  # explicit appearances, index t
    dphi = dphi + (p_h * hx_next + p_g * gx_next) @ jac_next
    dphi = dphi + (p_h * hx_here + p_g * gx_here) @ jac_here
    return float(target0), dphi


@dataclass
class SurrogateResult:
    value: float
    outcome_separation: float
    event_shift: float
    phi_grads: list[np.ndarray]  # dObjective/dphi_t, one array per trajectory


def _slots(tv: TrajectoryValues, chain: VinfChain, slot_source: str):
    if slot_source == "heads":
        # mixed estimator: values from the trained heads, pathway from the
        # sampled chain's sensitivity
        return tv.vinf, tv.vinf_next, chain.jac[:-1], chain.jac[1:]
    if slot_source == "targets":
        ext = np.append(chain.targets, 0.0)
        return chain.targets, ext[1:], chain.jac[:-1], chain.jac[1:]
    raise ValueError(f"slot_source must be 'heads' or 'targets', got {slot_source!r}")


def delta_y_surrogate(
    batch: Sequence[TrajectoryValues],
    gamma: float,
    eps: float = DEFAULT_GUARD_EPS,
    slot_source: str = "heads",
) -> SurrogateResult:
    """Outcome-separation objective for action-free processes: mean over
    start states of the conditional targets' difference, differentiable in
    phi through both the explicit h/g terms and the event-probability
    pathway."""
    n = len(batch)
    total = 0.0
    grads = []
    for tv in batch:
        chain = vinf_chain(tv)
        x_here, x_next, jac_here, jac_next = _slots(tv, chain, slot_source)
        t1, g1 = _conditional_start_grad("1", tv, gamma, eps, x_here, x_next, jac_here, jac_next)
        t0, g0 = _conditional_start_grad("0", tv, gamma, eps, x_here, x_next, jac_here, jac_next)
        total += t1 - t0
        grads.append((g1 - g0) / n)
    value = total / n
    return SurrogateResult(value=value, outcome_separation=value, event_shift=1.0, phi_grads=grads)


def nie_surrogate(
    batch: Sequence[TrajectoryValues],
    gamma: float,
    eps: float = DEFAULT_GUARD_EPS,
    slot_source: str = "heads",
) -> SurrogateResult:
    """Full product objective: (E[Y|Z=1] - E[Y|Z=0]) * (P(Z=1|b) - P(Z=1|a)),
    every term a corrected start-state target; gradient by the product rule."""
    n = len(batch)
    sep_grads = []
    shift_grads = []
    sep_total = 0.0
    shift_total = 0.0
    for tv in batch:
        if tv.rho_b is None or tv.c_b is None:
            raise ValueError("nie_surrogate needs event-arm importance weights (rho_b, c_b)")
        chain_a = vinf_chain(tv)
        chain_b = vinf_chain(tv, toward_b=True)
        x_here, x_next, jac_here, jac_next = _slots(tv, chain_a, slot_source)
        t1, g1 = _conditional_start_grad("1", tv, gamma, eps, x_here, x_next, jac_here, jac_next)
        t0, g0 = _conditional_start_grad("0", tv, gamma, eps, x_here, x_next, jac_here, jac_next)
        sep_total += t1 - t0
        shift_total += chain_b.targets[0] - chain_a.targets[0]
        sep_grads.append((g1 - g0) / n)
        shift_grads.append((chain_b.jac[0] - chain_a.jac[0]) / n)
    separation = sep_total / n
    shift = shift_total / n
    grads = [separation * gs + shift * gp for gp, gs in zip(sep_grads, shift_grads)]
    return SurrogateResult(
        value=separation * shift,
        outcome_separation=separation,
        event_shift=shift,
        phi_grads=grads,
    )
