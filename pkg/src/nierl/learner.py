"""Actor-critic training of both policy arms, value heads regressed to
trace-corrected targets, and ascent on the causal objective.

One iteration of the full loop: collect experience from the
return-maximizing policy, replay a batch, update that policy by
advantage actor-critic, update the event-seeking policy on the
stick-breaking reward with importance correction, regress the four value
heads, then take one ascent step on the indirect-effect surrogate with
respect to the causal-variable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .causal import (
    PhiModel,
    SurrogateResult,
    TabularPhi,
    TrajectoryValues,
    bernoulli_entropy,
    bernoulli_entropy_grad,
    cross_entropy_loss_grad,
    delta_y_surrogate,
    nie_surrogate,
    posterior_weighted_separation,
    stick_breaking_rewards,
    z_posterior_grad,
)
from .mdp import ReplayBuffer, Trajectory
from .nn import Adam, AdamScalarVector, Mlp
from .vtrace import VTraceConfig, steps_standard, steps_v0, steps_v1, steps_vinf, vtrace_targets


@dataclass
class TrainConfig:
    """Hyperparameters of the training loop. Sized for desk-scale runs."""

    gamma: float = 0.99
    gamma_b: float = 1.0  # the stick-breaking objective is undiscounted
    lr_policy: float = 1e-3
    lr_policy_b: Optional[float] = None  # event arm; falls back to lr_policy
    lr_critic: float = 2e-3
    lr_heads: float = 2e-3
    lr_phi: float = 2e-2
    entropy_policy: float = 0.01
    entropy_policy_b: Optional[float] = None  # event arm; falls back to the annealed value
    entropy_phi: float = 1e-3
    entropy_anneal_iters: int = 0  # 0 keeps coefficients constant
    batch_size: int = 32
    replay_capacity: int = 512
    rho_bar: float = 1.0
    c_bar: float = 1.0
    episodes_per_iter: int = 16
    total_iters: int = 200
    seed: int = 0
    guard_eps: float = 1e-3
    phi_warmup_iters: int = 0  # iterations of head/policy training before phi moves
    # 'step': Bernoulli entropy of each per-state probability (short episodes);
    # 'episode': entropy of the episode event posterior, which stops the
    # whole-table drift into certain-event degeneracy on long episodes
    phi_entropy_kind: str = "step"
    # 'is': event-shift factor from trace targets IS-corrected toward the
    # event arm; 'rollout': from fresh on-policy rollouts of both arms
    # (tight truncation can flip the IS estimate's sign when the arms differ)
    shift_source: str = "is"
    shift_rollouts: int = 8
    # 'vtrace': outcome separation from the conditional-return targets;
    # 'posterior': marginalized per-episode form, sum(Y p) / sum(p) minus
    # sum(Y (1-p)) / sum(1-p), exact in phi and much lower variance
    sep_source: str = "vtrace"
    # restrict ascent to the causal quadrant (separation and shift both
    # positive): the raw product also has degenerate maxima with both
    # factors negative, reached by saturating the event everywhere
    causal_quadrant: bool = False

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("lr_policy", "lr_critic", "lr_heads", "lr_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.batch_size < 1 or self.episodes_per_iter < 1 or self.replay_capacity < 1:
            raise ValueError("batch, episode and replay sizes must be positive")
        if self.phi_entropy_kind not in ("step", "episode"):
            raise ValueError(f"unknown phi_entropy_kind {self.phi_entropy_kind!r}")
        if self.shift_source not in ("is", "rollout"):
            raise ValueError(f"unknown shift_source {self.shift_source!r}")
        if self.sep_source not in ("vtrace", "posterior"):
            raise ValueError(f"unknown sep_source {self.sep_source!r}")

    def entropy_at(self, iteration: int) -> tuple[float, float]:
        """Linearly annealed (policy, phi) entropy coefficients."""
        if self.entropy_anneal_iters <= 0:
            return self.entropy_policy, self.entropy_phi
        frac = max(0.0, 1.0 - iteration / self.entropy_anneal_iters)
        return self.entropy_policy * frac, self.entropy_phi * frac

    def vtrace(self) -> VTraceConfig:
        return VTraceConfig(rho_bar=self.rho_bar, c_bar=self.c_bar)


@dataclass
class PolicyPair:
    pi_a: Mlp
    pi_b: Mlp
    critic_a: Mlp
    critic_b: Mlp

    @classmethod
    def make(cls, input_dim: int, n_actions: int, hidden: int, rng: np.random.Generator) -> "PolicyPair":
        return cls(
            pi_a=Mlp(input_dim, hidden, n_actions, head="softmax", rng=rng),
            pi_b=Mlp(input_dim, hidden, n_actions, head="softmax", rng=rng),
            critic_a=Mlp(input_dim, hidden, 1, head="linear", rng=rng),
            critic_b=Mlp(input_dim, hidden, 1, head="linear", rng=rng),
        )


@dataclass
class ValueHeads:
    v: Mlp
    v0: Mlp
    v1: Mlp
    v_inf: Mlp

    @classmethod
    def make(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "ValueHeads":
        return cls(
            v=Mlp(input_dim, hidden, 1, head="linear", rng=rng),
            v0=Mlp(input_dim, hidden, 1, head="linear", rng=rng),
            v1=Mlp(input_dim, hidden, 1, head="linear", rng=rng),
            v_inf=Mlp(input_dim, hidden, 1, head="sigmoid", rng=rng),
        )


# --- helpers over stored trajectories ---


def features_of(trajectory: Trajectory, encode: Callable) -> np.ndarray:
    return np.stack([encode(step.state_id) for step in trajectory.steps])


class EpisodeBatch:
    """Concatenated per-step features of a trajectory batch, so every network
    runs one forward per phase instead of one per trajectory.

    Encoded features are memoized per trajectory object through ``cache``
    (shared across the phases of one iteration).
    """

    def __init__(self, trajectories: Sequence[Trajectory], encode: Callable, cache: Optional[dict] = None):
        self.trajectories = list(trajectories)
        cache = cache if cache is not None else {}
        feats_list = []
        for traj in self.trajectories:
            feats = cache.get(id(traj))
            if feats is None:
                feats = features_of(traj, encode)
                cache[id(traj)] = feats
            feats_list.append(feats)
        self.feats_list = feats_list
        self.lengths = np.array([len(f) for f in feats_list])
        self.offsets = np.concatenate(([0], np.cumsum(self.lengths)))
        self.feats = np.concatenate(feats_list) if feats_list else np.empty((0, 0))
        self.n_steps = int(self.lengths.sum())
        self.last_step = np.zeros(self.n_steps, dtype=bool)
        self.last_step[self.offsets[1:] - 1] = True

    def slices(self, array: np.ndarray) -> list[np.ndarray]:
        return [array[self.offsets[i] : self.offsets[i + 1]] for i in range(len(self.trajectories))]

    def bootstraps(self, net: Mlp) -> tuple[np.ndarray, np.ndarray]:
        """Value at every step and at its successor (zero past each episode end)."""
        vals = net.forward(self.feats).ravel()
        nxt = np.append(vals[1:], 0.0)
        nxt[self.last_step] = 0.0
        return vals, nxt

    def action_ratios(self, policy: Mlp, config: TrainConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Truncated current-policy/behavior ratios over the whole batch."""
        probs = policy.forward(self.feats)
        actions = np.concatenate([[s.action_id for s in t.steps] for t in self.trajectories])
        mu = np.concatenate([t.behavior_probs for t in self.trajectories])
        ratio = probs[np.arange(self.n_steps), actions.astype(int)] / mu
        return np.minimum(config.rho_bar, ratio), np.minimum(config.c_bar, ratio), probs

    def phis(self, phi_model: PhiModel) -> np.ndarray:
        if isinstance(phi_model, TabularPhi):
            states = np.concatenate([t.states for t in self.trajectories])
            return phi_model.phi_all()[states]
        return phi_model.phi_batch(self.feats)

    @property
    def rewards(self) -> np.ndarray:
        return np.concatenate([t.rewards for t in self.trajectories])


def head_bootstraps(net: Mlp, feats: np.ndarray, terminal_last: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Value at each visited state and at its successor (zero past the end)."""
    vals = net.forward(feats).ravel()
    nxt = np.concatenate((vals[1:], [0.0]))
    if not terminal_last:
        nxt[-1] = vals[-1]
    return vals, nxt


def action_ratios(
    policy: Mlp, feats: np.ndarray, trajectory: Trajectory, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated ratios of the current policy against the recorded behavior probs."""
    probs = policy.forward(feats)
    actions = np.array([s.action_id for s in trajectory.steps])
    pi_probs = probs[np.arange(len(actions)), actions]
    ratio = pi_probs / trajectory.behavior_probs
    return np.minimum(config.rho_bar, ratio), np.minimum(config.c_bar, ratio), probs


def phi_on_trajectory(phi_model: PhiModel, trajectory: Trajectory, feats: np.ndarray) -> np.ndarray:
    """Current per-step event probabilities (recomputed, not the logged ones)."""
    if isinstance(phi_model, TabularPhi):
        return phi_model.phi_all()[trajectory.states]
    return phi_model.phi_batch(feats)


def _finite(*losses: float) -> bool:
    return all(np.isfinite(x) for x in losses)


# --- advantage actor-critic ---


def a2c_update(
    policy: Mlp,
    critic: Mlp,
    trajectories: Sequence[Trajectory],
    encode: Callable,
    config: TrainConfig,
    policy_opt: Adam,
    critic_opt: Adam,
    reward_fn: Optional[Callable[[Trajectory, np.ndarray], np.ndarray]] = None,
    gamma: Optional[float] = None,
    ent_coef: Optional[float] = None,
) -> dict:
    """One policy-gradient plus critic-regression step on a batch of episodes.

    ``reward_fn(trajectory, features) -> rewards`` substitutes the stored
    rewards (the event-seeking arm trains on stick-breaking rewards);
    advantages are trace-corrected targets minus the critic's value, and
    the importance ratio of the trained policy against the recorded
    behavior probabilities scales each step's gradient.
    """
    gamma = config.gamma if gamma is None else gamma
    ent_coef = config.entropy_policy if ent_coef is None else ent_coef

    batch = trajectories if isinstance(trajectories, EpisodeBatch) else EpisodeBatch(trajectories, encode)
    rho, c, probs = batch.action_ratios(policy, config)
    if reward_fn is None:
        rewards = batch.rewards
    else:
        rewards = np.concatenate(
            [np.asarray(reward_fn(t, f), dtype=float) for t, f in zip(batch.trajectories, batch.feats_list)]
        )
    if not np.all(np.isfinite(rewards)):
        return {"loss_pg": float("nan"), "loss_critic": float("nan"), "entropy": float("nan"), "aborted": True}
    critic_vals, v_next = batch.bootstraps(critic)

    targets = np.empty(batch.n_steps)
    for sl_r, sl_vh, sl_vn, sl_rho, sl_c, (lo, hi) in zip(
        batch.slices(rewards), batch.slices(critic_vals), batch.slices(v_next),
        batch.slices(rho), batch.slices(c),
        zip(batch.offsets[:-1], batch.offsets[1:]),
    ):
        steps = steps_standard(sl_r, sl_vh, sl_vn, gamma, sl_rho, sl_c)
        targets[lo:hi] = vtrace_targets(steps)
    adv = targets - critic_vals

    n = batch.n_steps
    actions = np.concatenate([[s.action_id for s in t.steps] for t in batch.trajectories]).astype(int)
    taken = probs[np.arange(n), actions]
    entropy = float(-np.sum(probs * np.log(np.clip(probs, 1e-12, None)), axis=1).mean())
    loss_pg = float(-(rho * adv * np.log(np.clip(taken, 1e-12, None))).mean())
    loss_critic = float(0.5 * np.mean((critic_vals - targets) ** 2))

    if not _finite(loss_pg, loss_critic, entropy):
        return {"loss_pg": loss_pg, "loss_critic": loss_critic, "entropy": entropy, "aborted": True}

    # d(loss)/d(probs): the taken action's column gets the score term, all
    # columns get the entropy term
    gy = np.zeros_like(probs)
    gy[np.arange(n), actions] = -rho * adv / np.clip(taken, 1e-12, None) / n
    gy += ent_coef * (np.log(np.clip(probs, 1e-12, None)) + 1.0) / n
    policy_opt.step(policy, policy.backward(batch.feats, gy))

    gv = ((critic_vals - targets) / n).reshape(-1, 1)
    critic_opt.step(critic, critic.backward(batch.feats, gv))

    return {"loss_pg": loss_pg, "loss_critic": loss_critic, "entropy": entropy, "aborted": False}


def train_pi_b(
    pair: PolicyPair,
    trajectories: Sequence[Trajectory],
    phi_model: PhiModel,
    encode: Callable,
    config: TrainConfig,
    policy_opt: Adam,
    critic_opt: Adam,
    ent_coef: Optional[float] = None,
) -> dict:
    """Update the event-seeking arm on experience from the other arm, using
    the stick-breaking decomposition of the episode event probability as
    its reward signal."""

    def reward_fn(traj: Trajectory, feats: np.ndarray) -> np.ndarray:
        return stick_breaking_rewards(phi_on_trajectory(phi_model, traj, feats))

    return a2c_update(
        pair.pi_b,
        pair.critic_b,
        trajectories,
        encode,
        config,
        policy_opt=policy_opt,
        critic_opt=critic_opt,
        reward_fn=reward_fn,
        gamma=config.gamma_b,
        ent_coef=ent_coef,
    )


# --- value heads ---


def _regress(net: Mlp, feats: np.ndarray, targets: np.ndarray, opt: Adam) -> float:
    vals = net.forward(feats).ravel()
    loss = float(0.5 * np.mean((vals - targets) ** 2))
    if not np.isfinite(loss):
        return loss
    gy = ((vals - targets) / len(targets)).reshape(-1, 1)
    opt.step(net, net.backward(feats, gy))
    return loss


def train_value_heads(
    heads: ValueHeads,
    trajectories: Sequence[Trajectory],
    phi_model: PhiModel,
    encode: Callable,
    config: TrainConfig,
    opts: dict[str, Adam],
    pi_a: Optional[Mlp] = None,
) -> dict:
    """Regress each head to its trace-corrected targets, in the order
    v, then the event probability, then the two conditional returns
    (whose targets read the just-updated v and event heads)."""
    batch = trajectories if isinstance(trajectories, EpisodeBatch) else EpisodeBatch(trajectories, encode)
    if pi_a is None:
        rho = c = np.ones(batch.n_steps)
    else:
        rho, c, _ = batch.action_ratios(pi_a, config)
    phis = batch.phis(phi_model)
    rewards = batch.rewards
    eps = config.guard_eps
    spans = list(zip(batch.offsets[:-1], batch.offsets[1:]))

    def regress(net: Mlp, build_steps, opt: Adam) -> float:
        targets = np.empty(batch.n_steps)
        for lo, hi in spans:
            targets[lo:hi] = vtrace_targets(build_steps(slice(lo, hi)))
        return _regress(net, batch.feats, targets, opt)

    losses = {}
    v_here, v_next = batch.bootstraps(heads.v)
    losses["loss_v"] = regress(
        heads.v,
        lambda s: steps_standard(rewards[s], v_here[s], v_next[s], config.gamma, rho[s], c[s]),
        opts["v"],
    )

    vinf_here, vinf_next = batch.bootstraps(heads.v_inf)
    losses["loss_v_inf"] = regress(
        heads.v_inf,
        lambda s: steps_vinf(phis[s], vinf_here[s], vinf_next[s], rho[s], c[s]),
        opts["v_inf"],
    )

    # conditional targets read the freshly updated v and event heads
    v_here, _ = batch.bootstraps(heads.v)
    vinf_here, vinf_next = batch.bootstraps(heads.v_inf)
    v1_here, v1_next = batch.bootstraps(heads.v1)
    losses["loss_v1"] = regress(
        heads.v1,
        lambda s: steps_v1(
            rewards[s], phis[s], v_here[s], vinf_here[s], vinf_next[s], v1_here[s], v1_next[s],
            config.gamma, rho[s], c[s], eps,
        ),
        opts["v1"],
    )

    v0_here, v0_next = batch.bootstraps(heads.v0)
    losses["loss_v0"] = regress(
        heads.v0,
        lambda s: steps_v0(
            rewards[s], phis[s], vinf_here[s], vinf_next[s], v0_here[s], v0_next[s],
            config.gamma, rho[s], c[s], eps,
        ),
        opts["v0"],
    )

    losses["aborted"] = not _finite(*[v for k, v in losses.items() if k.startswith("loss")])
    return losses


# --- causal-variable training ---


def build_trajectory_values(
    traj: Trajectory,
    feats: np.ndarray,
    heads: ValueHeads,
    phi: np.ndarray,
    config: TrainConfig,
    pi_a: Optional[Mlp] = None,
    pi_b: Optional[Mlp] = None,
) -> TrajectoryValues:
    """Freeze everything the surrogate needs; head outputs are constants."""
    v, v_next = head_bootstraps(heads.v, feats)
    vinf, vinf_next = head_bootstraps(heads.v_inf, feats)
    v1, v1_next = head_bootstraps(heads.v1, feats)
    v0, v0_next = head_bootstraps(heads.v0, feats)
    ones = np.ones(len(traj))
    if pi_a is None:
        rho_a, c_a = ones, ones
    else:
        rho_a, c_a = action_ratios(pi_a, feats, traj, config)[:2]
    if pi_b is None:
        rho_b, c_b = ones, ones
    else:
        rho_b, c_b = action_ratios(pi_b, feats, traj, config)[:2]
    return TrajectoryValues(
        rewards=traj.rewards,
        phis=phi,
        v=v,
        v_next=v_next,
        vinf=vinf,
        vinf_next=vinf_next,
        v1=v1,
        v1_next=v1_next,
        v0=v0,
        v0_next=v0_next,
        rho=rho_a,
        c=c_a,
        rho_b=rho_b,
        c_b=c_b,
    )


def train_phi(
    phi_model: PhiModel,
    heads: ValueHeads,
    trajectories: Sequence[Trajectory],
    encode: Callable,
    config: TrainConfig,
    phi_opt,
    objective: str = "nie",
    pi_a: Optional[Mlp] = None,
    pi_b: Optional[Mlp] = None,
    ent_coef: Optional[float] = None,
    shift_episodes_a: Optional[Sequence[Trajectory]] = None,
    shift_episodes_b: Optional[Sequence[Trajectory]] = None,
    prior_factors: Optional[tuple[float, float]] = None,
    cache: Optional[dict] = None,
) -> dict:
    """One ascent step on the chosen objective plus an entropy bonus.

    ``objective`` is "nie" (full product), "delta_y" (outcome separation
    only, for action-free processes) or "cross_entropy" (the classifier
    baseline). When fresh on-policy episodes of both arms are supplied,
    the event-shift factor and its gradient come from their exact episode
    posteriors instead of importance-corrected targets.
    """
    ent_coef = config.entropy_phi if ent_coef is None else ent_coef
    batch_feats = trajectories if isinstance(trajectories, EpisodeBatch) else EpisodeBatch(trajectories, encode)
    trajectories = batch_feats.trajectories
    feats_list = batch_feats.feats_list
    phis = batch_feats.slices(batch_feats.phis(phi_model))

    # each contribution: (trajectory, features, per-step phis, ascent gradient)
    all_feats = list(feats_list)
    all_trajs = list(trajectories)
    all_phis = list(phis)

    diagnostics: dict = {"objective": objective}
    if objective == "cross_entropy":
        loss, loss_grads = cross_entropy_loss_grad(phis, [t.outcome_y for t in trajectories])
        ascent_grads = [-g for g in loss_grads]
        diagnostics["loss_phi"] = loss
    elif objective == "nie" and shift_episodes_a is not None and shift_episodes_b is not None:
        if config.sep_source == "posterior":
            separation, sep_grads = posterior_weighted_separation(
                phis, [t.outcome_y for t in trajectories]
            )
        else:
            batch = [
                build_trajectory_values(t, f, heads, p, config, pi_a=pi_a, pi_b=pi_b)
                for t, f, p in zip(trajectories, feats_list, phis)
            ]
            sep_result = delta_y_surrogate(batch, config.gamma, config.guard_eps)
            separation = sep_result.outcome_separation
            sep_grads = sep_result.phi_grads

        def arm_posterior(episodes):
            arm = EpisodeBatch(episodes, encode, cache)
            arm_phis = arm.slices(arm.phis(phi_model))
            pairs = [z_posterior_grad(p) for p in arm_phis]
            mean = float(np.mean([p for p, _ in pairs]))
            grads = [g / len(episodes) for _, g in pairs]
            return mean, arm.feats_list, arm_phis, grads

        p_a, feats_a, phis_a, grads_a = arm_posterior(shift_episodes_a)
        p_b, feats_b, phis_b, grads_b = arm_posterior(shift_episodes_b)
        shift = p_b - p_a

        # the product-rule multipliers are slowly varying population
        # quantities; smoothing them strips per-batch sign noise while the
        # per-step gradients stay fresh
        sep_used, shift_used = separation, shift
        if prior_factors is not None:
            decay = 0.9
            sep_used = decay * prior_factors[0] + (1 - decay) * separation
            shift_used = decay * prior_factors[1] + (1 - decay) * shift
        sep_mult, shift_mult = sep_used, shift_used
        if config.causal_quadrant:
            sep_mult = max(sep_used, 0.0)
            shift_mult = max(shift_used, 0.05)

        ascent_grads = [shift_mult * g for g in sep_grads]
        all_trajs += list(shift_episodes_a) + list(shift_episodes_b)
        all_feats += feats_a + feats_b
        all_phis += phis_a + phis_b
        ascent_grads += [-sep_mult * g for g in grads_a]
        ascent_grads += [sep_mult * g for g in grads_b]
        diagnostics.update(
            nie_estimate=sep_used * shift_used,
            delta_y=sep_used,
            event_shift=shift_used,
            delta_y_raw=separation,
            event_shift_raw=shift,
            loss_phi=-(sep_used * shift_used),
        )
    else:
        batch = [
            build_trajectory_values(t, f, heads, p, config, pi_a=pi_a, pi_b=pi_b)
            for t, f, p in zip(trajectories, feats_list, phis)
        ]
        if objective == "delta_y":
            result: SurrogateResult = delta_y_surrogate(batch, config.gamma, config.guard_eps)
        elif objective == "nie":
            result = nie_surrogate(batch, config.gamma, config.guard_eps)
        else:
            raise ValueError(f"unknown phi objective {objective!r}")
        ascent_grads = result.phi_grads
        diagnostics.update(
            nie_estimate=result.value,
            delta_y=result.outcome_separation,
            event_shift=result.event_shift,
            loss_phi=-result.value,
        )

    entropy_grads, entropy = _phi_entropy_bonus(all_phis, config.phi_entropy_kind)
    diagnostics["entropy_phi"] = entropy

    if not all(np.all(np.isfinite(g)) for g in ascent_grads):
        diagnostics["aborted"] = True
        return diagnostics
    diagnostics["aborted"] = False

    if isinstance(phi_model, TabularPhi):
        phi_grad = np.zeros_like(phi_model.weights)
        for traj, p, g, ge in zip(all_trajs, all_phis, ascent_grads, entropy_grads):
            g = g + ent_coef * ge
            np.add.at(phi_grad, traj.states, phi_model.weight_grad_steps(p, g))
        phi_model.weights = phi_opt.step(phi_model.weights, -phi_grad)
    else:
        full_grad = np.concatenate(
            [g + ent_coef * ge for g, ge in zip(ascent_grads, entropy_grads)]
        )
        phi_opt.step(phi_model.net, phi_model.backward(np.concatenate(all_feats), -full_grad))

    return diagnostics


def _phi_entropy_bonus(phis: list[np.ndarray], kind: str) -> tuple[list[np.ndarray], float]:
    """Entropy regularizer value and its per-step gradients.

    'step' spreads Bernoulli entropy over every visited state; 'episode'
    regularizes the entropy of P(Z=1 | trajectory), which penalizes the
    degenerate certain-event (and never-event) regimes directly.
    """
    if kind == "step":
        total_steps = sum(len(p) for p in phis)
        grads = [bernoulli_entropy_grad(p) / total_steps for p in phis]
        value = float(np.mean(np.concatenate([bernoulli_entropy(p) for p in phis])))
        return grads, value
    n = len(phis)
    grads = []
    values = []
    for p in phis:
        one_minus = 1.0 - np.asarray(p, dtype=float)
        prefix = np.concatenate(([1.0], np.cumprod(one_minus)[:-1]))
        suffix = np.concatenate((np.cumprod(one_minus[::-1])[:-1][::-1], [1.0]))
        posterior = min(max(1.0 - prefix[-1] * one_minus[-1], 1e-7), 1.0 - 1e-7)
        values.append(bernoulli_entropy(posterior))
        dh_dp = np.log1p(-posterior) - np.log(posterior)
        grads.append(dh_dp * prefix * suffix / n)
    return grads, float(np.mean(values))


# --- the full loop ---


@dataclass
class LearnerState:
    """Everything a training run mutates, bundled for the iteration driver."""

    pair: PolicyPair
    heads: ValueHeads
    phi_model: PhiModel
    buffer: ReplayBuffer
    encode: Callable
    collect: Callable[[Mlp, int, np.random.Generator], list[Trajectory]]
    rng: np.random.Generator
    opts: dict = field(default_factory=dict)
    iteration: int = 0
    phi_objective: str = "nie"
    factor_ema: Optional[tuple[float, float]] = None  # smoothed (separation, shift)

    def ensure_optimizers(self, config: TrainConfig) -> None:
        if self.opts:
            return
        self.opts = {
            "pi_a": Adam(self.pair.pi_a, config.lr_policy),
            "pi_b": Adam(self.pair.pi_b, config.lr_policy_b or config.lr_policy),
            "critic_a": Adam(self.pair.critic_a, config.lr_critic),
            "critic_b": Adam(self.pair.critic_b, config.lr_critic),
            "v": Adam(self.heads.v, config.lr_heads),
            "v0": Adam(self.heads.v0, config.lr_heads),
            "v1": Adam(self.heads.v1, config.lr_heads),
            "v_inf": Adam(self.heads.v_inf, config.lr_heads),
            "phi": (
                AdamScalarVector(len(self.phi_model.weights), config.lr_phi)
                if isinstance(self.phi_model, TabularPhi)
                else Adam(self.phi_model.net, config.lr_phi)
            ),
        }


def causal_learner_iteration(state: LearnerState, config: TrainConfig) -> dict:
    """Collect, replay, and update every component once; skipped atomically
    if any sub-update sees a non-finite loss."""
    state.ensure_optimizers(config)
    ent_policy, ent_phi = config.entropy_at(state.iteration)

    episodes = state.collect(state.pair.pi_a, config.episodes_per_iter, state.rng)
    for traj in episodes:
        state.buffer.push(traj)
    batch = state.buffer.sample(config.batch_size, state.rng)

    snapshot = _parameter_snapshot(state)
    diagnostics: dict = {"iteration": state.iteration}
    diagnostics["completion_rate"] = float(np.mean([t.outcome_y for t in episodes]))

    # features are encoded once per trajectory and shared across all phases
    cache: dict = {}
    fresh_eb = EpisodeBatch(episodes, state.encode, cache)
    replay_eb = EpisodeBatch(batch, state.encode, cache)

    d_a = a2c_update(
        state.pair.pi_a,
        state.pair.critic_a,
        fresh_eb,
        state.encode,
        config,
        policy_opt=state.opts["pi_a"],
        critic_opt=state.opts["critic_a"],
        ent_coef=ent_policy,
    )
    # fresh event-arm rollouts serve two purposes: an uncorrected estimate of
    # the event shift, and on-policy experience for the event arm itself
    # (importance truncation starves its updates once the arms diverge)
    shift_b: Optional[list[Trajectory]] = None
    pib_data = replay_eb
    if config.shift_source == "rollout":
        shift_b = state.collect(state.pair.pi_b, config.shift_rollouts, state.rng)
        pib_data = EpisodeBatch(list(batch) + shift_b, state.encode, cache)
    ent_policy_b = config.entropy_policy_b if config.entropy_policy_b is not None else ent_policy
    d_b = train_pi_b(
        state.pair,
        pib_data,
        state.phi_model,
        state.encode,
        config,
        policy_opt=state.opts["pi_b"],
        critic_opt=state.opts["critic_b"],
        ent_coef=ent_policy_b,
    )
    d_heads = train_value_heads(
        state.heads,
        replay_eb,
        state.phi_model,
        state.encode,
        config,
        state.opts,
        pi_a=state.pair.pi_a,
    )
    if state.iteration < config.phi_warmup_iters:
        # let the heads settle against the initial phi before moving it;
        # early bootstrapped factors are sign-noise
        d_phi = {"aborted": False}
    else:
        shift_a = None
        if state.phi_objective == "nie" and config.shift_source == "rollout":
            shift_a = episodes
        d_phi = train_phi(
            state.phi_model,
            state.heads,
            replay_eb,
            state.encode,
            config,
            state.opts["phi"],
            objective=state.phi_objective,
            pi_a=state.pair.pi_a,
            pi_b=state.pair.pi_b,
            ent_coef=ent_phi,
            shift_episodes_a=shift_a,
            shift_episodes_b=shift_b,
            prior_factors=state.factor_ema,
            cache=cache,
        )
        if "delta_y" in d_phi and d_phi.get("delta_y") is not None:
            state.factor_ema = (d_phi["delta_y"], d_phi["event_shift"])

    aborted = any(d.get("aborted") for d in (d_a, d_b, d_heads, d_phi))
    if aborted:
        _restore_parameters(state, snapshot)
    diagnostics.update(
        loss_pi_a=d_a.get("loss_pg"),
        loss_pi_b=d_b.get("loss_pg"),
        entropy_pi_a=d_a.get("entropy"),
        entropy_pi_b=d_b.get("entropy"),
        loss_v=d_heads.get("loss_v"),
        loss_v_inf=d_heads.get("loss_v_inf"),
        loss_v1=d_heads.get("loss_v1"),
        loss_v0=d_heads.get("loss_v0"),
        nie_estimate=d_phi.get("nie_estimate"),
        delta_y=d_phi.get("delta_y"),
        event_shift=d_phi.get("event_shift"),
        loss_phi=d_phi.get("loss_phi"),
        entropy_phi=d_phi.get("entropy_phi"),
        aborted=aborted,
    )
    state.iteration += 1
    return diagnostics


def _parameter_snapshot(state: LearnerState) -> dict:
    nets = {
        "pi_a": state.pair.pi_a,
        "pi_b": state.pair.pi_b,
        "critic_a": state.pair.critic_a,
        "critic_b": state.pair.critic_b,
        "v": state.heads.v,
        "v0": state.heads.v0,
        "v1": state.heads.v1,
        "v_inf": state.heads.v_inf,
    }
    snap = {name: {k: p.copy() for k, p in net.parameters().items()} for name, net in nets.items()}
    if isinstance(state.phi_model, TabularPhi):
        snap["phi"] = state.phi_model.weights.copy()
    else:
        snap["phi"] = {k: p.copy() for k, p in state.phi_model.net.parameters().items()}
    return snap


def _restore_parameters(state: LearnerState, snapshot: dict) -> None:
    nets = {
        "pi_a": state.pair.pi_a,
        "pi_b": state.pair.pi_b,
        "critic_a": state.pair.critic_a,
        "critic_b": state.pair.critic_b,
        "v": state.heads.v,
        "v0": state.heads.v0,
        "v1": state.heads.v1,
        "v_inf": state.heads.v_inf,
    }
    for name, net in nets.items():
        net.set_parameters(snapshot[name])
    if isinstance(state.phi_model, TabularPhi):
        state.phi_model.weights = snapshot["phi"].copy()
    else:
        state.phi_model.net.set_parameters(snapshot["phi"])
