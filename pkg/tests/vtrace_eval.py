"""Vectorized tabular policy evaluation by repeated averaged application of
trace-corrected targets over one fixed batch of episodes.

Used by the acceptance suite to exercise the convergence-with-bias property
of the off-policy estimator: the batch is frozen, so the averaged operator
is deterministic and its fixed point can be located to machine precision.
"""

from __future__ import annotations

import numpy as np

from nierl.envs.twostage import DiscreteMdp
from nierl.values import ValueTables


class FixedBatchVTrace:
    """Padded-array form of a fixed episode batch for fast repeated passes."""

    def __init__(self, mdp: DiscreteMdp, behavior: np.ndarray, target: np.ndarray, n_episodes: int, rng: np.random.Generator):
        states, rewards, ratios, terminals = [], [], [], []
        for _ in range(n_episodes):
            traj = mdp.rollout(lambda s: behavior[s], rng)
            acts = np.array([st.action_id for st in traj.steps])
            states.append(traj.states)
            rewards.append(traj.rewards)
            ratios.append(target[traj.states, acts] / traj.behavior_probs)
            terminals.append(np.array([st.terminal for st in traj.steps]))
        self.n_states = mdp.n_states
        self.t_max = max(len(s) for s in states)
        n = n_episodes

        def pad(arrs, fill=0.0, dtype=float):
            out = np.full((n, self.t_max), fill, dtype=dtype)
            for i, a in enumerate(arrs):
                out[i, : len(a)] = a
            return out

        self.states = pad(states, fill=-1, dtype=int)
        self.rewards = pad(rewards)
        self.ratio = pad(ratios)
        terminal = pad(terminals, fill=False, dtype=bool)
        self.valid = self.states >= 0
        self.next_states = np.full((n, self.t_max), -1, dtype=int)
        self.next_states[:, :-1] = self.states[:, 1:]
        self.next_states[terminal] = -1
        self._safe = np.clip(self.states, 0, self.n_states - 1)
        self._safe_next = np.clip(self.next_states, 0, self.n_states - 1)

    def lookup(self, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        here = np.where(self.valid, table[self._safe], 0.0)
        nxt = np.where(self.next_states >= 0, table[self._safe_next], 0.0)
        return here, nxt

    def backward(self, h, g, rho, c, v_here, v_next) -> np.ndarray:
        excess = np.zeros(h.shape[0])
        targets = np.zeros_like(h)
        for t in range(self.t_max - 1, -1, -1):
            delta = rho[:, t] * (h[:, t] + g[:, t] * v_next[:, t] - v_here[:, t])
            correction = np.where(self.valid[:, t], delta + g[:, t] * c[:, t] * excess, 0.0)
            targets[:, t] = v_here[:, t] + correction
            excess = correction
        return targets

    def state_means(self, targets: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_states)
        for s in range(self.n_states):
            mask = self.valid & (self.states == s)
            out[s] = targets[mask].mean()
        return out

    def evaluate(
        self,
        phi: np.ndarray,
        gamma: float,
        rho_bar: float,
        c_bar: float,
        iterations: int = 60,
        eps: float = 1e-3,
    ) -> tuple[ValueTables, float]:
        """Iterate table <- mean trace target; returns tables and the final
        sup-norm change of one more application."""
        rho = np.minimum(rho_bar, self.ratio) * self.valid
        c = np.minimum(c_bar, self.ratio) * self.valid
        n_states = self.n_states
        v = np.full(n_states, 0.5)
        v_inf = np.full(n_states, 0.5)
        v1 = np.full(n_states, 0.5)
        v0 = np.full(n_states, 0.5)
        phis = np.where(self.valid, phi[self._safe], 0.0)
        gam = np.full_like(self.rewards, gamma) * self.valid
        residual = np.inf
        for _ in range(iterations):
            vh, vn = self.lookup(v)
            new_v = self.state_means(self.backward(self.rewards, gam, rho, c, vh, vn))
            vh, vn = self.lookup(v_inf)
            new_vinf = self.state_means(self.backward(phis, (1 - phis) * self.valid, rho, c, vh, vn))
            # conditional targets read the just-updated v and v_inf
            v_here_states = np.where(self.valid, new_v[self._safe], 0.0)
            vinf_states = np.where(self.valid, new_vinf[self._safe], 0.0)
            vinf_next = np.where(self.next_states >= 0, new_vinf[self._safe_next], 0.0)
            d1 = np.clip(vinf_states, eps, 1.0)
            h1 = (phis * v_here_states + (1 - phis) * vinf_next * self.rewards) / d1
            g1 = (1 - phis) * vinf_next * gamma / d1
            vh, vn = self.lookup(v1)
            new_v1 = self.state_means(self.backward(h1, g1 * self.valid, rho, c, vh, vn))
            d0 = np.clip(1.0 - vinf_states, eps, 1.0)
            h0 = (1 - phis) * (1 - vinf_next) * self.rewards / d0
            g0 = (1 - phis) * (1 - vinf_next) * gamma / d0
            vh, vn = self.lookup(v0)
            new_v0 = self.state_means(self.backward(h0, g0 * self.valid, rho, c, vh, vn))
            residual = max(
                np.abs(new_v - v).max(),
                np.abs(new_vinf - v_inf).max(),
                np.abs(new_v1 - v1).max(),
                np.abs(new_v0 - v0).max(),
            )
            v, v_inf, v1, v0 = new_v, new_vinf, new_v1, new_v0
        return ValueTables(v=v, v_inf=v_inf, v1=v1, v0=v0, gamma=gamma), float(residual)
