"""Off-policy return estimation with truncated importance weights.

Collects episodes from a uniform behavior policy on the two-action chain
variant and estimates the values of a different target policy. Generous
truncation recovers the truth; tight truncation converges to a biased
point, and both converge."""

import numpy as np

from nierl.envs.twostage import TwoStageConfig, twostage_mdp
from nierl.values import exact_solve
from nierl.vtrace import steps_standard, vtrace_targets

cfg = TwoStageConfig()
mdp = twostage_mdp(cfg)
target = np.tile([0.9, 0.1], (mdp.n_states, 1))
behavior = np.tile([0.5, 0.5], (mdp.n_states, 1))
truth = exact_solve(mdp.induced_kernel(target), cfg.second_set_indicator(), cfg.gamma).tables.v

rng = np.random.default_rng(0)
episodes = [mdp.rollout(lambda s: behavior[s], rng) for _ in range(20_000)]

for bar in (100.0, 1.0):
    v = np.full(mdp.n_states, 0.5)
    for iteration in range(40):
        sums = np.zeros(mdp.n_states)
        counts = np.zeros(mdp.n_states)
        for traj in episodes:
            states = traj.states
            actions = np.array([s.action_id for s in traj.steps])
            ratio = target[states, actions] / traj.behavior_probs
            rho = np.minimum(bar, ratio)
            v_here = v[states]
            v_next = np.append(v[states[1:]], 0.0)
            v_next[[s.terminal for s in traj.steps]] = 0.0
            targets = vtrace_targets(steps_standard(traj.rewards, v_here, v_next, cfg.gamma, rho, rho))
            np.add.at(sums, states, targets)
            np.add.at(counts, states, 1)
        v = sums / counts
    print(f"truncation {bar:5.1f}: estimate {v.round(4)}  truth {truth.round(4)}  max err {np.abs(v - truth).max():.4f}")
