"""Episodes, discounted returns and the replay ring.

Builds a few hand-made trajectories, checks the return recursion against the
episode outcome, and shows FIFO eviction plus seeded sampling.
"""

import numpy as np

from nierl.mdp import ReplayBuffer, Step, Trajectory, compute_returns, trajectory_to_json

# an episode: two quiet steps, then a rewarded terminal step
steps = [
    Step(state_id=0, action_id=None, behavior_prob=1.0, reward=0.0),
    Step(state_id=1, action_id=None, behavior_prob=1.0, reward=0.0),
    Step(state_id=2, action_id=None, behavior_prob=1.0, reward=1.0, terminal=True),
]
traj = Trajectory.from_steps(steps, gamma=0.5, episode_seed=7)

print("rewards:        ", traj.rewards)
print("returns (g=0.5):", compute_returns(traj, 0.5))
print("outcome Y:      ", traj.outcome_y, "(equals the first return)")
print("as JSON:        ", trajectory_to_json(traj))

# the replay ring keeps whole episodes and evicts oldest-first
buffer = ReplayBuffer(capacity=3)
for seed in range(5):
    buffer.push(Trajectory.from_steps(steps, gamma=0.5, episode_seed=seed))
print("\nbuffer holds seeds:", [t.episode_seed for t in buffer.entries()], "(0 and 1 evicted)")

rng = np.random.default_rng(0)
sample = buffer.sample(4, rng)
print("sample of 4 (with replacement):", [t.episode_seed for t in sample])
sample_again = buffer.sample(4, np.random.default_rng(0))
print("same seed, same sample:        ", [t.episode_seed for t in sample_again])
