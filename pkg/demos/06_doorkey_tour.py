"""A tour of the door-and-key gridworld.

Shows a generated layout, the breadth-first solution script replayed step
by step, and the observation encoding sizes."""

from nierl.envs.doorkey import (
    DoorKeyEnv,
    ascii_render,
    door_opened,
    encode_observation,
    plan_actions,
)

env = DoorKeyEnv(size=6)
state = env.reset(seed=3)
print("layout (W wall, K key, D locked door, G goal, ^>v< agent):")
print(ascii_render(state))
print(f"\nobservation: {env.obs_dim} features, {int(encode_observation(state).sum())} of them set")

script = plan_actions(state)
names = {0: "left", 1: "right", 2: "forward", 3: "pickup", 4: "toggle"}
print(f"\nplanner script ({len(script)} actions):", " ".join(names[a] for a in script))

reward = 0.0
for action in script:
    state, reward, done = env.step(state, action)
print("\nafter the script:")
print(ascii_render(state))
print(f"reward {reward}, door opened {door_opened(state)}, steps used {state.steps_elapsed}")
