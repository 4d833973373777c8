"""Door-and-key gridworld with dense one-hot observations.

A vertical wall with a single locked door splits the grid; the agent and
the key start in the left region, the goal in the right. The agent must
pick the key up, open the door and reach the goal within the step cap for
a terminal reward of 1. Layouts are generated deterministically per seed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .base import InvalidConfigError, InvalidStateError

# tile channel vocabulary (standard gridworld object set; ball/box/floor/unseen stay unused)
UNSEEN, EMPTY, WALL, FLOOR, DOOR_LOCKED, DOOR_OPEN, KEY, BALL, BOX, GOAL, AGENT = range(11)
N_TILE_CHANNELS = 11

TURN_LEFT, TURN_RIGHT, FORWARD, PICKUP, TOGGLE = range(5)
ACTIONS = (TURN_LEFT, TURN_RIGHT, FORWARD, PICKUP, TOGGLE)
N_ACTIONS = 5

# agent orientations: 0 right, 1 down, 2 left, 3 up
_DIR_VECTORS = ((0, 1), (1, 0), (0, -1), (-1, 0))
_DIR_CHARS = ">v<^"

DEFAULT_SIZE = 6
DEFAULT_MAX_STEPS = 60


@dataclass(frozen=True)
class DoorKeyState:
    grid: np.ndarray
    agent_pos: tuple[int, int]
    agent_dir: int
    carrying_key: bool
    steps_elapsed: int
    done: bool = False
    max_steps: int = DEFAULT_MAX_STEPS

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def front_cell(self) -> tuple[int, int]:
        dr, dc = _DIR_VECTORS[self.agent_dir]
        return self.agent_pos[0] + dr, self.agent_pos[1] + dc

    def key(self) -> tuple:
        """Hashable summary; the grid only varies through key pickup and door toggle."""
        door = np.argwhere(self.grid == DOOR_OPEN)
        return (self.agent_pos, self.agent_dir, self.carrying_key, len(door) > 0)


def doorkey_reset(seed: int, size: int = DEFAULT_SIZE, max_steps: int = DEFAULT_MAX_STEPS) -> DoorKeyState:
    """Generate a solvable instance: wall with one door, key and agent left, goal right."""
    if size < 5:
        raise InvalidConfigError(f"grid size must be at least 5, got {size}")
    rng = np.random.default_rng(seed)
    grid = np.full((size, size), EMPTY, dtype=np.int8)
    grid[0, :] = WALL
    grid[-1, :] = WALL
    grid[:, 0] = WALL
    grid[:, -1] = WALL

    wall_col = int(rng.integers(2, size - 2))
    grid[:, wall_col] = WALL
    door_row = int(rng.integers(1, size - 1))
    grid[door_row, wall_col] = DOOR_LOCKED

    left_cells = [(r, c) for r in range(1, size - 1) for c in range(1, wall_col)]
    right_cells = [(r, c) for r in range(1, size - 1) for c in range(wall_col + 1, size - 1)]
    picks = rng.choice(len(left_cells), size=2, replace=False)
    key_pos = left_cells[picks[0]]
    agent_pos = left_cells[picks[1]]
    goal_pos = right_cells[int(rng.integers(0, len(right_cells)))]
    grid[key_pos] = KEY
    grid[goal_pos] = GOAL

    return DoorKeyState(
        grid=grid,
        agent_pos=agent_pos,
        agent_dir=int(rng.integers(0, 4)),
        carrying_key=False,
        steps_elapsed=0,
        done=False,
        max_steps=max_steps,
    )


def doorkey_step(state: DoorKeyState, action: int) -> tuple[DoorKeyState, float, bool]:
    """Apply one action; reaching the goal gives reward 1 and ends the episode,
    as does exhausting the step cap (reward 0)."""
    if state.done:
        raise InvalidStateError("cannot step a finished episode")
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action}")

    grid = state.grid
    agent_pos = state.agent_pos
    agent_dir = state.agent_dir
    carrying = state.carrying_key
    reward = 0.0

    if action == TURN_LEFT:
        agent_dir = (agent_dir - 1) % 4
    elif action == TURN_RIGHT:
        agent_dir = (agent_dir + 1) % 4
    elif action == FORWARD:
        front = state.front_cell()
        tile = grid[front]
        if tile in (EMPTY, DOOR_OPEN, GOAL):
            agent_pos = front
            if tile == GOAL:
                reward = 1.0
    elif action == PICKUP:
        front = state.front_cell()
        if grid[front] == KEY:
            grid = grid.copy()
            grid[front] = EMPTY
            carrying = True
    elif action == TOGGLE:
        front = state.front_cell()
        if grid[front] == DOOR_LOCKED and carrying:
            grid = grid.copy()
            grid[front] = DOOR_OPEN

    steps = state.steps_elapsed + 1
    done = reward > 0 or steps >= state.max_steps
    next_state = DoorKeyState(
        grid=grid,
        agent_pos=agent_pos,
        agent_dir=agent_dir,
        carrying_key=carrying,
        steps_elapsed=steps,
        done=done,
        max_steps=state.max_steps,
    )
    return next_state, reward, done


def observation_dim(size: int) -> int:
    return size * size * N_TILE_CHANNELS + 4


def encode_observation(state: DoorKeyState) -> np.ndarray:
    """Flat one-hot encoding: 11 channels per tile (agent channel overrides the
    agent's tile) plus a 4-way orientation block."""
    n = state.size
    channels = state.grid.astype(np.int64).ravel().copy()
    agent_idx = state.agent_pos[0] * n + state.agent_pos[1]
    channels[agent_idx] = AGENT
    features = np.zeros(n * n * N_TILE_CHANNELS + 4)
    features[np.arange(n * n) * N_TILE_CHANNELS + channels] = 1.0
    features[n * n * N_TILE_CHANNELS + state.agent_dir] = 1.0
    return features


def ascii_render(state: DoorKeyState) -> str:
    """Debug view: W wall, K key, D/d locked/open door, G goal, ^>v< agent."""
    chars = {EMPTY: ".", WALL: "W", KEY: "K", DOOR_LOCKED: "D", DOOR_OPEN: "d", GOAL: "G"}
    rows = []
    for r in range(state.size):
        row = []
        for c in range(state.size):
            if (r, c) == state.agent_pos:
                row.append(_DIR_CHARS[state.agent_dir])
            else:
                row.append(chars.get(int(state.grid[r, c]), "?"))
        rows.append("".join(row))
    return "\n".join(rows)


def door_opened(state: DoorKeyState) -> bool:
    return bool((state.grid == DOOR_OPEN).any())


def plan_actions(state: DoorKeyState) -> Optional[list[int]]:
    """Breadth-first action script to the goal, ignoring the step cap.

    Searches over (position, direction, carrying, door-open); the static
    parts of the layout are read from the grid. Returns None when the goal
    is unreachable.
    """
    size = state.size
    base = state.grid
    key_cells = {tuple(x) for x in np.argwhere(base == KEY)}
    door_cells = {tuple(x) for x in np.argwhere((base == DOOR_LOCKED) | (base == DOOR_OPEN))}
    door_open_init = bool((base == DOOR_OPEN).any())

    def passable(cell, carrying, door_open):
        tile = base[cell]
        if tile == WALL:
            return False
        if tuple(cell) in key_cells and not carrying:
            return False
        if tuple(cell) in door_cells and not door_open:
            return False
        return True

    start = (state.agent_pos, state.agent_dir, state.carrying_key, door_open_init)
    queue = deque([start])
    parents: dict[tuple, tuple] = {start: None}
    while queue:
        node = queue.popleft()
        pos, direction, carrying, is_open = node
        if base[pos] == GOAL:
            actions = []
            cursor = node
            while parents[cursor] is not None:
                cursor, action = parents[cursor]
                actions.append(action)
            return actions[::-1]
        dr, dc = _DIR_VECTORS[direction]
        front = (pos[0] + dr, pos[1] + dc)
        candidates = [
            ((pos, (direction - 1) % 4, carrying, is_open), TURN_LEFT),
            ((pos, (direction + 1) % 4, carrying, is_open), TURN_RIGHT),
        ]
        if 0 <= front[0] < size and 0 <= front[1] < size:
            if passable(front, carrying, is_open):
                candidates.append(((front, direction, carrying, is_open), FORWARD))
            if front in key_cells and not carrying:
                candidates.append(((pos, direction, True, is_open), PICKUP))
            if front in door_cells and carrying and not is_open:
                candidates.append(((pos, direction, carrying, True), TOGGLE))
        for nxt, action in candidates:
            if nxt not in parents:
                parents[nxt] = (node, action)
                queue.append(nxt)
    return None


class DoorKeyEnv:
    """Thin stateless wrapper bundling the layout parameters."""

    def __init__(self, size: int = DEFAULT_SIZE, max_steps: int = DEFAULT_MAX_STEPS):
        if size < 5:
            raise InvalidConfigError(f"grid size must be at least 5, got {size}")
        self.size = size
        self.max_steps = max_steps
        self.n_actions = N_ACTIONS
        self.obs_dim = observation_dim(size)

    def reset(self, seed: int) -> DoorKeyState:
        return doorkey_reset(seed, self.size, self.max_steps)

    def step(self, state: DoorKeyState, action: int):
        return doorkey_step(state, action)

    def encode(self, state: DoorKeyState) -> np.ndarray:
        return encode_observation(state)
