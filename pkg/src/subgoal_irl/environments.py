"""Benchmark MDP families: obstacle grid-worlds and the car-parking world.

Both are deterministic: every (state, action) row of the transition model is
a point mass.  States are raw-rendered to binary images which also serve as
the feature rows consumed by the reward models.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .layouts import CarParkLayout, GridLayout
from .mdp import FeatureMatrix, TabularMdp, min_steps_to_goal

GRID_ACTIONS = ("up", "down", "left", "right")
GRID_DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))

CARPARK_ACTIONS = ("forward", "reverse", "rotate_left", "rotate_right")


class GridWorld:
    """Four-connected navigation grid; obstacle cells are not states."""

    def __init__(self, layout: GridLayout):
        self.layout = layout
        self.width = layout.width
        self.height = layout.height
        self.obstacles = layout.obstacles
        self.goal_cell = layout.goal
        free = [(x, y) for y in range(layout.height) for x in range(layout.width)
                if (x, y) not in layout.obstacles]
        if not free:
            raise ConfigError("grid has no free cells")
        self.cells = free
        self.state_of = {cell: i for i, cell in enumerate(free)}
        self.num_states = len(free)
        self.goal_state = self.state_of[layout.goal]
        self.start_state = self.state_of[layout.start] if layout.start else None
        self.eval_states = tuple(self.state_of[c] for c in layout.eval_cells)
        self.annotated_subgoals = tuple(self.state_of[c] for c in layout.subgoal_cells)
        self.subgoal_groups = tuple(tuple(self.state_of[c] for c in grp)
                                    for grp in layout.subgoal_groups)

    def cell(self, state: int):
        return self.cells[state]

    def move(self, cell, action: int):
        dx, dy = GRID_DELTAS[action]
        target = (cell[0] + dx, cell[1] + dy)
        return target if self.layout.is_free(target) else cell

    def render_state(self, state: int) -> np.ndarray:
        """(3, H, W) binary image: agent, obstacles, goal."""
        if not 0 <= state < self.num_states:
            raise InputError(f"state {state} out of range")
        img = np.zeros((3, self.height, self.width))
        x, y = self.cells[state]
        img[0, y, x] = 1.0
        for ox, oy in self.obstacles:
            img[1, oy, ox] = 1.0
        gx, gy = self.goal_cell
        img[2, gy, gx] = 1.0
        return img

    @property
    def image_shape(self):
        return (3, self.height, self.width)

    @property
    def extra_dim(self) -> int:
        return 0

    def default_horizon(self) -> int:
        return 2 * (self.width + self.height)


class CarParkWorld:
    """Position-plus-heading lattice with forward/reverse/rotate actions.

    A state is (position, heading); forward and reverse move one cell along
    the rounded heading direction when the target cell is free, otherwise
    the state is unchanged.  Rotations step the heading by one of K
    discrete increments and always succeed.
    """

    def __init__(self, layout: CarParkLayout):
        self.layout = layout
        self.width = layout.width
        self.height = layout.height
        self.headings = layout.headings
        self.obstacles = layout.obstacles
        free = [(x, y) for y in range(layout.height) for x in range(layout.width)
                if (x, y) not in layout.obstacles]
        self.positions = free
        self.pos_of = {cell: i for i, cell in enumerate(free)}
        self.num_states = len(free) * layout.headings
        angles = 2.0 * np.pi * np.arange(layout.headings) / layout.headings
        self._deltas = [(int(np.round(np.cos(a))), int(np.round(np.sin(a)))) for a in angles]
        self.goal_states = tuple(self.state_index(*layout.goal, h)
                                 for h in layout.goal_headings)
        self.goal_state = self.state_index(*layout.goal, layout.goal_heading)
        self.start_state = (self.state_index(*layout.start) if layout.start else None)
        self.eval_states = ()
        self.subgoal_groups = tuple(
            tuple(self.state_index(x, y, h) for x, y, h in grp)
            for grp in layout.subgoal_groups)

    def state_index(self, x: int, y: int, heading: int) -> int:
        return self.pos_of[(x, y)] * self.headings + heading

    def decompose(self, state: int):
        pos, heading = divmod(state, self.headings)
        x, y = self.positions[pos]
        return x, y, heading

    def _is_free(self, cell) -> bool:
        x, y = cell
        return (0 <= x < self.width and 0 <= y < self.height
                and cell not in self.obstacles)

    def move(self, state: int, action: int) -> int:
        x, y, h = self.decompose(state)
        if action == 0 or action == 1:
            dx, dy = self._deltas[h]
            if action == 1:
                dx, dy = -dx, -dy
            target = (x + dx, y + dy)
            if self._is_free(target):
                x, y = target
        elif action == 2:
            h = (h + 1) % self.headings
        elif action == 3:
            h = (h - 1) % self.headings
        else:
            raise InputError(f"action {action} out of range")
        return self.state_index(x, y, h)

    def render_state(self, state: int) -> np.ndarray:
        """(2, H, W) binary image: agent position, obstacles."""
        if not 0 <= state < self.num_states:
            raise InputError(f"state {state} out of range")
        img = np.zeros((2, self.height, self.width))
        x, y, _ = self.decompose(state)
        img[0, y, x] = 1.0
        for ox, oy in self.obstacles:
            img[1, oy, ox] = 1.0
        return img

    def heading_one_hot(self, state: int) -> np.ndarray:
        vec = np.zeros(self.headings)
        vec[state % self.headings] = 1.0
        return vec

    @property
    def image_shape(self):
        return (2, self.height, self.width)

    @property
    def extra_dim(self) -> int:
        return self.headings


@dataclass
class BuiltEnv:
    """An environment together with its MDP and per-state feature rows."""

    kind: str  # "grid" | "carpark"
    env: object
    mdp: TabularMdp
    features: FeatureMatrix

    @property
    def goal_state(self) -> int:
        return self.env.goal_state

    @property
    def start_state(self):
        return self.env.start_state

    @property
    def num_states(self) -> int:
        return self.env.num_states

    @property
    def goal_alternatives(self):
        """All states counting as task completion (one per acceptable heading)."""
        if self.kind == "carpark":
            return tuple(self.env.goal_states)
        return (self.env.goal_state,)

    def default_horizon(self) -> int:
        if self.kind == "grid":
            return self.env.default_horizon()
        dist = np.stack([min_steps_to_goal(self.mdp, g)
                         for g in self.goal_alternatives]).astype(float)
        dist[dist < 0] = np.inf
        nearest = dist.min(axis=0)
        return 2 * int(nearest[np.isfinite(nearest)].max())


def build_gridworld(width=None, height=None, obstacles=None, goal=None, *,
                    layout: GridLayout = None, discount: float = 0.99,
                    check_reachable: bool = True):
    """Deterministic grid MDP plus flattened 3-channel state images."""
    if layout is None:
        layout = GridLayout(width=width, height=height,
                            obstacles=frozenset(obstacles or ()), goal=tuple(goal))
    if layout.goal in layout.obstacles:
        raise ConfigError("goal lies inside an obstacle")
    env = GridWorld(layout)
    next_state = np.empty((env.num_states, len(GRID_ACTIONS)), dtype=np.int64)
    for s, cell in enumerate(env.cells):
        for a in range(len(GRID_ACTIONS)):
            next_state[s, a] = env.state_of[env.move(cell, a)]
    mdp = TabularMdp.deterministic(next_state, discount,
                                   terminal_states=(env.goal_state,))
    if check_reachable:
        dist = min_steps_to_goal(mdp, env.goal_state)
        if np.any(dist < 0):
            bad = env.cell(int(np.argmin(dist)))
            raise ConfigError(f"goal unreachable from free cell {bad}")
    rows = np.stack([env.render_state(s).reshape(-1) for s in range(env.num_states)])
    return env, mdp, FeatureMatrix(rows)


def build_carpark(layout: CarParkLayout, *, discount: float = 0.99,
                  check_reachable: bool = True):
    """Deterministic car-parking MDP; features are the flattened 2-channel
    position image concatenated with a one-hot heading vector."""
    env = CarParkWorld(layout)
    num_actions = len(CARPARK_ACTIONS)
    next_state = np.empty((env.num_states, num_actions), dtype=np.int64)
    for s in range(env.num_states):
        for a in range(num_actions):
            next_state[s, a] = env.move(s, a)
    mdp = TabularMdp.deterministic(next_state, discount,
                                   terminal_states=env.goal_states)
    if check_reachable:
        dist = np.stack([min_steps_to_goal(mdp, g) for g in env.goal_states])
        unreachable = np.all(dist < 0, axis=0)
        if np.any(unreachable):
            bad = env.decompose(int(np.argmax(unreachable)))
            raise ConfigError(f"goal unreachable from state {bad}")
    imgs = np.stack([env.render_state(s).reshape(-1) for s in range(env.num_states)])
    headings = np.zeros((env.num_states, env.headings))
    headings[np.arange(env.num_states), np.arange(env.num_states) % env.headings] = 1.0
    rows = np.concatenate([imgs, headings], axis=1)
    return env, mdp, FeatureMatrix(rows)


def build_from_layout(layout, **kwargs) -> BuiltEnv:
    if isinstance(layout, GridLayout):
        env, mdp, feats = build_gridworld(layout=layout, **kwargs)
        return BuiltEnv("grid", env, mdp, feats)
    if isinstance(layout, CarParkLayout):
        env, mdp, feats = build_carpark(layout, **kwargs)
        return BuiltEnv("carpark", env, mdp, feats)
    raise ConfigError(f"unsupported layout type {type(layout)!r}")
