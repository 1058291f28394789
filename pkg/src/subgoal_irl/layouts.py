"""Layout files for the benchmark environments.

Grid layout format (text): first line ``W H``, then H rows of W characters:

    .   free cell
    #   obstacle
    G   goal (exactly one)
    S   canonical start (optional)
    *   human-suggested subgoal annotation (optional, free cell)
    E   evaluation-region start cell (optional, free cell)

After the grid rows, optional metadata lines are allowed:

    group x,y x,y ...   one subgoal slot whose members are interchangeable

Car-park configs are key-value lines (``positions_w``, ``positions_h``,
``headings``, ``goal_x``, ``goal_y``, ``goal_heading``, optional
``goal_headings``, ``start_x``/``start_y``/``start_heading`` and ``subgoal``
lines of x,y,h triples), followed by ``grid:`` and the obstacle rows in the
same character form.

The shipped grid layouts approximate the published two-room figures by hand;
they are labeled approximate in the repo docs and are not pixel-faithful.
"""

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError


@dataclass
class GridLayout:
    width: int
    height: int
    obstacles: frozenset
    goal: tuple
    start: tuple = None
    subgoal_cells: tuple = ()
    subgoal_groups: tuple = ()
    eval_cells: tuple = ()

    def is_free(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height and cell not in self.obstacles


@dataclass
class CarParkLayout:
    width: int
    height: int
    headings: int
    obstacles: frozenset
    goal: tuple                 # (x, y)
    goal_heading: int
    goal_headings: tuple = ()   # acceptable set; defaults to (goal_heading,)
    start: tuple = None         # (x, y, heading)
    subgoal_groups: tuple = ()  # tuples of (x, y, heading) triples

    def __post_init__(self):
        if not self.goal_headings:
            self.goal_headings = (self.goal_heading,)


def parse_grid_layout(text: str) -> GridLayout:
    lines = [ln.rstrip("\n") for ln in text.strip("\n").split("\n")]
    if not lines:
        raise ConfigError("empty layout")
    head = lines[0].split()
    if len(head) != 2:
        raise ConfigError(f"first line must be 'W H', got {lines[0]!r}")
    width, height = int(head[0]), int(head[1])
    if len(lines) < 1 + height:
        raise ConfigError(f"layout needs {height} grid rows, found {len(lines) - 1}")
    obstacles, subgoals, eval_cells = set(), [], []
    goal = start = None
    for y in range(height):
        row = lines[1 + y]
        if len(row) != width:
            raise ConfigError(f"row {y} has length {len(row)}, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                obstacles.add((x, y))
            elif ch == "G":
                if goal is not None:
                    raise ConfigError("multiple goal cells")
                goal = (x, y)
            elif ch == "S":
                if start is not None:
                    raise ConfigError("multiple start cells")
                start = (x, y)
            elif ch == "*":
                subgoals.append((x, y))
            elif ch == "E":
                eval_cells.append((x, y))
            elif ch != ".":
                raise ConfigError(f"unknown cell character {ch!r} at ({x}, {y})")
    if goal is None:
        raise ConfigError("layout has no goal cell")
    groups = []
    for ln in lines[1 + height:]:
        ln = ln.strip()
        if not ln:
            continue
        parts = ln.split()
        if parts[0] != "group":
            raise ConfigError(f"unknown metadata line {ln!r}")
        groups.append(tuple(_parse_cell(p) for p in parts[1:]))
    layout = GridLayout(width=width, height=height, obstacles=frozenset(obstacles),
                        goal=goal, start=start, subgoal_cells=tuple(subgoals),
                        subgoal_groups=tuple(groups), eval_cells=tuple(eval_cells))
    _check_grid(layout)
    return layout


def _parse_cell(token: str):
    x, y = token.split(",")
    return (int(x), int(y))


def _check_grid(layout: GridLayout):
    if layout.goal in layout.obstacles:
        raise ConfigError("goal lies inside an obstacle")
    for name, cells in (("start", [layout.start] if layout.start else []),
                        ("subgoal", layout.subgoal_cells),
                        ("eval", layout.eval_cells)):
        for cell in cells:
            if not layout.is_free(cell):
                raise ConfigError(f"{name} cell {cell} is not a free cell")


def format_grid_layout(layout: GridLayout) -> str:
    rows = []
    for y in range(layout.height):
        row = []
        for x in range(layout.width):
            cell = (x, y)
            if cell in layout.obstacles:
                row.append("#")
            elif cell == layout.goal:
                row.append("G")
            elif cell == layout.start:
                row.append("S")
            elif cell in layout.subgoal_cells:
                row.append("*")
            elif cell in layout.eval_cells:
                row.append("E")
            else:
                row.append(".")
        rows.append("".join(row))
    lines = [f"{layout.width} {layout.height}"] + rows
    for group in layout.subgoal_groups:
        lines.append("group " + " ".join(f"{x},{y}" for x, y in group))
    return "\n".join(lines) + "\n"


def parse_carpark_config(text: str) -> CarParkLayout:
    lines = text.strip("\n").split("\n")
    kv = {}
    subgoal_groups = []
    grid_rows = []
    in_grid = False
    for ln in lines:
        if in_grid:
            grid_rows.append(ln)
            continue
        ln = ln.strip()
        if not ln:
            continue
        if ln == "grid:":
            in_grid = True
            continue
        parts = ln.split()
        if parts[0] == "subgoal":
            subgoal_groups.append(tuple(_parse_triple(p) for p in parts[1:]))
        else:
            if len(parts) != 2:
                raise ConfigError(f"bad config line {ln!r}")
            kv[parts[0]] = parts[1]
    required = ("positions_w", "positions_h", "headings", "goal_x", "goal_y", "goal_heading")
    missing = [k for k in required if k not in kv]
    if missing:
        raise ConfigError(f"car-park config missing keys: {missing}")
    width, height = int(kv["positions_w"]), int(kv["positions_h"])
    headings = int(kv["headings"])
    if len(grid_rows) != height:
        raise ConfigError(f"car-park grid needs {height} rows, found {len(grid_rows)}")
    obstacles = set()
    for y, row in enumerate(grid_rows):
        if len(row) != width:
            raise ConfigError(f"car-park grid row {y} has length {len(row)}, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                obstacles.add((x, y))
            elif ch not in ".G S":
                raise ConfigError(f"unknown car-park cell {ch!r} at ({x}, {y})")
    goal = (int(kv["goal_x"]), int(kv["goal_y"]))
    goal_headings = tuple(int(t) for t in kv.get("goal_headings", "").split(",") if t) \
        or (int(kv["goal_heading"]),)
    start = None
    if "start_x" in kv:
        start = (int(kv["start_x"]), int(kv["start_y"]), int(kv.get("start_heading", 0)))
    layout = CarParkLayout(width=width, height=height, headings=headings,
                           obstacles=frozenset(obstacles), goal=goal,
                           goal_heading=int(kv["goal_heading"]),
                           goal_headings=goal_headings, start=start,
                           subgoal_groups=tuple(subgoal_groups))
    if layout.goal in layout.obstacles:
        raise ConfigError("car-park goal lies inside an obstacle")
    if not 0 <= layout.goal_heading < headings:
        raise ConfigError("goal_heading out of range")
    return layout


def _parse_triple(token: str):
    x, y, h = token.split(",")
    return (int(x), int(y), int(h))


# ---------------------------------------------------------------------------
# randomized layouts with articulation corridors by construction
# ---------------------------------------------------------------------------

def generate_room_layout(width: int, height: int, num_walls: int, seed: int,
                         eval_region: int = 3) -> GridLayout:
    """Rooms separated by full-span walls, each pierced by a single door.

    Walls are vertical and evenly spread, so every door is a cut cell and
    the oracle subgoal set is non-empty by construction.  The start sits in
    the leftmost room, the goal in the rightmost, and a small block of
    evaluation cells is annotated near the start.
    """
    if num_walls < 1 or width < 2 * num_walls + 3:
        raise ConfigError("grid too narrow for the requested wall count")
    rng = np.random.default_rng(seed)
    xs = [round((i + 1) * width / (num_walls + 1)) for i in range(num_walls)]
    obstacles = set()
    for wx in xs:
        door_y = int(rng.integers(0, height))
        for y in range(height):
            if y != door_y:
                obstacles.add((wx, y))
    start = (0, height - 1)
    goal = (width - 1, height - 1)
    eval_cells = [(x, y) for x in range(eval_region) for y in range(eval_region)
                  if (x, y) not in obstacles and (x, y) not in (start, goal)]
    return GridLayout(width=width, height=height, obstacles=frozenset(obstacles),
                      goal=goal, start=start, eval_cells=tuple(eval_cells))


# ---------------------------------------------------------------------------
# shipped layouts
# ---------------------------------------------------------------------------

def builtin_layout_path(name: str) -> Path:
    path = resources.files("subgoal_irl").joinpath("layouts", name)
    with resources.as_file(path) as p:
        return Path(p)


def load_grid_layout(name_or_path) -> GridLayout:
    return parse_grid_layout(_read(name_or_path))


def load_carpark_layout(name_or_path) -> CarParkLayout:
    return parse_carpark_config(_read(name_or_path))


def _read(name_or_path) -> str:
    path = Path(name_or_path)
    if not path.exists():
        candidate = builtin_layout_path(str(name_or_path))
        if candidate.exists():
            path = candidate
        else:
            raise ConfigError(f"layout not found: {name_or_path}")
    return path.read_text()


BUILTIN_GRIDS = ("grid12_tworoom.txt", "grid16_rooms.txt", "grid32_rooms.txt",
                 "grid8_corridor.txt")
BUILTIN_CARPARKS = ("carpark20x16.cfg",)
