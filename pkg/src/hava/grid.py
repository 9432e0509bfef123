"""7x7 lawn-avoidance grid world: in-bounds moves are the mandatory rules,
staying off the lawn is the social norm, and three fixed reference policies
of graded offensiveness demonstrate how the forgiveness rate reorders them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .alignment import ActionSet, transform_reward, update_reputation
from .mdp import TaskEnv

ACTIONS = ("up", "down", "left", "right")
DELTAS = ((0, 1), (0, -1), (-1, 0), (1, 0))
UP, DOWN, LEFT, RIGHT = range(4)

GOAL_REWARD = 100.0
STEP_REWARD = -1.0

# Reference layout. Rows are written top to bottom; (x, y) has y growing
# upward, so the map row r corresponds to y = height - 1 - r.
REFERENCE_MAP = """\
.......
...G...
.......
.LLL...
LLLLLL.
.S.....
.......
"""

# Step kinds for reference-policy evaluation.
CLEAN, LAWN, GOAL = "clean", "lawn", "goal"


@dataclass(frozen=True)
class GridState:
    x: int
    y: int
    terminal: bool = False


class GridWorld(TaskEnv):
    """Deterministic grid MDP with lawn tiles, a start and a goal."""

    obs_fields = ("x", "y")
    n_actions = 4

    def __init__(self, width: int, height: int, lawn: set, start: tuple, goal: tuple):
        if goal in lawn or start in lawn:
            raise ValueError("start and goal must not be lawn tiles")
        self.width = width
        self.height = height
        self.lawn = frozenset(lawn)
        self.start = start
        self.goal = goal
        self._state = GridState(*start)

    @classmethod
    def from_map(cls, text: str) -> "GridWorld":
        """Parse a map: `.` free, `L` lawn, `G` goal, `S` start."""
        rows = [r for r in text.splitlines() if r.strip()]
        height = len(rows)
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("map rows must have equal length")
        lawn, start, goal = set(), None, None
        for r, row in enumerate(rows):
            y = height - 1 - r
            for x, ch in enumerate(row):
                if ch == "L":
                    lawn.add((x, y))
                elif ch == "S":
                    start = (x, y)
                elif ch == "G":
                    goal = (x, y)
                elif ch != ".":
                    raise ValueError(f"unknown map character {ch!r}")
        if start is None or goal is None:
            raise ValueError("map must contain exactly one S and one G")
        return cls(width, height, lawn, start, goal)

    @classmethod
    def from_map_file(cls, path: str | Path) -> "GridWorld":
        return cls.from_map(Path(path).read_text())

    @classmethod
    def reference(cls) -> "GridWorld":
        return cls.from_map(REFERENCE_MAP)

    # -- environment protocol ------------------------------------------------

    @property
    def state(self) -> GridState:
        return self._state

    def reset(self) -> GridState:
        self._state = GridState(*self.start)
        return self._state

    def action_value(self, state: GridState, action_id: int) -> int:
        if not 0 <= action_id < 4:
            raise ValueError(f"action index out of range: {action_id}")
        return int(action_id)

    def step_value(self, action_id: int):
        state = self._state
        if state.terminal:
            raise ValueError("terminal states admit no further transitions")
        cell = self._successor((state.x, state.y), action_id)
        reward = self.task_reward(state, action_id)
        terminal = cell == self.goal
        self._state = GridState(cell[0], cell[1], terminal)
        return self._state, reward, terminal

    def observe(self, state: GridState) -> tuple[float, ...]:
        return (float(state.x), float(state.y))

    # -- geometry and norms --------------------------------------------------

    def in_bounds(self, cell: tuple) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def _successor(self, cell: tuple, action_id: int) -> tuple:
        dx, dy = DELTAS[action_id]
        nxt = (cell[0] + dx, cell[1] + dy)
        # Out-of-bounds moves are forbidden by the rules; if one is executed
        # anyway (no projection in the data-driven ablation) it bumps the wall.
        return nxt if self.in_bounds(nxt) else cell

    def task_reward(self, state: GridState, action_id: int) -> float:
        """100 when the transition reaches the goal, -1 otherwise; the lawn is
        invisible to the task reward."""
        nxt = self._successor((state.x, state.y), action_id)
        return GOAL_REWARD if nxt == self.goal else STEP_REWARD

    def rb(self, state: GridState) -> ActionSet:
        """Moves whose successor stays inside the grid."""
        cell = (state.x, state.y)
        return ActionSet.discrete(
            a for a, (dx, dy) in enumerate(DELTAS)
            if self.in_bounds((cell[0] + dx, cell[1] + dy))
        )

    def dd(self, state: GridState) -> ActionSet:
        """In-bounds moves whose successor is not a lawn tile (may be empty
        in the middle of the lawn: a norm conflict)."""
        cell = (state.x, state.y)
        return ActionSet.discrete(
            a for a in self.rb(state).members
            if (cell[0] + DELTAS[a][0], cell[1] + DELTAS[a][1]) not in self.lawn
        )

    def cell_index(self, state: GridState) -> int:
        return state.y * self.width + state.x

    def walk(self, actions: Sequence[int]) -> list[tuple]:
        """Cells visited by an action sequence from the start (bumps stay)."""
        cell = self.start
        cells = []
        for a in actions:
            cell = self._successor(cell, a)
            cells.append(cell)
        return cells


def grid_rb(world: GridWorld, state: GridState) -> ActionSet:
    return world.rb(state)


def grid_dd(world: GridWorld, state: GridState) -> ActionSet:
    return world.dd(state)


# -- reference policies -------------------------------------------------------


@dataclass(frozen=True)
class GridPolicy:
    """A fixed reference policy: its per-step norm pattern, and, where a
    literal path on the reference map realizes that pattern, the actions.

    The most offending policy cuts straight through the lawn and recovers; the
    mildly offending one clips a single lawn tile mid-route; the compliant one
    never touches the lawn, so its return cannot depend on the forgiveness
    rate.  Returns are decided entirely by the pattern (which tiles of which
    kind are stepped on, and when), not by the particular coordinates.
    """

    name: str
    pattern: tuple[str, ...]
    actions: tuple[int, ...] | None = None


PI_R = GridPolicy(
    name="pi_r",
    pattern=(LAWN, LAWN, CLEAN, CLEAN, CLEAN, GOAL),
    actions=(UP, UP, UP, UP, RIGHT, RIGHT),
)
PI_Y = GridPolicy(
    name="pi_y",
    pattern=(CLEAN, CLEAN, CLEAN, LAWN) + (CLEAN,) * 7 + (GOAL,),
    actions=(RIGHT, RIGHT, RIGHT, UP, UP, RIGHT, UP, UP, UP, LEFT, LEFT, DOWN),
)
# The compliant reference policy is an 18-clean-steps-then-goal pattern; no
# lawn-free path of odd length can exist between the reference start and goal
# (step parity), so the pattern is the fixture and a same-length path is not.
PI_G = GridPolicy(
    name="pi_g",
    pattern=(CLEAN,) * 18 + (GOAL,),
    actions=None,
)
# Lawn-free demonstration route on the reference map (the shortest detour
# around the lawn), used wherever an actual lawn-avoiding walk is needed.
PI_G_DEMO_ACTIONS = (RIGHT, RIGHT, RIGHT, RIGHT, RIGHT, UP, UP, LEFT, LEFT, UP, UP, LEFT)

REFERENCE_POLICIES = {p.name: p for p in (PI_R, PI_Y, PI_G)}
TABLE_ALPHAS = (10.0, 5.0, 4.0, 2.0, 1.6, 1.2, 1.0)


def evaluate_pattern(pattern: Sequence[str], alpha: float, gamma: float = 0.99) -> float:
    """Exact discounted return of a step pattern under the alignment scheme.

    Each step is fully aligned unless it lands on lawn (indicator rule for the
    discrete action space), reputation follows the forgiveness dynamics, and
    rewards are -1 per step and 100 on the goal, weighted by the post-update
    reputation.
    """
    w = 1.0
    total = 0.0
    factor = 1.0
    for kind in pattern:
        delta = 0.0 if kind == LAWN else 1.0
        w = update_reputation(w, delta, alpha)
        raw = GOAL_REWARD if kind == GOAL else STEP_REWARD
        total += factor * transform_reward(raw, w)
        factor *= gamma
    return total


def pattern_of_walk(world: GridWorld, actions: Sequence[int]) -> tuple[str, ...]:
    """Derive the norm pattern a literal walk produces on a given world."""
    kinds = []
    for cell in world.walk(actions):
        if cell == world.goal:
            kinds.append(GOAL)
        elif cell in world.lawn:
            kinds.append(LAWN)
        else:
            kinds.append(CLEAN)
    return tuple(kinds)


def evaluate_reference_policies(alpha: float, gamma: float = 0.99) -> dict[str, float]:
    """Returns of the three reference policies at one forgiveness rate."""
    return {name: evaluate_pattern(p.pattern, alpha, gamma)
            for name, p in REFERENCE_POLICIES.items()}


def reference_table(alphas: Sequence[float] = TABLE_ALPHAS, gamma: float = 0.99) -> list[dict]:
    """Per-alpha returns of the reference policies plus the argmax policy."""
    rows = []
    for alpha in alphas:
        returns = evaluate_reference_policies(alpha, gamma)
        best = max(returns, key=returns.get)
        rows.append({"alpha": alpha, **returns, "best": best,
                     "recovery_steps": None})
    return rows
