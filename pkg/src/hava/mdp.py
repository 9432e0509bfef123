"""Environment and trajectory primitives: deterministic task environments,
trajectory recording with raw and weighted rewards, and exact discounted
returns."""

from __future__ import annotations

import abc
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence


class TaskEnv(abc.ABC):
    """A deterministic episodic environment with a discrete action table.

    Actions are proposed as indices into the action table; ``action_value``
    maps an index to the value the norm system reasons about (the move itself
    for grid worlds, the resulting target speed for driving).  ``step_value``
    executes such a value directly, which lets a safety layer execute a
    projected value that is not on the action grid.
    """

    n_actions: int
    obs_fields: tuple[str, ...]

    @abc.abstractmethod
    def reset(self):
        """Reset to the initial state and return it."""

    @abc.abstractmethod
    def action_value(self, state, action_id: int):
        """Value (in norm space) the agent proposes by picking ``action_id``."""

    @abc.abstractmethod
    def step_value(self, value):
        """Execute a norm-space value; returns (next_state, raw_reward, done)."""

    @abc.abstractmethod
    def observe(self, state) -> tuple[float, ...]:
        """Flatten a state to numbers matching ``obs_fields``."""

    @property
    @abc.abstractmethod
    def state(self):
        """Current state."""

    def step(self, action_id: int):
        """Propose and execute an action index with no norm layer in between."""
        return self.step_value(self.action_value(self.state, action_id))


@dataclass(frozen=True)
class TrajectoryStep:
    """One transition: the state and reputation the action was taken from,
    plus the task reward both before and after reputation weighting."""

    obs: tuple[float, ...]
    reputation: float
    action: int
    raw_reward: float
    reward: float


@dataclass
class Trajectory:
    """A finite episode under a discount factor strictly below 1."""

    steps: list[TrajectoryStep] = field(default_factory=list)
    discount: float = 0.99
    final_obs: tuple[float, ...] | None = None
    final_reputation: float = 1.0
    truncated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n_states(self) -> int:
        return len(self.steps) + (1 if self.final_obs is not None else 0)

    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    def raw_rewards(self) -> list[float]:
        return [s.raw_reward for s in self.steps]


def discounted_return(trajectory: Trajectory) -> float:
    """Sum of gamma^t * reward_t over the (weighted) reward stream."""
    total = 0.0
    factor = 1.0
    for step in trajectory.steps:
        total += factor * step.reward
        factor *= trajectory.discount
    return total


def rollout(env, policy: Callable, max_steps: int, discount: float = 0.99) -> Trajectory:
    """Run ``policy`` on a wrapped environment until termination or ``max_steps``.

    ``env`` follows the aligned-environment protocol: ``reset() -> (state, w)``
    and ``step(action) -> ((state, w), reward, raw_reward, done, outcome)``.
    The trajectory is truncated (and flagged) if the horizon is hit first.
    """
    state, w = env.reset()
    traj = Trajectory(discount=discount)
    done = False
    for _ in range(max_steps):
        action = policy(state, w)
        obs = env.observe(state)
        (next_state, w_next), reward, raw, done, _ = env.step(action)
        traj.steps.append(TrajectoryStep(obs, w, int(action), raw, reward))
        state, w = next_state, w_next
        if done:
            break
    traj.final_obs = env.observe(state)
    traj.final_reputation = w
    traj.truncated = not done and max_steps > 0
    return traj


CSV_FIXED_COLUMNS = ("t", "w", "action", "raw_reward", "weighted_reward")


def write_trajectory_csv(path: str | Path, trajectory: Trajectory, obs_fields: Sequence[str]) -> None:
    """One episode per file, header mandatory:
    t,<obs fields...>,w,action,raw_reward,weighted_reward."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *obs_fields, "w", "action", "raw_reward", "weighted_reward"])
        for t, s in enumerate(trajectory.steps):
            writer.writerow([t, *[repr(v) for v in s.obs], repr(s.reputation),
                             s.action, repr(s.raw_reward), repr(s.reward)])


def read_trajectory_csv(path: str | Path, discount: float = 0.99) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv` (step rows only)."""
    traj = Trajectory(discount=discount)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_obs = len(header) - len(CSV_FIXED_COLUMNS)
        if n_obs < 0 or header[0] != "t":
            raise ValueError(f"{path}: not a trajectory CSV (header {header!r})")
        for row in reader:
            obs = tuple(float(v) for v in row[1:1 + n_obs])
            w, action, raw, weighted = row[1 + n_obs:]
            traj.steps.append(TrajectoryStep(obs, float(w), int(action), float(raw), float(weighted)))
    return traj


def sequence_policy(actions: Sequence[int]) -> Callable:
    """Policy that replays a fixed action sequence, then repeats the last."""
    actions = list(actions)

    def policy(state, w, _it=iter(actions)):
        try:
            return next(_it)
        except StopIteration:
            return actions[-1]

    return policy


def backward_return(rewards: Sequence[float], discount: float) -> float:
    """Reference computation of the discounted return by tail accumulation."""
    acc = 0.0
    for r in reversed(rewards):
        acc = r + discount * acc
    return acc
