"""Tabular Q-learning over the reputation-augmented state, with epsilon-greedy
exploration and periodic greedy snapshots for evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .mdp import Trajectory, TrajectoryStep


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1000
    max_steps: int = 400
    learning_rate: float = 0.2
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_frac: float = 0.6
    gamma: float = 0.99
    reputation_buckets: int = 11
    q_init: float = 0.0
    seed: int = 0
    snapshot_window: int = 0       # evaluate greedy snapshots over the last N episodes
    snapshot_every: int = 50

    def __post_init__(self):
        if self.episodes < 0 or self.max_steps <= 0:
            raise ValueError("episodes must be >= 0 and max_steps positive")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning rate must be in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if self.reputation_buckets < 2:
            raise ValueError("need at least 2 reputation buckets")

    def epsilon_at(self, episode: int) -> float:
        horizon = max(1.0, self.episodes * self.epsilon_decay_frac)
        span = self.epsilon_start - self.epsilon_end
        return max(self.epsilon_end, self.epsilon_start - span * episode / horizon)


class QTable:
    """State-key -> per-action value estimates, lazily initialized."""

    def __init__(self, n_actions: int, init: float = 0.0):
        self.n_actions = n_actions
        self.init = init
        self.table: dict = {}

    def row(self, key) -> list[float]:
        values = self.table.get(key)
        if values is None:
            values = [self.init] * self.n_actions
            self.table[key] = values
        return values

    def peek(self, key) -> list[float]:
        return self.table.get(key, [self.init] * self.n_actions)

    def best_action(self, key) -> int:
        values = self.peek(key)
        return values.index(max(values))  # ties go to the lowest index

    def __len__(self) -> int:
        return len(self.table)

    def to_json(self) -> str:
        payload = {
            "n_actions": self.n_actions,
            "init": self.init,
            "entries": {json.dumps(key): values for key, values in sorted(self.table.items())},
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "QTable":
        payload = json.loads(text)
        qt = cls(payload["n_actions"], payload["init"])
        for key, values in payload["entries"].items():
            qt.table[tuple(json.loads(key))] = list(values)
        return qt

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        return cls.from_json(Path(path).read_text())


@dataclass
class CurvePoint:
    episode: int
    finish_time: int
    ret: float
    mean_w: float
    collided: bool = False


@dataclass
class TrainResult:
    qtable: QTable
    curve: list[CurvePoint] = field(default_factory=list)
    snapshots: list[tuple[int, Trajectory]] = field(default_factory=list)


def grid_discretizer(world, w_buckets: int = 11) -> Callable:
    """(cell, reputation bucket) key for grid states."""
    scale = w_buckets - 1

    def key(state, w: float):
        return (state.x, state.y, int(w * scale + 0.5))

    return key


def junction_discretizer(cfg, w_buckets: int = 11) -> Callable:
    """(2 m position bucket, speed bucket, stream phase, reputation bucket)."""
    scale = w_buckets - 1

    def key(state, w: float):
        return (int(state.ego_position // 2.0), int(state.ego_speed + 0.5),
                cfg.phase(state.time_step), int(w * scale + 0.5))

    return key


def train(env, discretize: Callable, cfg: TrainConfig) -> TrainResult:
    """Q-learning on a wrapped environment with reputation-weighted rewards.

    Deterministic given the seed.  When a snapshot window is configured, the
    greedy policy is rolled out (without touching the exploration stream) at
    regular intervals over the final episodes, and those trajectories are kept
    for evaluation.
    """
    rng = np.random.default_rng(cfg.seed)
    qt = QTable(env.n_actions, cfg.q_init)
    result = TrainResult(qtable=qt)
    gamma = cfg.gamma
    snap_from = cfg.episodes - cfg.snapshot_window if cfg.snapshot_window else cfg.episodes

    for episode in range(cfg.episodes):
        eps = cfg.epsilon_at(episode)
        state, w = env.reset()
        ret, factor, w_total = 0.0, 1.0, 0.0
        done = False
        steps = 0
        while steps < cfg.max_steps:
            key = discretize(state, w)
            values = qt.row(key)
            if rng.random() < eps:
                action = int(rng.integers(0, env.n_actions))
            else:
                action = values.index(max(values))
            (next_state, w_next), reward, _raw, done, _ = env.step(action)
            ret += factor * reward
            factor *= gamma
            w_total += w_next
            next_values = qt.row(discretize(next_state, w_next))
            target = reward if done else reward + gamma * max(next_values)
            values[action] += cfg.learning_rate * (target - values[action])
            if not math.isfinite(values[action]):
                raise TrainingDiverged(
                    f"non-finite value at {key} action {action} in episode {episode}")
            state, w = next_state, w_next
            steps += 1
            if done:
                break
        result.curve.append(CurvePoint(
            episode=episode,
            finish_time=steps if done else cfg.max_steps,
            ret=ret,
            mean_w=w_total / max(steps, 1),
            collided=bool(getattr(env.env, "collided", False)),
        ))
        if episode >= snap_from and (episode - snap_from) % cfg.snapshot_every == 0:
            result.snapshots.append(
                (episode, greedy_rollout(env, qt, discretize, cfg.max_steps, gamma)))
    return result


def greedy_policy(qtable: QTable, discretize: Callable) -> Callable:
    """Argmax policy over the learned values; ties pick the lowest action."""

    def policy(state, w: float) -> int:
        return qtable.best_action(discretize(state, w))

    return policy


def greedy_rollout(env, qtable: QTable, discretize: Callable,
                   max_steps: int, discount: float = 0.99) -> Trajectory:
    """Deterministic rollout of the greedy policy on a wrapped environment."""
    state, w = env.reset()
    traj = Trajectory(discount=discount)
    done = False
    for _ in range(max_steps):
        action = qtable.best_action(discretize(state, w))
        obs = env.observe(state)
        (next_state, w_next), reward, raw, done, _ = env.step(action)
        traj.steps.append(TrajectoryStep(obs, w, action, raw, reward))
        state, w = next_state, w_next
        if done:
            break
    traj.final_obs = env.observe(state)
    traj.final_reputation = w
    traj.truncated = not done
    return traj
