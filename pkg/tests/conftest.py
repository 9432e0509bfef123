"""Shared fixtures.  The junction training matrix is expensive (~10 min) and
is computed once per session, lazily, for the tests that need it."""

from __future__ import annotations

import numpy as np
import pytest

from hava.alignment import AlignedEnv, AlignmentValue
from hava.envelope import SpeedEnvelopeModel
from hava.junction import (DEFAULT_PROFILES, JunctionEnv, ScenarioConfig,
                           generate_human_dataset)
from hava.qlearn import TrainConfig, junction_discretizer, train

JUNCTION_TRAIN = dict(episodes=10_000, max_steps=400, learning_rate=0.2,
                      epsilon_start=1.0, epsilon_end=0.03, epsilon_decay_frac=0.6,
                      snapshot_window=500, snapshot_every=50)
HAVA_SEEDS = (0, 1, 2, 3, 4)
ABLATION_SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def scenario() -> ScenarioConfig:
    return ScenarioConfig()


@pytest.fixture(scope="session")
def human_dataset(scenario):
    return generate_human_dataset(DEFAULT_PROFILES, 20, seed=0, cfg=scenario)


@pytest.fixture(scope="session")
def envelope_model(scenario, human_dataset):
    return SpeedEnvelopeModel.fit(human_dataset, scenario)


def make_junction_env(scenario, envelope_model, variant: str, alpha: float,
                      tau: float = 1.0):
    env = JunctionEnv(scenario)
    if variant == "hava":
        av = AlignmentValue.hava(env.rb, envelope_model.as_norm(), tau, alpha)
    elif variant == "rb-only":
        av = AlignmentValue.rb_only(env.rb, tau, alpha)
    elif variant == "dd-only":
        av = AlignmentValue.dd_only(envelope_model.as_norm(), tau, alpha)
    else:
        raise ValueError(variant)
    return env, AlignedEnv(env, av)


def train_junction(scenario, envelope_model, variant: str, alpha: float, seed: int):
    _, env = make_junction_env(scenario, envelope_model, variant, alpha)
    cfg = TrainConfig(seed=seed, **JUNCTION_TRAIN)
    return train(env, junction_discretizer(scenario), cfg)


@pytest.fixture(scope="session")
def trained_matrix(scenario, envelope_model):
    """Snapshot trajectories of the trained agents for every configuration the
    alignment comparison needs: per (variant, alpha), a list per seed of the
    greedy trajectories snapshotted over the last 500 training episodes."""
    matrix = {}
    for variant, alpha, seeds in (
        ("hava", 0.1, HAVA_SEEDS),
        ("hava", 10.0, HAVA_SEEDS),
        ("rb-only", 0.1, ABLATION_SEEDS),
        ("dd-only", 0.1, ABLATION_SEEDS),
    ):
        per_seed = []
        for seed in seeds:
            result = train_junction(scenario, envelope_model, variant, alpha, seed)
            per_seed.append([traj for _, traj in result.snapshots])
        matrix[(variant, alpha)] = per_seed
    return matrix


def snapshot_finishes(per_seed) -> list[list[int]]:
    return [[len(t.steps) for t in snaps] for snaps in per_seed]


def pooled(per_seed):
    return [t for snaps in per_seed for t in snaps]


def pooled_finishes(per_seed) -> list[int]:
    return [len(t.steps) for t in pooled(per_seed)]


def seed_mean_finishes(per_seed) -> list[float]:
    return [float(np.mean([len(t.steps) for t in snaps])) for snaps in per_seed]
