import json

import pytest

from hava.envelope import SpeedEnvelopeModel, dataset_fingerprint
from hava.junction import JunctionState, ScenarioConfig, kmh
from hava.mdp import Trajectory, TrajectoryStep


def make_traj(samples, cfg):
    """Synthetic junction trajectory from (pos, speed, tick) triples."""
    steps = []
    for pos, speed, tick in samples:
        obs = (pos, speed, cfg.junction_start_m - pos, cfg.cross_front_m(tick),
               kmh(cfg.cross_speed_ms), float(cfg.box_occupied(tick)), float(tick))
        steps.append(TrajectoryStep(obs, 1.0, 5, -1.0, -1.0))
    return Trajectory(steps=steps)


def state_for(cfg, pos, tick):
    return JunctionState(pos, 0.0, cfg.junction_start_m - pos, cfg.cross_front_m(tick),
                         kmh(cfg.cross_speed_ms), cfg.box_occupied(tick), tick)


@pytest.fixture()
def cfg():
    return ScenarioConfig()


def test_fit_rejects_empty_dataset(cfg):
    with pytest.raises(ValueError):
        SpeedEnvelopeModel.fit([], cfg)


def test_constant_speed_dataset_gives_degenerate_envelope(cfg):
    traj = make_traj([(2.0 * i, 30.0, i) for i in range(20)], cfg)
    model = SpeedEnvelopeModel.fit([traj], cfg)
    for i in range(20):
        assert model.envelope(2.0 * i, 1) == (30.0, 30.0)


def test_envelope_contains_the_dataset_maximum(cfg):
    slow = make_traj([(2.0 * i, 45.0, i) for i in range(10)], cfg)
    fast = make_traj([(2.0 * i, 55.0, i) for i in range(10)], cfg)
    model = SpeedEnvelopeModel.fit([slow, fast], cfg)
    assert any(hi == 55.0 for (_, hi) in model.bins.values())
    assert model.envelope(4.0, 1) == (45.0, 55.0)


def test_yield_phase_bins_reach_zero(cfg, human_dataset_small):
    model = SpeedEnvelopeModel.fit(human_dataset_small, cfg)
    lo, hi = model.envelope(cfg.junction_start_m - 1.0, 1)
    assert lo < 1e-9          # humans stand here while the stream passes
    assert hi < 25.0          # and only ever crawl through it


@pytest.fixture(scope="module")
def human_dataset_small():
    from hava.junction import DEFAULT_PROFILES, generate_human_dataset
    return generate_human_dataset(DEFAULT_PROFILES, 4, seed=0, cfg=ScenarioConfig())


def test_envelope_sound_on_training_set(cfg, human_dataset_small):
    model = SpeedEnvelopeModel.fit(human_dataset_small, cfg)
    for traj in human_dataset_small:
        for step in traj.steps:
            state = state_for(cfg, step.obs[0], int(step.obs[6]))
            assert model.dd_distance(step.obs[1], state) == 0.0


def test_envelope_monotone_under_dataset_growth(cfg, human_dataset_small):
    base = SpeedEnvelopeModel.fit(human_dataset_small[:10], cfg)
    grown = SpeedEnvelopeModel.fit(human_dataset_small, cfg)
    for key, (lo, hi) in base.bins.items():
        glo, ghi = grown.bins[key]
        assert glo <= lo and ghi >= hi


def test_fit_is_deterministic(cfg, human_dataset_small):
    a = SpeedEnvelopeModel.fit(human_dataset_small, cfg, dataset_hash="x")
    b = SpeedEnvelopeModel.fit(human_dataset_small, cfg, dataset_hash="x")
    assert a.to_json() == b.to_json()


def test_empty_bin_fallback_nearest_same_phase(cfg):
    traj = make_traj([(0.0, 10.0, 0), (2.5, 14.0, 1)], cfg)
    model = SpeedEnvelopeModel.fit([traj], cfg)
    # a far-downstream query falls back to the nearest visited bin
    assert model.envelope(50.0, 1) == (14.0, 14.0)
    assert model.envelope(0.5, 1) == (10.0, 10.0)
    assert (25, 1) in model.empty_bins()


def test_dd_distance_endpoint_rule(cfg):
    traj = make_traj([(10.0, 20.0, 5), (10.5, 40.0, 6)], cfg)
    model = SpeedEnvelopeModel.fit([traj], cfg)
    state = state_for(cfg, 10.0, 5)
    assert model.dd_distance(43.0, state) == pytest.approx(3.0)
    assert model.dd_distance(15.0, state) == pytest.approx(5.0)
    assert model.dd_distance(30.0, state) == 0.0
    interval = model.predict(state)
    assert (interval.lo, interval.hi) == (20.0, 40.0)


def test_json_round_trip(cfg, human_dataset_small, tmp_path):
    model = SpeedEnvelopeModel.fit(human_dataset_small, cfg, dataset_hash="abc123")
    path = tmp_path / "dd_model.json"
    model.save(path)
    loaded = SpeedEnvelopeModel.load(path)
    assert loaded.dataset_hash == "abc123"
    assert loaded.bins == model.bins
    assert loaded.to_json() == model.to_json()
    payload = json.loads(path.read_text())
    assert "bins" in payload and payload["n_samples"] == model.n_samples


def test_dataset_fingerprint_is_order_independent(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("one")
    b.write_text("two")
    assert dataset_fingerprint([a, b]) == dataset_fingerprint([b, a])
    before = dataset_fingerprint([a, b])
    b.write_text("two!")
    assert dataset_fingerprint([a, b]) != before
