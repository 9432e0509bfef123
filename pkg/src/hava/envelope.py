"""Data-driven speed norms for the junction: a binned min/max envelope fitted
on the human dataset.

The regression target is the minimal and maximal socially-normal speed per
situation.  Situations are keyed by a coarse position bucket and by whether
the priority stream has cleared the junction yet, which separates the waiting
norms from the moving-off norms at the same spot.  The envelope is exact on
its training set by construction and deterministic, and it hides behind the
same state -> permitted-interval interface any other norm model could use.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .alignment import ActionSet
from .junction import JunctionState, ScenarioConfig
from .mdp import Trajectory

# Trajectory observation layout (see JunctionEnv.obs_fields)
_POS, _SPEED, _TICK = 0, 1, 6


@dataclass(frozen=True)
class BinConfig:
    bin_meters: float = 2.0
    phases: int = 2


class SpeedEnvelopeModel:
    """Per-bin [v_min, v_max] speed envelope with nearest-bin fallback."""

    def __init__(self, bins: dict, bin_config: BinConfig, cfg: ScenarioConfig,
                 dataset_hash: str = "", n_samples: int = 0):
        self.bins = dict(bins)
        self.bin_config = bin_config
        self.cfg = cfg
        self.dataset_hash = dataset_hash
        self.n_samples = n_samples
        self._dense = self._densify()

    # -- fitting ---------------------------------------------------------------

    @classmethod
    def fit(cls, dataset: Sequence[Trajectory], cfg: ScenarioConfig | None = None,
            bin_config: BinConfig | None = None, dataset_hash: str = "") -> "SpeedEnvelopeModel":
        """Envelope regression: per bin, the min and max speed observed there."""
        if not dataset:
            raise ValueError("cannot fit an envelope on an empty dataset")
        cfg = cfg or ScenarioConfig()
        bin_config = bin_config or BinConfig()
        bins: dict = {}
        n = 0
        for traj in dataset:
            for step in traj.steps:
                pos, speed, tick = step.obs[_POS], step.obs[_SPEED], int(step.obs[_TICK])
                key = (int(pos // bin_config.bin_meters), cfg.phase(tick))
                n += 1
                if key in bins:
                    lo, hi = bins[key]
                    bins[key] = (min(lo, speed), max(hi, speed))
                else:
                    bins[key] = (speed, speed)
        return cls(bins, bin_config, cfg, dataset_hash=dataset_hash, n_samples=n)

    def _densify(self) -> dict:
        """Precompute the per-phase envelope over the whole route, filling
        empty bins from the nearest same-phase bin (lower index on ties)."""
        n_pos = int(self.cfg.route_length_m // self.bin_config.bin_meters) + 2
        dense = {}
        for phase in range(self.bin_config.phases):
            filled = sorted(i for (i, ph) in self.bins if ph == phase)
            row = []
            for i in range(n_pos):
                if not filled:
                    row.append((0.0, self.cfg.physical_max_kmh))
                    continue
                nearest = min(filled, key=lambda j: (abs(j - i), j))
                row.append(self.bins[(nearest, phase)])
            dense[phase] = row
        return dense

    # -- queries ---------------------------------------------------------------

    def bin_key(self, position_m: float, phase: int) -> tuple[int, int]:
        return int(position_m // self.bin_config.bin_meters), phase

    def envelope(self, position_m: float, phase: int) -> tuple[float, float]:
        row = self._dense[phase]
        idx = min(max(int(position_m // self.bin_config.bin_meters), 0), len(row) - 1)
        return row[idx]

    def predict(self, state: JunctionState) -> ActionSet:
        """Permitted speed interval for a state."""
        lo, hi = self.envelope(state.ego_position, self.cfg.phase(state.time_step))
        return ActionSet.interval(lo, hi)

    def dd_distance(self, proposed_speed: float, state: JunctionState) -> float:
        """0 inside the envelope, else distance to the nearest endpoint."""
        return self.predict(state).distance(proposed_speed)

    def as_norm(self):
        """State -> ActionSet callable for an alignment value."""
        return self.predict

    def empty_bins(self) -> list[tuple[int, int]]:
        """Route bins never visited by a training sample."""
        n_pos = int(self.cfg.route_length_m // self.bin_config.bin_meters) + 1
        return [(i, ph) for ph in range(self.bin_config.phases)
                for i in range(n_pos) if (i, ph) not in self.bins]

    # -- persistence -------------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "bin_meters": self.bin_config.bin_meters,
            "phases": self.bin_config.phases,
            "dataset_hash": self.dataset_hash,
            "n_samples": self.n_samples,
            "scenario": self.cfg.to_dict(),
            "bins": {f"{i}|{ph}": [lo, hi] for (i, ph), (lo, hi) in sorted(self.bins.items())},
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "SpeedEnvelopeModel":
        payload = json.loads(text)
        bins = {}
        for key, (lo, hi) in payload["bins"].items():
            i, ph = key.split("|")
            bins[(int(i), int(ph))] = (float(lo), float(hi))
        return cls(
            bins,
            BinConfig(bin_meters=payload["bin_meters"], phases=payload["phases"]),
            ScenarioConfig.from_dict(payload["scenario"]),
            dataset_hash=payload["dataset_hash"],
            n_samples=payload["n_samples"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "SpeedEnvelopeModel":
        return cls.from_json(Path(path).read_text())


def dataset_fingerprint(csv_paths: Sequence[str | Path]) -> str:
    """Stable hash of a trajectory dataset (file contents, order-independent)."""
    digest = hashlib.sha256()
    for path in sorted(Path(p) for p in csv_paths):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()
