"""Single-lane junction crossing task with a kinematic point-mass simulator.

An ego vehicle drives west to east towards a junction crossed by a priority
north-south stream.  The mandatory rules are a Krauss-style safe approach
speed (always able to stop before the line, or guaranteed to clear the box
before the stream arrives), a 50 km/h limit, and a keep-the-box-clear rule
once committed.  Speed control is discretized into 11 target-speed deltas.
The same dynamics generate the simulated human population whose trajectories
supply the social norms.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .alignment import ActionSet
from .mdp import TaskEnv, Trajectory, TrajectoryStep

KMH_PER_MS = 3.6


def ms(speed_kmh: float) -> float:
    return speed_kmh / KMH_PER_MS


def kmh(speed_ms: float) -> float:
    return speed_ms * KMH_PER_MS


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, schedule and control fixtures of the junction scenario."""

    tick_seconds: float = 0.1
    route_length_m: float = 92.0
    junction_start_m: float = 80.0
    junction_width_m: float = 8.0
    vehicle_length_m: float = 4.0
    speed_limit_kmh: float = 50.0
    physical_max_kmh: float = 70.0
    max_decel_ms2: float = 5.0
    stop_buffer_m: float = 0.25
    action_increment_kmh: float = 1.0
    # priority stream on the crossing road: front spawns `cross_spawn_gap_m`
    # short of the box and advances at constant speed; its length models a
    # platoon, so the box stays occupied for an extended window
    cross_speed_ms: float = 10.0
    cross_spawn_gap_m: float = 80.0
    cross_length_m: float = 102.0
    entry_margin_s: float = 0.5
    exit_margin_s: float = 0.3
    reward_interval_m: float = 2.0

    @property
    def t_enter_s(self) -> float:
        """Time the stream front reaches the box."""
        return self.cross_spawn_gap_m / self.cross_speed_ms

    @property
    def t_clear_s(self) -> float:
        """Time the stream tail leaves the box."""
        return (self.cross_spawn_gap_m + self.junction_width_m + self.cross_length_m) / self.cross_speed_ms

    @property
    def junction_end_m(self) -> float:
        return self.junction_start_m + self.junction_width_m

    def cross_front_m(self, tick: int) -> float:
        """Stream front position; 0 is the box north edge."""
        return -self.cross_spawn_gap_m + self.cross_speed_ms * tick * self.tick_seconds

    def box_occupied(self, tick: int) -> bool:
        front = self.cross_front_m(tick)
        return front >= 0.0 and front - self.cross_length_m < self.junction_width_m

    def phase(self, tick: int) -> int:
        """1 while the priority stream has not yet cleared the box, else 0."""
        return 1 if tick * self.tick_seconds < self.t_clear_s else 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return cls(**data)


@dataclass(frozen=True)
class JunctionState:
    ego_position: float
    ego_speed: float
    distance_to_junction: float
    crossing_vehicle_position: float
    crossing_vehicle_speed: float
    junction_occupied: bool
    time_step: int
    terminal: bool = False


@dataclass(frozen=True)
class HumanProfile:
    """One driver style: cruise target and per-tick acceleration.  The cruise
    target may sit above the legal limit (humans occasionally speed)."""

    max_speed_kmh: float
    max_accel_kmh_per_tick: float


DEFAULT_PROFILES = (
    HumanProfile(42.0, 0.80),
    HumanProfile(45.0, 0.83),
    HumanProfile(48.0, 0.87),
    HumanProfile(51.0, 0.93),
    HumanProfile(54.0, 1.24),
)


def stopping_limited_speed(gap_m: float, decel_ms2: float, tick_s: float) -> float:
    """Highest speed (m/s) from which one tick of travel plus a constant
    deceleration stop still fits inside ``gap_m``."""
    if gap_m <= 0:
        return 0.0
    bt = decel_ms2 * tick_s
    return -bt + math.sqrt(bt * bt + 2.0 * decel_ms2 * gap_m)


def safe_speed(cfg: ScenarioConfig, state: JunctionState, cap_kmh: float,
               decel_ms2: float | None = None, stop_buffer_m: float | None = None) -> float:
    """Maximum speed (km/h) that keeps the junction conflict-free.

    No constraint applies once the priority stream has cleared, once the ego
    is committed past the line, or when continuing at the current speed is
    guaranteed (with margin) to clear the box before the stream arrives.
    Otherwise the ego must stay below the speed from which it can still stop
    before the line.
    """
    decel = cfg.max_decel_ms2 if decel_ms2 is None else decel_ms2
    buffer = cfg.stop_buffer_m if stop_buffer_m is None else stop_buffer_m
    now = state.time_step * cfg.tick_seconds
    gap = cfg.junction_start_m - state.ego_position
    if now >= cfg.t_clear_s or gap <= 0:
        return cap_kmh
    if state.ego_speed > 0.1:
        clearance = (gap + cfg.junction_width_m + cfg.vehicle_length_m) / ms(state.ego_speed)
        if now + clearance + cfg.entry_margin_s <= cfg.t_enter_s:
            return cap_kmh
    return min(kmh(stopping_limited_speed(gap - buffer, decel, cfg.tick_seconds)), cap_kmh)


def junction_rb(cfg: ScenarioConfig, state: JunctionState) -> ActionSet:
    """Rule-permitted speed interval: capped by the safe approach speed and
    the legal limit; bounded below while committed inside the box so the box
    is clear again before the priority stream arrives."""
    hi = min(safe_speed(cfg, state, cfg.speed_limit_kmh), cfg.speed_limit_kmh)
    lo = 0.0
    now = state.time_step * cfg.tick_seconds
    in_box = (state.ego_position > cfg.junction_start_m
              and state.ego_position - cfg.vehicle_length_m < cfg.junction_end_m)
    if in_box and now < cfg.t_enter_s:
        remaining = cfg.junction_end_m + cfg.vehicle_length_m - state.ego_position + 0.01
        time_left = cfg.t_enter_s - cfg.exit_margin_s - now
        lo = hi if time_left <= 1e-9 else min(kmh(remaining / time_left), hi)
    return ActionSet.interval(lo, hi)


def reward_for(crossed_boundary: bool, last3: Sequence[float]) -> float:
    """Dense task reward: 10 plus the mean of the last three executed speeds
    whenever a 2 m boundary was crossed this tick, -1 otherwise."""
    if crossed_boundary:
        return 10.0 + sum(last3) / 3.0
    return -1.0


class JunctionEnv(TaskEnv):
    """Kinematic simulator: the executed value is the target speed for the
    tick (point mass, instantaneous speed control within the action grid).

    Collisions (ego body inside the box while the stream occupies it) are
    detected and counted but do not end the episode, mirroring an evaluation
    setup where crash enforcement is switched off.
    """

    obs_fields = ("pos_m", "speed_kmh", "dist_junction_m",
                  "cross_pos_m", "cross_speed_kmh", "occupied", "tick")
    n_actions = 11

    def __init__(self, cfg: ScenarioConfig | None = None):
        self.cfg = cfg or ScenarioConfig()
        self.collisions = 0
        self._pos = 0.0
        self._speed = 0.0
        self._tick = 0
        self._last3 = (0.0, 0.0, 0.0)
        self._terminal = False

    # -- environment protocol ------------------------------------------------

    @property
    def state(self) -> JunctionState:
        return self._make_state()

    def reset(self) -> JunctionState:
        self._pos = 0.0
        self._speed = 0.0
        self._tick = 0
        self._last3 = (0.0, 0.0, 0.0)
        self._terminal = False
        self.collisions = 0
        return self._make_state()

    def action_value(self, state: JunctionState, action_id: int) -> float:
        """Proposed target speed: current speed shifted by -5..+5 increments,
        clamped at standstill."""
        if not 0 <= action_id < self.n_actions:
            raise ValueError(f"action index out of range: {action_id}")
        delta = (action_id - 5) * self.cfg.action_increment_kmh
        return max(state.ego_speed + delta, 0.0)

    def step_value(self, target_speed_kmh: float):
        if self._terminal:
            raise ValueError("terminal states admit no further transitions")
        cfg = self.cfg
        v = min(max(float(target_speed_kmh), 0.0), cfg.physical_max_kmh)
        old_pos = self._pos
        self._speed = v
        self._pos += ms(v) * cfg.tick_seconds
        self._tick += 1
        self._last3 = (self._last3[1], self._last3[2], v)
        if self._in_box() and cfg.box_occupied(self._tick):
            self.collisions += 1
        crossed = math.floor(self._pos / cfg.reward_interval_m) > math.floor(old_pos / cfg.reward_interval_m)
        reward = reward_for(crossed, self._last3)
        self._terminal = self._pos >= cfg.route_length_m
        return self._make_state(), reward, self._terminal

    def observe(self, state: JunctionState) -> tuple[float, ...]:
        return (state.ego_position, state.ego_speed, state.distance_to_junction,
                state.crossing_vehicle_position, state.crossing_vehicle_speed,
                1.0 if state.junction_occupied else 0.0, float(state.time_step))

    # -- norms ----------------------------------------------------------------

    def rb(self, state: JunctionState) -> ActionSet:
        return junction_rb(self.cfg, state)

    @property
    def collided(self) -> bool:
        return self.collisions > 0

    def _in_box(self) -> bool:
        return (self._pos > self.cfg.junction_start_m
                and self._pos - self.cfg.vehicle_length_m < self.cfg.junction_end_m)

    def _make_state(self) -> JunctionState:
        cfg = self.cfg
        return JunctionState(
            ego_position=self._pos,
            ego_speed=self._speed,
            distance_to_junction=cfg.junction_start_m - self._pos,
            crossing_vehicle_position=cfg.cross_front_m(self._tick),
            crossing_vehicle_speed=kmh(cfg.cross_speed_ms),
            junction_occupied=cfg.box_occupied(self._tick),
            time_step=self._tick,
            terminal=self._terminal,
        )


# -- simulated human drivers ---------------------------------------------------

# Per-episode population diversity around each profile: cruise speed and
# acceleration wobble, personal braking firmness, and how far short of the
# line each driver stops.  These spreads set the width of the learned norms.
SPEED_JITTER_KMH = 2.0
ACCEL_JITTER = 0.03
DECEL_RANGE_MS2 = (3.2, 6.8)
STOP_BUFFER_RANGE_M = (0.5, 1.5)


def simulate_human(cfg: ScenarioConfig, max_speed: float, accel: float,
                   decel: float, buffer: float, max_steps: int = 400,
                   discount: float = 0.99) -> Trajectory:
    """One crossing by a Krauss-style driver: hold the highest speed that is
    safe for *this* driver, up to its cruise target.  The legal limit is not
    enforced on humans; safety is."""
    env = JunctionEnv(cfg)
    state = env.reset()
    traj = Trajectory(discount=discount)
    inc = cfg.action_increment_kmh
    done = False
    for _ in range(max_steps):
        own_cap = safe_speed(cfg, state, cfg.physical_max_kmh, decel_ms2=decel, stop_buffer_m=buffer)
        desired = max(min(state.ego_speed + accel, max_speed, own_cap), 0.0)
        action_id = int(np.clip(round((desired - state.ego_speed) / inc), -5, 5)) + 5
        obs = env.observe(state)
        state, reward, done = env.step_value(desired)
        traj.steps.append(TrajectoryStep(obs, 1.0, action_id, reward, reward))
        if done:
            break
    if env.collided:
        raise RuntimeError("human driver collided; scenario fixtures are inconsistent")
    traj.final_obs = env.observe(state)
    traj.truncated = not done
    return traj


def generate_human_dataset(profiles: Sequence[HumanProfile], episodes_per_profile: int,
                           seed: int, cfg: ScenarioConfig | None = None,
                           discount: float = 0.99) -> list[Trajectory]:
    """Deterministic population of crossings: each episode jitters its profile
    and draws a personal braking style from the seeded generator."""
    if not profiles:
        raise ValueError("at least one human profile is required")
    cfg = cfg or ScenarioConfig()
    rng = np.random.default_rng(seed)
    trajectories = []
    for profile in profiles:
        for _ in range(episodes_per_profile):
            v = profile.max_speed_kmh + rng.uniform(-SPEED_JITTER_KMH, SPEED_JITTER_KMH)
            a = profile.max_accel_kmh_per_tick + rng.uniform(-ACCEL_JITTER, ACCEL_JITTER)
            b = rng.uniform(*DECEL_RANGE_MS2)
            buf = rng.uniform(*STOP_BUFFER_RANGE_M)
            trajectories.append(simulate_human(cfg, v, a, b, buf, discount=discount))
    return trajectories


def finish_time(trajectory: Trajectory) -> int:
    """Episode length in ticks (the tick the route end was crossed)."""
    return len(trajectory.steps)


# -- scripted policies for probing the simulator --------------------------------

def full_throttle_policy(state: JunctionState, w: float) -> int:
    """Always request the maximum acceleration."""
    return 10


def hold_speed_policy(target_kmh: float):
    """Accelerate to a target speed, then hold it (never yields)."""

    def policy(state: JunctionState, w: float) -> int:
        if state.ego_speed < target_kmh:
            return 10
        return 5

    return policy
