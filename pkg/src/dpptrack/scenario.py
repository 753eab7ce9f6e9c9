"""Ground-truth generation: repulsive nearly-constant-turn targets,
range-bearing sensing with misdetection and Poisson clutter, and scripted
death/birth/forced-miss events.

Target states are 5-vectors (x, xdot, y, ydot, theta) in SI units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateGeometry, ScheduleError


@dataclass(frozen=True)
class DynamicsConfig:
    tau: float = 1.0                # sampling period, s
    sigma_vx: float = 1.0           # acceleration noise, m/s^2
    sigma_vy: float = 1.0
    sigma_vtheta: float = math.pi   # turn-rate noise, rad/s
    zeta_x: float = 0.0             # repulsion strength, m per step
    zeta_y: float = 0.0
    repulsion_norm: str = "state"   # "state" (full 5-d difference) or "position"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if min(self.sigma_vx, self.sigma_vy, self.sigma_vtheta) < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        if self.repulsion_norm not in ("state", "position"):
            raise ValueError("repulsion_norm must be 'state' or 'position'")


def turn_transition(theta: float, tau: float) -> np.ndarray:
    """Nearly-constant-turn transition matrix for one target.

    The sin(tau*theta)/theta entries are replaced by their theta -> 0 limits
    (tau and 0) below 1e-9 to keep the straight-line case exact.
    """
    if abs(theta) < 1e-9:
        s_over, c_over = tau, 0.0
        c, s = 1.0, 0.0
    else:
        c = math.cos(tau * theta)
        s = math.sin(tau * theta)
        s_over = s / theta
        c_over = (c - 1.0) / theta
    return np.array(
        [
            [1.0, s_over, 0.0, c_over, 0.0],
            [0.0, c, 0.0, -s, 0.0],
            [0.0, c_over, 1.0, s_over, 0.0],
            [0.0, s, 0.0, c, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )


def noise_gain(tau: float) -> np.ndarray:
    return np.array(
        [
            [tau**2 / 2, 0.0, 0.0],
            [tau, 0.0, 0.0],
            [0.0, tau**2 / 2, 0.0],
            [0.0, tau, 0.0],
            [0.0, 0.0, tau],
        ]
    )


def repulsion_term(states: np.ndarray, cfg: DynamicsConfig) -> np.ndarray:
    """Pairwise unit-direction repulsion, scaled by (zeta_x, zeta_y).

    Normalizes by the full state-vector difference as printed; the
    position-only variant sits behind repulsion_norm="position".
    """
    n = states.shape[0]
    out = np.zeros_like(states)
    if n < 2 or (cfg.zeta_x == 0.0 and cfg.zeta_y == 0.0):
        return out
    for i in range(n):
        sx = sy = 0.0
        for j in range(n):
            if j == i:
                continue
            diff = states[i] - states[j]
            if cfg.repulsion_norm == "position":
                norm = math.hypot(diff[0], diff[2])
            else:
                norm = float(np.linalg.norm(diff))
            if norm == 0.0:
                raise DegenerateGeometry(f"targets {i} and {j} coincide")
            sx += diff[0] / norm
            sy += diff[2] / norm
        out[i, 0] = cfg.zeta_x * sx
        out[i, 2] = cfg.zeta_y * sy
    return out


def step_dynamics(
    states: np.ndarray, cfg: DynamicsConfig, rng: np.random.Generator
) -> np.ndarray:
    """Advance every target one step: F(theta) x + G v + repulsion."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[0]
    out = np.empty_like(states)
    gmat = noise_gain(cfg.tau)
    sig = np.array([cfg.sigma_vx, cfg.sigma_vy, cfg.sigma_vtheta])
    noise = rng.standard_normal((n, 3)) * sig
    rep = repulsion_term(states, cfg)
    for i in range(n):
        f = turn_transition(states[i, 4], cfg.tau)
        out[i] = f @ states[i] + gmat @ noise[i] + rep[i]
    return out


# ---------------------------------------------------------------------------
# Sensing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Axis-aligned position rectangle."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def contains_states(self, states: np.ndarray) -> np.ndarray:
        return (
            (states[:, 0] >= self.x_min)
            & (states[:, 0] <= self.x_max)
            & (states[:, 2] >= self.y_min)
            & (states[:, 2] <= self.y_max)
        )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class Window:
    """State-space bounds: a position rectangle plus velocity/turn ranges."""

    region: Region
    speed_min: float = -5.0
    speed_max: float = 5.0
    turn_min: float = -0.2
    turn_max: float = 0.2

    def sample_states(self, count: int, rng: np.random.Generator) -> np.ndarray:
        r = self.region
        out = np.empty((count, 5))
        out[:, 0] = rng.uniform(r.x_min, r.x_max, count)
        out[:, 1] = rng.uniform(self.speed_min, self.speed_max, count)
        out[:, 2] = rng.uniform(r.y_min, r.y_max, count)
        out[:, 3] = rng.uniform(self.speed_min, self.speed_max, count)
        out[:, 4] = rng.uniform(self.turn_min, self.turn_max, count)
        return out

    def extents(self) -> np.ndarray:
        r = self.region
        return np.array(
            [
                r.x_max - r.x_min,
                self.speed_max - self.speed_min,
                r.y_max - r.y_min,
                self.speed_max - self.speed_min,
                self.turn_max - self.turn_min,
            ]
        )


@dataclass(frozen=True)
class SensorConfig:
    sigma_range: float = math.sqrt(2.0)     # m
    sigma_bearing: float = math.pi          # rad
    p_d: float = 0.9
    clutter_mean: float = 5.0               # expected clutter points per scan
    window: Window = field(
        default_factory=lambda: Window(Region(-100.0, 100.0, -100.0, 100.0))
    )

    def __post_init__(self):
        if not (0.0 <= self.p_d <= 1.0):
            raise ValueError("p_d must lie in [0, 1]")
        if min(self.sigma_range, self.sigma_bearing, self.clutter_mean) < 0:
            raise ValueError("sensor parameters must be nonnegative")


@dataclass(frozen=True)
class Scan:
    """One time step of detections: rows are (range m, bearing rad).

    truth_links gives the originating target id per detection (-1 for
    clutter); it is metrics-only metadata, never visible to the filters.
    """

    time: int
    detections: np.ndarray  # (m, 2)
    truth_links: Optional[np.ndarray] = None  # (m,) int

    def __post_init__(self):
        det = np.asarray(self.detections, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "detections", det)
        if self.truth_links is not None:
            links = np.asarray(self.truth_links, dtype=int)
            if links.shape != (det.shape[0],):
                raise ValueError("truth_links length must match detections")
            object.__setattr__(self, "truth_links", links)

    def __len__(self) -> int:
        return self.detections.shape[0]

    def cartesian(self) -> np.ndarray:
        r = self.detections[:, 0]
        b = self.detections[:, 1]
        return np.column_stack([r * np.cos(b), r * np.sin(b)])


def to_polar(states: np.ndarray) -> np.ndarray:
    """(range, bearing) of each state; bearing via quadrant-correct atan2."""
    x, y = states[:, 0], states[:, 2]
    return np.column_stack([np.hypot(x, y), np.arctan2(y, x)])


def wrap_angle(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def generate_scan(
    states: np.ndarray,
    ids,
    sensor: SensorConfig,
    forced_misses: frozenset | set,
    rng: np.random.Generator,
    time: int = 0,
) -> Scan:
    """Detect each target independently with probability p_d, add clutter.

    Clutter positions are uniform over the window rectangle and reported in
    range-bearing coordinates, realizing a spatially constant clutter
    density over the window.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float)) if len(states) else np.zeros((0, 5))
    ids = list(ids)
    det_rows = []
    links = []
    if states.shape[0]:
        polar = to_polar(states)
        coin = rng.uniform(size=states.shape[0])
        for i, tid in enumerate(ids):
            if tid in forced_misses or coin[i] >= sensor.p_d:
                continue
            r = polar[i, 0] + rng.normal(0.0, sensor.sigma_range)
            b = wrap_angle(polar[i, 1] + rng.normal(0.0, sensor.sigma_bearing))
            det_rows.append((r, b))
            links.append(tid)
    n_clutter = int(rng.poisson(sensor.clutter_mean))
    if n_clutter:
        reg = sensor.window.region
        cx = rng.uniform(reg.x_min, reg.x_max, n_clutter)
        cy = rng.uniform(reg.y_min, reg.y_max, n_clutter)
        for x, y in zip(cx, cy):
            det_rows.append((math.hypot(x, y), math.atan2(y, x)))
            links.append(-1)
    det = np.array(det_rows, dtype=float).reshape(-1, 2)
    return Scan(time, det, np.array(links, dtype=int))


# ---------------------------------------------------------------------------
# Scripted events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventSchedule:
    """Deterministic event script for the truth simulator.

    miss_region + miss_cycle force every target inside the region to be
    misdetected at steps that are multiples of the cycle; deaths/births map
    a step index to a count of targets removed (uniformly at random) or
    spawned near the birth region's center.
    """

    miss_region: Optional[Region] = None
    miss_cycle: int = 0
    deaths: dict = field(default_factory=dict)    # step -> count
    births: dict = field(default_factory=dict)    # step -> count
    birth_region: Optional[Region] = None
    birth_spread: float = 15.0
    clutter_changes: dict = field(default_factory=dict)  # step -> new clutter mean


@dataclass(frozen=True)
class StepEvents:
    miss_active: bool
    n_deaths: int
    n_births: int


def scripted_events(schedule: EventSchedule, t: int, n_alive: int) -> StepEvents:
    """Resolve the schedule at step t; validates against the alive count."""
    miss = (
        schedule.miss_region is not None
        and schedule.miss_cycle > 0
        and t > 0
        and t % schedule.miss_cycle == 0
    )
    deaths = int(schedule.deaths.get(t, 0))
    births = int(schedule.births.get(t, 0))
    if deaths < 0 or births < 0:
        raise ScheduleError(f"negative event count at step {t}")
    if deaths > n_alive:
        raise ScheduleError(f"step {t} kills {deaths} targets but only {n_alive} alive")
    return StepEvents(miss, deaths, births)


class TruthSimulator:
    """Steps ground truth forward and emits scans.

    Owns the target id bookkeeping; deaths pick uniformly among the living,
    births spawn near the birth region's center with small uniform spread
    and mild initial velocities.
    """

    def __init__(
        self,
        initial_states: np.ndarray,
        dynamics: DynamicsConfig,
        sensor: SensorConfig,
        schedule: EventSchedule,
        rng_motion: np.random.Generator,
        rng_scan: np.random.Generator,
        rng_events: np.random.Generator,
    ):
        self.states = np.atleast_2d(np.asarray(initial_states, dtype=float)).copy()
        self.ids = list(range(self.states.shape[0]))
        self._next_id = self.states.shape[0]
        self.dynamics = dynamics
        self.sensor = sensor
        self.schedule = schedule
        self.rng_motion = rng_motion
        self.rng_scan = rng_scan
        self.rng_events = rng_events
        self.t = 0

    def _spawn(self, count: int) -> np.ndarray:
        region = self.schedule.birth_region or self.sensor.window.region
        cx, cy = region.center
        spread = self.schedule.birth_spread
        out = np.zeros((count, 5))
        out[:, 0] = cx + self.rng_events.uniform(-spread, spread, count)
        out[:, 2] = cy + self.rng_events.uniform(-spread, spread, count)
        out[:, 1] = self.rng_events.uniform(-1.0, 1.0, count)
        out[:, 3] = self.rng_events.uniform(-1.0, 1.0, count)
        return out

    def step(self) -> tuple[np.ndarray, list, Scan]:
        """Advance one step; returns (states, ids, scan) at the new time."""
        self.t += 1
        if self.states.shape[0]:
            self.states = step_dynamics(self.states, self.dynamics, self.rng_motion)
        ev = scripted_events(self.schedule, self.t, self.states.shape[0])
        if ev.n_deaths:
            doomed = self.rng_events.choice(
                self.states.shape[0], size=ev.n_deaths, replace=False
            )
            keep = np.setdiff1d(np.arange(self.states.shape[0]), doomed)
            self.states = self.states[keep]
            self.ids = [self.ids[i] for i in keep]
        if ev.n_births:
            born = self._spawn(ev.n_births)
            self.states = np.vstack([self.states, born]) if self.states.size else born
            self.ids.extend(range(self._next_id, self._next_id + ev.n_births))
            self._next_id += ev.n_births
        forced = frozenset()
        if ev.miss_active and self.states.shape[0]:
            inside = self.schedule.miss_region.contains_states(self.states)
            forced = frozenset(tid for tid, flag in zip(self.ids, inside) if flag)
        scan = generate_scan(
            self.states, self.ids, self.sensor, forced, self.rng_scan, time=self.t
        )
        return self.states.copy(), list(self.ids), scan


def export_truth_csv(path, rows) -> None:
    """rows: iterables of (run, t, target_id, x, xdot, y, ydot, theta)."""
    with open(path, "w") as fh:
        fh.write("run,t,target_id,x,xdot,y,ydot,theta\n")
        for row in rows:
            fh.write(
                ",".join(
                    repr(float(v)) if isinstance(v, float) else str(v) for v in row
                )
                + "\n"
            )


def export_scans_csv(path, scans_by_run) -> None:
    """scans_by_run: iterable of (run, scan) pairs."""
    with open(path, "w") as fh:
        fh.write("run,t,det_index,range,bearing,truth_link\n")
        for run, scan in scans_by_run:
            links = scan.truth_links if scan.truth_links is not None else [-1] * len(scan)
            for k in range(len(scan)):
                r, b = (float(v) for v in scan.detections[k])
                fh.write(f"{run},{scan.time},{k},{r!r},{b!r},{links[k]}\n")
