"""Monte Carlo experiment harness: presets at desk scale, config file
parsing, parallel run dispatch, and CSV/metadata outputs.

Outputs per experiment directory:
  steps.csv    one row per (run, step, filter)
  summary.csv  per-step aggregates (mean and s.d. across runs)
  meta.txt     config echo, seed, scale notes, build id
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dpp_filter import DppPhdFilter, correlation_estimate
from .errors import ConfigError, DegenerateVariance, UnknownPreset
from .likelihood import SensorModel
from .metrics import MetricRecord, extract_estimates, good_estimate_stats, omat, ospa
from .ppp_filter import BirthScheme, PppPhdFilter, SurvivalModel
from .rng import stream
from .scenario import (
    DynamicsConfig,
    EventSchedule,
    Region,
    SensorConfig,
    TruthSimulator,
    Window,
)
from .smc import SmcConfig

PRESET_NAMES = ("spooky", "death", "birth", "repulsion-bias", "good-ratio")


@dataclass(frozen=True)
class TruthSpec:
    """Initial target layout: (region, count) groups plus placement style."""

    groups: tuple[tuple[Region, int], ...]
    placement: str = "central"  # "central" or "uniform"
    spread: float = 15.0
    speed: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    steps: int
    mc_runs: int
    seed: int
    filter: str  # "dpp" | "ppp" | "both"
    dynamics: DynamicsConfig
    filter_dynamics: DynamicsConfig
    sensor: SensorConfig
    truth: TruthSpec
    schedule: EventSchedule
    smc: SmcConfig
    p_s: float = 1.0
    double_update: bool = True
    birth_mass: Optional[float] = None  # None = adaptive rule
    min_birth_particles: int = -1  # -1 = one target's worth (P_b)
    domains: Optional[tuple[Region, Region]] = None
    ospa_c: float = 100.0
    ospa_p: float = 2.0
    notes: str = ""

    def __post_init__(self):
        if self.mc_runs < 1:
            raise ConfigError("mc_runs must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.filter not in ("dpp", "ppp", "both"):
            raise ConfigError(f"filter must be dpp, ppp or both, got {self.filter!r}")
        if not (0.0 <= self.p_s <= 1.0):
            raise ConfigError("p_s must lie in [0, 1]")


@dataclass
class RunRecord:
    rows: list
    clamp_events: int = 0
    offdiag_entries: int = 0
    wall_seconds: float = 0.0


# ---------------------------------------------------------------------------
# Presets (paper parameters scaled to desk budgets; --full restores them)
# ---------------------------------------------------------------------------


def preset(name: str, full: bool = False) -> ExperimentConfig:
    """Named experiment setups.

    Desk scale keeps the source experiments' sensor noise, detection and
    kernel parameters but shrinks run counts, particle budgets and the
    spatial layout so a full preset fits in minutes on two cores; --full
    restores the large-scale budgets (slow).
    """
    if name not in PRESET_NAMES:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    truth_dyn = DynamicsConfig(sigma_vx=1.0, sigma_vy=1.0, sigma_vtheta=math.pi)
    filt_dyn = truth_dyn

    if name == "spooky":
        if full:
            a = Region(0.0, 150.0, 0.0, 150.0)
            b = Region(300.0, 450.0, 300.0, 450.0)
            window = Window(Region(-75.0, 525.0, -75.0, 525.0), -2.0, 2.0, -math.pi, math.pi)
        else:
            # domains sit in disjoint range bands from the sensor at the origin
            a = Region(0.0, 50.0, 0.0, 50.0)
            b = Region(100.0, 150.0, 100.0, 150.0)
            window = Window(Region(-25.0, 175.0, -25.0, 175.0), -2.0, 2.0, -math.pi, math.pi)
        sensor = SensorConfig(
            sigma_range=math.sqrt(2.0),
            sigma_bearing=math.pi,
            p_d=0.9,
            clutter_mean=10.0 if full else 4.0,
            window=window,
        )
        n_per = 10 if full else 3
        return ExperimentConfig(
            name="spooky",
            steps=50 if full else 30,
            mc_runs=100 if full else 20,
            seed=20170401,
            filter="dpp",
            dynamics=truth_dyn,
            filter_dynamics=filt_dyn,
            sensor=sensor,
            truth=TruthSpec(
                groups=((a, n_per), (b, n_per)),
                placement="central",
                spread=30.0 if full else 12.0,
                speed=0.5,
            ),
            schedule=EventSchedule(miss_region=b, miss_cycle=10),
            smc=SmcConfig(
                n_init=800 if full else 300,
                resample_per_target=30 if full else 20,
                birth_per_target=10,
                cap=1000 if full else 500,
                roughening_scale=0.01,
                alpha=4.0,
                band_eta=0.1,
                gamma0=2.0,
            ),
            p_s=1.0,
            domains=(a, b),
            notes=(
                "desk scale: 3 targets/domain on a 200 m window, 30 steps, 20 runs,"
                " 300 init particles, P_p=20 (source: 10/domain, 150 m domains,"
                " 50 steps, 100 runs, 800 particles, P_p=30)"
                if not full
                else "full-scale budgets"
            ),
        )

    if name == "death":
        dom = Region(0.0, 100.0, 0.0, 100.0)
        window = Window(Region(-50.0, 150.0, -50.0, 150.0), -2.0, 2.0, -math.pi, math.pi)
        sensor = SensorConfig(
            sigma_range=math.sqrt(2.0),
            sigma_bearing=math.pi,
            p_d=0.95,
            clutter_mean=1.0,
            window=window,
        )
        return ExperimentConfig(
            name="death",
            steps=15,
            mc_runs=200 if full else 10,
            seed=20170402,
            filter="both",
            dynamics=truth_dyn,
            filter_dynamics=filt_dyn,
            sensor=sensor,
            truth=TruthSpec(groups=((dom, 15),), placement="uniform", speed=0.5),
            schedule=EventSchedule(deaths={9: 10}, clutter_changes={10: 0.3}),
            smc=SmcConfig(
                n_init=6000 if full else 600,
                resample_per_target=50 if full else 20,
                birth_per_target=60 if full else 20,
                cap=1000 if full else 500,
                roughening_scale=0.01,
                alpha=4.0,
                band_eta=0.1,
                gamma0=0.2,
            ),
            p_s=1.0,
            notes="desk scale: 600 init particles, P_p=20, 10 runs"
            " (source: 6000 particles, P_p=50, P_b=40-60, 200-300 runs)"
            if not full
            else "",
        )

    if name == "birth":
        dom = Region(0.0, 100.0, 0.0, 100.0)
        window = Window(Region(-50.0, 150.0, -50.0, 150.0), -2.0, 2.0, -math.pi, math.pi)
        sensor = SensorConfig(
            sigma_range=math.sqrt(2.0),
            sigma_bearing=math.pi,
            p_d=0.9,
            clutter_mean=0.05,
            window=window,
        )
        return ExperimentConfig(
            name="birth",
            steps=45,
            mc_runs=100 if full else 10,
            seed=20170403,
            filter="both",
            dynamics=truth_dyn,
            filter_dynamics=filt_dyn,
            sensor=sensor,
            truth=TruthSpec(groups=((dom, 1),), placement="central", spread=10.0, speed=0.5),
            schedule=EventSchedule(births={10: 9}, birth_region=dom, clutter_changes={10: 5.0}),
            smc=SmcConfig(
                n_init=300,
                resample_per_target=50 if full else 20,
                birth_per_target=15,
                cap=1000 if full else 500,
                roughening_scale=0.01,
                alpha=4.0,
                band_eta=0.1,
                gamma0=0.2,
            ),
            p_s=1.0,
            notes="desk scale: 10 runs, P_p=20 (source: 100-400 runs, P_p=40-50)"
            if not full
            else "",
        )

    if name == "repulsion-bias":
        dom = Region(-50.0, 50.0, -50.0, 50.0)
        window = Window(Region(-150.0, 150.0, -150.0, 150.0), -2.0, 2.0, -math.pi, math.pi)
        sensor = SensorConfig(
            sigma_range=2.0 * math.sqrt(2.0),
            sigma_bearing=math.pi,
            p_d=0.95,
            clutter_mean=1.0,
            window=window,
        )
        n_targets = 10 if full else 4
        return ExperimentConfig(
            name="repulsion-bias",
            steps=20,
            mc_runs=200 if full else 30,
            seed=20170404,
            filter="ppp",
            dynamics=replace(truth_dyn, zeta_x=8.0, zeta_y=8.0),
            filter_dynamics=filt_dyn,
            sensor=sensor,
            truth=TruthSpec(groups=((dom, n_targets),), placement="uniform", speed=0.5),
            schedule=EventSchedule(),
            smc=SmcConfig(
                n_init=1000 if full else 400,
                resample_per_target=100 if full else 30,
                birth_per_target=100 if full else 30,
                cap=1000,
                roughening_scale=0.01,
                alpha=4.0,
                band_eta=0.1,
                gamma0=float(n_targets),
            ),
            p_s=1.0,
            notes="sweep zeta in {0,4,8} via scripts/run_repulsion_bias.py;"
            " desk scale: 4 targets, 30 runs (source: 10 targets, 200 runs,"
            " 1000 particles, 100 per target)",
        )

    # good-ratio
    dom = Region(-30.0, 30.0, -30.0, 30.0)
    window = Window(Region(-100.0, 100.0, -100.0, 100.0), -2.0, 2.0, -math.pi, math.pi)
    sensor = SensorConfig(
        sigma_range=2.0 * math.sqrt(2.0),
        sigma_bearing=math.pi,
        p_d=1.0,
        clutter_mean=0.0,
        window=window,
    )
    return ExperimentConfig(
        name="good-ratio",
        steps=15,
        mc_runs=100 if full else 20,
        seed=20170405,
        filter="ppp",
        dynamics=replace(truth_dyn, zeta_x=8.0, zeta_y=8.0),
        filter_dynamics=filt_dyn,
        sensor=sensor,
        truth=TruthSpec(groups=((dom, 3),), placement="uniform", speed=0.5),
        schedule=EventSchedule(),
        smc=SmcConfig(
            n_init=400,
            resample_per_target=30,
            birth_per_target=30,
            cap=1000,
            roughening_scale=0.01,
            alpha=4.0,
            band_eta=0.1,
            gamma0=3.0,
        ),
        p_s=1.0,
        notes="sweep zeta via scripts/run_good_ratio.py; p_d=1, no clutter",
    )


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------


def _initial_truth(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    rows = []
    for region, count in cfg.truth.groups:
        states = np.zeros((count, 5))
        if cfg.truth.placement == "central":
            cx, cy = region.center
            states[:, 0] = cx + rng.uniform(-cfg.truth.spread, cfg.truth.spread, count)
            states[:, 2] = cy + rng.uniform(-cfg.truth.spread, cfg.truth.spread, count)
        else:
            states[:, 0] = rng.uniform(region.x_min, region.x_max, count)
            states[:, 2] = rng.uniform(region.y_min, region.y_max, count)
        states[:, 1] = rng.uniform(-cfg.truth.speed, cfg.truth.speed, count)
        states[:, 3] = rng.uniform(-cfg.truth.speed, cfg.truth.speed, count)
        rows.append(states)
    return np.vstack(rows)


def _make_filters(cfg: ExperimentConfig, run: int, sensor_model: SensorModel) -> dict:
    survival = SurvivalModel(cfg.p_s, cfg.filter_dynamics)
    min_birth = (
        cfg.smc.birth_per_target if cfg.min_birth_particles < 0 else cfg.min_birth_particles
    )
    birth = BirthScheme(cfg.smc.birth_per_target, cfg.birth_mass, min_birth)
    filters = {}
    if cfg.filter in ("dpp", "both"):
        filters["dpp"] = DppPhdFilter(
            cfg.smc,
            survival,
            birth,
            sensor_model,
            cfg.sensor.window,
            stream(cfg.seed, run, "filter-dpp"),
            double_update=cfg.double_update,
        )
    if cfg.filter in ("ppp", "both"):
        filters["ppp"] = PppPhdFilter(
            cfg.smc,
            survival,
            birth,
            sensor_model,
            cfg.sensor.window,
            stream(cfg.seed, run, "filter-ppp"),
            double_update=cfg.double_update,
        )
    return filters


def run_single(cfg: ExperimentConfig, run: int) -> RunRecord:
    """One Monte Carlo run; all randomness comes from (seed, run) streams."""
    t0 = time.perf_counter()
    rng_init = stream(cfg.seed, run, "truth-init")
    sim = TruthSimulator(
        _initial_truth(cfg, rng_init),
        cfg.dynamics,
        cfg.sensor,
        cfg.schedule,
        stream(cfg.seed, run, "truth-motion"),
        stream(cfg.seed, run, "scan"),
        stream(cfg.seed, run, "events"),
    )
    sensor_model = SensorModel(cfg.sensor)
    filters = _make_filters(cfg, run, sensor_model)
    extract_rngs = {name: stream(cfg.seed, run, f"extract-{name}") for name in filters}
    rec = RunRecord(rows=[])
    current_sensor = cfg.sensor
    for t in range(1, cfg.steps + 1):
        if t in cfg.schedule.clutter_changes:
            current_sensor = replace(
                current_sensor, clutter_mean=float(cfg.schedule.clutter_changes[t])
            )
            sim.sensor = current_sensor
            sensor_model = SensorModel(current_sensor)
            for f in filters.values():
                f.sensor = sensor_model
        states, ids, scan = sim.step()
        truth_xy = states[:, [0, 2]] if states.size else np.zeros((0, 2))
        truth_positions = {tid: truth_xy[i] for i, tid in enumerate(ids)}
        for name, filt in filters.items():
            step_rec = filt.step(scan)
            if name == "dpp":
                rec.clamp_events += step_rec.diagnostics.clamp_events
                rec.offdiag_entries += step_rec.diagnostics.offdiag_entries
                intensity = step_rec.state.kernel.diagonal * step_rec.state.kernel.grid.weights
                positions = step_rec.state.particles.positions
            else:
                intensity = step_rec.particles.weights
                positions = step_rec.particles.positions
            gamma = step_rec.gamma
            est = extract_estimates(positions, intensity, gamma, extract_rngs[name])
            ospa_v = ospa(truth_xy, est, cfg.ospa_c, cfg.ospa_p)
            omat_v = (
                omat(truth_xy, est) if truth_xy.shape[0] and est.shape[0] else None
            )
            ratio, gain = good_estimate_stats(scan, est, truth_positions)
            metric = MetricRecord(
                t=t,
                ospa=ospa_v,
                omat=omat_v,
                good_ratio=ratio,
                gain=gain,
                count_estimate=gamma,
                count_truth=states.shape[0],
            )
            row = {
                "run": run,
                "t": metric.t,
                "filter": name,
                "count_truth": metric.count_truth,
                "count_estimate": metric.count_estimate,
                "ospa": metric.ospa,
                "omat": metric.omat,
                "good_ratio": metric.good_ratio,
                "gain": metric.gain,
                "count_A": None,
                "count_B": None,
                "corr_AB": None,
            }
            if cfg.domains is not None:
                a, b = cfg.domains
                row["count_A"] = filt.count_in(a)
                row["count_B"] = filt.count_in(b)
                if name == "dpp":
                    try:
                        row["corr_AB"] = correlation_estimate(filt.state, a, b)
                    except DegenerateVariance:
                        row["corr_AB"] = None
            rec.rows.append(row)
    rec.wall_seconds = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# Experiment driver & outputs
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "run",
    "t",
    "filter",
    "count_truth",
    "count_estimate",
    "ospa",
    "omat",
    "good_ratio",
    "gain",
    "count_A",
    "count_B",
    "corr_AB",
)


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    clamp_events: int
    offdiag_entries: int
    wall_seconds: float
    out_dir: Optional[Path]


def run_experiment(
    cfg: ExperimentConfig, out_dir=None, threads: int = 1
) -> ExperimentResult:
    """Run all Monte Carlo repetitions and (optionally) write the CSV set.

    Deterministic for a fixed (config, seed): runs own their random streams,
    and rows are always collected in run order, so the thread count never
    changes the output bytes.
    """
    t0 = time.perf_counter()
    runs = list(range(cfg.mc_runs))
    if threads > 1 and cfg.mc_runs > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_single, [cfg] * len(runs), runs))
    else:
        records = [run_single(cfg, r) for r in runs]
    rows = []
    clamps = off = 0
    for r in records:
        rows.extend(r.rows)
        clamps += r.clamp_events
        off += r.offdiag_entries
    wall = time.perf_counter() - t0
    result = ExperimentResult(cfg, rows, clamps, off, wall, None)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_steps_csv(out / "steps.csv", rows)
        _write_summary_csv(out / "summary.csv", rows)
        _write_meta(out / "meta.txt", result)
        result.out_dir = out
    return result


def _write_steps_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[c]) for c in CSV_COLUMNS) + "\n")


SUMMARY_METRICS = (
    "count_truth",
    "count_estimate",
    "ospa",
    "omat",
    "good_ratio",
    "gain",
    "count_A",
    "count_B",
    "corr_AB",
)


def _write_summary_csv(path, rows) -> None:
    filters = sorted({row["filter"] for row in rows})
    steps = sorted({row["t"] for row in rows})
    with open(path, "w") as fh:
        header = ["filter", "t"]
        for metric in SUMMARY_METRICS:
            header += [f"{metric}_mean", f"{metric}_sd"]
        fh.write(",".join(header) + "\n")
        for fname in filters:
            for t in steps:
                cells = [fname, str(t)]
                sel = [r for r in rows if r["filter"] == fname and r["t"] == t]
                for metric in SUMMARY_METRICS:
                    vals = [r[metric] for r in sel if r[metric] is not None]
                    if vals:
                        arr = np.asarray(vals, dtype=float)
                        mean = float(arr.mean())
                        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
                        cells += [repr(mean), repr(sd)]
                    else:
                        cells += ["", ""]
                fh.write(",".join(cells) + "\n")


def build_id(cfg: ExperimentConfig) -> str:
    text = config_to_ini(cfg) + __version__
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def _write_meta(path, result: ExperimentResult) -> None:
    cfg = result.config
    with open(path, "w") as fh:
        fh.write(f"dpptrack version = {__version__}\n")
        fh.write(f"build id = {build_id(cfg)}\n")
        fh.write(f"experiment = {cfg.name}\n")
        fh.write(f"seed = {cfg.seed}\n")
        fh.write(f"mc_runs = {cfg.mc_runs}\n")
        fh.write(f"steps = {cfg.steps}\n")
        fh.write(f"filter = {cfg.filter}\n")
        fh.write(f"scale notes = {cfg.notes}\n")
        fh.write(f"sqrt clamp events = {result.clamp_events}\n")
        fh.write(f"offdiag entries updated = {result.offdiag_entries}\n")
        fh.write(f"wall seconds = {result.wall_seconds:.3f}\n")
        fh.write("\n# config echo\n")
        fh.write(config_to_ini(cfg))


# ---------------------------------------------------------------------------
# Config file format (flat INI sections mirroring ExperimentConfig)
# ---------------------------------------------------------------------------


def _region_str(r: Region) -> str:
    return f"{r.x_min!r} {r.x_max!r} {r.y_min!r} {r.y_max!r}"


def _parse_region(text: str) -> Region:
    vals = [float(v) for v in text.split()]
    if len(vals) != 4:
        raise ConfigError(f"region needs 4 numbers, got {text!r}")
    return Region(*vals)


def _sched_dict_str(d: dict) -> str:
    return ";".join(f"{k}:{v}" for k, v in sorted(d.items()))


def _parse_sched_dict(text: str, cast) -> dict:
    out = {}
    text = text.strip()
    if not text:
        return out
    for part in text.split(";"):
        k, v = part.split(":")
        out[int(k)] = cast(v)
    return out


def config_to_ini(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp["experiment"] = {
        "name": cfg.name,
        "steps": str(cfg.steps),
        "mc_runs": str(cfg.mc_runs),
        "seed": str(cfg.seed),
        "filter": cfg.filter,
        "p_s": repr(cfg.p_s),
        "double_update": str(cfg.double_update).lower(),
        "birth_mass": "adaptive" if cfg.birth_mass is None else repr(cfg.birth_mass),
        "min_birth_particles": str(cfg.min_birth_particles),
        "ospa_c": repr(cfg.ospa_c),
        "ospa_p": repr(cfg.ospa_p),
        "notes": cfg.notes,
    }
    for key, dyn in (("dynamics", cfg.dynamics), ("filter_dynamics", cfg.filter_dynamics)):
        cp[key] = {
            "tau": repr(dyn.tau),
            "sigma_vx": repr(dyn.sigma_vx),
            "sigma_vy": repr(dyn.sigma_vy),
            "sigma_vtheta": repr(dyn.sigma_vtheta),
            "zeta_x": repr(dyn.zeta_x),
            "zeta_y": repr(dyn.zeta_y),
            "repulsion_norm": dyn.repulsion_norm,
        }
    win = cfg.sensor.window
    cp["sensor"] = {
        "sigma_range": repr(cfg.sensor.sigma_range),
        "sigma_bearing": repr(cfg.sensor.sigma_bearing),
        "p_d": repr(cfg.sensor.p_d),
        "clutter_mean": repr(cfg.sensor.clutter_mean),
        "window": _region_str(win.region),
        "speed": f"{win.speed_min!r} {win.speed_max!r}",
        "turn": f"{win.turn_min!r} {win.turn_max!r}",
    }
    cp["smc"] = {
        "n_init": str(cfg.smc.n_init),
        "resample_per_target": str(cfg.smc.resample_per_target),
        "birth_per_target": str(cfg.smc.birth_per_target),
        "cap": str(cfg.smc.cap),
        "roughening_scale": repr(cfg.smc.roughening_scale),
        "alpha": repr(cfg.smc.alpha),
        "band_eta": repr(cfg.smc.band_eta),
        "gamma0": repr(cfg.smc.gamma0),
        "resample_mode": cfg.smc.resample_mode,
    }
    cp["truth"] = {
        "groups": ";".join(f"{_region_str(r)}:{n}" for r, n in cfg.truth.groups),
        "placement": cfg.truth.placement,
        "spread": repr(cfg.truth.spread),
        "speed": repr(cfg.truth.speed),
    }
    sched = cfg.schedule
    cp["schedule"] = {
        "miss_region": "" if sched.miss_region is None else _region_str(sched.miss_region),
        "miss_cycle": str(sched.miss_cycle),
        "deaths": _sched_dict_str(sched.deaths),
        "births": _sched_dict_str(sched.births),
        "birth_region": "" if sched.birth_region is None else _region_str(sched.birth_region),
        "birth_spread": repr(sched.birth_spread),
        "clutter_changes": _sched_dict_str(sched.clutter_changes),
    }
    if cfg.domains is not None:
        cp["domains"] = {
            "a": _region_str(cfg.domains[0]),
            "b": _region_str(cfg.domains[1]),
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_from_ini(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    try:
        exp = cp["experiment"]

        def dyn_of(section) -> DynamicsConfig:
            s = cp[section]
            return DynamicsConfig(
                tau=s.getfloat("tau"),
                sigma_vx=s.getfloat("sigma_vx"),
                sigma_vy=s.getfloat("sigma_vy"),
                sigma_vtheta=s.getfloat("sigma_vtheta"),
                zeta_x=s.getfloat("zeta_x"),
                zeta_y=s.getfloat("zeta_y"),
                repulsion_norm=s.get("repulsion_norm", "state"),
            )

        sen = cp["sensor"]
        speed = [float(v) for v in sen.get("speed", "-3 3").split()]
        turn = [float(v) for v in sen.get("turn", "-0.05 0.05").split()]
        window = Window(_parse_region(sen["window"]), speed[0], speed[1], turn[0], turn[1])
        sensor = SensorConfig(
            sigma_range=sen.getfloat("sigma_range"),
            sigma_bearing=sen.getfloat("sigma_bearing"),
            p_d=sen.getfloat("p_d"),
            clutter_mean=sen.getfloat("clutter_mean"),
            window=window,
        )
        smc_s = cp["smc"]
        smc = SmcConfig(
            n_init=smc_s.getint("n_init"),
            resample_per_target=smc_s.getint("resample_per_target"),
            birth_per_target=smc_s.getint("birth_per_target"),
            cap=smc_s.getint("cap"),
            roughening_scale=smc_s.getfloat("roughening_scale"),
            alpha=smc_s.getfloat("alpha"),
            band_eta=smc_s.getfloat("band_eta"),
            gamma0=smc_s.getfloat("gamma0"),
            resample_mode=smc_s.get("resample_mode", "multinomial"),
        )
        tr = cp["truth"]
        groups = []
        for part in tr["groups"].split(";"):
            region_text, count = part.rsplit(":", 1)
            groups.append((_parse_region(region_text), int(count)))
        truth = TruthSpec(
            groups=tuple(groups),
            placement=tr.get("placement", "central"),
            spread=tr.getfloat("spread", 15.0),
            speed=tr.getfloat("speed", 1.0),
        )
        sch = cp["schedule"]
        schedule = EventSchedule(
            miss_region=(
                _parse_region(sch["miss_region"]) if sch.get("miss_region", "") else None
            ),
            miss_cycle=sch.getint("miss_cycle", 0),
            deaths=_parse_sched_dict(sch.get("deaths", ""), int),
            births=_parse_sched_dict(sch.get("births", ""), int),
            birth_region=(
                _parse_region(sch["birth_region"]) if sch.get("birth_region", "") else None
            ),
            birth_spread=sch.getfloat("birth_spread", 15.0),
            clutter_changes=_parse_sched_dict(sch.get("clutter_changes", ""), float),
        )
        domains = None
        if cp.has_section("domains"):
            domains = (_parse_region(cp["domains"]["a"]), _parse_region(cp["domains"]["b"]))
        birth_mass_text = exp.get("birth_mass", "adaptive")
        return ExperimentConfig(
            name=exp.get("name", "custom"),
            steps=exp.getint("steps"),
            mc_runs=exp.getint("mc_runs"),
            seed=exp.getint("seed"),
            filter=exp.get("filter", "dpp"),
            dynamics=dyn_of("dynamics"),
            filter_dynamics=dyn_of("filter_dynamics"),
            sensor=sensor,
            truth=truth,
            schedule=schedule,
            smc=smc,
            p_s=exp.getfloat("p_s", 1.0),
            double_update=exp.getboolean("double_update", True),
            birth_mass=None if birth_mass_text == "adaptive" else float(birth_mass_text),
            min_birth_particles=exp.getint("min_birth_particles", -1),
            domains=domains,
            ospa_c=exp.getfloat("ospa_c", 100.0),
            ospa_p=exp.getfloat("ospa_p", 2.0),
            notes=exp.get("notes", ""),
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad experiment config: {e}") from e


def load_config(path) -> ExperimentConfig:
    return config_from_ini(Path(path).read_text())
