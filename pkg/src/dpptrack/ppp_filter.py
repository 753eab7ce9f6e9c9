"""Classical SMC Poisson PHD filter: the zero-interaction baseline.

Particles carry intensity weights whose sum is the expected target count.
The step pipeline (predict, adaptive birth, update, resample with
roughening, optional post-resampling re-update) deliberately mirrors the
determinantal filter so that only the weight update differs between the
two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .likelihood import SensorModel
from .scenario import DynamicsConfig, Scan, Window, step_dynamics
from .smc import SmcConfig, roughening_sd, select_ids


@dataclass(frozen=True)
class SurvivalModel:
    """Survival probability plus the filter-side motion model."""

    p_s: float
    dynamics: DynamicsConfig

    def __post_init__(self):
        if not (0.0 <= self.p_s <= 1.0):
            raise ValueError("p_s must lie in [0, 1]")


@dataclass(frozen=True)
class BirthScheme:
    """How birth particles are injected each step.

    mass None means the adaptive pseudocode rule (birth mass equals the
    predicted count); a float fixes the per-step birth mass.  When the
    floored target count is zero, min_particles are injected instead so the
    filter cannot die out.
    """

    particles_per_target: int
    mass: Optional[float] = None
    min_particles: int = 0


@dataclass(frozen=True)
class WeightedParticles:
    states: np.ndarray  # (N, 5)
    weights: np.ndarray  # (N,) intensity masses

    def __post_init__(self):
        st = np.asarray(self.states, dtype=float).reshape(-1, 5)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (st.shape[0],):
            raise ValueError("one weight per particle")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, [0, 2]]


def birth_count(scheme: BirthScheme, gamma: float) -> tuple[int, float]:
    """(number of birth particles, total birth mass) for the current step."""
    mass = gamma if scheme.mass is None else scheme.mass
    n = scheme.particles_per_target * int(math.floor(mass))
    if n == 0:
        n = max(scheme.min_particles, 0)
    return n, mass


def ppp_predict(
    p: WeightedParticles,
    survival: SurvivalModel,
    birth: BirthScheme,
    window: Window,
    rng: np.random.Generator,
) -> WeightedParticles:
    """Push particles through the motion model, scale by p_s, append births."""
    if len(p):
        states = step_dynamics(p.states, survival.dynamics, rng)
        weights = p.weights * survival.p_s
    else:
        states = p.states
        weights = p.weights
    gamma = float(np.sum(weights))
    n_birth, mass = birth_count(birth, gamma)
    if n_birth > 0:
        born = window.sample_states(n_birth, rng)
        states = np.vstack([states, born]) if len(p) else born
        weights = np.concatenate([weights, np.full(n_birth, mass / n_birth)])
    return WeightedParticles(states, weights)


def poisson_weight_update(
    weights: np.ndarray, like: np.ndarray, clutter: np.ndarray, q_d: float
) -> np.ndarray:
    """Classical PHD corrector.

    w_i <- w_i * (q_d + sum_z l~_d(z|x_i) / (l_c(z) + sum_u l~_d(z|x_u) w_u)).
    """
    weights = np.asarray(weights, dtype=float)
    if like.shape[0] == 0:
        return weights * q_d
    denom = clutter + like @ weights
    corrector = q_d + (like / denom[:, None]).sum(axis=0)
    return weights * corrector


def ppp_update(p: WeightedParticles, scan: Scan, sensor: SensorModel) -> WeightedParticles:
    like = sensor.tilde_matrix(scan.detections, p.states)
    clutter = sensor.clutter_density(scan.detections)
    return WeightedParticles(p.states, poisson_weight_update(p.weights, like, clutter, sensor.q_d))


@dataclass
class PppStepRecord:
    gamma: float
    particles: WeightedParticles


class PppPhdFilter:
    """Stateful SMC-PHD filter following the shared step pipeline."""

    def __init__(
        self,
        smc: SmcConfig,
        survival: SurvivalModel,
        birth: BirthScheme,
        sensor: SensorModel,
        window: Window,
        rng: np.random.Generator,
        double_update: bool = True,
    ):
        self.smc = smc
        self.survival = survival
        self.birth = birth
        self.sensor = sensor
        self.window = window
        self.rng = rng
        self.double_update = double_update
        states = window.sample_states(smc.n_init, rng)
        weights = np.full(smc.n_init, smc.gamma0 / smc.n_init)
        self.particles = WeightedParticles(states, weights)
        self.gamma = smc.gamma0

    def _resample(self, p: WeightedParticles, gamma: float, size: int) -> WeightedParticles:
        ids = select_ids(p.weights, size, self.smc.resample_mode, self.rng)
        states = p.states[ids].copy()
        sd = roughening_sd(self.window.extents(), self.smc.roughening_scale, size)
        if np.any(sd > 0):
            states += self.rng.standard_normal(states.shape) * sd
        return WeightedParticles(states, np.full(size, gamma / size))

    def step(self, scan: Scan) -> PppStepRecord:
        pred = ppp_predict(self.particles, self.survival, self.birth, self.window, self.rng)
        post = ppp_update(pred, scan, self.sensor)
        gamma = post.mass
        size = min(self.smc.resample_per_target * int(math.floor(gamma)), self.smc.cap)
        if size <= 0:
            # filter nearly empty: keep the cloud, let births re-seed it
            self.particles = post
            self.gamma = gamma
            return PppStepRecord(self.gamma, self.particles)
        resampled = self._resample(post, gamma, size)
        if self.double_update:
            post2 = ppp_update(resampled, scan, self.sensor)
            self.particles = post2
            self.gamma = post2.mass
        else:
            self.particles = resampled
            self.gamma = gamma
        return PppStepRecord(self.gamma, self.particles)

    def count_in(self, region) -> float:
        inside = region.contains_states(self.particles.states)
        return float(np.sum(self.particles.weights[inside]))


def export_ppp_state_csv(path, run: int, t: int, p: WeightedParticles, gamma: float) -> None:
    """Per-step snapshot: particles plus weights plus the count estimate."""
    with open(path, "w") as fh:
        fh.write("run,t,particle,x,xdot,y,ydot,theta,weight,gamma\n")
        for i in range(len(p)):
            x, xd, y, yd, th = (float(v) for v in p.states[i])
            fh.write(
                f"{run},{t},{i},{x!r},{xd!r},{y!r},{yd!r},{th!r},"
                f"{float(p.weights[i])!r},{float(gamma)!r}\n"
            )
