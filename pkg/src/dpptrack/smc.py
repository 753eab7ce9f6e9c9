"""Particle lifecycle shared by both filters: initialization, birth
injection, multinomial resampling with roughening, and kernel
(re-)initialization.

Particle grids carry unit measure weights, matching the pseudocode
convention in which kernel diagonals are per-particle masses and weighted
integrals reduce to plain sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateIntensity
from .kernels import (
    CORRELATION,
    DiscretizedKernel,
    GridSpec,
    IndexBand,
    MaskBand,
    band_allowed,
    project_kernel,
)
from .scenario import Window

SURVIVOR = 0
BIRTH = 1


@dataclass(frozen=True)
class ParticleSet:
    states: np.ndarray  # (N, 5)
    origin: np.ndarray  # (N,) int8, SURVIVOR or BIRTH

    def __post_init__(self):
        st = np.asarray(self.states, dtype=float).reshape(-1, 5)
        og = np.asarray(self.origin, dtype=np.int8)
        if og.shape != (st.shape[0],):
            raise ValueError("origin tags must be one per particle")
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "origin", og)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, [0, 2]]

    def grid(self) -> GridSpec:
        return GridSpec.unit(self.states)


RESAMPLE_MODES = ("multinomial", "systematic", "topk")


@dataclass(frozen=True)
class SmcConfig:
    n_init: int = 800                # N_{Phi,0}
    resample_per_target: int = 30    # P_p
    birth_per_target: int = 10       # P_b
    cap: int = 1000                  # hard particle cap
    roughening_scale: float = 0.05   # jitter s.d. fraction of domain extent
    alpha: float = 4.0               # off-diagonal init coefficient
    band_eta: float = 0.1            # index-band fraction
    gamma0: float = 2.0              # prior intensity at t = 0
    resample_mode: str = "multinomial"  # or "systematic" / "topk"

    def __post_init__(self):
        if min(self.n_init, self.resample_per_target, self.birth_per_target, self.cap) <= 0:
            raise ValueError("particle counts must be positive")
        if not (0.0 < self.band_eta < 1.0):
            raise ValueError("band_eta must lie in (0, 1)")
        if self.roughening_scale < 0 or self.alpha < 0 or self.gamma0 <= 0:
            raise ValueError("roughening_scale, alpha must be >= 0 and gamma0 > 0")
        if self.resample_mode not in RESAMPLE_MODES:
            raise ValueError(f"resample_mode must be one of {RESAMPLE_MODES}")


def banded_block(n: int, diag: float, offdiag: float, eta: float) -> np.ndarray:
    """diag on the diagonal, offdiag where |i - j| <= eta * n, zero outside."""
    idx = np.arange(n)
    inside = np.abs(idx[:, None] - idx[None, :]) <= eta * n
    block = np.where(inside, offdiag, 0.0)
    np.fill_diagonal(block, diag)
    return block


def init_particles(
    cfg: SmcConfig, window: Window, rng: np.random.Generator
) -> tuple[ParticleSet, DiscretizedKernel]:
    """Uniform initial particles plus the projected prior kernel.

    Kernel entries start at gamma0/N on the diagonal and alpha*gamma0/N
    inside the index band; with alpha > 1 this is far from positive
    semidefinite, so the spectral projection is part of initialization.
    """
    states = window.sample_states(cfg.n_init, rng)
    particles = ParticleSet(states, np.zeros(cfg.n_init, dtype=np.int8))
    n = cfg.n_init
    raw = banded_block(n, cfg.gamma0 / n, cfg.alpha * cfg.gamma0 / n, cfg.band_eta)
    kernel = project_kernel(
        raw, particles.grid(), CORRELATION, band=IndexBand(cfg.band_eta)
    )
    return particles, kernel


def roughening_sd(extents: np.ndarray, scale: float, count: int) -> np.ndarray:
    """Per-dimension jitter s.d.: scale * extent * N^(-1/d)."""
    if count <= 0:
        return np.zeros_like(extents)
    d = extents.shape[0]
    return scale * extents * count ** (-1.0 / d)


def select_ids(
    intensity: np.ndarray, size: int, mode: str, rng: np.random.Generator
) -> np.ndarray:
    """Source indices for the resampled particles under the chosen mode.

    multinomial: independent draws proportional to intensity (default).
    systematic: one uniform offset, stratified cumulative selection.
    topk: deterministic, copies allocated to the largest intensities
    (a literal reading of selecting the maximizing diagonal entries; for
    sensitivity studies only).
    """
    intensity = np.clip(np.asarray(intensity, dtype=float), 0.0, None)
    probs = intensity / intensity.sum()
    n = probs.shape[0]
    if mode == "multinomial":
        counts = rng.multinomial(size, probs)
        return np.repeat(np.arange(n), counts)
    if mode == "systematic":
        edges = np.cumsum(probs)
        edges[-1] = 1.0
        points = (rng.uniform() + np.arange(size)) / size
        return np.searchsorted(edges, points, side="right").clip(0, n - 1)
    if mode == "topk":
        order = np.argsort(-intensity, kind="stable")
        reps = np.zeros(n, dtype=int)
        expected = probs * size
        base = np.floor(expected).astype(int)
        reps[:] = base
        short = size - int(base.sum())
        for idx in order:
            if short == 0:
                break
            reps[idx] += 1
            short -= 1
        return np.repeat(np.arange(n), reps)
    raise ValueError(f"unknown resample mode {mode!r}")


def resample(
    intensity: np.ndarray,
    particles: ParticleSet,
    cfg: SmcConfig,
    window: Window,
    rng: np.random.Generator,
    size: int | None = None,
) -> ParticleSet:
    """Multinomial draw proportional to intensity, then Gaussian roughening.

    Output size defaults to min(P_p * floor(total intensity), cap).  Raises
    DegenerateIntensity when nothing has mass (the harness records the run
    as lost and reinitializes).
    """
    intensity = np.asarray(intensity, dtype=float)
    total = float(intensity.sum())
    if total <= 0.0 or not np.any(intensity > 0):
        raise DegenerateIntensity("all particle intensities are zero")
    if size is None:
        size = min(cfg.resample_per_target * int(math.floor(total)), cfg.cap)
    if size <= 0:
        return ParticleSet(np.zeros((0, 5)), np.zeros(0, dtype=np.int8))
    ids = select_ids(intensity, size, cfg.resample_mode, rng)
    states = particles.states[ids].copy()
    sd = roughening_sd(window.extents(), cfg.roughening_scale, size)
    if np.any(sd > 0):
        states += rng.standard_normal(states.shape) * sd
    return ParticleSet(states, np.zeros(size, dtype=np.int8))


def inject_births(
    particles: ParticleSet,
    kernel: DiscretizedKernel,
    cfg: SmcConfig,
    gamma_birth: float,
    window: Window,
    rng: np.random.Generator,
    min_particles: int = 0,
) -> tuple[ParticleSet, DiscretizedKernel]:
    """Append uniform birth particles and extend the kernel.

    The birth block carries diagonal gamma_birth/N_b and off-diagonal
    alpha*gamma_birth/N_b inside its own index band; cross-blocks between
    old and new particles are zero.  The extended kernel is re-projected.
    """
    n_birth = cfg.birth_per_target * int(math.floor(gamma_birth))
    if n_birth == 0:
        n_birth = max(int(min_particles), 0)
    if n_birth == 0:
        return particles, kernel
    born = window.sample_states(n_birth, rng)
    states = np.vstack([particles.states, born])
    origin = np.concatenate([particles.origin, np.full(n_birth, BIRTH, dtype=np.int8)])
    merged = ParticleSet(states, origin)

    n_old = len(particles)
    n_tot = n_old + n_birth
    extended = np.zeros((n_tot, n_tot))
    extended[:n_old, :n_old] = kernel.entries
    extended[n_old:, n_old:] = banded_block(
        n_birth, gamma_birth / n_birth, cfg.alpha * gamma_birth / n_birth, cfg.band_eta
    )
    allowed = np.zeros((n_tot, n_tot), dtype=bool)
    old_allowed = band_allowed(kernel.band, kernel.grid)
    allowed[:n_old, :n_old] = True if old_allowed is None else old_allowed
    idx = np.arange(n_birth)
    allowed[n_old:, n_old:] = np.abs(idx[:, None] - idx[None, :]) <= cfg.band_eta * n_birth
    new_kernel = project_kernel(
        extended, merged.grid(), CORRELATION, band=MaskBand(allowed)
    )
    return merged, new_kernel


def rebuild_kernel(
    particles: ParticleSet, cfg: SmcConfig, gamma: float
) -> DiscretizedKernel:
    """Fresh post-resampling kernel: diag gamma/N, banded alpha*gamma/N."""
    n = len(particles)
    raw = banded_block(n, gamma / n, cfg.alpha * gamma / n, cfg.band_eta)
    return project_kernel(raw, particles.grid(), CORRELATION, band=IndexBand(cfg.band_eta))
