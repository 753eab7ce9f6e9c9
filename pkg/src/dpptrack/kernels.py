"""Dense symmetric-kernel algebra on weighted discrete state spaces.

A kernel K(x_i, x_j) lives on a finite grid of points with measure weights
w_i, and represents either a correlation kernel (operator spectrum in
[0, 1 - delta]) or an interaction kernel J = (Id - K)^{-1} K (positive
semidefinite).  All operator algebra goes through the symmetrized matrix
S = W^{1/2} K W^{1/2}, whose eigenvalues are the operator spectrum; with
unit weights, S is the kernel matrix itself and the discretized formulas
reduce to plain matrix sums.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SpectrumError

log = logging.getLogger(__name__)

# Spectral margin: correlation spectra are clipped into [0, 1 - DELTA] so
# that (Id - K)^{-1} stays well conditioned (condition number <= 1/DELTA).
DELTA = 1e-3

# Determinant/radicand values in [-CLAMP_WARN, 0) are treated as roundoff
# and clamped silently; anything below gets a log warning.
CLAMP_WARN = 1e-8

CORRELATION = "correlation"
INTERACTION = "interaction"


@dataclass(frozen=True)
class GridSpec:
    """Discretized window: points of the state space plus measure weights."""

    points: np.ndarray  # (N, d)
    weights: np.ndarray  # (N,), nonnegative masses nu({x_i})

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must be one per point")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @staticmethod
    def unit(points: np.ndarray) -> "GridSpec":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return GridSpec(pts, np.ones(pts.shape[0]))


# ---------------------------------------------------------------------------
# Band predicates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexBand:
    """Zero out entries with |i - j| > eta * N (the pseudocode's index rule)."""

    eta: float


@dataclass(frozen=True)
class SpatialBand:
    """Zero out entries with ||x_i - x_j|| > eta * diam(points).

    ``dims`` restricts the norm to selected state coordinates (e.g. the
    position components); None uses the full state vector.
    """

    eta: float
    dims: Optional[tuple[int, ...]] = None


@dataclass(frozen=True, eq=False)
class MaskBand:
    """Explicit allowed-entry mask, used for block-extended kernels."""

    allowed: np.ndarray  # (N, N) bool


Band = IndexBand | SpatialBand | MaskBand | None


def band_allowed(band: Band, grid: GridSpec) -> Optional[np.ndarray]:
    """Boolean matrix of entries the band permits to be nonzero (None = all)."""
    n = len(grid)
    if band is None:
        return None
    if isinstance(band, MaskBand):
        allowed = np.asarray(band.allowed, dtype=bool)
        if allowed.shape != (n, n):
            raise ValueError("mask shape does not match grid")
        return allowed | np.eye(n, dtype=bool)
    if isinstance(band, IndexBand):
        idx = np.arange(n)
        return np.abs(idx[:, None] - idx[None, :]) <= band.eta * n
    if isinstance(band, SpatialBand):
        pts = grid.points if band.dims is None else grid.points[:, list(band.dims)]
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        diam = float(dist.max()) if n > 1 else 0.0
        return (dist <= band.eta * diam) | np.eye(n, dtype=bool)
    raise TypeError(f"unknown band type: {band!r}")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    """Symmetric kernel matrix over a weighted grid.

    Cheap structural invariants (symmetry, band zeros) are enforced at
    construction; spectral invariants are checked by :func:`validate_kernel`
    or restored by :func:`project_kernel`.
    """

    grid: GridSpec
    entries: np.ndarray  # (N, N)
    kind: str
    band: Band = None

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.shape != (len(self.grid), len(self.grid)):
            raise ValueError("kernel shape does not match grid")
        if not np.array_equal(m, m.T):
            raise ValueError("kernel entries must be exactly symmetric")
        if self.kind not in (CORRELATION, INTERACTION):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        allowed = band_allowed(self.band, self.grid)
        if allowed is not None and np.any(m[~allowed] != 0.0):
            raise ValueError("kernel has nonzero entries outside its band")
        object.__setattr__(self, "entries", m)

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()


@dataclass(frozen=True)
class MomentPair:
    """First moment (intensity) and second factorial moment of a DPP."""

    intensity: np.ndarray  # (N,)
    pair_factorial: np.ndarray  # (N, N), zero diagonal


def _sqrt_weights(grid: GridSpec) -> np.ndarray:
    if np.any(grid.weights <= 0):
        raise ValueError("operator algebra requires strictly positive weights")
    return np.sqrt(grid.weights)


def operator_matrix(kernel: DiscretizedKernel) -> np.ndarray:
    """Symmetrized operator matrix S = W^{1/2} K W^{1/2}."""
    rw = _sqrt_weights(kernel.grid)
    return kernel.entries * rw[:, None] * rw[None, :]


def operator_spectrum(kernel: DiscretizedKernel) -> np.ndarray:
    return np.linalg.eigvalsh(operator_matrix(kernel))


def _spectral_transform(kernel, fn, out_kind, delta=DELTA):
    rw = _sqrt_weights(kernel.grid)
    s = kernel.entries * rw[:, None] * rw[None, :]
    lam, u = np.linalg.eigh(s)
    if lam.max(initial=0.0) > 1.0 - delta + 1e-12:
        raise SpectrumError(
            f"correlation spectrum reaches {lam.max():.6g} >= 1 - delta "
            f"(delta={delta:g}); project the kernel first"
        )
    lam = np.clip(lam, 0.0, None)  # roundoff guard; material negativity is a projection bug
    t = (u * fn(lam)) @ u.T
    entries = t / rw[:, None] / rw[None, :]
    entries = 0.5 * (entries + entries.T)
    return DiscretizedKernel(kernel.grid, entries, out_kind, band=None)


def interaction_kernel(kernel: DiscretizedKernel, delta: float = DELTA) -> DiscretizedKernel:
    """Interaction kernel J = (Id - K)^{-1} K of a correlation kernel.

    Computed through the eigendecomposition of the symmetrized operator, so
    the spectrum comes for free for the domain check.  Raises
    :class:`SpectrumError` if any operator eigenvalue is at or above
    1 - delta.
    """
    if kernel.kind != CORRELATION:
        raise ValueError("interaction_kernel expects a correlation kernel")
    return _spectral_transform(kernel, lambda lam: lam / (1.0 - lam), INTERACTION, delta)


def correlation_from_interaction(kernel: DiscretizedKernel) -> DiscretizedKernel:
    """Inverse map K = (Id + J)^{-1} J, used to round-trip the transform."""
    if kernel.kind != INTERACTION:
        raise ValueError("expects an interaction kernel")
    rw = _sqrt_weights(kernel.grid)
    s = kernel.entries * rw[:, None] * rw[None, :]
    lam, u = np.linalg.eigh(s)
    lam = np.clip(lam, 0.0, None)
    t = (u * (lam / (1.0 + lam))) @ u.T
    entries = t / rw[:, None] / rw[None, :]
    entries = 0.5 * (entries + entries.T)
    return DiscretizedKernel(kernel.grid, entries, CORRELATION, band=None)


def determinantal_moments(kernel: DiscretizedKernel) -> MomentPair:
    """Intensity K(x,x) and pair moment K(x,x)K(y,y) - K(x,y)^2.

    Entries that go negative from floating-point arithmetic are clamped to
    zero; clamps beyond roundoff scale are logged.
    """
    if kernel.kind != CORRELATION:
        raise ValueError("determinantal_moments expects a correlation kernel")
    d = kernel.diagonal
    pair = np.outer(d, d) - kernel.entries**2
    np.fill_diagonal(pair, 0.0)
    _clamp(pair, "pair factorial moment")
    intensity = d.copy()
    _clamp(intensity, "intensity")
    return MomentPair(intensity, pair)


def _clamp(arr: np.ndarray, what: str, warn: float = CLAMP_WARN) -> int:
    """Clamp negatives to zero in place; return the number of clamps."""
    neg = arr < 0
    count = int(neg.sum())
    if count:
        worst = float(arr[neg].min())
        if worst < -warn:
            log.warning("clamping %d negative %s values (worst %.3e)", count, what, worst)
        arr[neg] = 0.0
    return count


def cross_covariance(kernel: DiscretizedKernel, a, b) -> float:
    """Count covariance between index sets A and B under the DPP form.

    cov = sum_{A n B} K(x,x) w - sum_{A x B} K(x,y)^2 w w; the double sum
    includes x == y, which is what the count algebra on an atomic grid
    requires.  For disjoint A, B this is minus a sum of squares, hence <= 0
    exactly.
    """
    a = np.asarray(sorted(set(a)), dtype=int)
    b = np.asarray(sorted(set(b)), dtype=int)
    w = kernel.grid.weights
    inter = np.intersect1d(a, b)
    first = float((np.diag(kernel.entries)[inter] * w[inter]).sum()) if inter.size else 0.0
    if a.size and b.size:
        block = kernel.entries[np.ix_(a, b)] ** 2
        second = float((w[a][:, None] * block * w[b][None, :]).sum())
    else:
        second = 0.0
    return first - second


def fredholm_determinant(kernel: DiscretizedKernel) -> float:
    """det(Id - K) of the operator, i.e. the void probability of the DPP."""
    lam = operator_spectrum(kernel)
    return float(np.prod(1.0 - lam))


def janossy_density_dpp(
    kernel: DiscretizedKernel, subset, delta: float = DELTA
) -> float:
    """Probability mass of exactly the given point configuration.

    det(Id - K) * det(J restricted to the subset) * prod of subset weights.
    The empty subset returns det(Id - K).
    """
    if kernel.kind != CORRELATION:
        raise ValueError("janossy_density_dpp expects a correlation kernel")
    subset = tuple(subset)
    if len(set(subset)) != len(subset):
        return 0.0
    lam = operator_spectrum(kernel)
    if lam.max(initial=0.0) > 1.0 - delta + 1e-12:
        raise SpectrumError(f"spectrum reaches {lam.max():.6g}; project the kernel first")
    void = float(np.prod(1.0 - lam))
    if not subset:
        return void
    j = interaction_kernel(kernel, delta)
    idx = list(subset)
    det = float(np.linalg.det(j.entries[np.ix_(idx, idx)]))
    mass = void * det * float(np.prod(kernel.grid.weights[idx]))
    arr = np.array([mass])
    _clamp(arr, "Janossy mass")
    return float(arr[0])


def all_subset_masses(kernel: DiscretizedKernel, delta: float = DELTA) -> dict[tuple[int, ...], float]:
    """Janossy masses of every subset of a small grid (N <= 12)."""
    n = len(kernel)
    if n > 12:
        raise ValueError("subset enumeration is limited to 12 points")
    lam = operator_spectrum(kernel)
    if lam.max(initial=0.0) > 1.0 - delta + 1e-12:
        raise SpectrumError(f"spectrum reaches {lam.max():.6g}; project the kernel first")
    void = float(np.prod(1.0 - lam))
    j = interaction_kernel(kernel, delta).entries
    w = kernel.grid.weights
    out: dict[tuple[int, ...], float] = {(): void}
    for bits in range(1, 1 << n):
        idx = [i for i in range(n) if bits >> i & 1]
        det = float(np.linalg.det(j[np.ix_(idx, idx)]))
        out[tuple(idx)] = max(void * det * float(np.prod(w[idx])), 0.0)
    return out


def project_kernel(
    entries: np.ndarray,
    grid: GridSpec,
    kind: str = CORRELATION,
    band: Band = None,
    delta: float = DELTA,
    max_iter: int = 25,
) -> DiscretizedKernel:
    """Restore a symmetric matrix to the valid kernel set.

    Alternates eigenvalue clipping (into [0, 1 - delta] for correlation
    kernels, [0, inf) for interaction kernels) with re-zeroing the banded
    entries; both constraint sets are convex, so the alternation contracts
    the violation geometrically.  Because polishing the last few digits
    this way costs one eigendecomposition per digit, the loop is capped and
    the remaining violation is removed exactly in one closing move: a
    diagonal load of size max(0, -lambda_min) lifts the floor (the band
    holds since the load only touches the diagonal) and a multiplicative
    shrink enforces the ceiling.  Feasible inputs pass through unchanged,
    so the map is idempotent.
    """
    m = 0.5 * (np.asarray(entries, dtype=float) + np.asarray(entries, dtype=float).T)
    allowed = band_allowed(band, grid)
    rw = _sqrt_weights(grid)
    hi = (1.0 - delta) if kind == CORRELATION else np.inf
    # Exactly diagonal matrices project by clipping the diagonal; this also
    # keeps the zero-interaction mode free of eigendecomposition roundoff.
    if np.count_nonzero(m - np.diag(np.diag(m))) == 0:
        d = np.clip(np.diag(m), 0.0, hi / np.clip(grid.weights, 1e-300, None))
        # operator eigenvalue of a diagonal kernel entry is K_ii * w_i
        return DiscretizedKernel(grid, np.diag(d), kind, band)
    feas_tol = 1e-12
    for _ in range(max_iter):
        if allowed is not None:
            m = np.where(allowed, m, 0.0)
            m = 0.5 * (m + m.T)
        s = m * rw[:, None] * rw[None, :]
        lam, u = np.linalg.eigh(s)
        floor = max(0.0, -float(lam.min(initial=0.0)))
        ceil = max(0.0, float(lam.max(initial=0.0)) - hi) if np.isfinite(hi) else 0.0
        if floor <= feas_tol and ceil <= feas_tol:
            return DiscretizedKernel(grid, m, kind, band)
        clipped = np.clip(lam, 0.0, hi)
        s = (u * clipped) @ u.T
        m = s / rw[:, None] / rw[None, :]
        m = 0.5 * (m + m.T)
    # closing move: exact feasibility from the last banded iterate
    if allowed is not None:
        m = np.where(allowed, m, 0.0)
        m = 0.5 * (m + m.T)
    s = m * rw[:, None] * rw[None, :]
    lam = np.linalg.eigvalsh(s)
    floor = max(0.0, -float(lam.min(initial=0.0)))
    if floor > 0.0:
        if floor > 1e-6:
            log.warning("kernel projection closing load of %.2e on the diagonal", floor)
        m = m + np.diag(np.full(len(grid), floor) / grid.weights)
        top = float(lam.max(initial=0.0)) + floor
    else:
        top = float(lam.max(initial=0.0))
    if np.isfinite(hi) and top > hi:
        m = m * (hi / top)
    m = 0.5 * (m + m.T)
    return DiscretizedKernel(grid, m, kind, band)


def validate_kernel(kernel: DiscretizedKernel, delta: float = DELTA, tol: float = 1e-9) -> None:
    """Raise if any DiscretizedKernel invariant fails (used by test rigs)."""
    m = kernel.entries
    if not np.array_equal(m, m.T):
        raise AssertionError("kernel not exactly symmetric")
    allowed = band_allowed(kernel.band, kernel.grid)
    if allowed is not None and np.any(m[~allowed] != 0.0):
        raise AssertionError("band condition violated")
    lam = operator_spectrum(kernel)
    if lam.min(initial=0.0) < -tol:
        raise AssertionError(f"spectrum has negative eigenvalue {lam.min():.3e}")
    if kernel.kind == CORRELATION and lam.max(initial=0.0) > 1.0 - delta + tol:
        raise AssertionError(f"spectrum reaches {lam.max():.6g} > 1 - delta")


def dump_kernel_csv(kernel: DiscretizedKernel, path) -> None:
    """Debug dump: dense row-major CSV with 17 significant digits."""
    with open(path, "w") as fh:
        for row in kernel.entries:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")
