"""Tracking performance metrics: OSPA and OMAT miss-distances,
measurement-estimate association, good-estimate statistics, and intensity
peak extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog


def _pairwise(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    y = np.asarray(y, dtype=float).reshape(-1, 2)
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def ospa(truth, est, c: float = 100.0, p: float = 2.0) -> float:
    """Optimal subpattern assignment distance with cutoff c and order p.

    Distances are cut at c, the optimal assignment covers the smaller set,
    unmatched points pay the cardinality penalty c, and the result is the
    order-p power mean.  Symmetric; both sets empty gives 0 by convention.
    """
    if c <= 0 or p < 1:
        raise ValueError("require c > 0 and p >= 1")
    x = np.asarray(truth, dtype=float).reshape(-1, 2)
    y = np.asarray(est, dtype=float).reshape(-1, 2)
    n, m = x.shape[0], y.shape[0]
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return float(c)
    d = np.minimum(_pairwise(x, y), c) ** p
    rows, cols = linear_sum_assignment(d)
    cost = float(d[rows, cols].sum())
    big = max(n, m)
    return float(((cost + c**p * abs(n - m)) / big) ** (1.0 / p))


def omat(truth, est, p: float = 2.0) -> float:
    """Optimal mass transfer distance: the p-Wasserstein metric between the
    uniform empirical measures, solved as a transportation LP on the
    pairwise distance matrix.  Undefined for empty sets.
    """
    x = np.asarray(truth, dtype=float).reshape(-1, 2)
    y = np.asarray(est, dtype=float).reshape(-1, 2)
    n, m = x.shape[0], y.shape[0]
    if n == 0 or m == 0:
        raise ValueError("OMAT is undefined for empty point sets")
    d = _pairwise(x, y) ** p
    if n == 1 or m == 1:
        # plan forced: the single point meets everything with equal mass
        return float(d.mean()) ** (1.0 / p)
    cost = d.reshape(-1)
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros((n, m))
        row[i, :] = 1.0
        a_eq.append(row.reshape(-1))
        b_eq.append(1.0 / n)
    for j in range(m - 1):  # drop one redundant constraint
        col = np.zeros((n, m))
        col[:, j] = 1.0
        a_eq.append(col.reshape(-1))
        b_eq.append(1.0 / m)
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun) ** (1.0 / p)


def associate(detections_xy: np.ndarray, estimates: np.ndarray) -> list[tuple[int, int]]:
    """Nearest estimate per detection; ties break to the lower estimate index."""
    detections_xy = np.asarray(detections_xy, dtype=float).reshape(-1, 2)
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if detections_xy.shape[0] == 0 or estimates.shape[0] == 0:
        return []
    d = _pairwise(detections_xy, estimates)
    return [(k, int(np.argmin(d[k]))) for k in range(d.shape[0])]


def good_estimate_stats(
    scan,
    estimates: np.ndarray,
    truth_positions: dict[int, np.ndarray],
) -> tuple[Optional[float], Optional[float]]:
    """Fraction of target-originated measurements beaten by their estimate,
    and the mean relative distance improvement.

    A measurement is beaten when its associated (nearest) estimate is
    strictly closer to the originating target than the measurement itself.
    Returns (None, None) when the scan has no target-originated
    measurements or no estimates exist to associate.
    """
    if scan.truth_links is None:
        return None, None
    links = scan.truth_links
    target_rows = [k for k in range(len(scan)) if links[k] >= 0 and links[k] in truth_positions]
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if not target_rows or estimates.shape[0] == 0:
        return None, None
    xy = scan.cartesian()
    pairs = dict(associate(xy[target_rows], estimates))
    good = 0
    gains = []
    for slot, k in enumerate(target_rows):
        truth = truth_positions[int(links[k])]
        est = estimates[pairs[slot]]
        d_meas = float(np.hypot(*(xy[k] - truth)))
        d_est = float(np.hypot(*(est - truth)))
        if d_est < d_meas:
            good += 1
        if d_meas > 0:
            gains.append((d_meas - d_est) / d_meas)
        else:
            gains.append(0.0)
    ratio = good / len(target_rows)
    gain = float(np.mean(gains))
    return ratio, gain


@dataclass(frozen=True)
class MetricRecord:
    t: int
    ospa: float
    omat: Optional[float]
    good_ratio: Optional[float]
    gain: Optional[float]
    count_estimate: float
    count_truth: int


def _weighted_kmeans(
    points: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator, iters: int = 50
) -> tuple[np.ndarray, float]:
    n = points.shape[0]
    probs = weights / weights.sum()
    # k-means++-style seeding from the intensity distribution
    first = rng.choice(n, p=probs)
    centers = [points[first]]
    for _ in range(1, k):
        d2 = np.min(_pairwise(points, np.array(centers)) ** 2, axis=1)
        score = probs * d2
        total = score.sum()
        if total <= 0:
            centers.append(points[rng.choice(n, p=probs)])
        else:
            centers.append(points[rng.choice(n, p=score / total)])
    centers = np.array(centers)
    for _ in range(iters):
        assign = np.argmin(_pairwise(points, centers), axis=1)
        new_centers = centers.copy()
        for c in range(k):
            sel = assign == c
            wsel = weights[sel]
            if wsel.sum() > 0:
                new_centers[c] = (points[sel] * wsel[:, None]).sum(axis=0) / wsel.sum()
        if np.allclose(new_centers, centers, atol=1e-12, rtol=0.0):
            centers = new_centers
            break
        centers = new_centers
    d2 = np.min(_pairwise(points, centers) ** 2, axis=1)
    inertia = float((weights * d2).sum())
    return centers, inertia


def extract_estimates(
    positions: np.ndarray,
    intensity: np.ndarray,
    gamma: float,
    rng: np.random.Generator,
    restarts: int = 10,
) -> np.ndarray:
    """Target locations from the intensity surface: weighted k-means peaks.

    k = round(gamma); gamma <= 0.5 yields an empty estimate set.  Best of
    ``restarts`` seedings by weighted within-cluster sum of squares.
    """
    k = int(math.floor(gamma + 0.5))
    if gamma <= 0.5 or k == 0:
        return np.zeros((0, 2))
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    intensity = np.clip(np.asarray(intensity, dtype=float), 0.0, None)
    if positions.shape[0] == 0 or intensity.sum() <= 0:
        return np.zeros((0, 2))
    k = min(k, positions.shape[0])
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        centers, inertia = _weighted_kmeans(positions, intensity, k, rng)
        if inertia < best_inertia:
            best, best_inertia = centers, inertia
    return best
