"""Self-contained validation battery behind the `oracle-check` CLI command.

Each check exercises the exact-oracle formulas against an independent
computation and reports one PASS/FAIL line; all of them also run (with
more cases) in the pytest suite.
"""

from __future__ import annotations

import numpy as np

from .kernels import CORRELATION, GridSpec, project_kernel
from .oracle import (
    FiniteProcess,
    ObservationModel,
    dpp_process,
    enumerate_posterior,
    measurement_janossy,
    poisson_process,
    posterior_covariance_exact,
    posterior_intensity_exact,
    corrector_upsilon1,
    corrector_upsilon2,
)


def _random_case(rng: np.random.Generator):
    g = int(rng.integers(2, 5))
    z = int(rng.integers(1, 4))
    grid = GridSpec(rng.uniform(-1, 1, (g, 2)), rng.uniform(0.5, 1.5, g))
    obs = ObservationModel(
        p_d=rng.uniform(0.3, 0.9, g),
        l_d=rng.uniform(0.05, 1.0, (z, g)),
        l_c=rng.uniform(0.1, 0.6, z),
    )
    support = min(g, 3)
    table = {}
    for bits in range(1 << g):
        cfg = tuple(i for i in range(g) if bits >> i & 1)
        if len(cfg) <= support:
            table[cfg] = float(rng.uniform(0.05, 1.0))
    prior = FiniteProcess(grid, table).normalized()
    meas = tuple(int(v) for v in rng.choice(z, size=min(z, 2), replace=False))
    return prior, obs, meas


def check_poisson_reduction(tol: float = 1e-10) -> tuple[bool, str]:
    # unit-intensity Poisson prior w.r.t. a small reference measure, so the
    # truncated table is exact to far below the tolerance
    grid = GridSpec(np.array([[0.0], [1.0], [2.0]]), np.array([0.12, 0.10, 0.08]))
    prior = poisson_process(grid, 1.0, n_max=12)
    obs = ObservationModel(
        p_d=np.full(3, 0.7),
        l_d=np.array([[0.9, 0.3, 0.1], [0.2, 0.5, 0.8]]),
        l_c=np.array([0.25, 0.45]),
    )
    meas = (0, 1)
    jz = measurement_janossy(prior, obs, meas)
    s = obs.l_c + obs.l_tilde @ grid.weights
    closed = float(np.exp(-0.7 * grid.total_mass) * np.prod(s))
    errs = [abs(jz - closed) / closed]
    # corrector ratios are identically one in the Poisson case
    for x in range(3):
        errs.append(abs(corrector_upsilon1(prior, obs, meas, x) / jz - 1.0))
        for y in range(3):
            errs.append(abs(corrector_upsilon2(prior, obs, meas, x, y) / jz - 1.0))
    mu = posterior_intensity_exact(prior, obs, meas)
    classical = obs.q_d + (obs.l_tilde / s[:, None]).sum(axis=0)
    errs.append(float(np.max(np.abs(mu - classical))))
    # classical posterior covariance over overlapping domains
    a, b = (0, 1), (1, 2)
    w = grid.weights
    lt = obs.l_tilde
    cov_closed = 0.3 * w[1]
    for pos, z in enumerate(meas):
        cov_closed += lt[z, 1] * w[1] / s[z]
        cov_closed -= (
            (lt[z, 0] * w[0] + lt[z, 1] * w[1])
            * (lt[z, 1] * w[1] + lt[z, 2] * w[2])
            / s[z] ** 2
        )
    cov = posterior_covariance_exact(prior, obs, meas, a, b)
    errs.append(abs(cov - cov_closed))
    worst = max(errs)
    return worst < tol, f"poisson reduction: worst deviation {worst:.2e} (tol {tol:g})"


def check_oracle_equivalence(cases: int = 5, tol: float = 1e-9) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(cases):
        prior, obs, meas = _random_case(rng)
        post = enumerate_posterior(prior, obs, meas)
        mu = posterior_intensity_exact(prior, obs, meas)
        worst = max(worst, float(np.max(np.abs(mu - post.intensity()))))
        cov = posterior_covariance_exact(
            prior, obs, meas, range(len(prior.grid)), range(len(prior.grid))
        )
        worst = max(worst, abs(cov - post.count_covariance(range(len(prior.grid)), range(len(prior.grid)))))
    return worst < tol, f"oracle equivalence: worst deviation {worst:.2e} over {cases} cases"


def check_dpp_normalization(tol: float = 1e-8) -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    grid = GridSpec(rng.uniform(-1, 1, (4, 2)), rng.uniform(0.5, 1.5, 4))
    raw = rng.uniform(-0.2, 0.2, (4, 4))
    raw = 0.3 * np.eye(4) + 0.5 * (raw + raw.T)
    kernel = project_kernel(raw, grid, CORRELATION)
    fp = dpp_process(kernel)
    total = fp.total_mass()
    return abs(total - 1.0) < tol, f"dpp janossy normalization: total mass {total:.12f}"


ALL_CHECKS = (
    check_poisson_reduction,
    check_oracle_equivalence,
    check_dpp_normalization,
)


def run_all(verbose_print=print) -> bool:
    ok = True
    for check in ALL_CHECKS:
        passed, msg = check()
        verbose_print(f"{'PASS' if passed else 'FAIL'}  {msg}")
        ok = ok and passed
    return ok
