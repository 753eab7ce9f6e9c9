"""Self-describing text format for exact-oracle regression cases.

A case file carries the state grid (points and weights), the prior Janossy
table, the observation model, and the measurement list, line by line so
that fixtures diff cleanly.  All floats are written with 17 significant
digits and round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import GridSpec
from .oracle import FiniteProcess, ObservationModel

MAGIC = "dpptrack-oracle-case v1"


@dataclass(frozen=True)
class OracleCase:
    prior: FiniteProcess
    obs: ObservationModel
    meas: tuple[int, ...]


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_case(path, case: OracleCase) -> None:
    grid = case.prior.grid
    lines = [MAGIC]
    lines.append(f"grid {len(grid)} {grid.points.shape[1]}")
    for i in range(len(grid)):
        coords = " ".join(_fmt(v) for v in grid.points[i])
        lines.append(f"point {i} {coords}")
    lines.append("weights " + " ".join(_fmt(v) for v in grid.weights))
    entries = sorted(case.prior.janossy.items())
    lines.append(f"janossy {len(entries)}")
    for cfg, dens in entries:
        key = ",".join(str(i) for i in cfg) if cfg else "-"
        lines.append(f"config {key} {_fmt(dens)}")
    lines.append(f"measurement-grid {z_points_count(case.obs)}")
    lines.append("p-d " + " ".join(_fmt(v) for v in case.obs.p_d))
    lines.append("l-c " + " ".join(_fmt(v) for v in case.obs.l_c))
    for z in range(z_points_count(case.obs)):
        lines.append(f"l-d {z} " + " ".join(_fmt(v) for v in case.obs.l_d[z]))
    lines.append(
        "measurements " + (",".join(str(z) for z in case.meas) if case.meas else "-")
    )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def z_points_count(obs: ObservationModel) -> int:
    return obs.l_c.shape[0]


def read_case(path) -> OracleCase:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if lines[0] != MAGIC:
        raise ValueError(f"not an oracle case file: {lines[0]!r}")
    it = iter(lines[1:])

    tok = next(it).split()
    assert tok[0] == "grid"
    n, dim = int(tok[1]), int(tok[2])
    points = np.zeros((n, dim))
    for _ in range(n):
        tok = next(it).split()
        assert tok[0] == "point"
        points[int(tok[1])] = [float(v) for v in tok[2:]]
    tok = next(it).split()
    assert tok[0] == "weights"
    weights = np.array([float(v) for v in tok[1:]])
    grid = GridSpec(points, weights)

    tok = next(it).split()
    assert tok[0] == "janossy"
    count = int(tok[1])
    table = {}
    for _ in range(count):
        tok = next(it).split()
        assert tok[0] == "config"
        cfg = () if tok[1] == "-" else tuple(int(i) for i in tok[1].split(","))
        table[cfg] = float(tok[2])
    prior = FiniteProcess(grid, table)

    tok = next(it).split()
    assert tok[0] == "measurement-grid"
    zn = int(tok[1])
    tok = next(it).split()
    assert tok[0] == "p-d"
    p_d = np.array([float(v) for v in tok[1:]])
    tok = next(it).split()
    assert tok[0] == "l-c"
    l_c = np.array([float(v) for v in tok[1:]])
    l_d = np.zeros((zn, n))
    for _ in range(zn):
        tok = next(it).split()
        assert tok[0] == "l-d"
        l_d[int(tok[1])] = [float(v) for v in tok[2:]]
    obs = ObservationModel(p_d, l_d, l_c)

    tok = next(it).split()
    assert tok[0] == "measurements"
    meas = () if tok[1] == "-" else tuple(int(z) for z in tok[1].split(","))
    return OracleCase(prior, obs, meas)
