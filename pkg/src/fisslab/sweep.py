"""Thinness sweep: solve the reduced problem once, then the eps-problem for
each requested eps on the same mesh, and tabulate convergence metrics.

All difference norms compare the eps-solution against the reconstructed
z-independent limit fields on the same mesh and unknown layout, so the
comparison is exact at the discrete level and the tabulated decay is purely
the thinness effect (down to the discretization floor).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import solver
from .assembly import assemble_eps, build_layout
from .config import SweepConfig
from .errors import FisslabError, TooLargeForDense
from .limit import (
    assemble_limit,
    build_limit_layout,
    build_manifolds,
    reconstruct_strip_fields,
)
from .meshing import build_mesh, refine
from .solver import SolutionField, estimate_infsup, solve_saddle

CSV_COLUMNS = ("eps", "err_u1_L2", "err_eu2_L2", "err_p1_H1", "err_p2_H1",
               "ratio_tau_n", "eta_L2", "beta_h", "status")

RATIO_ACTIVE_THRESHOLD = 1e-8
PLATEAU_RATIO = 0.9


@dataclass(frozen=True)
class ReportRow:
    eps: float
    err_u1_L2: float
    err_eu2_L2: float
    err_p1_H1: float
    err_p2_H1: float
    ratio_tau_n: float
    eta_L2: float
    beta_h: float
    status: str = "ok"

    def as_tuple(self):
        return (self.eps, self.err_u1_L2, self.err_eu2_L2, self.err_p1_H1,
                self.err_p2_H1, self.ratio_tau_n, self.eta_L2, self.beta_h,
                self.status)


@dataclass
class ConvergenceReport:
    rows: list[ReportRow]
    limit_norms: dict[str, float] = field(default_factory=dict)
    limit_beta: float = float("nan")
    mesh_info: dict[str, int] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def ok_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.status == "ok"]


def _beta_companion(config: SweepConfig):
    """Coarse companion mesh for the dense stability estimate.

    The coarsest admissible mesh has target size half the thinnest fissure;
    if even that exceeds the dense cap no estimate is reported.
    """
    medium = config.medium
    h_min = min(f.height for f in medium.fissures)
    try:
        mesh = build_mesh(medium, h_min / 2.0)
    except FisslabError:
        return None
    return mesh


def run_sweep(config: SweepConfig, write: bool = True) -> ConvergenceReport:
    """Execute the sweep; optionally write ``sweep.csv`` and plot data."""
    mesh = build_mesh(config.medium, config.target_h)
    for _ in range(config.refinements):
        mesh = refine(mesh)
    layout = build_layout(mesh)
    manifolds = build_manifolds(mesh)
    limit_layout = build_limit_layout(mesh, manifolds, base=layout)

    limit_system = assemble_limit(mesh, manifolds, config.data, layout=limit_layout)
    limit_sol = solve_saddle(limit_system, config.solver_tol)

    companion = _beta_companion(config)
    limit_beta = float("nan")
    if companion is not None:
        try:
            comp_manifolds = build_manifolds(companion)
            limit_beta = estimate_infsup(
                assemble_limit(companion, comp_manifolds, config.data))
        except TooLargeForDense:
            companion = None

    rows = []
    reconstruction: SolutionField | None = None
    for eps in config.eps_list:
        try:
            system = assemble_eps(mesh, config.data, eps, layout=layout)
            sol = solve_saddle(system, config.solver_tol)
            if reconstruction is None:
                reconstruction = reconstruct_strip_fields(limit_sol, system)
            rows.append(_metrics_row(eps, sol, reconstruction, companion, config))
        except FisslabError as exc:
            status = f"error: {type(exc).__name__}: {exc}".replace(",", ";")
            nan = float("nan")
            rows.append(ReportRow(eps, nan, nan, nan, nan, nan, nan, nan, status))

    report = ConvergenceReport(
        rows=rows,
        limit_norms=limit_sol.norms(),
        limit_beta=limit_beta,
        mesh_info={"n_cells": mesh.n_cells, "n_vertices": mesh.n_vertices,
                   "n_vel": layout.n_vel, "n_pre": layout.n_pre},
    )
    if write:
        emit_report(report, config.output_dir)
    return report


def _metrics_row(eps: float, sol: SolutionField, rec: SolutionField,
                 companion, config: SweepConfig) -> ReportRow:
    layout = sol.system.layout
    diff = SolutionField(sol.system, sol.u - rec.u, sol.p - rec.p)
    scaled = sol.scaled_strip_velocity(eps)
    diff_scaled = SolutionField(sol.system, scaled.u - rec.u, scaled.p - rec.p)

    err_u1 = solver.rock_velocity_l2(diff)
    err_eu2 = solver.strip_velocity_l2(diff_scaled)
    # rock pressure is piecewise constant: its broken H1 norm is the L2 norm
    err_p1 = solver.rock_pressure_l2(diff)
    err_p2 = solver.strip_pressure_h1(diff)

    tau = solver.strip_tangential_l2(sol)
    nrm = solver.strip_normal_l2(sol)
    if nrm > 0.0:
        ratio = tau / nrm
    else:
        ratio = 0.0 if tau == 0.0 else float("inf")
    eta = solver.eta_l2(sol)

    beta = float("nan")
    if companion is not None:
        try:
            beta = estimate_infsup(assemble_eps(companion, config.data, eps))
        except TooLargeForDense:
            beta = float("nan")
    return ReportRow(eps, err_u1, err_eu2, err_p1, err_p2, ratio, eta, beta)


# --- files ----------------------------------------------------------------------


def emit_report(report: ConvergenceReport, out_dir: str | Path) -> list[Path]:
    """Write ``sweep.csv`` plus gnuplot-ready ``.dat`` files; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            vals = row.as_tuple()
            writer.writerow([repr(v) if isinstance(v, float) else v for v in vals])
    paths.append(csv_path)

    err_path = out / "errors.dat"
    with err_path.open("w") as fh:
        fh.write("# eps err_u1_L2 err_eu2_L2 err_p1_H1 err_p2_H1\n")
        for r in report.rows:
            fh.write(f"{r.eps!r} {r.err_u1_L2!r} {r.err_eu2_L2!r} "
                     f"{r.err_p1_H1!r} {r.err_p2_H1!r}\n")
    paths.append(err_path)

    diag_path = out / "diagnostics.dat"
    with diag_path.open("w") as fh:
        fh.write("# eps ratio_tau_n eta_L2 beta_h\n")
        for r in report.rows:
            fh.write(f"{r.eps!r} {r.ratio_tau_n!r} {r.eta_L2!r} {r.beta_h!r}\n")
    paths.append(diag_path)
    return paths


def read_report(csv_path: str | Path) -> ConvergenceReport:
    """Re-read a ``sweep.csv`` written by :func:`emit_report`."""
    rows = []
    with Path(csv_path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise FisslabError(f"{csv_path}: unexpected CSV header {header!r}")
        for rec in reader:
            rows.append(ReportRow(*([float(v) for v in rec[:8]] + [rec[8]])))
    return ConvergenceReport(rows=rows)


# --- column diagnostics -----------------------------------------------------------


def converged_to_floor(column: np.ndarray, plateau_ratio: float = PLATEAU_RATIO) -> bool:
    """A column has hit its discretization floor when successive ratios stop
    improving (exceed ``plateau_ratio``)."""
    col = np.asarray(column, dtype=float)
    if col.size < 2:
        return False
    ratios = col[1:] / np.maximum(col[:-1], 1e-300)
    return bool(ratios[-1] > plateau_ratio)


def monotone_until_floor(column: np.ndarray, slack: float = 1.02,
                         plateau_ratio: float = PLATEAU_RATIO) -> bool:
    """Non-increasing (within ``slack``) until the floor plateau, if any."""
    col = np.asarray(column, dtype=float)
    hit_floor = False
    for prev, cur in zip(col, col[1:]):
        r = cur / max(prev, 1e-300)
        if hit_floor:
            continue
        if r > plateau_ratio:
            hit_floor = True
        if r > slack:
            return False
    return True


def observed_orders(errors, factor: float = 2.0) -> list[float]:
    """Per-step convergence orders log_factor(e_k / e_{k+1})."""
    out = []
    for a, b in zip(errors, errors[1:]):
        if a <= 0 or b <= 0:
            out.append(float("inf"))
        else:
            out.append(math.log(a / b) / math.log(factor))
    return out
