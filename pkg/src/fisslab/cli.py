"""Command-line interface.

Subcommands: ``validate`` a geometry file, ``mesh`` it to the plain-text
format, ``solve-eps`` / ``solve-limit`` for single solves with norm
summaries, ``sweep`` for the full thinness study, and ``report`` to print a
previously written sweep table.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .assembly import apply_bc, assemble_eps, dump_system
from .config import load_geometry, load_sweep_config
from .errors import FisslabError
from .limit import assemble_limit, build_limit_layout, build_manifolds
from .meshing import build_mesh, export_mesh, refine
from .solver import solve_saddle
from .sweep import read_report, run_sweep


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FisslabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fisslab",
        description="Mixed-FEM laboratory for Darcy flow in thin-fissure media",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("validate", help="validate a geometry file")
    p.add_argument("geometry", type=Path)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("mesh", help="mesh a geometry and write the text format")
    p.add_argument("geometry", type=Path)
    p.add_argument("--h", type=float, required=True, dest="target_h",
                   help="target cell size")
    p.add_argument("--refine", type=int, default=0, help="uniform refinements")
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("solve-eps", help="solve one eps-problem from a sweep config")
    p.add_argument("config", type=Path)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--dump-system", type=Path, default=None,
                   help="write the assembled blocks in triplet text form")
    p.set_defaults(func=_cmd_solve_eps)

    p = sub.add_parser("solve-limit", help="solve the reduced problem from a sweep config")
    p.add_argument("config", type=Path)
    p.add_argument("--dump-system", type=Path, default=None)
    p.set_defaults(func=_cmd_solve_limit)

    p = sub.add_parser("sweep", help="run the full eps sweep and write reports")
    p.add_argument("config", type=Path)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="print a sweep.csv table")
    p.add_argument("path", type=Path, help="sweep output directory or csv file")
    p.set_defaults(func=_cmd_report)
    return parser


def _cmd_validate(args) -> int:
    medium = load_geometry(args.geometry)
    print(f"ok: {medium.n_fissures} fissure(s) over "
          f"[{medium.x_lo}, {medium.x_hi}] x [{medium.bottom}, {medium.top}]")
    return 0


def _cmd_mesh(args) -> int:
    medium = load_geometry(args.geometry)
    mesh = build_mesh(medium, args.target_h)
    for _ in range(args.refine):
        mesh = refine(mesh)
    text = export_mesh(mesh)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        print(f"wrote {args.out} ({mesh.n_cells} cells, {mesh.n_vertices} vertices)")
    return 0


def _print_norms(label: str, norms: dict[str, float]) -> None:
    print(label)
    for key in sorted(norms):
        print(f"  {key:>22} = {norms[key]:.12e}")


def _cmd_solve_eps(args) -> int:
    config = load_sweep_config(args.config)
    mesh = build_mesh(config.medium, config.target_h)
    for _ in range(config.refinements):
        mesh = refine(mesh)
    system = apply_bc(assemble_eps(mesh, config.data, args.eps), mesh)
    if args.dump_system is not None:
        args.dump_system.write_text(dump_system(system))
    sol = solve_saddle(system, config.solver_tol)
    _print_norms(f"eps = {args.eps}: solved "
                 f"({system.n_unknowns} unknowns, {mesh.n_cells} cells)", sol.norms())
    return 0


def _cmd_solve_limit(args) -> int:
    config = load_sweep_config(args.config)
    mesh = build_mesh(config.medium, config.target_h)
    for _ in range(config.refinements):
        mesh = refine(mesh)
    manifolds = build_manifolds(mesh)
    system = assemble_limit(mesh, manifolds, config.data,
                            layout=build_limit_layout(mesh, manifolds))
    if args.dump_system is not None:
        args.dump_system.write_text(dump_system(system))
    sol = solve_saddle(system, config.solver_tol)
    _print_norms(f"limit problem: solved "
                 f"({system.n_unknowns} unknowns, {mesh.n_cells} cells)", sol.norms())
    return 0


def _cmd_sweep(args) -> int:
    config = load_sweep_config(args.config)
    report = run_sweep(config, write=True)
    print(f"wrote {config.output_dir / 'sweep.csv'}")
    _print_table(report)
    return 0


def _cmd_report(args) -> int:
    path = args.path
    if path.is_dir():
        path = path / "sweep.csv"
    report = read_report(path)
    _print_table(report)
    return 0


def _print_table(report) -> None:
    cols = ("eps", "err_u1_L2", "err_eu2_L2", "err_p1_H1", "err_p2_H1",
            "ratio_tau_n", "eta_L2", "beta_h")
    print(" ".join(f"{c:>12}" for c in cols) + "  status")
    for r in report.rows:
        vals = " ".join(f"{getattr(r, c):12.4e}" for c in cols)
        print(f"{vals}  {r.status}")


if __name__ == "__main__":
    raise SystemExit(main())
