"""TOML configuration files: geometry descriptions and sweep setups.

Geometry file::

    [domain]
    x = [0.0, 1.0]          # base interval
    bottom = 0.0            # lower wall of the bottom rock block
    top = 1.0               # upper wall of the top rock block
    slope_cap = 50.0        # optional

    [[fissure]]             # bottom to top
    height = 0.2
    breakpoints = [0.0, 1.0]
    segments = [[0.4, 0.0, 0.0, 0.0]]   # cubic coefficients per interval,
                                        # local variable x - left_breakpoint

Sweep file::

    [sweep]
    geometry = "geom.toml"  # path relative to this file
    eps = [0.4, 0.2, 0.1, 0.05]   # strictly decreasing, in (0, 1]
    target_h = 0.02
    refinements = 0         # optional
    output_dir = "out"
    solver_tol = 1e-10      # optional

    [data]                  # expression strings in x, z; all optional
    a1 = "1"
    a2 = "1"
    alpha = "0.1"
    F = "1"
    gx = "0"
    gz = "0"
    f_gamma = "0"

Syntax errors cite the line reported by the TOML parser; schema errors cite
the offending field path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, ExprError
from .exprlang import parse_expr
from .geometry import DEFAULT_SLOPE_CAP, CurveSpec, FissuredMedium, validate_medium
from .problem import ProblemData


def _load_toml(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML syntax error: {exc}") from exc


def _need(table: dict, key: str, path: Path, where: str):
    if key not in table:
        raise ConfigError(f"{path}: missing field {where}.{key}")
    return table[key]


def _as_float(value, path: Path, where: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}: field {where} must be a number, got {value!r}")
    return float(value)


def load_geometry(path: str | Path) -> FissuredMedium:
    """Parse and validate a geometry file."""
    path = Path(path)
    doc = _load_toml(path)
    domain = doc.get("domain")
    if not isinstance(domain, dict):
        raise ConfigError(f"{path}: missing [domain] table")
    xpair = _need(domain, "x", path, "[domain]")
    if (not isinstance(xpair, list)) or len(xpair) != 2:
        raise ConfigError(f"{path}: [domain].x must be a [lo, hi] pair")
    x_lo = _as_float(xpair[0], path, "[domain].x[0]")
    x_hi = _as_float(xpair[1], path, "[domain].x[1]")
    bottom = _as_float(_need(domain, "bottom", path, "[domain]"), path, "[domain].bottom")
    top = _as_float(_need(domain, "top", path, "[domain]"), path, "[domain].top")
    slope_cap = _as_float(domain.get("slope_cap", DEFAULT_SLOPE_CAP), path,
                          "[domain].slope_cap")

    raw_fissures = doc.get("fissure")
    if not isinstance(raw_fissures, list) or not raw_fissures:
        raise ConfigError(f"{path}: at least one [[fissure]] table is required")
    fissures = []
    for idx, tab in enumerate(raw_fissures, start=1):
        where = f"[[fissure]] #{idx}"
        height = _as_float(_need(tab, "height", path, where), path, f"{where}.height")
        bps = _need(tab, "breakpoints", path, where)
        if not isinstance(bps, list) or len(bps) < 2:
            raise ConfigError(f"{path}: {where}.breakpoints needs >= 2 values")
        bps = tuple(_as_float(b, path, f"{where}.breakpoints") for b in bps)
        segs = _need(tab, "segments", path, where)
        if not isinstance(segs, list) or len(segs) != len(bps) - 1:
            raise ConfigError(
                f"{path}: {where}.segments must hold one coefficient row per "
                f"breakpoint interval ({len(bps) - 1} expected)")
        coeffs = []
        for si, row in enumerate(segs):
            if not isinstance(row, list) or not 1 <= len(row) <= 4:
                raise ConfigError(
                    f"{path}: {where}.segments[{si}] must list 1 to 4 coefficients")
            vals = [_as_float(v, path, f"{where}.segments[{si}]") for v in row]
            vals += [0.0] * (4 - len(vals))
            coeffs.append(tuple(vals))
        fissures.append((CurveSpec(bps, tuple(coeffs)), height))

    return validate_medium(x_lo, x_hi, bottom, top, fissures, slope_cap)


_DATA_FIELDS = ("a1", "a2", "alpha", "F", "gx", "gz", "f_gamma")
_DATA_DEFAULTS = {"a1": "1", "a2": "1", "alpha": "0", "F": "0", "gx": "0",
                  "gz": "0", "f_gamma": "0"}


@dataclass(frozen=True)
class SweepConfig:
    geometry_path: Path
    medium: FissuredMedium
    data: ProblemData
    eps_list: tuple[float, ...]
    target_h: float
    refinements: int
    output_dir: Path
    solver_tol: float


def load_sweep_config(path: str | Path) -> SweepConfig:
    """Parse and validate a sweep configuration file."""
    path = Path(path)
    doc = _load_toml(path)
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError(f"{path}: missing [sweep] table")

    geom_rel = _need(sweep, "geometry", path, "[sweep]")
    if not isinstance(geom_rel, str):
        raise ConfigError(f"{path}: [sweep].geometry must be a path string")
    geometry_path = (path.parent / geom_rel).resolve()
    medium = load_geometry(geometry_path)

    eps_raw = _need(sweep, "eps", path, "[sweep]")
    if not isinstance(eps_raw, list) or not eps_raw:
        raise ConfigError(f"{path}: [sweep].eps must be a nonempty list")
    eps_list = tuple(_as_float(e, path, "[sweep].eps") for e in eps_raw)
    if any(not 0.0 < e <= 1.0 for e in eps_list):
        raise ConfigError(f"{path}: [sweep].eps values must lie in (0, 1]")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError(f"{path}: [sweep].eps must be strictly decreasing")

    target_h = _as_float(_need(sweep, "target_h", path, "[sweep]"), path,
                         "[sweep].target_h")
    if not target_h > 0:
        raise ConfigError(f"{path}: [sweep].target_h must be positive")
    refinements = sweep.get("refinements", 0)
    if not isinstance(refinements, int) or refinements < 0:
        raise ConfigError(f"{path}: [sweep].refinements must be a nonnegative integer")
    out_rel = sweep.get("output_dir", "out")
    if not isinstance(out_rel, str):
        raise ConfigError(f"{path}: [sweep].output_dir must be a path string")
    solver_tol = _as_float(sweep.get("solver_tol", 1e-10), path, "[sweep].solver_tol")

    data_tab = doc.get("data", {})
    if not isinstance(data_tab, dict):
        raise ConfigError(f"{path}: [data] must be a table of expression strings")
    for key in data_tab:
        if key not in _DATA_FIELDS:
            raise ConfigError(f"{path}: unknown field [data].{key}; "
                              f"expected one of {_DATA_FIELDS}")
    fields = {}
    for key in _DATA_FIELDS:
        text = data_tab.get(key, _DATA_DEFAULTS[key])
        if not isinstance(text, str):
            raise ConfigError(f"{path}: [data].{key} must be an expression string")
        try:
            fields[key] = parse_expr(text)
        except ExprError as exc:
            raise ConfigError(f"{path}: [data].{key}: {exc}") from exc
    data = ProblemData.make(**fields)

    return SweepConfig(
        geometry_path=geometry_path,
        medium=medium,
        data=data,
        eps_list=eps_list,
        target_h=target_h,
        refinements=refinements,
        output_dir=(path.parent / out_rel).resolve(),
        solver_tol=solver_tol,
    )
