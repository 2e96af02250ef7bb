"""Manufactured exact solutions for convergence and balance testing.

Each case carries a geometry, coefficient data generated so the named smooth
fields solve the governing equations exactly, and evaluators for the exact
fields.  The fields are chosen compatible with the weak formulation's
natural conditions: drained-wall pressure traces are supplied as boundary
data where nonzero, and tangential fissure velocities vanish at the lateral
ends of the base interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UnknownCase
from .geometry import CurveSpec, FissuredMedium, validate_medium
from .problem import ProblemData


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    medium: FissuredMedium
    data: ProblemData
    problem: str                                  # "eps" or "limit"
    exact_u_rock: Callable                        # (x, z) -> (..., 2)
    exact_p_rock: Callable                        # (x, z) -> (...)
    exact_p_manifold: Optional[Callable] = None   # (x) -> (...)
    exact_utau: Optional[Callable] = None         # (x) -> (...)


def _rock_only_linear() -> ManufacturedCase:
    # p = 1 - z on the unit block, u = (0, 1), F = 0; the nonzero drained
    # trace enters as boundary pressure data
    medium = FissuredMedium(x_lo=0.0, x_hi=1.0, bottom=0.0, top=1.0, fissures=())
    data = ProblemData.make(a1=1.0, a2=1.0, alpha=0.0, F=0.0,
                            boundary_pressure="1 - z")

    def u_exact(x, z):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (2,))
        out[..., 1] = 1.0
        return out

    def p_exact(x, z):
        return 1.0 - np.asarray(z, dtype=float)

    return ManufacturedCase(
        name="rock-only-linear",
        medium=medium,
        data=data,
        problem="eps",
        exact_u_rock=u_exact,
        exact_p_rock=p_exact,
    )


def _flat_fissure_limit() -> ManufacturedCase:
    # Single flat fissure at height 0.4 of thickness 0.2 inside the unit
    # column.  Manifold pressure p2 = x^2 (1-x)^2 gives a tangential velocity
    # u_tau = -dp2/dx vanishing at both lateral ends; the rock pressure
    # interpolates p2 linearly to the drained outer walls, and the interface
    # source absorbs the flux jump plus the tangential divergence.
    z_lo, h = 0.4, 0.2
    z_hi = z_lo + h
    medium = validate_medium(
        0.0, 1.0, 0.0, 1.0, [(CurveSpec.constant(z_lo, 0.0, 1.0), h)])
    d_lo = z_lo - 0.0
    d_hi = 1.0 - z_hi

    def p2(x):
        x = np.asarray(x, dtype=float)
        return x * x * (1.0 - x) ** 2

    def dp2(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)

    def d2p2(x):
        x = np.asarray(x, dtype=float)
        return 2.0 - 12.0 * x + 12.0 * x * x

    def phi(z):
        z = np.asarray(z, dtype=float)
        return np.where(z <= z_lo, z / d_lo,
                        np.where(z >= z_hi, (1.0 - z) / d_hi, 1.0))

    def dphi(z):
        z = np.asarray(z, dtype=float)
        return np.where(z <= z_lo, 1.0 / d_lo,
                        np.where(z >= z_hi, -1.0 / d_hi, 0.0))

    def p_exact(x, z):
        return p2(x) * phi(z)

    def u_exact(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.empty(np.broadcast_shapes(x.shape, z.shape) + (2,))
        out[..., 0] = -dp2(x) * phi(z)
        out[..., 1] = -p2(x) * dphi(z)
        return out

    def source(x, z):
        return -d2p2(x) * phi(z)

    # flux jump (upper trace minus lower trace) plus the tangential
    # divergence h * d(u_tau)/dx, split evenly between the two walls
    def f_gamma(x, z):
        jump = p2(x) / d_hi + p2(x) / d_lo
        return 0.5 * (jump + h * (-d2p2(x)))

    data = ProblemData.make(a1=1.0, a2=1.0, alpha=0.0, F=source, f_gamma=f_gamma)

    return ManufacturedCase(
        name="flat-fissure-limit",
        medium=medium,
        data=data,
        problem="limit",
        exact_u_rock=u_exact,
        exact_p_rock=p_exact,
        exact_p_manifold=p2,
        exact_utau=lambda x: -dp2(x),
    )


def _quiescent_strip() -> ManufacturedCase:
    # Exact solution with a silent fissure: zero strip velocity and pressure,
    # rock pressure sin(pi x) * phi(z) vanishing on the walls and the outer
    # boundary, with phi'' = 0 at the walls so the volumetric source stays
    # continuous there (only the designed normal-flux jump is discontinuous).
    # The interface source carries that jump per wall, so the same fields
    # solve the eps-problem for EVERY thinness value and the reduced problem
    # alike; eps-vs-limit differences are pure discretization.
    z_lo, h = 0.4, 0.2
    z_hi = z_lo + h
    medium = validate_medium(
        0.0, 1.0, 0.0, 1.0, [(CurveSpec.constant(z_lo, 0.0, 1.0), h)])

    # block 0: phi0 = 0.32 z - 1.2 z^2 + z^3 (zeros at 0 and 0.4, phi0''(0.4)=0)
    # block 1: phi1 = -0.16 t + t^3 with t = z - 0.6 (zeros at t=0 and 0.4,
    #          phi1''(0)=0); both have slope -0.16 at their wall
    def phi(z):
        z = np.asarray(z, dtype=float)
        t = z - z_hi
        return np.where(z <= z_lo, 0.32 * z - 1.2 * z * z + z ** 3,
                        np.where(z >= z_hi, -0.16 * t + t ** 3, 0.0))

    def dphi(z):
        z = np.asarray(z, dtype=float)
        t = z - z_hi
        return np.where(z <= z_lo, 0.32 - 2.4 * z + 3.0 * z * z,
                        np.where(z >= z_hi, -0.16 + 3.0 * t * t, 0.0))

    def d2phi(z):
        z = np.asarray(z, dtype=float)
        return np.where(z <= z_lo, -2.4 + 6.0 * z,
                        np.where(z >= z_hi, 6.0 * (z - z_hi), 0.0))

    def p_exact(x, z):
        return np.sin(np.pi * np.asarray(x)) * phi(z)

    def u_exact(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.empty(np.broadcast_shapes(x.shape, z.shape) + (2,))
        out[..., 0] = -np.pi * np.cos(np.pi * x) * phi(z)
        out[..., 1] = -np.sin(np.pi * x) * dphi(z)
        return out

    def source(x, z):
        x = np.asarray(x, dtype=float)
        return np.sin(np.pi * x) * (np.pi ** 2 * phi(z) - d2phi(z))

    def f_gamma(x, z):
        # lower wall: -u1.n = dphi(z_lo) sin = -0.16 sin
        # upper wall: +u1.n = -dphi(z_hi) sin = +0.16 sin
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        sgn = np.where(z < 0.5 * (z_lo + z_hi), -1.0, 1.0)
        return 0.16 * sgn * np.sin(np.pi * x)

    data = ProblemData.make(a1=1.0, a2=1.0, alpha=0.0, F=source, f_gamma=f_gamma)

    def zero1(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return ManufacturedCase(
        name="quiescent-strip",
        medium=medium,
        data=data,
        problem="limit",
        exact_u_rock=u_exact,
        exact_p_rock=p_exact,
        exact_p_manifold=zero1,
        exact_utau=zero1,
    )


def _zero_fields() -> ManufacturedCase:
    medium = validate_medium(
        0.0, 1.0, 0.0, 1.0, [(CurveSpec.constant(0.4, 0.0, 1.0), 0.2)])
    data = ProblemData.make(a1=1.0, a2=1.0, alpha=0.0)

    def u_exact(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        return np.zeros(np.broadcast_shapes(x.shape, z.shape) + (2,))

    def zero(x, z=None):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x)

    return ManufacturedCase(
        name="zero-fields",
        medium=medium,
        data=data,
        problem="limit",
        exact_u_rock=u_exact,
        exact_p_rock=zero,
        exact_p_manifold=zero,
        exact_utau=zero,
    )


_CATALOG = {
    "rock-only-linear": _rock_only_linear,
    "flat-fissure-limit": _flat_fissure_limit,
    "quiescent-strip": _quiescent_strip,
    "zero-fields": _zero_fields,
}


def manufactured_case(name: str) -> ManufacturedCase:
    """Fetch a case from the built-in catalog.

    Raises:
        UnknownCase: name not in the catalog.
    """
    try:
        builder = _CATALOG[name]
    except KeyError:
        raise UnknownCase(
            f"unknown manufactured case {name!r}; available: {sorted(_CATALOG)}"
        ) from None
    return builder()


def catalog_names() -> list[str]:
    return sorted(_CATALOG)


# --- exact-error evaluation -------------------------------------------------------


def rock_velocity_error(sol, exact_u) -> float:
    """L2(rock) distance between the discrete flux field and an exact one."""
    from .solver import _rock_values_at_mids
    cells, area, mids, vals = _rock_values_at_mids(sol)
    if not cells.size:
        return 0.0
    diff = vals - exact_u(mids[..., 0], mids[..., 1])
    return float(np.sqrt(np.einsum("c,cq->", area / 3.0,
                                   np.einsum("cqi,cqi->cq", diff, diff))))


def rock_pressure_error(sol, exact_p) -> float:
    from .quadrature import cell_midpoints
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells = layout.block_cells
    if not cells.size:
        return 0.0
    mids = cell_midpoints(mesh, cells)
    pk = sol.p[layout.cell_pdof[cells]]
    diff = pk[:, None] - exact_p(mids[..., 0], mids[..., 1])
    return float(np.sqrt(np.sum(mesh.cell_area[cells] / 3.0 * (diff ** 2).sum(axis=1))))


def manifold_pressure_error(limit_sol, exact_p2) -> float:
    """Strip-equivalent L2 distance sqrt(sum h int (p2_h - p2)^2 dx)."""
    from .quadrature import facet_gauss_params
    layout = limit_sol.system.layout
    t0, t1 = facet_gauss_params()
    total = 0.0
    for m in layout.manifolds:
        for k in range(m.n_elements):
            xa, xb = m.x[k], m.x[k + 1]
            pa = limit_sol.p[layout.p2_dof(m.fissure, k)]
            pb = limit_sol.p[layout.p2_dof(m.fissure, k + 1)]
            for t in (t0, t1):
                xq = xa + t * (xb - xa)
                ph = (1 - t) * pa + t * pb
                total += m.height * 0.5 * (xb - xa) * (ph - float(exact_p2(xq))) ** 2
    return float(np.sqrt(total))


def manifold_utau_error(limit_sol, exact_utau) -> float:
    from .quadrature import facet_gauss_params
    layout = limit_sol.system.layout
    t0, t1 = facet_gauss_params()
    total = 0.0
    for m in layout.manifolds:
        for k in range(m.n_elements):
            xa, xb = m.x[k], m.x[k + 1]
            uh = limit_sol.u[layout.utau_dof(m.fissure, k)]
            for t in (t0, t1):
                xq = xa + t * (xb - xa)
                total += m.height * 0.5 * (xb - xa) * (uh - float(exact_utau(xq))) ** 2
    return float(np.sqrt(total))
