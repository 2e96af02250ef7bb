"""The reduced-dimension limit problem: bulk Darcy coupled to tangential
Darcy flow on the collapsed fissure curves.

Each strip collapses to a 1D manifold inheriting the mesh fibers: one
tangential velocity per element, one pressure per fiber node.  The single
manifold pressure encodes the vanished vertical variation (its trace is the
same on both wall families), while the rock normal-trace unknowns on the two
walls stay independent so the flux jump across the collapsed fissure remains
representable.

Manifold integrals are written in the base coordinate: for the upward-normal
weight ``w = 1/sqrt(1 + slope^2)``, a weighted curve integral of a field f is
``integral(w * f * dS) = integral(f * dx)``, so the tangential Darcy block of
fissure i is ``h_i * integral((a2 u_tau + w dp/dx + g_tau) v_tau dx)`` and
the divergence counterpart is ``h_i * integral(w u_tau dq/dx dx)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    DiscreteSystem,
    DofLayout,
    _assemble_rock,
    _assemble_walls,
    _gram_rock_parts,
    _Triplets,
    build_layout,
)
from .errors import LimitDataError
from .meshing import MixedMesh
from .problem import ProblemData

LIMIT_DATA_RTOL = 1e-10


@dataclass(frozen=True)
class ManifoldMesh:
    """1D trace of one fissure on the mesh fibers."""

    fissure: int
    height: float
    x: np.ndarray          # fiber positions (n_nodes,)
    z_wall: np.ndarray     # lower wall values at the fibers (reference frame)
    lam: np.ndarray        # collapsed curve nodal values
    slope: np.ndarray      # per element wall polyline slope
    weight: np.ndarray     # per element w = upward normal . vertical

    @property
    def n_elements(self) -> int:
        return self.x.size - 1

    @property
    def n_nodes(self) -> int:
        return self.x.size

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.x)


def build_manifolds(mesh: MixedMesh) -> list[ManifoldMesh]:
    """Collapse each strip of the mesh onto its fiber partition."""
    medium = mesh.medium
    out = []
    for i in range(1, medium.n_fissures + 1):
        curve = medium.fissures[i - 1].curve
        x = mesh.fiber_x.copy()
        z_wall = curve.value_many(x)
        lam = z_wall - medium.cumulative_height(i - 1)
        slope = np.diff(z_wall) / np.diff(x)
        weight = 1.0 / np.hypot(1.0, slope)
        out.append(ManifoldMesh(
            fissure=i,
            height=medium.fissures[i - 1].height,
            x=x,
            z_wall=z_wall,
            lam=lam,
            slope=slope,
            weight=weight,
        ))
    return out


@dataclass(frozen=True)
class LimitDofLayout:
    """Unknown maps for the reduced problem.

    Rock entities reuse the strip-resolved layout's numbering so that the
    reconstructed limit solution and any eps-solution share rock dofs
    exactly.  Wall normal traces on the two faces of a collapsed fissure are
    separate unknowns by construction (they are distinct mesh facets).
    """

    mesh: MixedMesh
    base: DofLayout
    manifolds: tuple[ManifoldMesh, ...]
    utau_offset: tuple[int, ...]
    p2_offset: tuple[int, ...]
    n_vel: int
    n_pre: int

    kind: str = "limit"

    # rock plumbing shared with the strip-resolved layout (duck-typed by the
    # rock assembly, norms and residual helpers)
    @property
    def rock_facets(self):
        return self.base.rock_facets

    @property
    def facet_dof(self):
        return self.base.facet_dof

    @property
    def block_cells(self):
        return self.base.block_cells

    @property
    def cell_pdof(self):
        return self.base.cell_pdof

    @property
    def cell_facets(self):
        return self.base.cell_facets

    @property
    def cell_facet_sign(self):
        return self.base.cell_facet_sign

    @property
    def n_rock_vel(self):
        return self.base.n_rock_vel

    @property
    def n_rock_pre(self):
        return self.base.n_rock_pre

    def utau_dof(self, fissure: int, element: int) -> int:
        return self.utau_offset[fissure - 1] + element

    def p2_dof(self, fissure: int, fiber: int) -> int:
        return self.p2_offset[fissure - 1] + fiber


def build_limit_layout(mesh: MixedMesh, manifolds: list[ManifoldMesh] | None = None,
                       base: DofLayout | None = None) -> LimitDofLayout:
    base = base or build_layout(mesh)
    manifolds = manifolds if manifolds is not None else build_manifolds(mesh)
    utau_offset = []
    n_vel = base.n_rock_vel
    for m in manifolds:
        utau_offset.append(n_vel)
        n_vel += m.n_elements
    p2_offset = []
    n_pre = base.n_rock_pre
    for m in manifolds:
        p2_offset.append(n_pre)
        n_pre += m.n_nodes
    return LimitDofLayout(
        mesh=mesh,
        base=base,
        manifolds=tuple(manifolds),
        utau_offset=tuple(utau_offset),
        p2_offset=tuple(p2_offset),
        n_vel=n_vel,
        n_pre=n_pre,
    )


def _g_tau(data: ProblemData, m: ManifoldMesh, k: int, x: float, z: float) -> float:
    """Tangential component of the drive at a strip point in column k."""
    w = m.weight[k]
    return w * (float(data.gx(x, z)) + m.slope[k] * float(data.gz(x, z)))


def check_limit_data(mesh: MixedMesh, manifolds: list[ManifoldMesh],
                     data: ProblemData, rtol: float = LIMIT_DATA_RTOL) -> None:
    """Reject data whose strip resistance or tangential drive varies with z.

    Samples 5 points along the vertical fiber through each element midpoint;
    relative variation above ``rtol`` raises :class:`LimitDataError` naming
    the offending sample point.
    """
    for m in manifolds:
        curve = mesh.medium.fissures[m.fissure - 1].curve
        for k in range(m.n_elements):
            xm = 0.5 * (m.x[k] + m.x[k + 1])
            z_lo = curve.value(float(xm))
            zs = np.linspace(z_lo, z_lo + m.height, 5)
            for name, values in (
                ("a2", np.array([float(data.a2(xm, z)) for z in zs])),
                ("g_tau", np.array([_g_tau(data, m, k, float(xm), float(z)) for z in zs])),
            ):
                spread = values.max() - values.min()
                scale = max(1.0, float(np.abs(values).max()))
                if spread > rtol * scale:
                    z_bad = zs[int(np.argmax(np.abs(values - values[0])))]
                    raise LimitDataError(
                        f"{name} varies along the fiber of fissure {m.fissure} at "
                        f"x={xm!r} (z={z_bad!r}): spread {spread:.3e} exceeds "
                        f"{rtol:.1e} relative"
                    )


def _manifold_wall_nodes(mesh: MixedMesh, layout: LimitDofLayout):
    def nodes(facet_ids):
        fa = mesh.vertex_fiber[mesh.facets[facet_ids, 0]]
        fb = mesh.vertex_fiber[mesh.facets[facet_ids, 1]]
        fis = mesh.facet_fissure[facet_ids]
        off = np.array([layout.p2_offset[i - 1] for i in fis])
        return off + fa, off + fb
    return nodes


def assemble_limit(mesh: MixedMesh, manifolds: list[ManifoldMesh],
                   data: ProblemData,
                   layout: LimitDofLayout | None = None) -> DiscreteSystem:
    """Assemble the reduced problem on the bulk mesh + manifold partitions.

    Raises:
        LimitDataError: strip data depends on z (reduction hypotheses fail).
    """
    check_limit_data(mesh, manifolds, data)
    data.check_on_mesh(mesh)
    layout = layout or build_limit_layout(mesh, manifolds)

    A = _Triplets()
    B = _Triplets()
    rhs_g = np.zeros(layout.n_vel)
    rhs_f = np.zeros(layout.n_pre)

    _assemble_rock(mesh, layout, data, A, B, rhs_g, rhs_f)
    _assemble_walls(mesh, layout, data, A, B, rhs_f, _manifold_wall_nodes(mesh, layout))

    for m in layout.manifolds:
        curve = mesh.medium.fissures[m.fissure - 1].curve
        h = m.height
        for k in range(m.n_elements):
            dxk = m.x[k + 1] - m.x[k]
            xm = 0.5 * (m.x[k] + m.x[k + 1])
            zm = curve.value(float(xm)) + 0.5 * h
            ud = layout.utau_dof(m.fissure, k)
            a2 = float(data.a2(xm, zm))
            A.add([ud], [ud], [h * a2 * dxk])
            hw = h * m.weight[k]
            B.add([layout.p2_dof(m.fissure, k)], [ud], [-hw])
            B.add([layout.p2_dof(m.fissure, k + 1)], [ud], [+hw])
            rhs_g[ud] -= h * dxk * _g_tau(data, m, k, float(xm), float(zm))

    gram_v, gram_q = _limit_grams(mesh, layout)
    return DiscreteSystem(
        A=A.build((layout.n_vel, layout.n_vel)),
        B=B.build((layout.n_pre, layout.n_vel)),
        rhs_g=rhs_g,
        rhs_f=rhs_f,
        gram_v=gram_v,
        gram_q=gram_q,
        layout=layout,
        eps=None,
        kind="limit",
    )


def _limit_grams(mesh: MixedMesh, layout: LimitDofLayout):
    gv = _Triplets()
    gq = _Triplets()
    _gram_rock_parts(mesh, layout, gv, gq)
    for m in layout.manifolds:
        h = m.height
        for k in range(m.n_elements):
            dxk = m.x[k + 1] - m.x[k]
            ud = layout.utau_dof(m.fissure, k)
            gv.add([ud], [ud], [h * dxk])
            na = layout.p2_dof(m.fissure, k)
            nb = layout.p2_dof(m.fissure, k + 1)
            # z-independent strip fields: L2 mass is h * 1D mass, the strip
            # pressure gradient reduces to h * 1D stiffness
            mass = h * dxk / 6.0
            gq.add([na, na, nb, nb], [na, nb, na, nb],
                   [2.0 * mass, mass, mass, 2.0 * mass])
            stiff = h / dxk
            gq.add([na, na, nb, nb], [na, nb, na, nb],
                   [stiff, -stiff, -stiff, stiff])
    return gv.build((layout.n_vel, layout.n_vel)), gq.build((layout.n_pre, layout.n_pre))


# --- reconstruction and norms ---------------------------------------------------


def reconstruct_strip_fields(limit_sol, host_system: DiscreteSystem):
    """Expand a limit solution to z-independent strip fields on the bulk
    layout of ``host_system``.

    Strip cell velocities become ``(w u_tau, w slope u_tau)`` (tangent to the
    wall polyline of their column, hence exactly normal-free), strip pressure
    nodes take the manifold value of their fiber, rock dofs carry over
    unchanged.
    """
    from .solver import SolutionField

    layout = limit_sol.system.layout
    host = host_system.layout
    if host.mesh is not layout.mesh:
        raise ValueError("host layout must live on the same mesh")
    mesh = host.mesh

    u = np.zeros(host.n_vel)
    p = np.zeros(host.n_pre)
    u[:host.n_rock_vel] = limit_sol.u[:layout.n_rock_vel]
    p[:host.n_rock_pre] = limit_sol.p[:layout.n_rock_pre]

    cells = host.strip_cells
    fis = mesh.cell_index[cells]
    col = mesh.cell_column[cells]
    utau = np.array([limit_sol.u[layout.utau_dof(i, k)] for i, k in zip(fis, col)])
    weight = 1.0 / np.hypot(1.0, mesh.cell_slope[cells])
    vdof = host.strip_vel_dof[cells]
    u[vdof] = weight * utau
    u[vdof + 1] = weight * mesh.cell_slope[cells] * utau

    node_fissure = np.zeros(mesh.n_vertices, dtype=int)
    for i in range(1, mesh.medium.n_fissures + 1):
        node_fissure[mesh.strip_vertices(i)] = i
    for v in host.strip_nodes:
        i = int(node_fissure[v])
        p[host.vertex_pdof[v]] = limit_sol.p[layout.p2_dof(i, int(mesh.vertex_fiber[v]))]

    return SolutionField(host_system, u, p)


def manifold_velocity_l2(limit_sol, scaled_by_height: bool = True) -> float:
    """Strip-equivalent L2 norm of the tangential velocity,
    ``sqrt(sum_i h_i * integral(u_tau^2 dx))``."""
    layout = limit_sol.system.layout
    total = 0.0
    for m in layout.manifolds:
        for k in range(m.n_elements):
            v = limit_sol.u[layout.utau_dof(m.fissure, k)]
            w = m.height if scaled_by_height else 1.0
            total += w * (m.x[k + 1] - m.x[k]) * v * v
    return float(np.sqrt(total))


def manifold_pressure_l2(limit_sol) -> float:
    layout = limit_sol.system.layout
    total = 0.0
    for m in layout.manifolds:
        for k in range(m.n_elements):
            pa = limit_sol.p[layout.p2_dof(m.fissure, k)]
            pb = limit_sol.p[layout.p2_dof(m.fissure, k + 1)]
            dxk = m.x[k + 1] - m.x[k]
            total += m.height * dxk / 6.0 * (2 * pa * pa + 2 * pa * pb + 2 * pb * pb)
    return float(np.sqrt(total))


def manifold_pressure_h1(limit_sol) -> float:
    layout = limit_sol.system.layout
    total = manifold_pressure_l2(limit_sol) ** 2
    for m in layout.manifolds:
        for k in range(m.n_elements):
            pa = limit_sol.p[layout.p2_dof(m.fissure, k)]
            pb = limit_sol.p[layout.p2_dof(m.fissure, k + 1)]
            dxk = m.x[k + 1] - m.x[k]
            total += m.height * (pb - pa) ** 2 / dxk
    return float(np.sqrt(total))


def limit_norms(limit_sol) -> dict[str, float]:
    from . import solver
    return {
        "u1_l2": solver.rock_velocity_l2(limit_sol),
        "u2_l2": manifold_velocity_l2(limit_sol),
        "div_u1_l2": solver.rock_div_l2(limit_sol),
        "u1_normal_trace_l2": solver.normal_trace_l2(limit_sol),
        "p1_l2": solver.rock_pressure_l2(limit_sol),
        "p2_l2": manifold_pressure_l2(limit_sol),
        "p2_h1": manifold_pressure_h1(limit_sol),
        "u2_tangential_l2": manifold_velocity_l2(limit_sol),
        "u2_normal_l2": 0.0,
        "dz_p2_l2": 0.0,
    }


def limit_interface_residuals(limit_sol, data: ProblemData) -> dict:
    """Weak residuals of the reduced problem's interface rows, recomputed by
    independent quadrature: momentum rows of the wall flux unknowns and mass
    rows of the manifold pressure test functions (the flux-jump balance plus
    the tangential divergence against the interface source)."""
    from .quadrature import facet_gauss_params
    from .solver import _stress_row_residuals, residual_scale
    from .assembly import WALL_PRESSURE_SIGN

    system = limit_sol.system
    mesh = system.mesh
    layout = system.layout
    scale = residual_scale(system)

    def wall_pressure_mean(fid: int) -> float:
        i = int(mesh.facet_fissure[fid])
        fa = int(mesh.vertex_fiber[mesh.facets[fid, 0]])
        fb = int(mesh.vertex_fiber[mesh.facets[fid, 1]])
        return 0.5 * float(limit_sol.p[layout.p2_dof(i, fa)]
                           + limit_sol.p[layout.p2_dof(i, fb)])

    stress = _stress_row_residuals(limit_sol, data, wall_pressure_mean, scale)

    acc = np.zeros(layout.n_pre)
    for m in layout.manifolds:
        for k in range(m.n_elements):
            hw = m.height * m.weight[k]
            ut = limit_sol.u[layout.utau_dof(m.fissure, k)]
            acc[layout.p2_dof(m.fissure, k)] -= hw * ut
            acc[layout.p2_dof(m.fissure, k + 1)] += hw * ut

    t0, t1 = facet_gauss_params()
    for f in mesh.wall_facets():
        sign = WALL_PRESSURE_SIGN[int(mesh.facet_tag[f])]
        uf = limit_sol.u[layout.facet_dof[f]]
        i = int(mesh.facet_fissure[f])
        fa = int(mesh.vertex_fiber[mesh.facets[f, 0]])
        fb = int(mesh.vertex_fiber[mesh.facets[f, 1]])
        na, nb = layout.p2_dof(i, fa), layout.p2_dof(i, fb)
        acc[na] += 0.5 * sign * uf
        acc[nb] += 0.5 * sign * uf
        av, bv = mesh.vertices[mesh.facets[f, 0]], mesh.vertices[mesh.facets[f, 1]]
        qa = av + t0 * (bv - av)
        qb = av + t1 * (bv - av)
        ln = mesh.facet_length[f]
        fg0 = float(data.f_gamma(qa[0], qa[1]))
        fg1 = float(data.f_gamma(qb[0], qb[1]))
        acc[na] += 0.5 * ln * ((1 - t0) * fg0 + (1 - t1) * fg1)
        acc[nb] += 0.5 * ln * (t0 * fg0 + t1 * fg1)

    flux = np.abs(acc[layout.n_rock_pre:]) / scale
    return {"stress": stress, "flux": flux,
            "max": float(max(stress.max(initial=0.0), flux.max(initial=0.0)))}
