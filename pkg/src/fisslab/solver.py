"""Direct solution of the assembled saddle-point systems plus diagnostics.

The full indefinite block system ``[[A, B'], [B, 0]]`` is factorized sparsely
(desk-scale sizes; exact solves isolate discretization effects from algebra).
Diagnostics recompute their integrals from the solution fields by independent
quadrature loops rather than reusing the assembled matrices, so they also
cross-check the assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystemError, SolverError, ToleranceNotReached, TooLargeForDense
from .assembly import DiscreteSystem, WALL_PRESSURE_SIGN, _rock_geometry
from .problem import ProblemData
from .quadrature import cell_midpoints, facet_gauss_params

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class SolutionField:
    """Velocity/pressure coefficients over a :class:`DiscreteSystem` layout."""

    system: DiscreteSystem
    u: np.ndarray
    p: np.ndarray

    @property
    def eps(self):
        return self.system.eps

    def difference(self, other: "SolutionField") -> "SolutionField":
        """Coefficient-wise difference on a shared layout."""
        if self.u.shape != other.u.shape or self.p.shape != other.p.shape:
            raise ValueError("solutions live on different layouts")
        return SolutionField(self.system, self.u - other.u, self.p - other.p)

    def scaled_strip_velocity(self, scale: float) -> "SolutionField":
        """Copy with strip velocity dofs multiplied by ``scale`` (rock kept)."""
        layout = self.system.layout
        u = self.u.copy()
        u[layout.n_rock_vel:] *= scale
        return SolutionField(self.system, u, self.p)

    def norms(self) -> dict[str, float]:
        if self.system.kind == "limit":
            from .limit import limit_norms
            return limit_norms(self)
        out = {
            "u1_l2": rock_velocity_l2(self),
            "u2_l2": strip_velocity_l2(self),
            "div_u1_l2": rock_div_l2(self),
            "u1_normal_trace_l2": normal_trace_l2(self),
            "p1_l2": rock_pressure_l2(self),
            "p2_l2": strip_pressure_l2(self),
            "p2_h1": strip_pressure_h1(self),
            "u2_tangential_l2": strip_tangential_l2(self),
            "u2_normal_l2": strip_normal_l2(self),
            "dz_p2_l2": strip_dz_pressure_l2(self),
        }
        if self.system.eps is not None:
            out["eta_l2"] = out["dz_p2_l2"] / self.system.eps
        return out


# --- norms on the strip-resolved layout -----------------------------------------


def _rock_values_at_mids(sol: SolutionField):
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells, pts, area, mids, fdofs, signs, basis = _rock_geometry(mesh, layout)
    vals = np.einsum("cqli,cl->cqi", basis, sol.u[fdofs])
    return cells, area, mids, vals


def rock_velocity_l2(sol: SolutionField) -> float:
    cells, area, _, vals = _rock_values_at_mids(sol)
    if not cells.size:
        return 0.0
    return float(np.sqrt(np.einsum("c,cq->", area / 3.0,
                                   np.einsum("cqi,cqi->cq", vals, vals))))


def rock_div_l2(sol: SolutionField) -> float:
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells = layout.block_cells
    if not cells.size:
        return 0.0
    fdofs = layout.facet_dof[layout.cell_facets[cells]]
    signs = layout.cell_facet_sign[cells]
    flux = np.einsum("cl,cl->c", signs, sol.u[fdofs])
    return float(np.sqrt(np.sum(flux * flux / mesh.cell_area[cells])))


def normal_trace_l2(sol: SolutionField) -> float:
    mesh = sol.system.mesh
    layout = sol.system.layout
    walls = mesh.wall_facets()
    if not walls.size:
        return 0.0
    dof = layout.facet_dof[walls]
    return float(np.sqrt(np.sum(sol.u[dof] ** 2 / mesh.facet_length[walls])))


def rock_pressure_l2(sol: SolutionField) -> float:
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells = layout.block_cells
    if not cells.size:
        return 0.0
    pk = sol.p[layout.cell_pdof[cells]]
    return float(np.sqrt(np.sum(mesh.cell_area[cells] * pk * pk)))


def _strip_vectors(sol: SolutionField):
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells = layout.strip_cells
    vdof = layout.strip_vel_dof[cells]
    vec = np.column_stack([sol.u[vdof], sol.u[vdof + 1]]) if cells.size else np.zeros((0, 2))
    return cells, mesh.cell_area[cells], mesh.cell_slope[cells], vec


def strip_velocity_l2(sol: SolutionField) -> float:
    cells, area, _, vec = _strip_vectors(sol)
    if not cells.size:
        return 0.0
    return float(np.sqrt(np.sum(area * np.einsum("ci,ci->c", vec, vec))))


def strip_tangential_l2(sol: SolutionField) -> float:
    cells, area, slope, vec = _strip_vectors(sol)
    if not cells.size:
        return 0.0
    tau = (vec[:, 0] + slope * vec[:, 1]) / np.hypot(1.0, slope)
    return float(np.sqrt(np.sum(area * tau * tau)))


def strip_normal_l2(sol: SolutionField) -> float:
    cells, area, slope, vec = _strip_vectors(sol)
    if not cells.size:
        return 0.0
    nrm = (-slope * vec[:, 0] + vec[:, 1]) / np.hypot(1.0, slope)
    return float(np.sqrt(np.sum(area * nrm * nrm)))


def _strip_pressure_cellwise(sol: SolutionField):
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells = layout.strip_cells
    pn = sol.p[layout.vertex_pdof[mesh.cells[cells]]] if cells.size else np.zeros((0, 3))
    return cells, mesh.cell_area[cells], pn


def strip_pressure_l2(sol: SolutionField) -> float:
    cells, area, pn = _strip_pressure_cellwise(sol)
    if not cells.size:
        return 0.0
    # exact quadratic form of the P1 mass matrix
    total = np.sum(area / 12.0 * (pn.sum(axis=1) ** 2 + np.einsum("ci,ci->c", pn, pn)))
    return float(np.sqrt(total))


def _strip_pressure_gradients(sol: SolutionField):
    from .assembly import _p1_gradients
    mesh = sol.system.mesh
    layout = sol.system.layout
    cells = layout.strip_cells
    if not cells.size:
        return cells, np.zeros(0), np.zeros((0, 2))
    grads = _p1_gradients(mesh, cells)
    pn = sol.p[layout.vertex_pdof[mesh.cells[cells]]]
    gp = np.einsum("cli,cl->ci", grads, pn)
    return cells, mesh.cell_area[cells], gp


def strip_pressure_grad_l2(sol: SolutionField) -> float:
    cells, area, gp = _strip_pressure_gradients(sol)
    if not cells.size:
        return 0.0
    return float(np.sqrt(np.sum(area * np.einsum("ci,ci->c", gp, gp))))


def strip_pressure_h1(sol: SolutionField) -> float:
    return float(np.hypot(strip_pressure_l2(sol), strip_pressure_grad_l2(sol)))


def strip_dz_pressure_l2(sol: SolutionField) -> float:
    cells, area, gp = _strip_pressure_gradients(sol)
    if not cells.size:
        return 0.0
    return float(np.sqrt(np.sum(area * gp[:, 1] ** 2)))


def eta_l2(sol: SolutionField) -> float:
    """Norm of the rescaled vertical pressure gradient (1/eps) dp/dz."""
    if sol.system.eps is None:
        raise SolverError("eta diagnostic needs an eps-parameterized solution")
    return strip_dz_pressure_l2(sol) / sol.system.eps


# --- linear solve -----------------------------------------------------------------


def solve_saddle(system: DiscreteSystem, tol: float = DEFAULT_TOL) -> SolutionField:
    """Solve the indefinite block system by sparse LU with refinement.

    Raises:
        SingularSystemError: factorization failed or the residual is
            catastrophically large (violated well-posedness hypotheses or
            broken assembly).
        ToleranceNotReached: residual above ``tol`` after refinement.
    """
    if not (0.0 < tol <= 1e-6):
        raise SolverError(f"tol must lie in (0, 1e-6], got {tol!r}")
    n_vel, n_pre = system.n_vel, system.n_pre
    K = sp.bmat([[system.A, system.B.T], [system.B, None]], format="csc")
    rhs = np.concatenate([system.rhs_g, system.rhs_f])
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("factorization produced non-finite values; "
                                  "system is numerically singular")
    scale = float(np.linalg.norm(rhs))
    for _ in range(2):
        r = rhs - K @ x
        if float(np.linalg.norm(r)) <= tol * max(scale, 1e-300):
            break
        x = x + lu.solve(r)
    resid = float(np.linalg.norm(rhs - K @ x))
    rel = resid / scale if scale > 0 else resid
    if not np.isfinite(rel) or rel > 1e-3:
        raise SingularSystemError(
            f"relative residual {rel:.3e}; system is effectively singular")
    if rel > tol:
        raise ToleranceNotReached(f"relative residual {rel:.3e} > tol {tol:.3e}")
    return SolutionField(system, x[:n_vel], x[n_vel:])


def energy_identity(sol: SolutionField) -> tuple[float, float]:
    """Discrete energy balance: testing the two equations with the solution
    itself gives ``u' A u == u' rhs_g - p' rhs_f``.  Returns (lhs, rhs)."""
    s = sol.system
    lhs = float(sol.u @ (s.A @ sol.u))
    rhs = float(sol.u @ s.rhs_g - sol.p @ s.rhs_f)
    return lhs, rhs


# --- discrete stability estimate ---------------------------------------------------


def estimate_infsup(system: DiscreteSystem) -> float:
    """Smallest generalized singular value of B against the V/Q norm Grams.

    This realizes the discrete stability constant as
    ``min_q sqrt( (q' B Mv^-1 B' q) / (q' Mq q) )``; positive for a sound
    assembly on a well-posed formulation.

    Raises:
        TooLargeForDense: more than 2000 total unknowns.
    """
    if system.n_unknowns > 2000:
        raise TooLargeForDense(
            f"{system.n_unknowns} unknowns exceed the dense estimator cap (2000)")
    mv = system.gram_v.toarray()
    mq = system.gram_q.toarray()
    bd = system.B.toarray()
    x = scipy.linalg.solve(mv, bd.T, assume_a="pos")
    s = bd @ x
    s = 0.5 * (s + s.T)
    lam = scipy.linalg.eigh(s, 0.5 * (mq + mq.T), eigvals_only=True)
    return float(np.sqrt(max(float(lam[0]), 0.0)))


# --- independent residual diagnostics ----------------------------------------------


def conservation_residual(sol: SolutionField) -> np.ndarray:
    """Per rock cell |integral of div(u_h) - integral of F|.

    The divergence integral is recomputed from facet fluxes (not through the
    assembled matrix); the source integral is read off the stored load.
    """
    layout = sol.system.layout
    mesh = sol.system.mesh
    cells = layout.block_cells
    if not cells.size:
        return np.zeros(0)
    fdofs = layout.facet_dof[layout.cell_facets[cells]]
    signs = layout.cell_facet_sign[cells]
    div_int = np.einsum("cl,cl->c", signs, sol.u[fdofs])
    source_int = -sol.system.rhs_f[layout.cell_pdof[cells]]
    return np.abs(div_int - source_int)


def residual_scale(system: DiscreteSystem) -> float:
    return max(1.0,
               float(np.max(np.abs(system.rhs_g), initial=0.0)),
               float(np.max(np.abs(system.rhs_f), initial=0.0)))


def interface_residuals(sol: SolutionField, data: ProblemData) -> dict:
    """Weak interface residuals recomputed by independent quadrature.

    * ``stress``: per wall facet, the recomputed momentum row of its flux
      unknown; this is the weak form of the normal-stress balance
      ``p1 - p2 -+ alpha u1.n = 0`` with the natural signs.
    * ``flux``: per interface-coupled pressure test function, the recomputed
      mass row; the weak flux-jump balance against the interface source.

    Values are normalized by the load scale.  Returns a dict with the two
    arrays and their max.
    """
    if sol.system.kind == "limit":
        from .limit import limit_interface_residuals
        return limit_interface_residuals(sol, data)
    return _eps_interface_residuals(sol, data)


def _eps_interface_residuals(sol: SolutionField, data: ProblemData) -> dict:
    system = sol.system
    mesh = system.mesh
    layout = system.layout
    eps = system.eps if system.eps is not None else 1.0
    scaled = system.kind == "eps"
    t0, t1 = facet_gauss_params()
    scale = residual_scale(system)

    stress = _stress_row_residuals(sol, data, _eps_wall_pressure(sol), scale)

    # mass rows of every strip pressure test function, recomputed cell by cell
    n_rows = layout.n_pre - layout.n_rock_pre
    acc = np.zeros(layout.n_pre)
    cells = layout.strip_cells
    mids = cell_midpoints(mesh, cells)
    from .assembly import _p1_gradients
    grads = _p1_gradients(mesh, cells)
    area = mesh.cell_area[cells]
    slope = mesh.cell_slope[cells]
    vdof = layout.strip_vel_dof[cells]
    fvals = data.F(mids[..., 0], mids[..., 1])
    for idx in range(cells.size):
        c = cells[idx]
        v1, v2 = sol.u[vdof[idx]], sol.u[vdof[idx] + 1]
        s = slope[idx]
        a_c = area[idx]
        for loc in range(3):
            node = layout.vertex_pdof[mesh.cells[c, loc]]
            gx, gz = grads[idx, loc]
            if scaled:
                coef_x = a_c * (eps * gx + (eps - 1.0) * s * gz)
            else:
                coef_x = a_c * gx
            acc[node] += coef_x * v1 + a_c * gz * v2
            fv = 0.5 * (fvals[idx, loc] + fvals[idx, (loc + 2) % 3])
            load = eps if scaled else 1.0
            acc[node] += load * (a_c / 3.0) * fv   # rhs_f carries -int(F q)

    walls = mesh.wall_facets()
    a = mesh.vertices[mesh.facets[walls, 0]]
    b = mesh.vertices[mesh.facets[walls, 1]]
    q0 = a + t0 * (b - a)
    q1 = a + t1 * (b - a)
    fg0 = data.f_gamma(q0[:, 0], q0[:, 1])
    fg1 = data.f_gamma(q1[:, 0], q1[:, 1])
    length = mesh.facet_length[walls]
    for k, f in enumerate(walls):
        sign = WALL_PRESSURE_SIGN[int(mesh.facet_tag[f])]
        uf = sol.u[layout.facet_dof[f]]
        na = layout.vertex_pdof[mesh.facets[f, 0]]
        nb = layout.vertex_pdof[mesh.facets[f, 1]]
        acc[na] += 0.5 * sign * uf
        acc[nb] += 0.5 * sign * uf
        acc[na] += 0.5 * length[k] * ((1 - t0) * fg0[k] + (1 - t1) * fg1[k])
        acc[nb] += 0.5 * length[k] * (t0 * fg0[k] + t1 * fg1[k])

    flux = np.abs(acc[layout.n_rock_pre:]) / scale
    assert flux.size == n_rows
    return {"stress": stress, "flux": flux,
            "max": float(max(stress.max(initial=0.0), flux.max(initial=0.0)))}


def interface_condition_gaps(sol: SolutionField, data: ProblemData) -> dict:
    """Facet-averaged strong-form interface gaps.

    The interface conditions are natural, so they emerge rather than being
    imposed.  Stress balance on every wall facet: ``p1 - p2 = s alpha u1.n``
    (s = +1 lower wall, -1 upper).  Flux balance per wall facet for the
    strip-resolved problems, ``(u1 - u2).n = t f_gamma`` (t = -1 lower, +1
    upper); for the reduced problem the per-wall statements merge into the
    combined balance ``jump(u1.n) + h d/dx(w u_tau) = f_total`` per interior
    manifold node (the tangential divergence is approximated by a finite
    difference of the elementwise values).  All gaps decay with the mesh
    size on smooth problems; they are consistency indicators, not algebraic
    residuals.
    """
    from .assembly import WALL_FLUX_SIGN, WALL_STRESS_SIGN

    system = sol.system
    mesh = system.mesh
    layout = system.layout
    t0, t1 = facet_gauss_params()
    walls = mesh.wall_facets()
    stress = np.zeros(walls.size)
    is_limit = system.kind == "limit"
    flux_facets = []

    for k, f in enumerate(walls):
        tag = int(mesh.facet_tag[f])
        uf = sol.u[layout.facet_dof[f]] / mesh.facet_length[f]
        cells = mesh.facet_cells[f]
        rock_c = int(cells[0] if mesh.cell_kind[cells[0]] == 0 else cells[1])
        strip_c = int(cells[1] if mesh.cell_kind[cells[0]] == 0 else cells[0])
        p1 = float(sol.p[layout.cell_pdof[rock_c]])

        va, vb = mesh.facets[f]
        if is_limit:
            i = int(mesh.facet_fissure[f])
            p2 = 0.5 * float(sol.p[layout.p2_dof(i, int(mesh.vertex_fiber[va]))]
                             + sol.p[layout.p2_dof(i, int(mesh.vertex_fiber[vb]))])
        else:
            p2 = 0.5 * float(sol.p[layout.vertex_pdof[va]] + sol.p[layout.vertex_pdof[vb]])

        av, bv = mesh.vertices[va], mesh.vertices[vb]
        qa = av + t0 * (bv - av)
        qb = av + t1 * (bv - av)
        alpha = 0.5 * float(data.alpha(qa[0], qa[1]) + data.alpha(qb[0], qb[1]))
        fg = 0.5 * float(data.f_gamma(qa[0], qa[1]) + data.f_gamma(qb[0], qb[1]))
        stress[k] = abs(p1 - p2 - WALL_STRESS_SIGN[tag] * alpha * uf)

        if not is_limit:
            vdof = layout.strip_vel_dof[strip_c]
            vec = np.array([sol.u[vdof], sol.u[vdof + 1]])
            u2n = float(vec @ mesh.facet_normal[f])
            flux_facets.append(abs((uf - u2n) - WALL_FLUX_SIGN[tag] * fg))

    if is_limit:
        flux = _limit_combined_flux_gaps(sol, data)
    else:
        flux = np.array(flux_facets)
    return {"stress": stress, "flux": flux,
            "max": float(max(stress.max(initial=0.0), flux.max(initial=0.0)))}


def _limit_combined_flux_gaps(sol: SolutionField, data: ProblemData) -> np.ndarray:
    """Combined flux balance of the reduced problem at interior manifold
    nodes: jump of the rock flux plus the (finite-difference) tangential
    divergence against the two-wall interface source."""
    from .meshing import FACET_WALL_TOP

    mesh = sol.system.mesh
    layout = sol.system.layout
    gaps = []
    # per fissure: facet jump and wall source per column, then FD in x
    for m in layout.manifolds:
        n_el = m.n_elements
        jump = np.zeros(n_el)
        f_tot = np.zeros(n_el)
        for f in mesh.wall_facets(m.fissure):
            col = int(min(mesh.vertex_fiber[mesh.facets[f, 0]],
                          mesh.vertex_fiber[mesh.facets[f, 1]]))
            un = sol.u[layout.facet_dof[f]] / mesh.facet_length[f]
            a, b = mesh.vertices[mesh.facets[f, 0]], mesh.vertices[mesh.facets[f, 1]]
            mid = 0.5 * (a + b)
            sgn = 1.0 if int(mesh.facet_tag[f]) == FACET_WALL_TOP else -1.0
            jump[col] += sgn * un
            f_tot[col] += float(data.f_gamma(mid[0], mid[1]))
        xm = 0.5 * (m.x[:-1] + m.x[1:])
        wu = m.weight * np.array([sol.u[layout.utau_dof(m.fissure, k)]
                                  for k in range(n_el)])
        for k in range(1, n_el):
            div_fd = (wu[k] - wu[k - 1]) / (xm[k] - xm[k - 1])
            w_node = 2.0 / (1.0 / m.weight[k] + 1.0 / m.weight[k - 1])
            jump_node = 0.5 * (jump[k] + jump[k - 1])
            f_node = 0.5 * (f_tot[k] + f_tot[k - 1])
            gaps.append(abs(jump_node + m.height * w_node * div_fd - f_node))
    return np.array(gaps) if gaps else np.zeros(0)


def _eps_wall_pressure(sol: SolutionField):
    mesh = sol.system.mesh
    layout = sol.system.layout

    def trace_mean(fid: int) -> float:
        na = layout.vertex_pdof[mesh.facets[fid, 0]]
        nb = layout.vertex_pdof[mesh.facets[fid, 1]]
        return 0.5 * float(sol.p[na] + sol.p[nb])

    return trace_mean


def _stress_row_residuals(sol: SolutionField, data: ProblemData,
                          wall_pressure_mean, scale: float) -> np.ndarray:
    """Recompute the momentum rows of the wall flux unknowns."""
    system = sol.system
    mesh = system.mesh
    layout = system.layout
    t0, t1 = facet_gauss_params()
    walls = mesh.wall_facets()
    out = np.zeros(walls.size)
    cells_all, pts, area, mids, fdofs, signs, basis = _rock_geometry(mesh, layout)
    row_of_cell = {int(c): i for i, c in enumerate(cells_all)}

    for k, f in enumerate(walls):
        dof = layout.facet_dof[f]
        c = int(mesh.facet_cells[f, 0])
        if mesh.cell_kind[c] != 0:
            c = int(mesh.facet_cells[f, 1])
        i = row_of_cell[c]
        loc = int(np.nonzero(fdofs[i] == dof)[0][0])
        a1 = data.a1(mids[i, :, 0], mids[i, :, 1])
        uvals = np.einsum("qli,l->qi", basis[i], sol.u[fdofs[i]])
        row = float(np.einsum("q,qi,qi->", a1 * area[i] / 3.0, uvals, basis[i, :, loc]))

        av, bv = mesh.vertices[mesh.facets[f, 0]], mesh.vertices[mesh.facets[f, 1]]
        qa = av + t0 * (bv - av)
        qb = av + t1 * (bv - av)
        alpha = 0.5 * float(data.alpha(qa[0], qa[1]) + data.alpha(qb[0], qb[1]))
        row += alpha * sol.u[dof] / mesh.facet_length[f]

        pk = sol.p[layout.cell_pdof[c]]
        row += -signs[i, loc] * pk
        sign = WALL_PRESSURE_SIGN[int(mesh.facet_tag[f])]
        row += sign * wall_pressure_mean(int(f))

        g1 = data.gx(mids[i, :, 0], mids[i, :, 1])
        g2 = data.gz(mids[i, :, 0], mids[i, :, 1])
        gq = np.column_stack([g1, g2])
        row += float(np.einsum("qi,qi->", gq * (area[i] / 3.0), basis[i, :, loc]))
        out[k] = abs(row) / scale
    return out
