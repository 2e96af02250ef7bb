"""Cross-validation of the reference-domain formulation against the direct
physical problem on the squeezed geometry.

The squeezed problem (thin fissure of height eps*h, strip resistance scaled
by eps) is assembled with the plain mixed assembler on a mesh of the
squeezed medium: a route with no slope algebra and no eps-coefficients.
Composition with the squeezing map predicts exact norm identities against
the reference-domain solve: rock norms and interface trace norms are
invariant (rock blocks translate rigidly), while strip volume norms pick up
a factor sqrt(eps) from the vertical stretching.  Both routes are first
order accurate, so the identities hold to discretization tolerance.
"""

import numpy as np
import pytest

from fisslab import solver
from fisslab.assembly import assemble_eps, assemble_unscaled
from fisslab.geometry import CurveSpec, epsilon_scale, validate_medium
from fisslab.meshing import build_mesh
from fisslab.problem import ProblemData
from fisslab.solver import solve_saddle


@pytest.mark.parametrize("eps", [0.5, 0.25])
def test_reference_domain_matches_physical_squeezed_solve(eps):
    curve = CurveSpec((0.0, 1.0), ((0.35, 0.25, 0.0, 0.0),))
    medium = validate_medium(0.0, 1.0, 0.0, 1.2, [(curve, 0.2)])
    data = ProblemData.make(a1=1.0, a2=1.0, alpha=0.1, F=1.0)
    h = 0.025

    mesh_ref = build_mesh(medium, h)
    sol_ref = solve_saddle(assemble_eps(mesh_ref, data, eps), 1e-10)

    squeezed = epsilon_scale(medium, eps).medium
    mesh_sq = build_mesh(squeezed, min(h, eps * 0.2 / 2.0))
    data_sq = ProblemData.make(a1=1.0, a2=eps, alpha=0.1, F=1.0)
    sol_sq = solve_saddle(assemble_unscaled(mesh_sq, data_sq), 1e-10)

    checks = [
        ("rock velocity", solver.rock_velocity_l2(sol_ref),
         solver.rock_velocity_l2(sol_sq), 5e-3),
        ("rock pressure", solver.rock_pressure_l2(sol_ref),
         solver.rock_pressure_l2(sol_sq), 5e-3),
        ("strip velocity", np.sqrt(eps) * solver.strip_velocity_l2(sol_ref),
         solver.strip_velocity_l2(sol_sq), 1e-2),
        ("strip pressure", np.sqrt(eps) * solver.strip_pressure_l2(sol_ref),
         solver.strip_pressure_l2(sol_sq), 5e-3),
        ("interface trace", solver.normal_trace_l2(sol_ref),
         solver.normal_trace_l2(sol_sq), 1e-2),
    ]
    for label, a, b, tol in checks:
        rel = abs(a - b) / max(a, b)
        assert rel < tol, f"{label}: {a} vs {b} (rel {rel:.2%})"
