"""Quadrature helpers shared by assembly, norms and residual checks.

Cells use the 3-point edge-midpoint rule (exact for quadratics); facets use
2-point Gauss (exact for cubics).
"""

from __future__ import annotations

import numpy as np

_GAUSS2 = 0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0))


def cell_midpoints(mesh, cells=None) -> np.ndarray:
    """Edge-midpoint quadrature nodes, shape (nc, 3, 2); weights area/3."""
    ids = np.arange(mesh.n_cells) if cells is None else cells
    pts = mesh.vertices[mesh.cells[ids]]  # (nc, 3, 2)
    return 0.5 * (pts + np.roll(pts, -1, axis=1))


def cell_quad_points(mesh, cells=None) -> tuple[np.ndarray, np.ndarray]:
    mids = cell_midpoints(mesh, cells)
    return mids[..., 0], mids[..., 1]


def facet_quad_points(mesh, facet_ids) -> tuple[np.ndarray, np.ndarray]:
    """2-point Gauss nodes per facet, shapes (nf, 2)."""
    a = mesh.vertices[mesh.facets[facet_ids, 0]]
    b = mesh.vertices[mesh.facets[facet_ids, 1]]
    t0, t1 = _GAUSS2
    pts = np.stack([a + t0 * (b - a), a + t1 * (b - a)], axis=1)  # (nf, 2, 2)
    return pts[..., 0], pts[..., 1]


def facet_gauss_params() -> tuple[float, float]:
    """Parameters (t0, t1) of the 2-point rule on [0, 1]; weights are 1/2."""
    return _GAUSS2
