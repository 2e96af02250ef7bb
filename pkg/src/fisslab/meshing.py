"""Structured conforming triangulation of a fissured medium.

Nodes sit on vertical fibers through a 1D partition of the base interval;
every wall curve (fissure walls and the outer horizontal walls) is a
mandatory node layer, so subdomain and interface conformity hold by
construction.  Curved walls are carried as nodal polylines; all assembly
downstream evaluates wall slopes from these polylines so the discrete
geometry is self-consistent.

Facet tags: 0 interior, 1 fissure bottom wall, 2 fissure top wall,
3 drained exterior rock boundary, 4 fissure lateral wall.  Wall facets are
oriented so the cached unit normal points upward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshQualityError, TargetTooCoarse
from .geometry import FissuredMedium, RegionId

FACET_INTERIOR = 0
FACET_WALL_BOT = 1   # lower fissure wall: rock below, strip above
FACET_WALL_TOP = 2   # upper fissure wall: strip below, rock above
FACET_DRAINED = 3
FACET_LATERAL = 4

MIN_ANGLE_DEG = 15.0


@dataclass(frozen=True)
class MixedMesh:
    """Immutable simplicial mesh with region tags and oriented facets."""

    medium: FissuredMedium
    fiber_x: np.ndarray            # (n_fibers,)
    layers: tuple[int, ...]        # cell layers per region, stack order
    vertices: np.ndarray           # (nv, 2)
    cells: np.ndarray              # (nc, 3) vertex ids, CCW
    cell_kind: np.ndarray          # (nc,) 0 = block, 1 = strip
    cell_index: np.ndarray         # (nc,) block j or strip i
    cell_column: np.ndarray        # (nc,) fiber interval index
    cell_slope: np.ndarray         # (nc,) wall polyline slope (strips), else 0
    cell_area: np.ndarray          # (nc,)
    facets: np.ndarray             # (nf, 2) vertex ids, oriented
    facet_tag: np.ndarray          # (nf,)
    facet_fissure: np.ndarray      # (nf,) fissure index for wall facets, else 0
    facet_cells: np.ndarray        # (nf, 2) adjacent cells, -1 if none
    facet_normal: np.ndarray       # (nf, 2) unit normal (upward on walls)
    facet_length: np.ndarray       # (nf,)
    facet_sign: np.ndarray         # (nf, 2) +1 if normal exits that cell
    vertex_fiber: np.ndarray       # (nv,)
    vertex_level: np.ndarray       # (nv,)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    def cells_of(self, kind: str, index: int | None = None) -> np.ndarray:
        """Cell ids of one region kind ('block'/'strip'), optionally one index."""
        want = 0 if kind == "block" else 1
        mask = self.cell_kind == want
        if index is not None:
            mask &= self.cell_index == index
        return np.nonzero(mask)[0]

    def region_cell_areas(self) -> dict[RegionId, float]:
        out: dict[RegionId, float] = {}
        for kind_code, kind in ((0, "block"), (1, "strip")):
            for idx in np.unique(self.cell_index[self.cell_kind == kind_code]):
                mask = (self.cell_kind == kind_code) & (self.cell_index == idx)
                out[(kind, int(idx))] = float(self.cell_area[mask].sum())
        return out

    def wall_facets(self, fissure: int | None = None) -> np.ndarray:
        mask = (self.facet_tag == FACET_WALL_BOT) | (self.facet_tag == FACET_WALL_TOP)
        if fissure is not None:
            mask &= self.facet_fissure == fissure
        return np.nonzero(mask)[0]

    def strip_vertices(self, fissure: int) -> np.ndarray:
        """Vertex ids touching strip cells of one fissure (walls included)."""
        cells = self.cells[self.cells_of("strip", fissure)]
        return np.unique(cells.ravel())


def _region_thickness(medium: FissuredMedium, region: RegionId,
                      fiber_x: np.ndarray) -> tuple[float, float]:
    kind, idx = region
    if kind == "strip":
        h = medium.fissures[idx - 1].height
        return h, h
    lower, upper = medium.block_walls(idx)
    xs = np.concatenate([fiber_x, 0.5 * (fiber_x[:-1] + fiber_x[1:])])
    thick = [upper.value(float(x)) - lower.value(float(x)) for x in xs]
    return min(thick), max(thick)


_ASPECT_CAP = 3.0   # layer height at most 3x the fiber spacing (>= 18 deg cells)


def _region_layer_count(medium: FissuredMedium, region: RegionId, target_h: float,
                        fiber_x: np.ndarray) -> int:
    kind, _ = region
    _, t_max = _region_thickness(medium, region, fiber_x)
    floor = 2 if kind == "strip" else 1
    dx_max = float(np.max(np.diff(fiber_x)))
    m = max(math.ceil(t_max / target_h - 1e-12),
            math.ceil(t_max / (_ASPECT_CAP * dx_max) - 1e-12))
    return max(floor, m)


def build_mesh(medium: FissuredMedium, target_h: float) -> MixedMesh:
    """Structured layered mesh with target cell size ``target_h``.

    Raises:
        TargetTooCoarse: ``target_h`` above half the thinnest fissure height.
        MeshQualityError: a cell angle below 15 degrees (steep walls relative
            to the fiber spacing).
    """
    if not target_h > 0:
        raise TargetTooCoarse(f"target_h must be positive, got {target_h!r}")
    h_min = min(f.height for f in medium.fissures) if medium.fissures else np.inf
    if target_h > h_min / 2.0:
        raise TargetTooCoarse(
            f"target_h = {target_h!r} cannot place two cell layers across the "
            f"thinnest fissure (height {h_min!r}); need target_h <= {h_min / 2.0!r}"
        )
    width = medium.x_hi - medium.x_lo
    breaks = sorted({b for f in medium.fissures for b in f.curve.breakpoints})

    def fibers_for(dx: float) -> np.ndarray:
        n = max(1, math.ceil(width / dx - 1e-12))
        return _merge_fibers(np.linspace(medium.x_lo, medium.x_hi, n + 1), breaks)

    fiber_x = fibers_for(target_h)
    layers = tuple(
        _region_layer_count(medium, region, target_h, fiber_x)
        for region in medium.stack()
    )
    # sheared bands need the fiber spacing small against the layer heights,
    # or the diagonal split degenerates: dx <= min layer height / max slope
    s_max = max((f.curve.max_abs_slope() for f in medium.fissures), default=0.0)
    if s_max > 1.0:
        dz_min = min(
            _region_thickness(medium, region, fiber_x)[0] / m
            for region, m in zip(medium.stack(), layers)
        )
        dx_allowed = dz_min / s_max
        if dx_allowed < target_h:
            fiber_x = fibers_for(dx_allowed)
            layers = tuple(
                _region_layer_count(medium, region, target_h, fiber_x)
                for region in medium.stack()
            )
    return _build(medium, fiber_x, layers)


def refine(mesh: MixedMesh) -> MixedMesh:
    """Uniform refinement: fiber midpoints inserted, layer counts doubled,
    wall nodes snapped back onto the exact curves.  Cell count quadruples and
    all tags are re-derived by the same construction."""
    fx = mesh.fiber_x
    fiber_x = np.sort(np.concatenate([fx, 0.5 * (fx[:-1] + fx[1:])]))
    layers = tuple(2 * m for m in mesh.layers)
    return _build(mesh.medium, fiber_x, layers)


def _merge_fibers(fiber_x: np.ndarray, extra: list[float]) -> np.ndarray:
    out = list(fiber_x)
    tol = 1e-10 * max(1.0, abs(fiber_x[-1] - fiber_x[0]))
    for b in extra:
        if all(abs(b - x) > tol for x in out):
            out.append(b)
    return np.array(sorted(out))


def _build(medium: FissuredMedium, fiber_x: np.ndarray, layers: tuple[int, ...]) -> MixedMesh:
    stack = medium.stack()
    n_fib = len(fiber_x)
    n_col = n_fib - 1
    level_of_region_start = np.cumsum([0] + list(layers))
    n_levels = int(level_of_region_start[-1]) + 1

    # wall curve values per region boundary, evaluated once per fiber
    wall_values = np.empty((len(stack) + 1, n_fib))
    for r, region in enumerate(stack):
        lower, _ = medium.region_walls(region)
        wall_values[r] = lower.value_many(fiber_x)
    wall_values[len(stack)] = medium.region_walls(stack[-1])[1].value_many(fiber_x)

    z_grid = np.empty((n_fib, n_levels))
    for r, m in enumerate(layers):
        lo = wall_values[r]
        hi = wall_values[r + 1]
        base = int(level_of_region_start[r])
        for ell in range(m + 1):
            z_grid[:, base + ell] = lo + (ell / m) * (hi - lo)

    nv = n_fib * n_levels
    vertices = np.empty((nv, 2))
    vertices[:, 0] = np.repeat(fiber_x, n_levels)
    vertices[:, 1] = z_grid.ravel()
    vertex_fiber = np.repeat(np.arange(n_fib), n_levels)
    vertex_level = np.tile(np.arange(n_levels), n_fib)

    # region of each level interval
    interval_region = np.empty(n_levels - 1, dtype=int)
    for r, m in enumerate(layers):
        base = int(level_of_region_start[r])
        interval_region[base:base + m] = r

    # quads column-major: all level intervals of column k, then column k+1
    kk, ll = np.meshgrid(np.arange(n_col), np.arange(n_levels - 1), indexing="ij")
    kk = kk.ravel()
    ll = ll.ravel()
    v00 = kk * n_levels + ll
    v10 = (kk + 1) * n_levels + ll
    v11 = v10 + 1
    v01 = v00 + 1

    # split each quad along the diagonal that maximizes the minimum angle
    # (sheared bands would otherwise produce slivers on one shear sign)
    split_a = np.stack([np.stack([v00, v10, v11], axis=1),
                        np.stack([v00, v11, v01], axis=1)], axis=1)  # (nq, 2, 3)
    split_b = np.stack([np.stack([v00, v10, v01], axis=1),
                        np.stack([v10, v11, v01], axis=1)], axis=1)
    qa = np.minimum(_tri_min_angle(vertices, split_a[:, 0]),
                    _tri_min_angle(vertices, split_a[:, 1]))
    qb = np.minimum(_tri_min_angle(vertices, split_b[:, 0]),
                    _tri_min_angle(vertices, split_b[:, 1]))
    chosen = np.where((qa >= qb)[:, None, None], split_a, split_b)

    nq = kk.size
    cells = chosen.reshape(2 * nq, 3)
    region = interval_region[ll]
    kinds = np.array([0 if stack[r][0] == "block" else 1 for r in range(len(stack))],
                     dtype=np.int8)
    indices = np.array([stack[r][1] for r in range(len(stack))], dtype=int)
    cell_kind = np.repeat(kinds[region], 2)
    cell_index = np.repeat(indices[region], 2)
    cell_column = np.repeat(kk, 2)

    base_level = level_of_region_start[region]
    dx_col = (fiber_x[kk + 1] - fiber_x[kk])
    wall_slope = (z_grid[kk + 1, base_level] - z_grid[kk, base_level]) / dx_col
    quad_slope = np.where(kinds[region] == 1, wall_slope, 0.0)
    cell_slope = np.repeat(quad_slope, 2)

    p0 = vertices[cells[:, 0]]
    p1 = vertices[cells[:, 1]]
    p2 = vertices[cells[:, 2]]
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - \
            (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    if np.any(cross <= 0):
        raise MeshQualityError("degenerate or inverted cell produced; "
                               "walls intersect at mesh resolution")
    cell_area = 0.5 * cross

    _check_min_angle(vertices, cells)

    facets, facet_tag, facet_fissure, facet_cells = _collect_facets(
        medium, stack, cells, cell_kind, cell_index, vertices, vertex_fiber)

    fa = vertices[facets[:, 0]]
    fb = vertices[facets[:, 1]]
    dvec = fb - fa
    facet_length = np.hypot(dvec[:, 0], dvec[:, 1])
    facet_normal = np.column_stack([-dvec[:, 1], dvec[:, 0]]) / facet_length[:, None]

    centroids = (p0 + p1 + p2) / 3.0
    mids = 0.5 * (fa + fb)
    facet_sign = np.zeros((facets.shape[0], 2))
    for side in (0, 1):
        has = facet_cells[:, side] >= 0
        rel = mids[has] - centroids[facet_cells[has, side]]
        facet_sign[has, side] = np.sign(np.einsum("ij,ij->i", rel, facet_normal[has]))

    return MixedMesh(
        medium=medium,
        fiber_x=fiber_x,
        layers=layers,
        vertices=vertices,
        cells=cells,
        cell_kind=cell_kind,
        cell_index=cell_index,
        cell_column=cell_column,
        cell_slope=cell_slope,
        cell_area=cell_area,
        facets=facets,
        facet_tag=facet_tag,
        facet_fissure=facet_fissure,
        facet_cells=facet_cells,
        facet_normal=facet_normal,
        facet_length=facet_length,
        facet_sign=facet_sign,
        vertex_fiber=vertex_fiber,
        vertex_level=vertex_level,
    )


def _tri_min_angle(vertices: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Minimum interior angle (degrees) of each triangle in ``tris``."""
    pts = vertices[tris]  # (n, 3, 2)
    worst = np.full(tris.shape[0], 180.0)
    for local in range(3):
        a = pts[:, local]
        b = pts[:, (local + 1) % 3]
        cpt = pts[:, (local + 2) % 3]
        u = b - a
        v = cpt - a
        cosang = np.einsum("ij,ij->i", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        worst = np.minimum(worst, np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return worst


def _check_min_angle(vertices: np.ndarray, cells: np.ndarray) -> None:
    worst = float(_tri_min_angle(vertices, cells).min())
    if worst < MIN_ANGLE_DEG:
        raise MeshQualityError(
            f"minimum cell angle {worst:.2f} deg below {MIN_ANGLE_DEG} deg; "
            "refine the fiber spacing or reduce wall slopes"
        )


def _collect_facets(medium, stack, cells, cell_kind, cell_index, vertices, vertex_fiber):
    edge_map: dict[tuple[int, int], list[int]] = {}
    for c in range(cells.shape[0]):
        tri = cells[c]
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append(c)

    n_f = len(edge_map)
    facets = np.empty((n_f, 2), dtype=int)
    facet_tag = np.empty(n_f, dtype=np.int8)
    facet_fissure = np.zeros(n_f, dtype=int)
    facet_cells = np.full((n_f, 2), -1, dtype=int)

    for f, (key, adj) in enumerate(sorted(edge_map.items())):
        a, b = key
        # orient wall / horizontal-ish facets by ascending x so the normal
        # points upward; vertical facets keep index order
        if vertices[a, 0] > vertices[b, 0]:
            a, b = b, a
        facets[f] = (a, b)
        facet_cells[f, : len(adj)] = adj
        if len(adj) == 2:
            c0, c1 = adj
            k0, k1 = cell_kind[c0], cell_kind[c1]
            if k0 == k1:
                facet_tag[f] = FACET_INTERIOR
            else:
                strip_c = c0 if k0 == 1 else c1
                block_c = c1 if k0 == 1 else c0
                i = int(cell_index[strip_c])
                j = int(cell_index[block_c])
                facet_fissure[f] = i
                if j == i - 1:
                    facet_tag[f] = FACET_WALL_BOT
                else:
                    if j != i:
                        raise AssertionError(
                            f"block {j} adjacent to strip {i}: broken stacking")
                    facet_tag[f] = FACET_WALL_TOP
        else:
            (c0,) = adj
            facet_tag[f] = FACET_DRAINED if cell_kind[c0] == 0 else FACET_LATERAL
    return facets, facet_tag, facet_fissure, facet_cells


# --- plain-text mesh exchange ---------------------------------------------------


def export_mesh(mesh: MixedMesh) -> str:
    """Serialize to the documented plain-text format (see README)."""
    lines = ["fisslab-mesh 1"]
    lines.append(f"vertices {mesh.n_vertices}")
    for x, z in mesh.vertices:
        lines.append(f"{x!r} {z!r}")
    lines.append(f"cells {mesh.n_cells}")
    for c in range(mesh.n_cells):
        v = mesh.cells[c]
        kind = "block" if mesh.cell_kind[c] == 0 else "strip"
        lines.append(f"{v[0]} {v[1]} {v[2]} {kind} {mesh.cell_index[c]}")
    lines.append(f"facets {mesh.n_facets}")
    for f in range(mesh.n_facets):
        v = mesh.facets[f]
        lines.append(f"{v[0]} {v[1]} {mesh.facet_tag[f]} {mesh.facet_fissure[f]}")
    return "\n".join(lines) + "\n"
