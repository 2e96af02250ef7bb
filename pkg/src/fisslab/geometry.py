"""Geometry of vertically-translated fissures in a 2D porous block.

A medium is a stack, bottom to top, of rock blocks separated by thin fissure
strips.  Each strip is generated by rigidly translating a continuous
piecewise-cubic curve ``zeta_i`` upward by a height ``h_i``; all curves share
one base interval ``(x_lo, x_hi)`` and the outer rock walls are horizontal
lines ``z = bottom`` and ``z = top``.

Region ids are tuples: ``("block", j)`` for rock blocks (j = 0..I) and
``("strip", i)`` for fissures (i = 1..I).  Everything here is immutable and
pure; meshing and assembly build on these primitives.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DisconnectedBlockError,
    GeometryError,
    InvalidEpsilon,
    OverlapError,
    PointOutsideDomain,
    VerticalTangentError,
)

RegionId = tuple[str, int]

DEFAULT_SLOPE_CAP = 50.0
_CONTINUITY_RTOL = 1e-12


@dataclass(frozen=True)
class CurveSpec:
    """Continuous piecewise-cubic curve over strictly increasing breakpoints.

    ``coeffs[k]`` are the coefficients ``(c0, c1, c2, c3)`` of segment ``k``
    in the local variable ``t = x - breakpoints[k]``.  At an interior
    breakpoint the derivative is taken one-sided from the left; the value is
    continuous so either side agrees.
    """

    breakpoints: tuple[float, ...]
    coeffs: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self):
        if len(self.breakpoints) < 2:
            raise GeometryError("curve needs at least two breakpoints")
        if len(self.coeffs) != len(self.breakpoints) - 1:
            raise GeometryError(
                f"curve has {len(self.breakpoints)} breakpoints but "
                f"{len(self.coeffs)} segments; expected one segment per interval"
            )
        bp = self.breakpoints
        if any(b1 >= b2 for b1, b2 in zip(bp, bp[1:])):
            raise GeometryError(f"breakpoints not strictly increasing: {bp}")
        for k in range(len(self.coeffs) - 1):
            t = bp[k + 1] - bp[k]
            left = _poly_val(self.coeffs[k], t)
            right = self.coeffs[k + 1][0]
            scale = max(1.0, abs(left), abs(right))
            if abs(left - right) > _CONTINUITY_RTOL * scale:
                raise GeometryError(
                    f"curve discontinuous at breakpoint {bp[k + 1]!r}: "
                    f"{left!r} vs {right!r}"
                )

    @property
    def x_lo(self) -> float:
        return self.breakpoints[0]

    @property
    def x_hi(self) -> float:
        return self.breakpoints[-1]

    def segment_index(self, x: float) -> int:
        """Segment owning ``x``; exact breakpoint hits resolve to the left."""
        if x < self.x_lo or x > self.x_hi:
            raise PointOutsideDomain(f"x={x!r} outside base interval "
                                     f"[{self.x_lo!r}, {self.x_hi!r}]")
        k = bisect.bisect_left(self.breakpoints, x) - 1
        return min(max(k, 0), len(self.coeffs) - 1)

    def value(self, x: float) -> float:
        k = self.segment_index(x)
        return _poly_val(self.coeffs[k], x - self.breakpoints[k])

    def derivative(self, x: float) -> float:
        k = self.segment_index(x)
        return _poly_der(self.coeffs[k], x - self.breakpoints[k])

    def value_many(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        flat = x.ravel()
        res = out.ravel()
        for i, xi in enumerate(flat):
            res[i] = self.value(float(xi))
        return out

    def shifted(self, dz: float) -> "CurveSpec":
        """Curve translated vertically by ``dz``."""
        if dz == 0.0:
            return self
        coeffs = tuple((c0 + dz, c1, c2, c3) for (c0, c1, c2, c3) in self.coeffs)
        return CurveSpec(self.breakpoints, coeffs)

    def range_bounds(self) -> tuple[float, float]:
        """Exact (inf, sup) of the curve over its base interval."""
        lo = np.inf
        hi = -np.inf
        for k, c in enumerate(self.coeffs):
            t1 = self.breakpoints[k + 1] - self.breakpoints[k]
            for t in _poly_extrema_points(c, t1):
                v = _poly_val(c, t)
                lo = min(lo, v)
                hi = max(hi, v)
        return lo, hi

    def max_abs_slope(self) -> float:
        """Exact max of |derivative| over the base interval (left-limits at
        breakpoints included by construction)."""
        m = 0.0
        for k, c in enumerate(self.coeffs):
            t1 = self.breakpoints[k + 1] - self.breakpoints[k]
            for t in _der_extrema_points(c, t1):
                m = max(m, abs(_poly_der(c, t)))
        return m

    @staticmethod
    def constant(value: float, x_lo: float, x_hi: float) -> "CurveSpec":
        return CurveSpec((x_lo, x_hi), ((value, 0.0, 0.0, 0.0),))


def _poly_val(c, t: float) -> float:
    return ((c[3] * t + c[2]) * t + c[1]) * t + c[0]


def _poly_der(c, t: float) -> float:
    return (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1]


def _poly_extrema_points(c, t1: float) -> list[float]:
    # endpoints plus real critical points of the cubic inside (0, t1)
    pts = [0.0, t1]
    a, b, lin = 3.0 * c[3], 2.0 * c[2], c[1]
    if a == 0.0:
        if b != 0.0:
            t = -lin / b
            if 0.0 < t < t1:
                pts.append(t)
    else:
        disc = b * b - 4.0 * a * lin
        if disc >= 0.0:
            r = np.sqrt(disc)
            for t in ((-b + r) / (2.0 * a), (-b - r) / (2.0 * a)):
                if 0.0 < t < t1:
                    pts.append(t)
    return pts


def _der_extrema_points(c, t1: float) -> list[float]:
    # derivative is quadratic; its extremum sits where 6*c3*t + 2*c2 = 0
    pts = [0.0, t1]
    if c[3] != 0.0:
        t = -c[2] / (3.0 * c[3])
        if 0.0 < t < t1:
            pts.append(t)
    return pts


@dataclass(frozen=True)
class Fissure:
    curve: CurveSpec
    height: float


@dataclass(frozen=True)
class FissuredMedium:
    """Validated stack of rock blocks and translation-generated fissures.

    Block ``j`` occupies the band between wall curves ``block_walls(j)``;
    strip ``i`` the band between ``fissures[i-1].curve`` and the same curve
    shifted up by its height.  Construct through :func:`validate_medium`.
    """

    x_lo: float
    x_hi: float
    bottom: float
    top: float
    fissures: tuple[Fissure, ...]
    slope_cap: float = DEFAULT_SLOPE_CAP

    @property
    def n_fissures(self) -> int:
        return len(self.fissures)

    def cumulative_height(self, upto: int) -> float:
        """Sum of fissure heights h_1..h_upto (h_0 = 0 convention)."""
        return float(sum(f.height for f in self.fissures[:upto]))

    def strip_walls(self, i: int) -> tuple[CurveSpec, CurveSpec]:
        """(lower, upper) wall curves of strip i (1-based)."""
        f = self.fissures[i - 1]
        return f.curve, f.curve.shifted(f.height)

    def block_walls(self, j: int) -> tuple[CurveSpec, CurveSpec]:
        """(lower, upper) wall curves of block j (0-based)."""
        i_count = self.n_fissures
        if j == 0:
            lower = CurveSpec.constant(self.bottom, self.x_lo, self.x_hi)
        else:
            f = self.fissures[j - 1]
            lower = f.curve.shifted(f.height)
        if j == i_count:
            upper = CurveSpec.constant(self.top, self.x_lo, self.x_hi)
        else:
            upper = self.fissures[j].curve
        return lower, upper

    def region_walls(self, region: RegionId) -> tuple[CurveSpec, CurveSpec]:
        kind, idx = region
        return self.block_walls(idx) if kind == "block" else self.strip_walls(idx)

    def stack(self) -> list[RegionId]:
        """Regions bottom to top: block 0, strip 1, block 1, ..., block I."""
        out: list[RegionId] = [("block", 0)]
        for i in range(1, self.n_fissures + 1):
            out.append(("strip", i))
            out.append(("block", i))
        return out

    def locate(self, x: float, z: float) -> RegionId:
        """Region containing (x, z).

        Ties are deterministic: a point exactly on a strip's lower wall
        belongs to the strip, exactly on its upper wall to the block above.
        """
        if not (self.x_lo <= x <= self.x_hi):
            raise PointOutsideDomain(f"x={x!r} outside [{self.x_lo!r}, {self.x_hi!r}]")
        if not (self.bottom <= z <= self.top):
            raise PointOutsideDomain(f"z={z!r} outside [{self.bottom!r}, {self.top!r}]")
        for i in range(1, self.n_fissures + 1):
            zi = self.fissures[i - 1].curve.value(x)
            if z < zi:
                return ("block", i - 1)
            if z < zi + self.fissures[i - 1].height:
                return ("strip", i)
        return ("block", self.n_fissures)

    def region_area(self, region: RegionId) -> float:
        """Exact area between the region's wall curves."""
        lower, upper = self.region_walls(region)
        return _curve_integral(upper) - _curve_integral(lower)


def _curve_integral(curve: CurveSpec) -> float:
    total = 0.0
    for k, c in enumerate(curve.coeffs):
        t1 = curve.breakpoints[k + 1] - curve.breakpoints[k]
        total += ((c[3] / 4.0 * t1 + c[2] / 3.0) * t1 + c[1] / 2.0) * t1 * t1 + c[0] * t1
    return total


def validate_medium(
    x_lo: float,
    x_hi: float,
    bottom: float,
    top: float,
    fissures: list[tuple[CurveSpec, float]],
    slope_cap: float = DEFAULT_SLOPE_CAP,
) -> FissuredMedium:
    """Validate a raw geometry description into a :class:`FissuredMedium`.

    Checks, in order: base interval sanity, per-curve domain agreement and
    slope cap, fissure ordering (no overlap), and non-pinched outer blocks.

    Raises:
        OverlapError: consecutive fissures touch or overlap.
        VerticalTangentError: some curve slope exceeds ``slope_cap``.
        DisconnectedBlockError: outermost block empty or pinched.
        GeometryError: any other malformed input.
    """
    if not fissures:
        raise GeometryError("at least one fissure is required")
    if not x_lo < x_hi:
        raise GeometryError(f"empty base interval ({x_lo!r}, {x_hi!r})")
    if not slope_cap > 0:
        raise GeometryError(f"slope cap must be positive, got {slope_cap!r}")

    for i, (curve, height) in enumerate(fissures, start=1):
        if not (np.isfinite(height) and height > 0):
            raise GeometryError(f"fissure {i}: height must be positive, got {height!r}")
        if curve.x_lo != x_lo or curve.x_hi != x_hi:
            raise GeometryError(
                f"fissure {i}: curve spans [{curve.x_lo!r}, {curve.x_hi!r}], "
                f"expected the base interval [{x_lo!r}, {x_hi!r}]"
            )
        slope = curve.max_abs_slope()
        if slope > slope_cap:
            raise VerticalTangentError(
                f"fissure {i}: max |slope| = {slope:.6g} exceeds cap {slope_cap:.6g}; "
                "lower bound on the upward normal's vertical component not certifiable"
            )

    for i in range(len(fissures) - 1):
        curve_lo, h_lo = fissures[i]
        curve_hi, _ = fissures[i + 1]
        sup_lower = curve_lo.range_bounds()[1] + h_lo
        inf_upper = curve_hi.range_bounds()[0]
        if sup_lower >= inf_upper:
            raise OverlapError(
                f"fissures {i + 1} and {i + 2} overlap: sup(lower wall + height) = "
                f"{sup_lower!r} >= inf(upper curve) = {inf_upper!r}"
            )

    inf_first = fissures[0][0].range_bounds()[0]
    if bottom >= inf_first:
        raise DisconnectedBlockError(
            f"block 0 pinched: bottom = {bottom!r} >= inf(first curve) = {inf_first!r}"
        )
    last_curve, last_h = fissures[-1]
    sup_last = last_curve.range_bounds()[1] + last_h
    if top <= sup_last:
        raise DisconnectedBlockError(
            f"top block pinched: top = {top!r} <= sup(last wall) = {sup_last!r}"
        )

    return FissuredMedium(
        x_lo=x_lo,
        x_hi=x_hi,
        bottom=bottom,
        top=top,
        fissures=tuple(Fissure(c, float(h)) for c, h in fissures),
        slope_cap=slope_cap,
    )


# --- local frames -------------------------------------------------------------


def normal_vector(curve: CurveSpec, x: float) -> np.ndarray:
    """Upward unit normal (-zeta', 1)/|(-zeta', 1)| of the curve at ``x``."""
    d = curve.derivative(x)
    scale = np.hypot(d, 1.0)
    return np.array([-d / scale, 1.0 / scale])


@dataclass(frozen=True)
class LocalFrame:
    """Orthogonal frame at a curve point: columns (tangent, upward normal)."""

    matrix: np.ndarray  # 2x2, columns e1 = (1, zeta')/|..|, n = (-zeta', 1)/|..|
    slope: float

    @property
    def tangent(self) -> np.ndarray:
        return self.matrix[:, 0]

    @property
    def normal(self) -> np.ndarray:
        return self.matrix[:, 1]

    # 2x2 block entries of the frame matrix, horizontal/vertical rows vs
    # tangential/normal columns
    @property
    def t_tau(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def t_n(self) -> float:
        return float(self.matrix[0, 1])

    @property
    def k_tau(self) -> float:
        return float(self.matrix[1, 0])

    @property
    def k_n(self) -> float:
        return float(self.matrix[1, 1])


def local_frame(curve: CurveSpec, x: float) -> LocalFrame:
    """Orthonormal (tangent, normal) frame of the curve at ``x``."""
    d = curve.derivative(x)
    scale = np.hypot(d, 1.0)
    m = np.array([[1.0 / scale, -d / scale], [d / scale, 1.0 / scale]])
    return LocalFrame(matrix=m, slope=d)


# --- epsilon scaling -----------------------------------------------------------


@dataclass(frozen=True)
class EpsScaling:
    """A medium squeezed by ``eps``: fissure heights scale to ``eps*h_i`` and
    everything above slides down so the stack stays ordered."""

    base: FissuredMedium
    eps: float
    medium: FissuredMedium


def epsilon_scale(medium: FissuredMedium, eps: float) -> EpsScaling:
    """Squeezed medium: curve i drops by ``(1-eps)*sum(h_l, l<i)``, heights
    become ``eps*h_i``, block j drops by ``(1-eps)*sum(h_l, l<=j)``.

    ``eps = 1`` reproduces the input medium exactly (all shifts are 0.0 and
    curves are shared, not copied).
    """
    if not (0.0 < eps <= 1.0):
        raise InvalidEpsilon(f"eps must lie in (0, 1], got {eps!r}")
    squeeze = 1.0 - eps
    fissures = []
    for i, f in enumerate(medium.fissures, start=1):
        drop = squeeze * medium.cumulative_height(i - 1)
        fissures.append(Fissure(f.curve.shifted(-drop), eps * f.height))
    top_drop = squeeze * medium.cumulative_height(medium.n_fissures)
    scaled = replace(
        medium,
        top=medium.top - top_drop,
        fissures=tuple(fissures),
    )
    return EpsScaling(base=medium, eps=eps, medium=scaled)


# --- change of variables to the reference domain -------------------------------


def map_phi(medium: FissuredMedium, eps: float, y: tuple[float, float]) -> tuple[RegionId, np.ndarray]:
    """Map a point of the eps-squeezed domain to the fixed reference domain.

    Rock blocks translate rigidly back up; strip points stretch vertically by
    ``1/eps`` about the strip's lower wall.  Returns the region id (shared
    between the squeezed and reference domains) and the reference point.
    """
    scaled = epsilon_scale(medium, eps).medium
    x, zy = float(y[0]), float(y[1])
    region = scaled.locate(x, zy)
    kind, idx = region
    squeeze = 1.0 - eps
    if kind == "block":
        z = zy + squeeze * medium.cumulative_height(idx)
    else:
        zeta_eps = scaled.fissures[idx - 1].curve.value(x)
        z = (zy - zeta_eps) / eps + zeta_eps + squeeze * medium.cumulative_height(idx - 1)
    return region, np.array([x, z])


def inverse_phi(medium: FissuredMedium, eps: float, p: tuple[float, float]) -> tuple[RegionId, np.ndarray]:
    """Inverse of :func:`map_phi`; takes a reference-domain point."""
    if not (0.0 < eps <= 1.0):
        raise InvalidEpsilon(f"eps must lie in (0, 1], got {eps!r}")
    x, z = float(p[0]), float(p[1])
    region = medium.locate(x, z)
    kind, idx = region
    squeeze = 1.0 - eps
    if kind == "block":
        zy = z - squeeze * medium.cumulative_height(idx)
    else:
        zeta = medium.fissures[idx - 1].curve.value(x)
        zy = eps * (z - zeta) + zeta - squeeze * medium.cumulative_height(idx - 1)
    return region, np.array([x, zy])


def gradient_jacobian(medium: FissuredMedium, eps: float, p: tuple[float, float]) -> np.ndarray:
    """Matrix relating squeezed-domain gradients to reference-domain ones at
    a reference point: identity on blocks, ``[[1, (1-1/eps) zeta'], [0, 1/eps]]``
    on strip i.  Its determinant on strips is exactly ``1/eps``."""
    if not (0.0 < eps <= 1.0):
        raise InvalidEpsilon(f"eps must lie in (0, 1], got {eps!r}")
    x, z = float(p[0]), float(p[1])
    kind, idx = medium.locate(x, z)
    if kind == "block":
        return np.eye(2)
    d = medium.fissures[idx - 1].curve.derivative(x)
    return np.array([[1.0, (1.0 - 1.0 / eps) * d], [0.0, 1.0 / eps]])


# --- collapse to manifold curves ------------------------------------------------


def collapse_T(medium: FissuredMedium, p: tuple[float, float]) -> tuple[RegionId, np.ndarray]:
    """Collapse map: block j translates down by ``sum(h_l, l<=j)``; strip i
    lands on its manifold curve ``lambda_i = zeta_i - sum(h_l, l<i)``."""
    x, z = float(p[0]), float(p[1])
    region = medium.locate(x, z)
    kind, idx = region
    if kind == "block":
        return region, np.array([x, z - medium.cumulative_height(idx)])
    lam = medium.fissures[idx - 1].curve.value(x) - medium.cumulative_height(idx - 1)
    return region, np.array([x, lam])


def collapsed_curves(medium: FissuredMedium) -> list[CurveSpec]:
    """Manifold curves lambda_i of the collapsed system, bottom to top."""
    return [
        f.curve.shifted(-medium.cumulative_height(i - 1))
        for i, f in enumerate(medium.fissures, start=1)
    ]


def validate_collapsed(medium: FissuredMedium) -> None:
    """Check the collapsed system keeps strictly ordered manifold curves."""
    curves = collapsed_curves(medium)
    for i in range(len(curves) - 1):
        sup_lo = curves[i].range_bounds()[1]
        inf_hi = curves[i + 1].range_bounds()[0]
        if sup_lo >= inf_hi:
            raise OverlapError(
                f"collapsed curves {i + 1} and {i + 2} out of order: "
                f"{sup_lo!r} >= {inf_hi!r}"
            )
