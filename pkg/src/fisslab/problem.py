"""Coefficient and forcing data for the flow problem.

Fields are functions of (x, z): flow resistances ``a1`` (rock) and ``a2``
(fissures), interface entry resistance ``alpha``, volumetric source ``F``,
gravity-like drive ``(gx, gz)`` and the interface source ``f_gamma``.  Each
may be given as a number, an expression string, a parsed expression, or any
callable; all are wrapped into vectorized :class:`Coefficient` evaluators.

``boundary_pressure`` is optional drained-wall pressure data (default: the
homogeneous drained condition); manufactured cases use it to impose exact
traces, production configs leave it unset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import CoefficientEvaluationError, DataError
from .exprlang import Expr, parse_expr

FieldLike = Union[float, int, str, Expr, Callable]


@dataclass(frozen=True)
class Coefficient:
    """Vectorized scalar field of (x, z)."""

    fn: Callable
    label: str

    def __call__(self, x, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        try:
            out = self.fn(x, z)
        except CoefficientEvaluationError:
            raise
        except Exception as exc:
            raise CoefficientEvaluationError(
                f"field '{self.label}' failed at sample points: {exc}"
            ) from exc
        out = np.asarray(out, dtype=float)
        if out.shape != np.broadcast_shapes(x.shape, z.shape):
            out = np.broadcast_to(out, np.broadcast_shapes(x.shape, z.shape)).copy()
        if not np.all(np.isfinite(out)):
            raise CoefficientEvaluationError(
                f"field '{self.label}' produced a non-finite value"
            )
        return out

    @staticmethod
    def wrap(obj: FieldLike, label: str) -> "Coefficient":
        if isinstance(obj, Coefficient):
            return obj
        if isinstance(obj, (int, float)):
            value = float(obj)
            return Coefficient(lambda x, z: np.broadcast_to(
                value, np.broadcast_shapes(np.shape(x), np.shape(z))).copy(), label)
        if isinstance(obj, str):
            expr = parse_expr(obj)
            return Coefficient(expr, label)
        if isinstance(obj, Expr):
            return Coefficient(obj, label)
        if callable(obj):
            return Coefficient(obj, label)
        raise DataError(f"cannot interpret {obj!r} as the field '{label}'")


ZERO = Coefficient.wrap(0.0, "zero")


@dataclass(frozen=True)
class ProblemData:
    """Validated coefficient bundle.

    The solvability hypothesis is a positive lower bound for the flow
    resistances and a nonnegative entry resistance; both are checked by
    sampling on the mesh quadrature points in :meth:`check_on_mesh`.
    """

    a1: Coefficient
    a2: Coefficient
    alpha: Coefficient
    F: Coefficient = ZERO
    gx: Coefficient = ZERO
    gz: Coefficient = ZERO
    f_gamma: Coefficient = ZERO
    boundary_pressure: Coefficient | None = None

    @staticmethod
    def make(a1: FieldLike = 1.0, a2: FieldLike = 1.0, alpha: FieldLike = 0.0,
             F: FieldLike = 0.0, gx: FieldLike = 0.0, gz: FieldLike = 0.0,
             f_gamma: FieldLike = 0.0,
             boundary_pressure: FieldLike | None = None) -> "ProblemData":
        return ProblemData(
            a1=Coefficient.wrap(a1, "a1"),
            a2=Coefficient.wrap(a2, "a2"),
            alpha=Coefficient.wrap(alpha, "alpha"),
            F=Coefficient.wrap(F, "F"),
            gx=Coefficient.wrap(gx, "gx"),
            gz=Coefficient.wrap(gz, "gz"),
            f_gamma=Coefficient.wrap(f_gamma, "f_gamma"),
            boundary_pressure=(None if boundary_pressure is None
                               else Coefficient.wrap(boundary_pressure, "boundary_pressure")),
        )

    def check_on_mesh(self, mesh) -> float:
        """Sample the hypotheses on quadrature points; returns the sampled
        resistance lower bound.

        Raises:
            DataError: sampled ``min(a1, a2) <= 0`` or ``alpha < 0``.
            CoefficientEvaluationError: a field cannot be evaluated.
        """
        from .quadrature import cell_quad_points, facet_quad_points

        qx, qz = cell_quad_points(mesh)
        rock = mesh.cell_kind == 0
        a_star = np.inf
        if rock.any():
            a_star = min(a_star, float(self.a1(qx[rock], qz[rock]).min()))
        if (~rock).any():
            a_star = min(a_star, float(self.a2(qx[~rock], qz[~rock]).min()))
        if not a_star > 0:
            raise DataError(
                f"resistance lower bound must be positive; sampled min = {a_star!r}")
        walls = mesh.wall_facets()
        if walls.size:
            fx, fz = facet_quad_points(mesh, walls)
            alpha = self.alpha(fx, fz)
            if float(alpha.min()) < 0:
                raise DataError(
                    f"entry resistance must be nonnegative; sampled min = {alpha.min()!r}")
        # remaining fields only need to be evaluable
        for coeff in (self.F, self.gx, self.gz):
            coeff(qx[:1], qz[:1])
        if walls.size:
            self.f_gamma(fx[:1], fz[:1])
        return a_star
