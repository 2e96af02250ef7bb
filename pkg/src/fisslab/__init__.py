"""fisslab: a mixed-FEM laboratory for Darcy flow in thin-fissure porous
media, the thinness-parameterized family of problems on a fixed reference
domain, and its reduced-dimension limit."""

from .errors import (
    CoefficientEvaluationError,
    ConfigError,
    DataError,
    DisconnectedBlockError,
    EvaluationError,
    ExprSyntaxError,
    FisslabError,
    GeometryError,
    InvalidEpsilon,
    LimitDataError,
    MeshQualityError,
    OverlapError,
    PointOutsideDomain,
    SingularSystemError,
    TargetTooCoarse,
    ToleranceNotReached,
    TooLargeForDense,
    UnknownCase,
    UnknownIdentifier,
    VerticalTangentError,
)
from .exprlang import Expr, parse_expr
from .geometry import (
    CurveSpec,
    EpsScaling,
    Fissure,
    FissuredMedium,
    LocalFrame,
    collapse_T,
    epsilon_scale,
    gradient_jacobian,
    inverse_phi,
    local_frame,
    map_phi,
    normal_vector,
    validate_medium,
)
from .meshing import MixedMesh, build_mesh, export_mesh, refine
from .problem import Coefficient, ProblemData
from .assembly import (
    DiscreteSystem,
    DofLayout,
    apply_bc,
    assemble_eps,
    assemble_unscaled,
    build_layout,
    dump_system,
)
from .limit import (
    LimitDofLayout,
    ManifoldMesh,
    assemble_limit,
    build_limit_layout,
    build_manifolds,
    reconstruct_strip_fields,
)
from .solver import (
    SolutionField,
    conservation_residual,
    energy_identity,
    estimate_infsup,
    interface_condition_gaps,
    interface_residuals,
    solve_saddle,
)
from .manufactured import ManufacturedCase, catalog_names, manufactured_case
from .config import SweepConfig, load_geometry, load_sweep_config
from .sweep import ConvergenceReport, ReportRow, emit_report, read_report, run_sweep

__version__ = "0.1.0"
