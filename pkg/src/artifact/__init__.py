"""Scattering on finite metric graphs with self-adjoint vertex couplings."""
from __future__ import annotations

from .boundary import (
    BoundaryCondition,
    DimensionMismatch,
    InvalidBoundaryCondition,
    InvalidParameters,
    ValidationReport,
    VertexPartition,
    canonicalize,
    cyclic_coupling,
    delta_coupling,
    delta_prime,
    dirichlet,
    dual,
    equivalent,
    is_real,
    kirchhoff_standard,
    localize,
    neumann,
    random_bc,
    robin,
    scale_invariant,
    sl2_coupling,
    validate,
    von_neumann_parameter,
)
from .graph import (
    CutMap,
    GlobalBC,
    InvalidGraph,
    MetricGraph,
    NotACut,
    UnknownEdge,
    Vertex,
    assemble,
    cut,
    ext_ref,
    insert_trivial_vertex,
    int_ref,
    trivial_vertex_bc,
)
from .numkernel import (
    DefectReport,
    SingularMatrix,
    defect_report,
    determinant,
    numeric_rank,
    pseudoinverse,
    solve_linear,
    unitarity_defect,
)
from .scattering import (
    BadWindow,
    NonpositiveEnergy,
    NoExternalLines,
    NotAnEigenvalue,
    OutOfDomain,
    ScatteringResult,
    SpectrumResult,
    build_xyz,
    check_covariance,
    check_duality,
    check_transpose,
    eigenfunction,
    evaluate_wavefunction,
    smatrix_single_vertex,
    solve_scattering,
    spectrum,
    sweep,
)
from .starprod import (
    ConditionAViolated,
    StarOperands,
    associativity_check,
    compose_smatrices,
    condition_a,
    factorize_graph,
    star,
)

__version__ = "0.1.0"

__all__ = [
    "BadWindow",
    "BoundaryCondition",
    "ConditionAViolated",
    "CutMap",
    "DefectReport",
    "DimensionMismatch",
    "GlobalBC",
    "InvalidBoundaryCondition",
    "InvalidGraph",
    "InvalidParameters",
    "MetricGraph",
    "NoExternalLines",
    "NonpositiveEnergy",
    "NotACut",
    "NotAnEigenvalue",
    "OutOfDomain",
    "ScatteringResult",
    "SingularMatrix",
    "SpectrumResult",
    "StarOperands",
    "UnknownEdge",
    "ValidationReport",
    "Vertex",
    "VertexPartition",
    "assemble",
    "associativity_check",
    "build_xyz",
    "canonicalize",
    "check_covariance",
    "check_duality",
    "check_transpose",
    "compose_smatrices",
    "condition_a",
    "cut",
    "cyclic_coupling",
    "defect_report",
    "delta_coupling",
    "delta_prime",
    "determinant",
    "dirichlet",
    "dual",
    "eigenfunction",
    "equivalent",
    "evaluate_wavefunction",
    "ext_ref",
    "factorize_graph",
    "insert_trivial_vertex",
    "int_ref",
    "is_real",
    "kirchhoff_standard",
    "localize",
    "neumann",
    "numeric_rank",
    "pseudoinverse",
    "random_bc",
    "robin",
    "scale_invariant",
    "sl2_coupling",
    "smatrix_single_vertex",
    "solve_linear",
    "solve_scattering",
    "spectrum",
    "star",
    "sweep",
    "trivial_vertex_bc",
    "unitarity_defect",
    "validate",
    "von_neumann_parameter",
]
