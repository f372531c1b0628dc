from .analysis import (
    AnalysisReport,
    AnalysisResult,
    Certificate,
    Ellipsoid,
    InclusionReport,
    analysis_matrix,
    check_analysis,
    check_inclusion,
    default_margin_tol,
    ellipsoid_of,
    solve_analysis,
)
from .backend import BackendResult, ConicBackend, CvxpyBackend, FallbackBackend, get_backend
from .problem import AffineLMI, LMIProblem, MatrixVariable
from .synthesis import SynthesisResult, search_epsilon, solve_synthesis, synthesis_problem

__all__ = [
    "AffineLMI", "AnalysisReport", "AnalysisResult", "BackendResult", "Certificate",
    "ConicBackend", "CvxpyBackend", "FallbackBackend", "Ellipsoid", "InclusionReport", "LMIProblem",
    "MatrixVariable", "SynthesisResult", "analysis_matrix", "check_analysis",
    "check_inclusion", "default_margin_tol", "ellipsoid_of", "get_backend",
    "search_epsilon", "solve_analysis", "solve_synthesis", "synthesis_problem",
]
