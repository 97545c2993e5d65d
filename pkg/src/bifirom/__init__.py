"""Bi-fidelity non-intrusive reduced-basis models for parametric elliptic PDEs."""

__version__ = "0.1.0"

from .fem import StructuredGrid, assemble, fem_error_norms, solve_sparse  # noqa: E402
from .nonlinear import IterationConfig, LinearizedSystem, solve_fidelity  # noqa: E402
from .offline import OfflineConfig, RomArtifact, build_artifact, lemma_diagnostics  # noqa: E402
from .online import OnlineReport, evaluate, online_solve, reference_bifidelity_solve  # noqa: E402
from .problems import get_problem, list_problems  # noqa: E402

__all__ = [
    "StructuredGrid",
    "assemble",
    "solve_sparse",
    "fem_error_norms",
    "IterationConfig",
    "LinearizedSystem",
    "solve_fidelity",
    "OfflineConfig",
    "RomArtifact",
    "build_artifact",
    "lemma_diagnostics",
    "OnlineReport",
    "online_solve",
    "reference_bifidelity_solve",
    "evaluate",
    "get_problem",
    "list_problems",
]
