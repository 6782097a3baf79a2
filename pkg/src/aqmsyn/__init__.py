"""Robust AQM controller synthesis for the delayed TCP fluid model.

The package takes a bottleneck-link description (flow count, capacity,
propagation delay, queue reference), linearizes the TCP/queue fluid
dynamics around its operating point, and synthesizes state-feedback
marking gains with certified stability: either for every delay at once,
or up to a maximized delay bound over an uncertainty polytope of
round-trip times.  Certificates are semidefinite feasibility problems
checked by recomputed eigenvalue margins, cross-examined by a
characteristic-root oracle, and validated in nonlinear delayed
simulation.
"""

__version__ = "0.1.0"

from .model import (
    Equilibrium,
    LinearModel,
    ModelError,
    NetworkParams,
    Polytope,
    build_polytope,
    equilibrium,
    linearize,
)
from .sdp import (
    LmiConstraint,
    MatrixVar,
    SdpSolution,
    SolveOptions,
    min_eig,
    solve_feasibility,
    verify_assignment,
)
from .stability import (
    OracleInconclusive,
    SpectrumReport,
    StabilityOptions,
    char_spectrum,
    critical_delay,
    is_stable,
)
from .synthesis import (
    DdCertificate,
    Gain,
    IodCertificate,
    RelaxOptions,
    RelaxationReport,
    SynthesisError,
    build_S,
    build_gamma,
    dd_analysis_step,
    dd_certify_vertices,
    dd_max_delay,
    dd_max_delay_vertices,
    dd_relaxation,
    dd_synthesis_step,
    iod_analysis,
    iod_analytic_gain,
    iod_certify_vertices,
    iod_synthesize,
    iod_synthesize_robust,
)
from .sim import (
    ConstantDrop,
    Controller,
    CrossTraffic,
    DelayStep,
    LoadStep,
    Metrics,
    PiController,
    Scenario,
    SimTrace,
    StateFeedback,
    compute_metrics,
    simulate_linear,
    simulate_nonlinear,
)

__all__ = [
    "__version__",
    "NetworkParams", "Equilibrium", "LinearModel", "Polytope", "ModelError",
    "equilibrium", "linearize", "build_polytope",
    "MatrixVar", "LmiConstraint", "SolveOptions", "SdpSolution",
    "solve_feasibility", "min_eig", "verify_assignment",
    "SpectrumReport", "StabilityOptions", "OracleInconclusive",
    "char_spectrum", "is_stable", "critical_delay",
    "Gain", "IodCertificate", "DdCertificate", "RelaxationReport",
    "RelaxOptions", "SynthesisError",
    "iod_analysis", "iod_synthesize", "iod_synthesize_robust",
    "iod_analytic_gain", "build_gamma", "build_S",
    "dd_analysis_step", "dd_synthesis_step", "dd_relaxation", "dd_max_delay",
    "iod_certify_vertices", "dd_certify_vertices", "dd_max_delay_vertices",
    "Controller", "StateFeedback", "PiController", "ConstantDrop",
    "DelayStep", "CrossTraffic", "LoadStep", "Scenario", "SimTrace", "Metrics",
    "simulate_nonlinear", "simulate_linear", "compute_metrics",
]
