"""FIR identification, robust system-level synthesis, and suboptimality analysis.

The pipeline: estimate an FIR plant from noisy experiments with a
high-probability l2 error radius, synthesize an H-infinity output-feedback
controller that is robust to that radius, evaluate it on the true plant, and
check the a-priori suboptimality bounds by Monte Carlo.
"""

from .fir import (
    FirMimo,
    FirSiso,
    FrequencyGrid,
    fir_multiply,
    hinf_norm_grid,
    hinf_norm_sdp,
    toeplitz,
    winding_stability,
)
from .plant import (
    GeneralizedPlant,
    PlantKind,
    build_disturbance_rejection,
    build_reference_tracking,
    fir_realization,
)
from .sysid import (
    IdentConfig,
    IdentificationResult,
    covariance_S,
    design_inputs,
    effective_variance,
    error_bound_analytic,
    error_bound_simulated,
    identify,
    least_squares_estimate,
    simulate_experiment,
)
from .synthesis import (
    RobustSynthesisResult,
    SearchParams,
    SystemResponse,
    controller_frequency_response,
    nominal_synthesis,
    robust_fixed_alpha,
    robust_synthesis,
)
from .analysis import (
    BoundReport,
    RobustPerturbation,
    SampledResponse,
    certify_stabilization,
    closed_loop_cost,
    feasibility_certificate,
    general_robust_transform,
    proposition_bound,
    sherman_morrison_response,
    simulate_closed_loop,
    theorem_bound,
    undermodeled_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
