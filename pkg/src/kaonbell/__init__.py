"""Bell tests with entangled neutral-kaon pairs.

Core layers:

* :mod:`kaonbell.quasispin`: amplitude algebra and basis changes.
* :mod:`kaonbell.dynamics`: regenerator plus free-flight preparation chain.
* :mod:`kaonbell.measurement`: Clauser-Horne probabilities and optimization.
* :mod:`kaonbell.detector`: identification statistics and feasibility.
* :mod:`kaonbell.montecarlo`: reproducible pseudo-experiments.
* :mod:`kaonbell.service` / :mod:`kaonbell.cli`: HTTP service and thin CLI.
"""

__version__ = "0.1.0"

from .detector import (
    DetectorModel,
    ResponseMatrix,
    check_spacelike,
    lifetime_response,
    sample_economics,
    strangeness_response,
)
from .dynamics import (
    MaterialParams,
    PreparationConfig,
    RegenSpec,
    RegimeWarning,
    apply_thin_regenerator,
    closed_form_bell_state,
    effective_R,
    phi_initial,
    prepare_bell_state,
    propagate_free,
    regeneration_parameter,
)
from .errors import (
    ConfigError,
    DegenerateState,
    InsufficientEvents,
    InvalidSpec,
    KaonBellError,
    StateNotNormalized,
)
from .measurement import (
    CHReport,
    Outcome,
    Setting,
    ch_statistic,
    joint_probability,
    marginal_probability,
    optimize_R,
    qm_ratio,
    violation_condition,
)
from .montecarlo import (
    CountTable,
    RunPlan,
    estimate_reports,
    expected_reports,
    run_experiment,
    sample_event,
)
from .quasispin import (
    PairState,
    PhysicalConstants,
    SingleKaonState,
    basis_to_lifetime,
    basis_to_strangeness,
    inner_product,
    normalize,
    tensor,
)

__all__ = [
    "__version__",
    "CHReport",
    "ConfigError",
    "CountTable",
    "DegenerateState",
    "DetectorModel",
    "InsufficientEvents",
    "InvalidSpec",
    "KaonBellError",
    "MaterialParams",
    "Outcome",
    "PairState",
    "PhysicalConstants",
    "PreparationConfig",
    "RegenSpec",
    "RegimeWarning",
    "ResponseMatrix",
    "RunPlan",
    "Setting",
    "SingleKaonState",
    "StateNotNormalized",
    "apply_thin_regenerator",
    "basis_to_lifetime",
    "basis_to_strangeness",
    "ch_statistic",
    "check_spacelike",
    "closed_form_bell_state",
    "effective_R",
    "estimate_reports",
    "expected_reports",
    "inner_product",
    "joint_probability",
    "lifetime_response",
    "marginal_probability",
    "normalize",
    "optimize_R",
    "phi_initial",
    "prepare_bell_state",
    "propagate_free",
    "qm_ratio",
    "regeneration_parameter",
    "run_experiment",
    "sample_economics",
    "sample_event",
    "strangeness_response",
    "tensor",
    "violation_condition",
]
