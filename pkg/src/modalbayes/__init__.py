"""Probabilistic structural model updating from incomplete modal data.

The toolkit identifies per-segment stiffness variation coefficients of a
small structural model from a handful of measured natural frequencies and
sensor-sampled mode shapes, using a uniform-prior Bayesian posterior
explored by multiple parallel, interactive and adaptive Metropolis-
Hastings chains.  Survived chains are summarized as sparse joint
histograms whose peak bins are the reported estimates.
"""

from .analysis import (
    JointHistogram,
    SolutionReport,
    best_bin,
    build_joint_histogram,
    format_report_table,
    marginal,
    project,
    report,
)
from .errors import (
    DegenerateShape,
    EigenFailure,
    EmptyHistogram,
    EmptyScreen,
    EvaluationFailure,
    InvalidMeasurement,
    InvalidModel,
    InvalidSensor,
    ModalBayesError,
    OutOfBox,
    SingularMass,
)
from .fe_core import (
    ModalMeasurement,
    ModalResult,
    SensorSelection,
    StructuralModel,
    assemble_stiffness,
    build_boundary_spring_frame,
    build_segmented_cantilever,
    build_spring_chain,
    extract_at_sensors,
    model_from_dict,
    simulate_measurement,
    solve_modes,
)
from .objective import (
    NoiseModel,
    ObjectiveSpec,
    freq_error,
    likelihood_freq_mac,
    likelihood_pointwise,
    mac,
    pair_modes,
    posterior,
    shape_delta,
)
from .orchestrator import (
    CampaignConfig,
    CampaignResult,
    SurvivedChain,
    burnin_trim,
    constrained_kmeans,
    latin_hypercube,
    merge_check,
    prescreen,
    run_campaign,
)
from .sampler import (
    ACTIVE,
    SUSPENDED,
    TERMINATED,
    AdaptationPolicy,
    ChainState,
    adapt_width,
    apply_step,
    mh_step,
    propose,
)

__version__ = "0.1.0"
