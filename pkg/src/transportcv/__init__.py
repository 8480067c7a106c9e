"""Coupling-based control variates for transport-coefficient estimation in
overdamped Langevin dynamics: standard NEMD, synchronous coupling, and
discrete-time sticky coupling, with a desk-scale experiment harness."""

from .coupling import (
    CoupledState,
    CouplingNoise,
    StickyStepReport,
    bounding_chain_step,
    hybrid_step,
    mean_gap,
    meeting_probability,
    meeting_probability_1d,
    reflect,
    sticky_step,
    sync_step,
)
from .dynamics import (
    Forcing,
    ModelConstants,
    ModelSpec,
    Observable,
    SimParams,
    check_drift_control,
    cluster_tilt,
    contraction_envelope,
    coordinate_covariance,
    em_step,
    grad_check,
    linear_shear,
    lj_shear,
    make_cosine_well,
    make_forcing,
    make_harmonic,
    make_lj_cluster,
    make_model,
    make_observable,
    max_time_step,
    shear_mobility,
    sinusoidal_shear,
    zero_forcing,
)
from .errors import BlowUpError, ConfigError, ParameterError, TransportCVError, UnsupportedModelError
from .estimators import (
    ExperimentResult,
    ReplicaRecord,
    batch_means_variance,
    burn_in_init,
    eta_sweep,
    linear_response_fit,
    run_coupled,
    run_standard,
)
from .oracles import OUStationary, em_kernel_means, gaussian_tv_isotropic, ou_stationary

__version__ = "0.1.0"
