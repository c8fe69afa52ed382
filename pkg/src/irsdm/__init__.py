"""Reflecting-surface assisted airborne directional modulation simulator.

Library plus CLI covering the full design pipeline: line-of-sight channel
synthesis over a discrete-phase reflecting panel, constructive-interference
symbol precoding at minimum power, transmitter placement, phase-shift search
(alignment, cross-entropy, coordinate descent, and hybrids), and an
evaluation suite for rates, bit-error rates, channel ranks, and spatial beam
responses.
"""

__version__ = "0.1.0"

from .channel import (
    EffectiveNoise,
    LinkBudget,
    LosChannelSet,
    PathLossSet,
    ReceiverChannel,
    aggregate_los_channel,
    effective_noise_variance,
    irs_rx_steering,
    irs_tx_steering,
    los_channels,
    noise_variance_upper_bound,
    ula_steering,
)
from .config import RunConfig, dbm_to_linear, linear_to_dbm, load_config
from .errors import ConfigError, ConvergenceError, InfeasibleError, SingularChannelError
from .evaluation import (
    BeamMap,
    BerEntry,
    DofReport,
    RateReport,
    beam_response_map,
    ber_analytic,
    ber_monte_carlo,
    dof_check,
    qpsk_ber_reference,
    rate_report,
    snr_and_rate,
)
from .geometry import (
    AngleBox,
    CartesianCoord,
    Panel,
    Scene,
    SphericalCoord,
    Ula,
    cartesian_to_spherical,
    fraunhofer_distance,
    irs_element_ranges,
    spherical_to_cartesian,
)
from .phase_opt import (
    PhaseCodebook,
    PhaseConfig,
    VtTerms,
    bcd_optimize,
    ce_optimize,
    ce_sample,
    ce_update,
    hybrid_vt,
    vt_select_multi,
    vt_select_single,
    vt_terms,
    worst_case_gain,
)
from .pipeline import METHODS, RunReport, run_pipeline, solve_joint, sweep_ber, sweep_rate, sweep_users
from .positioning import (
    PositionWeights,
    beam_gains,
    fixed_point_solve,
    j2_gradient,
    j2_hessian,
    j2_value,
    position_outer_loop,
    position_weights,
)
from .precoding import (
    CiMargin,
    ConstellationSpec,
    PrecoderState,
    ci_margin,
    ci_margins,
    min_power_weights,
    received_symbol,
    scale_to_power,
    solve_min_power,
)
from .weights import (
    PenaltyState,
    alternate_optimize,
    default_penalty,
    penalty_upper_bound,
    solve_weights_for_amplitudes,
    update_amplitude,
)
