"""LTE-U / Wi-Fi coexistence performance toolkit.

Analytic chain (contention fixed point, CSI-feedback delay distributions,
delayed-CSI conditional rates, network throughput, users' energy efficiency,
coexistence-aware parameter optimization) with a slot-level Monte Carlo
simulator as the validation oracle.
"""

from .config import NetworkConfig, load_config, reference_defaults
from .contention import (
    ContentionPmf,
    DelayModel,
    build_delay_model,
    collision_prob_first,
    contention_pmf,
    feedback_delay_pmf,
    mean_contention,
    mean_reservation,
    mean_tx_duration,
    pretx_pmf,
)
from .energy import EEBreakdown, PowerProfile, energy_efficiency, feedback_energy
from .mac import (
    FixedPointSolution,
    MacParams,
    min_cw,
    solve_fixed_point,
    wifi_occupancy_ratio,
)
from .optimize import (
    OptimizerConfig,
    OptResult,
    best_m_search,
    exhaustive_lambda,
    optimize_bm,
    optimize_th,
    solve_z,
    threshold_search,
)
from .ratechan import (
    FadingParams,
    RateTable,
    correlation_coeff,
    db_to_linear,
    doppler_from_speed,
    feedback_prob,
    joint_gain_pdf,
    linear_to_db,
    rate_thresholds,
    threshold_for_feedback_prob,
)
from .simulator import SimResult, run_sim, sample_correlated_pair
from .throughput import (
    BestMFeedback,
    CondRateResult,
    SchedulerKind,
    ThresholdFeedback,
    cond_rate_mc,
    cond_rate_random_bm_iid,
    cond_rate_random_bm_niid,
    cond_rate_random_th_iid,
    cond_rate_random_th_niid,
    network_throughput,
    normalized_decrease,
)

__version__ = "0.1.0"
