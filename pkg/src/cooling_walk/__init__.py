"""Random walks in (cooling) random environments: simulation, exact quenched
oracles, and numerical verification of the limit laws."""

from .alpha import (
    AlphaLaw,
    MomentReport,
    Regime,
    classify,
    moment_report,
    recurrent_two_point,
    rho_moment,
    s_transient_two_point,
    solve_eta_recurrent,
    solve_eta_s_transient,
    speed,
    transience_index,
)
from .cooling import (
    CoolingMap,
    DoubleExp,
    Explicit,
    Exponential,
    FasterDoubleExp,
    Polynomial,
    RepeatedBlocks,
    build_recurrence_breaker,
    divergence_report,
    single_interval,
)
from .environment import (
    EnvironmentWindow,
    PotentialPath,
    Valley,
    WindowExhausted,
    potential,
    sigma_series_annealed,
    sigma_series_quenched,
    smallest_valley,
    smallest_valley_auto,
)
from .kesten import MixtureLaw, MixtureWeights, lambda_q, mixtures_equal_in_law, q_from_c
from .stats import EmpiricalSample, derive_seed, ks_distance, moments_with_se
from .walk import (
    QuenchedDistribution,
    TrajectoryBatch,
    annealed_mean,
    exact_quenched_distribution,
    expected_hit_time_reflected,
    hit_prob,
    leftmost_record_tail,
    sample_annealed_rwre,
    simulate_rwcre,
    simulate_rwre,
)

__version__ = "0.1.0"
