"""Monte Carlo simulator for heavy-tailed branching random walks in i.i.d.
random environment, with samplers for the limiting extremal objects and a
statistics layer that compares the two at desk scale."""

from .brw import (
    BrwOutcome,
    SimConfig,
    diagnostics_report,
    extremal_process,
    replication_rng,
    run_replications,
    simulate,
    simulate_naive,
)
from .displacement import (
    DisplacementModel,
    Pattern,
    norming_constant,
    pattern_mass,
    sample_brood,
)
from .environment import (
    AssumptionReport,
    EnvironmentModel,
    EnvSequence,
    check_assumptions,
    sample_env,
)
from .errors import (
    ArgumentOrder,
    BrwreError,
    ConfigError,
    NonGeometricGrowth,
    PopulationCapExceeded,
    RejectionCapExceeded,
    SupportBelowRetention,
    UnboundedProgenyInGeneralMode,
)
from .limit_laws import (
    ClusterSampler,
    EnvStream,
    LimitConfig,
    QSample,
    SeriesValue,
    cluster_norm_series,
    joint_min_max_cdf,
    limit_max_cdf,
    sample_cluster_R,
    sample_cluster_VR,
    sample_limit_point_process,
    sample_martingale_limit,
    sample_q,
    top_two_cdf,
    top_two_cdf_multiplicity_adjusted,
)
from .measures import PointMeasure
from .offspring import (
    Binomial,
    Deterministic,
    Finite,
    Geometric,
    OffspringLaw,
    Poisson,
    TruncatedPMF,
    extinct_prob_by_gen,
    generation_size_pmf,
    sample,
)
from .stats import Ecdf, TestFunction, count_distribution_tv, ks_distance, laplace_estimate

__version__ = "0.1.0"
