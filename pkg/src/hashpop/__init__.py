"""Master-equation model for the popularity of hashtags.

The read count X(t) of a hashtag grows by the follower count of every user
who shoots (sends or resends) a message carrying it. With a per-user shoot
rate w(t) and follower law f, X(t) is a compound Poisson process whose mean
and variance are <f> Lambda(t) and <f^2> Lambda(t), Lambda(t) = N int_0^t w.
"""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DivergentMomentError,
    DomainError,
    EmptyInputError,
    HashpopError,
    NoSignalError,
    NumericError,
    RankDeficiencyError,
    SchemaError,
    TruncationError,
    UndefinedStatisticError,
    UnsupportedVariantError,
)
from .model import (
    Constant,
    Degenerate,
    Discrete,
    EmpiricalSample,
    GammaKernel,
    LogNormalDiscretized,
    NetworkParams,
    ParetoDiscrete,
    Tabulated,
    TimeSeries,
    TweetRecord,
    degree_moments,
    evaluate_popularity,
    popularity_landmarks,
    sample_degree,
)
from .special import lower_incomplete_gamma, log_gamma, stirling_gamma
from .moments import (
    MomentCurves,
    asymptotic_moments,
    confidence_band,
    cumulative_intensity,
    mean_reads,
    mgf_value,
    variance_reads,
)
from .simulator import (
    DistributionGrid,
    EventTrace,
    ensemble_statistics,
    evolve_master_equation,
    simulate_events,
    simulate_micro,
)
from .fitting import (
    FitResult,
    empirical_popularity,
    goodness_of_fit,
    initial_guess,
    lm_fit_gamma,
    moving_average,
)
from .pipeline import (
    Dataset,
    ValidationReport,
    compute_network_params,
    empirical_reads,
    load_dataset,
    synthesize_dataset,
    validate,
    write_dataset,
)
