"""Probability metrics, exchangeable models, and merging-rate experiments."""

from .errors import (
    BayesMergeError,
    ConfigError,
    InvalidInput,
    NumericalWarning,
    ResourceLimit,
    Unsupported,
)
from .spaces import EuclideanRd, FiniteLabeled, GroundSpace, RealLine
from .measures import (
    DiscreteMeasure,
    TupleClass,
    cdf,
    deserialize,
    dirac,
    empirical,
    marginal,
    mean_of,
    product_power,
    pushforward,
    serialize,
)
from .determining import DeterminingClass, Level2Class
from .metrics import (
    dW,
    dW_product,
    fortet_mourier,
    ot_cost,
    prokhorov,
    prokhorov_bruteforce,
    w1_real,
)
from .level2 import (
    MeasureOnMeasures,
    expected_distance_to_dirac,
    level2_dist,
    prokhorov_to_dirac,
    quotient_dist,
)
from .models import (
    BaseLaw,
    DPModel,
    FiniteDirichletModel,
    PosteriorState,
    bayes_estimator,
    initial_state,
    posterior_sample,
    posterior_update,
    posterior_update_batch,
    predictive_m,
    predictive_one,
    sample_sequence,
)
from .rates import (
    BoundReport,
    PartitionScheme,
    RateSchedule,
    gini_bound,
    moment_bound,
    pi_r,
    rate_value,
    y_estimator,
)
from .harness import (
    ExperimentConfig,
    Trajectory,
    emit_outputs,
    evaluate_acceptance,
    finitary_statistic,
    run_empirical_bayes,
    run_experiment,
    run_posterior_rate,
    run_predictive_rate,
)

__version__ = "0.1.0"
