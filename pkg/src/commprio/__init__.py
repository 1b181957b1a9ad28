"""Rank detected network communities by structural quality and robustness.

The library scores every community of a cover with four perturbation-aware
structural metrics (likelihood, density, boundary, allegiance) computed from
an edge-probability model, then combines the resulting ranked lists through
an iterative Bayes-factor rank aggregation into a single prioritization.
A planted-community benchmark harness validates rankings against gold
standards built by Jaccard matching.
"""

from .errors import (
    BenchmarkError,
    CommprioError,
    ComputationError,
    DegenerateCommunityError,
    EmptyCoverError,
    EmptyInputError,
    InputMismatchError,
    InvalidPairError,
    InvalidParameterError,
    ParseError,
    SizeLimitError,
    TooFewCommunitiesError,
    UndefinedCorrelationError,
    ValidationError,
)
from .graph import (
    Cover,
    Graph,
    LoadReport,
    cut_counts,
    format_cover,
    load_edge_list,
    pair_background_rate,
    parse_cover,
    read_cover,
    read_edge_list,
)
from .models import (
    AffiliationModel,
    EdgeProbabilityModel,
    EmpiricalCoverModel,
    empirical_model,
    extract_cover,
    fit_affiliation,
    format_affiliation,
    joint_pair_terms,
    parse_affiliation,
    perturbed_community_edge_prob,
    perturbed_edge_prob,
    read_affiliation,
)
from .metrics import (
    CORE_METRICS,
    BASELINE_KINDS,
    CommunityRef,
    MetricTable,
    adjust_metric,
    allegiance_feature,
    baseline_score,
    boundary_feature,
    compute_metric_table,
    density_feature,
    format_metric_table,
    likelihood_feature,
)
from .ranking import (
    AggregationParams,
    BASELINE_AGGREGATORS,
    Prioritization,
    baseline_aggregate,
    bayes_aggregate,
    bayes_weight,
    format_prioritization,
    partition_bags,
    to_ranked_list,
    tukey_smooth,
    weighted_aggregate,
)
from .benchmark import (
    BenchmarkConfig,
    BenchmarkReport,
    GoldStandardRanking,
    SbmSpec,
    figure2_config,
    flip_cover,
    generate_sbm,
    gold_standard_ranking,
    jaccard,
    run_benchmark,
    spearman,
)

__version__ = "0.1.0"
