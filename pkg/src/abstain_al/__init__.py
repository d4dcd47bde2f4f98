"""Bayesian pool-based active learning with abstention feedback.

The labeler may refuse to label a queried example; refusals consume budget
and are persistent. Policies can fold an estimated abstention rate into
their selection criterion, the exact small-instance oracle certifies their
(1 - 1/e) near-optimality against an exhaustive optimum, and the harness
runs seeded experiment grids scored by the area under the accuracy curve.
"""

from .core import (
    ABSTAIN,
    AbstainALError,
    Belief,
    BudgetExceedsPoolError,
    Dataset,
    EmptyCandidatesError,
    Example,
    LabelSpace,
    QueryRecord,
    RunTrace,
    evaluate_accuracy,
    run_active_learning,
)
from .criteria import Policy, make_policy, score_avg, score_gibbs, score_worst, select
from .finite_bayes import (
    FiniteBelief,
    ProbHypothesis,
    RateFunction,
    ZeroPosteriorMassError,
    uniform_belief,
)
from .harness import (
    ConfigError,
    DatasetFormatError,
    ExperimentConfig,
    auac,
    load_dataset,
    run_config_file,
    run_grid,
    save_dataset,
    synth_dataset,
)
from .map_models import (
    BadInputError,
    FixedRate,
    LinearModel,
    PluginBelief,
    fit_map,
    fixed_rate_estimator,
    predict_proba,
    sigmoid,
)
from .oracle import (
    GREEDY_FACTOR,
    CertificationResult,
    InstanceTooLargeError,
    certify_bounds,
    certify_instance,
    eval_policy_avg,
    eval_policy_worst,
    expected_one_step_gain,
    greedy_policy_tree,
    induce,
    induce_qf,
    induce_qk,
    load_instance,
    optimal_policy,
    parse_instance,
    random_finite_belief,
    utility_g,
    worst_case_one_step_gain,
)
from .sim import (
    Scenario,
    SimulatedLabeler,
    make_easy_abstain,
    make_hard_abstain,
    make_stochastic,
    make_unrelated,
    swap_in_redundant,
)

__version__ = "0.1.0"
