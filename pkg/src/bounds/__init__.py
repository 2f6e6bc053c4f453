from .ledger import ConstantLedger, LedgerEntry, ENTRIES, ENTRY_NAMES, build_ledger
from .series import (
    SeriesAccumulators,
    SubexpConstants,
    accumulators,
    accumulator_ceiling,
    kg_constants,
    power_sum,
    pre_delta_bound,
    subexp_constants,
    subexp_series_bound,
)
from .thresholds import (
    ThresholdTerms,
    check_epsilons,
    closed_form_thresholds,
    threshold_n0,
    threshold_n1,
    threshold_terms,
)
from .probability import (
    LockInBound,
    N0Prime,
    ProjectedBound,
    check_radius_assumptions,
    epsilon_for_horizon,
    lockin_bound,
    n0_double_prime,
    next_power_of_two,
    projected_bound,
    projected_epsilon_limit,
    projected_n0_prime,
    projected_subexp,
    radius_assumptions,
    rate_curve,
    rate_exponent,
)
