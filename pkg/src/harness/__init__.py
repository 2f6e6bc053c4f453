from .config import (
    ExperimentConfig,
    NoiseRecipe,
    check_initialization,
    experiment_ledger,
    load_experiment,
    parse_experiment,
)
from .pool import run_trials, trial_seeds
from .trials import TrialRecord, TrialTask, run_trial
from .lockin import LockInResult, locked_in, run_lock_in, wilson_interval
from .rate import RateFit, fit_log_log, median_spread, run_rate_fit
from .report import emit_report, git_describe, jsonable
