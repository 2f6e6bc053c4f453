from .solutions import OdeSolution, theta_ode_at, z_ode_at, theta_solution, z_solution
from .interpolate import InterpolatedTrajectory
from .decomposition import (
    ErrorDecomposition,
    SupDistances,
    DECOMPOSITION_COLUMNS,
    interval_propagators,
    decompose,
    sup_distances,
    good_event,
)
from .diagnostics import dominating_decay_integral, increment_norms, perturbation_ceilings
