from .noise import NoNoise, UniformSphereNoise, unit_sphere
from .simulate import (
    IterateState,
    Trajectory,
    initial_state,
    is_power_of_two,
    sparse_project,
    step_unprojected,
    step_projected,
    z_update_direct,
    run_trajectory,
)
from .export import trajectory_csv, TRAJECTORY_COLUMNS
