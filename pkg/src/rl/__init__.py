from .mrp import MDPSpec, build_mrp, random_mrp, stationary_distribution, mrp_to_dict, mrp_from_dict
from .gtd import (
    GTDMatrices,
    GTDVariant,
    SampleStep,
    SamplingNoise,
    Transition,
    closed_form_x1,
    exact_matrices,
    gtd_spec,
    mspbe,
    neu,
    noise_bounds,
    sample_step,
    sample_transition,
    sampled_directions,
    td_error,
)
