from .spec import LinearTTSSpec, DerivedEquilibria, build_spec, lambda_map, spec_from_dict, spectral_norm, min_real_eigenvalue
from .schedule import StepsizeSchedule, PolynomialSchedule, ExplicitSchedule, Stepsizes, stepsizes_at, schedule_from_dict
from .radii import NoiseBounds, Radii, DerivedRadii, derive_radii
