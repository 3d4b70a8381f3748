"""Mean curvature flow with a perpendicular Neumann condition inside tori of revolution."""
from .geometry import (
    DomainGrid,
    ProfileCurve,
    build_grid,
    make_circle_profile,
    make_interval_profile,
    make_star_profile,
    profile_normal,
    sigma_rotational_eigenvalue,
)
from .flow import (
    FlowAbort,
    GraphState,
    StepperConfig,
    apply_neumann,
    cfl_dt,
    flow_rhs,
    gradient,
    inverse_metric,
    mean_curvature,
    normal_vector,
    run_flow,
    step,
    vtilde,
)

from . import kernels

__version__ = "0.1.0"
