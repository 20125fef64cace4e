# Sub-Riemannian structures, distances and tangent cones
from .structure import (
    SubRiemannianStructure,
    flag_at,
    minimal_control,
    curve_length,
    riemannian_lower_bound_metric,
)
from .library import load_structure, available_structures
from .curves import ControlCurve
from .geodesy import (
    DistanceEstimate,
    integrate_control,
    normal_geodesic,
    cc_distance,
    geodesic_between,
    shoot,
    shoot_many,
)
from .nilpotent import (
    nilpotent_approximation,
    rescaled_distance,
    blow_up_normal,
    blow_up_convergence,
)
from .carnot import horizontal_lift, pushforward_check, dilation_commute_check
