# Warped products and the cone-Grushin limit space
from .warping import (
    WarpingTriple,
    ricci_components,
    parameter_gate,
    ricci_sweep,
    asymptotic_warping_limit,
    axis_constant,
)
from .curvature import curvature_oracle, compare_ricci
from .cone_grushin import (
    ConeGrushinSpace,
    cone_grushin_distance,
    cone_dilate,
    dilation_isometry_check,
    hausdorff_dimension_estimate,
    horizontal_distribution_check,
    full_model_distance,
)
