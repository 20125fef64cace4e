# Exact polynomial vector fields
from .symfield import (
    PolyVectorField,
    WeightVector,
    lie_bracket,
    evaluate,
    weighted_split,
    dilation_pushforward,
    dilation_exponents,
    bracket_levels,
)
from .compiled import CompiledFrame
