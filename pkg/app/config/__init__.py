# Configuration models and loader
from .settings import (
    Settings,
    StructureOptions,
    DistanceOptions,
    ShootingOptions,
    NilpotentOptions,
    WarpedOptions,
    ConeOptions,
    CDOptions,
    load_settings,
)
