"""
Error types for sublab.

Every module raises subclasses of SublabError. Each class carries the
process exit code the CLI reports for it:

    2  configuration / argument errors
    3  numerical non-convergence or undecided checks
    4  internal invariant breaches
"""

from typing import Optional


class SublabError(Exception):
    """Base class for all library errors."""

    exit_code: int = 4


# ============================================================================
# Configuration and argument errors (exit 2)
# ============================================================================

class ConfigError(SublabError):
    """Config file, CLI option or structure file could not be used."""

    exit_code = 2


class ArgumentError(SublabError):
    """A numeric argument is outside its domain (e.g. a non-positive scale)."""

    exit_code = 2


class DimensionError(SublabError):
    """Vector fields, points or covectors of incompatible dimensions."""

    exit_code = 2


class NotPrivilegedError(SublabError):
    """A field has terms of weighted degree below -1 for the given weights."""

    exit_code = 2


class BadCenteringError(SublabError):
    """A remainder field does not vanish at the origin."""

    exit_code = 2


class LiftBaseError(SublabError):
    """Initial group element does not project onto the curve's start point."""

    exit_code = 2


class PlanError(SublabError):
    """Transport problem is infeasible (e.g. total masses differ)."""

    exit_code = 2


class DensityError(SublabError):
    """Nonpositive or non-finite density values."""

    exit_code = 2


# ============================================================================
# Numerical errors (exit 3)
# ============================================================================

class NotHorizontal(SublabError):
    """A vector is not in the span of the generators at its base point."""

    exit_code = 3

    def __init__(self, message: str, time: Optional[float] = None):
        if time is not None:
            message = f"{message} (at t={time:.6g})"
        super().__init__(message)
        self.time = time


class HormanderUndecided(SublabError):
    """Bracket generation not verified up to the requested depth."""

    exit_code = 3

    def __init__(self, depth: int, growth=None):
        super().__init__(
            f"Hormander condition not verified up to depth {depth} (growth {growth})"
        )
        self.depth = depth
        self.growth = growth


class FrameExtensionFailed(SublabError):
    exit_code = 3


class DomainEscape(SublabError):
    """A trajectory left its coordinate box or became non-finite."""

    exit_code = 3


class WindowError(SublabError):
    exit_code = 3


class OracleConditioning(SublabError):
    """Metric too close to singular for finite-difference curvature."""

    exit_code = 3


class EstimateFailed(SublabError):
    exit_code = 3


# ============================================================================
# Invariant breaches (exit 4)
# ============================================================================

class GateFailed(SublabError):
    """No warping constant passed the positivity sweep."""

    exit_code = 4


class InvariantBreach(SublabError):
    exit_code = 4
