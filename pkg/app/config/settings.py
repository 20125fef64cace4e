"""
Configuration for sublab.

Defaults live in defaults.json next to this module. A user config file with
the same sectioned layout is deep-merged on top, then `section.key=value`
overrides. The output directory may also come from SUBLAB_OUTPUT_DIR
(read through python-dotenv, so a local .env file works too).
"""

import json
import logging
import os
from copy import deepcopy
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from app.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).parent / "defaults.json"
OUTPUT_DIR_ENV = "SUBLAB_OUTPUT_DIR"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RunOptions(_Section):
    seed: int
    threads: PositiveInt = 1
    output_dir: str = "out"


class LoggingOptions(_Section):
    level: str = "INFO"


class StructureOptions(_Section):
    """Flag ranks, minimal controls and the certified box of the lower-bound metric."""

    max_depth: PositiveInt = 6
    rank_tol: PositiveFloat = 1e-9
    control_tol: PositiveFloat = 1e-9
    box_half_width: PositiveFloat = 1.0
    box_shrink_steps: PositiveInt = 10
    box_grid: PositiveInt = 5
    det_threshold: PositiveFloat = 1e-6


class DistanceOptions(_Section):
    """Direct control optimization for Carnot-Caratheodory distances."""

    segments: PositiveInt = 40
    restarts: int = Field(default=16, ge=0)
    penalties: Tuple[PositiveFloat, ...] = (1e2, 1e4, 1e6)
    polish_penalties: Tuple[PositiveFloat, ...] = (1e4, 1e6)
    substeps: PositiveInt = 4
    maxiter: PositiveInt = 3000
    polish_maxiter: PositiveInt = 1500
    perturbation: PositiveFloat = 0.5
    shooting_start: bool = True
    certificate_steps: PositiveInt = 1000
    endpoint_tol: PositiveFloat = 1e-8
    newton_iterations: PositiveInt = 8
    lower_bound: Literal["riemannian", "box", "none"] = "riemannian"
    seed: int = 20240611
    threads: PositiveInt = 1


class ShootingOptions(_Section):
    """Newton shooting on initial covectors of normal geodesics."""

    starts: PositiveInt = 24
    steps: PositiveInt = 200
    max_iter: PositiveInt = 40
    tol: PositiveFloat = 1e-10
    max_step: PositiveFloat = 2.0
    seed: int = 20240611


class NilpotentOptions(_Section):
    lambdas: Tuple[PositiveFloat, ...] = (1, 2, 4, 8, 16, 32)
    blowup_tol: PositiveFloat = 1e-3
    window: PositiveFloat = 1.0
    line_times: Tuple[PositiveFloat, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    line_tol: PositiveFloat = 1e-8


class WarpedOptions(_Section):
    fd_step: PositiveFloat = 1e-4
    gate_r_min: PositiveFloat = 1e-3
    gate_r_max: PositiveFloat = 1e3
    gate_points: PositiveInt = 200
    gate_margin: PositiveFloat = 1e-8
    gate_max_iter: PositiveInt = 60
    c_start: PositiveFloat = 0.5
    warping_lambdas: Tuple[PositiveFloat, ...] = (10.0, 100.0, 1000.0)
    window: Tuple[PositiveFloat, PositiveFloat] = (0.5, 2.0)


class ConeOptions(_Section):
    """Barrier path optimization on the reduced cone-Grushin model."""

    nodes: PositiveInt = 64
    epsilons: Tuple[PositiveFloat, ...] = (1e-2, 1e-3, 1e-4)
    starts: PositiveInt = 4
    maxiter: PositiveInt = 4000
    hausdorff_exponents: Tuple[int, ...] = (3, 4, 5, 6, 7, 8, 9, 10)
    seed: int = 20240611
    threads: PositiveInt = 1


class CDOptions(_Section):
    K: float = -10.0
    N: float = Field(default=10.0, gt=1.0)
    times: Tuple[float, ...] = (0.25, 0.5, 0.75)
    scales: Tuple[PositiveFloat, ...] = (1.0, 0.5, 0.25, 0.125)
    bandwidth_factor: PositiveFloat = 1.06
    bandwidth_floor: PositiveFloat = 1e-6
    tolerance: PositiveFloat = 5e-3
    budget: float = Field(default=1e-3, ge=0.0)
    halfplane_p: PositiveFloat = 4.0
    threads: PositiveInt = 1

    @property
    def violation_threshold(self) -> float:
        return self.tolerance + self.budget


class Settings(_Section):
    """Fully resolved configuration."""

    run: RunOptions
    logging: LoggingOptions = LoggingOptions()
    structure: StructureOptions = StructureOptions()
    distance: DistanceOptions = DistanceOptions()
    shooting: ShootingOptions = ShootingOptions()
    nilpotent: NilpotentOptions = NilpotentOptions()
    warped: WarpedOptions = WarpedOptions()
    cone: ConeOptions = ConeOptions()
    cd: CDOptions = CDOptions()

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)


# ============================================================================
# Loading
# ============================================================================

def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    out = deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply `section.key=value` strings; values are parsed as JSON when possible."""
    doc = deepcopy(doc)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"Override must look like section.key=value, got {item!r}")
        path, raw = item.split("=", 1)
        section, key = path.split(".", 1)
        doc.setdefault(section, {})[key] = _parse_value(raw)
    return doc


def _propagate_run_keys(doc: Dict[str, Any]) -> Dict[str, Any]:
    """Copy run.seed / run.threads into the sections that run restarts."""
    run = doc.get("run", {})
    for section in ("distance", "shooting", "cone"):
        doc.setdefault(section, {}).setdefault("seed", run.get("seed"))
    for section in ("distance", "cone", "cd"):
        doc.setdefault(section, {}).setdefault("threads", run.get("threads", 1))
    return doc


def load_settings(
    config_path: Optional[str] = None, overrides: Sequence[str] = ()
) -> Settings:
    """
    Resolve defaults, an optional config file, overrides and the env var.

    Args:
        config_path: JSON file with the sectioned layout of defaults.json
        overrides: `section.key=value` strings

    Returns:
        Validated Settings

    Raises:
        ConfigError: on unreadable files or failed validation
    """
    load_dotenv()
    with open(DEFAULTS_PATH) as f:
        doc = json.load(f)

    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path) as f:
                doc = _deep_merge(doc, json.load(f))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc

    doc = apply_overrides(doc, overrides)

    env_dir = os.getenv(OUTPUT_DIR_ENV)
    if env_dir:
        logger.info("Output directory overridden by %s=%s", OUTPUT_DIR_ENV, env_dir)
        doc["run"]["output_dir"] = env_dir

    if doc.get("run", {}).get("seed") is None:
        raise ConfigError("run.seed is mandatory")

    try:
        return Settings.model_validate(_propagate_run_keys(doc))
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc
