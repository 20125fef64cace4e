"""
Report models for CLI artifacts.

Every JSON file the CLI writes is one of these models; `schemas` exports
their JSON Schemas.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type

import pandas as pd
from pydantic import BaseModel, ConfigDict

SIGNIFICANT_DIGITS = 12


class Report(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Manifest(Report):
    command: str
    argv: List[str]
    config: Dict[str, Any]
    versions: Dict[str, str]
    started: str
    wall_time: float
    artifacts: List[str]


class ErrorReport(Report):
    error: str
    message: str
    exit_code: int


class FlagReport(Report):
    structure: str
    point: List[float]
    growth: List[int]
    weights: List[int]
    step: int


class DistanceReport(Report):
    structure: str
    p: List[float]
    q: List[float]
    upper: float
    lower: float
    gap: float
    converged: bool
    endpoint_error: float


class GeodesicReport(Report):
    structure: str
    p: List[float]
    q: List[float]
    length: float
    samples: int
    converged: bool


class NilpotentReport(Report):
    structure: str
    point: List[float]
    weights: List[int]
    approximation: str
    fields: List[str]
    unchanged: bool


class BlowupReport(Report):
    structure: str
    direction: List[float]
    lambdas: List[float]
    deviations: List[float]
    mode: str
    tolerance: float
    converged: bool
    line_identity: bool


class LiftReport(Report):
    control: List[float]
    duration: float
    base_length: float
    lift_length: float
    length_error: float
    pushforward_deviation: float
    convention: str
    commute_error: float
    passed: bool


class RicciReport(Report):
    m: int
    k: int
    alpha: float
    c: float
    minima: Dict[str, float]
    oracle_radius: float
    oracle_relative_errors: Dict[str, float]


class GateReport(Report):
    k: int
    alpha: float
    m: int
    c: float
    iterations: int
    minima: Dict[str, float]
    grid: Tuple[float, float, int]
    positive: bool


class ConeDistanceRow(Report):
    p: List[float]
    q: List[float]
    upper: float
    extrapolated: float
    lengths: List[float]
    min_radii: List[float]
    verdict: str
    converged: bool


class ConeDistanceReport(Report):
    k: int
    alpha: float
    c: float
    axis_constant: float
    results: List[ConeDistanceRow]


class DilationCheckReport(Report):
    k: int
    alpha: float
    c: float
    lambdas: List[float]
    pairs: int
    max_error: float
    tolerance: float
    passed: bool


class HausdorffReport(Report):
    k: int
    alpha: float
    slope: float
    expected: float
    relative_error: float
    axis_constant: float


class CDRowModel(Report):
    t: float
    entropy: float
    rhs: float
    margin: float


class CDCheckReport(Report):
    label: str
    backend: str
    config: Dict[str, Any]
    per_t: List[CDRowModel]
    min_margin: float
    verdict: str
    note: str


class CDSuiteReport(Report):
    suite: str
    reports: List[CDCheckReport]
    witness: Optional[str] = None
    verdict: Optional[str] = None
    note: Optional[str] = None


class LibraryReport(Report):
    structures: List[str]


REPORT_MODELS: Tuple[Type[Report], ...] = (
    Manifest,
    ErrorReport,
    FlagReport,
    DistanceReport,
    GeodesicReport,
    NilpotentReport,
    BlowupReport,
    LiftReport,
    RicciReport,
    GateReport,
    ConeDistanceReport,
    DilationCheckReport,
    HausdorffReport,
    CDCheckReport,
    CDSuiteReport,
    LibraryReport,
)


# ============================================================================
# Writers
# ============================================================================

def round_floats(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    if isinstance(value, float):
        if not math.isfinite(value) or value == 0.0:
            return value
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return type(value)(round_floats(v, digits) for v in value)
    return value


def write_report(report: Report, path: Path) -> Path:
    rounded = type(report).model_validate(round_floats(report.model_dump()))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rounded.model_dump_json(indent=2) + "\n")
    return path


def write_table(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def write_schemas(directory: Path) -> List[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for model in REPORT_MODELS:
        path = directory / f"{model.__name__}.schema.json"
        path.write_text(json.dumps(model.model_json_schema(), indent=2, sort_keys=True) + "\n")
        paths.append(path)
    return paths
