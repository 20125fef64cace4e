"""
Shipped structures and the structure file format.

File layout (comments start with '#', blank lines are ignored):

    label grushin
    dim 2
    generators 2
    1               <- X1, one component per line
    0
    0               <- X2
    1 * x1^1

Names resolvable by load_structure: grushin, perturbed_grushin, heisenberg,
martinet (shipped files), euclidean(n) and cone_grushin(k) (built in code),
or any path to a .sfield file.
"""

import logging
import re
from pathlib import Path
from typing import List, Union

import numpy as np

from app.algebra import poly as P
from app.algebra.symfield import PolyVectorField
from app.errors import ConfigError, DimensionError
from app.geometry.structure import SubRiemannianStructure

logger = logging.getLogger(__name__)

STRUCTURE_DIR = Path(__file__).resolve().parent.parent / "structures"
SHIPPED = ("grushin", "perturbed_grushin", "heisenberg", "martinet")

_EUCLIDEAN = re.compile(r"^euclidean(?:\((\d+)\))?$")
_CONE = re.compile(r"^cone_grushin(?:\((\d+)\))?$")


def parse_structure(text: str, source: str = "<string>") -> SubRiemannianStructure:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    header = {}
    while lines and lines[0].split()[0] in ("label", "dim", "generators"):
        key, _, value = lines.pop(0).partition(" ")
        header[key] = value.strip()
    try:
        dim = int(header["dim"])
        m = int(header["generators"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{source}: missing or bad 'dim'/'generators' header") from exc
    if len(lines) != dim * m:
        raise ConfigError(f"{source}: expected {dim * m} component lines, found {len(lines)}")
    try:
        fields = [
            PolyVectorField.from_text(lines[i * dim:(i + 1) * dim], dim) for i in range(m)
        ]
    except (ValueError, DimensionError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return SubRiemannianStructure(dim, tuple(fields), header.get("label", Path(source).stem))


def format_structure(S: SubRiemannianStructure) -> str:
    out = [f"label {S.label}", f"dim {S.dim}", f"generators {S.m}"]
    for i, X in enumerate(S.generators):
        out.append(f"# X{i + 1}")
        out.extend(X.to_text())
    return "\n".join(out) + "\n"


def save_structure(S: SubRiemannianStructure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(format_structure(S))
    return path


# ============================================================================
# Built-in families
# ============================================================================

def euclidean(n: int = 2) -> SubRiemannianStructure:
    fields = [PolyVectorField.coordinate(n, j) for j in range(n)]
    return SubRiemannianStructure(n, tuple(fields), f"euclidean({n})")


def cone_grushin_frame(k: int = 2) -> SubRiemannianStructure:
    """
    Horizontal frame of the cone-Grushin space on R^{k+2}:
    d/dx_1 .. d/dx_{k+1} and r^2 d/dy with r^2 = x_1^2 + .. + x_{k+1}^2.
    """
    n = k + 2
    fields = [PolyVectorField.coordinate(n, j) for j in range(k + 1)]
    r2 = P.sum_polys(P.mul(P.var(n, j), P.var(n, j)) for j in range(k + 1))
    polys: List[P.Poly] = [{} for _ in range(n)]
    polys[-1] = r2
    fields.append(PolyVectorField.from_polys(n, polys))
    return SubRiemannianStructure(n, tuple(fields), f"cone_grushin({k})")


def load_structure(name: str) -> SubRiemannianStructure:
    """Resolve a shipped name, a built-in family or a file path."""
    name = name.strip()
    match = _EUCLIDEAN.match(name)
    if match:
        return euclidean(int(match.group(1) or 2))
    match = _CONE.match(name)
    if match:
        return cone_grushin_frame(int(match.group(1) or 2))
    path = STRUCTURE_DIR / f"{name}.sfield" if name in SHIPPED else Path(name)
    if not path.exists():
        raise ConfigError(f"Structure not found: {name}")
    logger.debug("Loading structure from %s", path)
    return parse_structure(path.read_text(), str(path))


def available_structures() -> List[str]:
    return list(SHIPPED) + ["euclidean(n)", "cone_grushin(k)"]


def grushin() -> SubRiemannianStructure:
    return load_structure("grushin")


def perturbed_grushin() -> SubRiemannianStructure:
    return load_structure("perturbed_grushin")


def heisenberg() -> SubRiemannianStructure:
    return load_structure("heisenberg")


def martinet() -> SubRiemannianStructure:
    return load_structure("martinet")


def martinet_abnormal_control(segments: int = 1) -> np.ndarray:
    """Constant control (0, 1) whose trajectory from 0 is t -> (0, t, 0)."""
    return np.tile([0.0, 1.0], (segments, 1))
