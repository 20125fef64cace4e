"""
Command-line experiment runner.

Usage:
    python -m app.cli flag --structure grushin --point 0,0
    python -m app.cli gate --k 2 --alpha 1
    python -m app.cli hausdorff --k 2 --alpha 3 --out results/

Every command writes its CSV/JSON artifacts and manifest.json into the
output directory. Exit codes: 0 success, 2 configuration error, 3 numerical
non-convergence, 4 internal invariant breach.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.cdlab.backends import DistanceBackend, EuclideanBackend, ShootingBackend
from app.cdlab.check import CDReport, cd_inequality_check, euclidean_suite, halfplane_suite, scan_grushin_violation
from app.cdlab.measures import lebesgue_density, read_measure
from app.cli import reports as R
from app.config.settings import Settings, load_settings
from app.errors import ConfigError, SublabError
from app.geometry.carnot import dilation_commute_check, lift_line, pushforward_check, random_elements
from app.geometry.geodesy import cc_distance, geodesic_between, normal_geodesic
from app.geometry.library import available_structures, format_structure, load_structure
from app.geometry.nilpotent import (
    blow_up_convergence,
    blow_up_normal,
    dilation_line_identity_check,
    nilpotent_approximation,
    rescaled_distance_table,
)
from app.geometry.structure import flag_at, minimal_control
from app.warped.cone_grushin import (
    ConeGrushinSpace,
    cone_grushin_distance,
    dilation_isometry_check,
    hausdorff_dimension_estimate,
    random_pairs,
)
from app.warped.curvature import compare_ricci
from app.warped.warping import WarpingTriple, minimal_sphere_dimension, parameter_gate, ricci_sweep

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
PACKAGES = ("numpy", "scipy", "sympy", "pandas", "scikit-learn", "joblib", "pydantic", "python-dotenv", "POT")


@dataclass
class Outcome:
    """What a command produced; `converged` False maps to exit 3."""

    artifacts: List[Path] = field(default_factory=list)
    converged: bool = True


def parse_point(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"Cannot parse point {text!r}; expected comma-separated numbers") from exc


def _versions() -> Dict[str, str]:
    out = {}
    for name in PACKAGES:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


# ============================================================================
# Commands
# ============================================================================

def cmd_flag(args, settings: Settings, out: Path) -> Outcome:
    S = load_structure(args.structure)
    opts = settings.structure
    flag = flag_at(S, parse_point(args.point), opts.max_depth, opts.rank_tol)
    report = R.FlagReport(
        structure=S.label,
        point=parse_point(args.point),
        growth=list(flag.growth),
        weights=list(flag.weights.weights),
        step=flag.step,
    )
    return Outcome([R.write_report(report, out / "flag.json")])


def cmd_distance(args, settings: Settings, out: Path) -> Outcome:
    S = load_structure(args.structure)
    p, q = parse_point(args.p), parse_point(args.q)
    est = cc_distance(S, p, q, settings.distance, settings.shooting, settings.structure)
    report = R.DistanceReport(
        structure=S.label, p=p, q=q, upper=est.upper, lower=est.lower, gap=est.gap,
        converged=est.converged, endpoint_error=est.endpoint_error,
    )
    return Outcome(
        [R.write_report(report, out / "distance.json"), R.write_table(est.control.to_frame(), out / "certificate.csv")],
        est.converged,
    )


def cmd_geodesic(args, settings: Settings, out: Path) -> Outcome:
    S = load_structure(args.structure)
    p, q = parse_point(args.p), parse_point(args.q)
    est = cc_distance(S, p, q, settings.distance, settings.shooting, settings.structure)
    curve = geodesic_between(S, p, q, settings.distance, est)
    t = np.linspace(0.0, curve.duration, args.samples)
    states = np.atleast_2d(curve.state_at(t))
    table = {"t": t}
    table.update({f"x{j + 1}": states[:, j] for j in range(S.dim)})
    report = R.GeodesicReport(
        structure=S.label, p=p, q=q, length=curve.length, samples=args.samples, converged=est.converged
    )
    return Outcome(
        [R.write_report(report, out / "geodesic.json"), R.write_table(pd.DataFrame(table), out / "geodesic.csv")],
        est.converged,
    )


def cmd_nilpotent(args, settings: Settings, out: Path) -> Outcome:
    S = load_structure(args.structure)
    origin = [0.0] * S.dim
    w = flag_at(S, origin, settings.structure.max_depth, settings.structure.rank_tol).weights
    S_hat = nilpotent_approximation(S, w)
    text = format_structure(S_hat)
    unchanged = [X.to_text() for X in S_hat.generators] == [X.to_text() for X in S.generators]
    report = R.NilpotentReport(
        structure=S.label, point=origin, weights=list(w.weights), approximation=S_hat.label,
        fields=text.splitlines(), unchanged=unchanged,
    )
    artifacts = [R.write_report(report, out / "nilpotent.json")]
    (out / "nilpotent.sfield").write_text(text)
    artifacts.append(out / "nilpotent.sfield")
    if args.x and args.y:
        table = rescaled_distance_table(
            S, w, settings.nilpotent.lambdas, parse_point(args.x), parse_point(args.y), settings.distance
        )
        artifacts.append(R.write_table(table, out / "rescaled_distances.csv"))
    return Outcome(artifacts)


def cmd_blowup(args, settings: Settings, out: Path) -> Outcome:
    S = load_structure(args.structure)
    opts = settings.nilpotent
    origin = np.zeros(S.dim)
    w = flag_at(S, list(origin), settings.structure.max_depth, settings.structure.rank_tol).weights
    v = parse_point(args.direction)
    u = minimal_control(S, origin, v).u
    lam0 = np.linalg.pinv(S.frame.values(origin).T) @ u
    lambdas = sorted(opts.lambdas)
    gamma = normal_geodesic(S, origin, lam0, T=opts.window / lambdas[0])
    line = blow_up_normal(S, w, v, T=opts.window)
    report = blow_up_convergence(S, w, gamma, lambdas, opts.window, line, opts.blowup_tol)
    identity = dilation_line_identity_check(nilpotent_approximation(S, w), w, v, opts.line_times, opts.line_tol)
    summary = R.BlowupReport(
        structure=S.label, direction=v, lambdas=list(report.lambdas), deviations=list(report.deviations),
        mode=report.mode, tolerance=report.tolerance, converged=report.converged, line_identity=identity,
    )
    return Outcome(
        [R.write_report(summary, out / "blowup.json"), R.write_table(report.to_frame(), out / "blowup.csv")],
        report.converged and identity,
    )


def cmd_lift(args, settings: Settings, out: Path) -> Outcome:
    u = parse_point(args.control)
    base, lift = lift_line(u, args.duration, args.steps)
    rng = np.random.default_rng(settings.run.seed)
    samples = random_elements(args.samples, rng)
    push = pushforward_check(samples)
    commute = dilation_commute_check(samples, (0.5, 2.0, 10.0))
    error = abs(lift.length - base.length)
    passed = push.passed and commute.passed and error <= 1e-6
    report = R.LiftReport(
        control=u, duration=args.duration, base_length=base.length, lift_length=lift.length,
        length_error=error, pushforward_deviation=push.deviations[push.convention],
        convention=push.convention, commute_error=commute.max_error, passed=passed,
    )
    return Outcome(
        [R.write_report(report, out / "lift.json"), R.write_table(lift.to_frame(), out / "lift.csv")], passed
    )


def cmd_ricci(args, settings: Settings, out: Path) -> Outcome:
    opts = settings.warped
    m = args.m or minimal_sphere_dimension(args.k, args.alpha)
    W = WarpingTriple(m, args.k, args.alpha, args.c)
    r = np.logspace(np.log10(opts.gate_r_min), np.log10(opts.gate_r_max), opts.gate_points)
    table = ricci_sweep(W, r)
    minima = {name: float(table[name].min()) for name in table.columns if name != "r"}
    report = R.RicciReport(
        m=m, k=args.k, alpha=args.alpha, c=args.c, minima=minima, oracle_radius=args.oracle_r,
        oracle_relative_errors=compare_ricci(W, args.oracle_r, opts.fd_step),
    )
    return Outcome([R.write_report(report, out / "ricci.json"), R.write_table(table, out / "ricci_sweep.csv")])


def cmd_gate(args, settings: Settings, out: Path) -> Outcome:
    gate = parameter_gate(args.k, args.alpha, settings.warped)
    report = R.GateReport(
        k=args.k, alpha=args.alpha, m=gate.m, c=gate.c, iterations=gate.iterations,
        minima=gate.minima, grid=gate.r_grid, positive=gate.positive,
    )
    return Outcome([R.write_report(report, out / "gate.json")])


def _space(args) -> ConeGrushinSpace:
    return ConeGrushinSpace(args.k, args.alpha, args.c)


def cmd_cone_distance(args, settings: Settings, out: Path) -> Outcome:
    space = _space(args)
    ps = args.p or [",".join(["0"] * space.n)]
    qs = args.q or [",".join(["0"] * (space.n - 1) + ["1"])]
    if len(ps) != len(qs):
        raise ConfigError(f"Got {len(ps)} --p and {len(qs)} --q points")
    rows = []
    for p, q in zip(ps, qs):
        est = cone_grushin_distance(space, parse_point(p), parse_point(q), settings.cone)
        rows.append(
            R.ConeDistanceRow(
                p=parse_point(p), q=parse_point(q), upper=est.upper, extrapolated=est.extrapolated,
                lengths=list(est.lengths), min_radii=list(est.min_radii), verdict=est.verdict,
                converged=est.converged,
            )
        )
    report = R.ConeDistanceReport(
        k=space.k, alpha=space.alpha, c=space.c, axis_constant=space.axis_constant, results=rows
    )
    table = pd.DataFrame(
        [
            {"pair": i, "upper": row.upper, "extrapolated": row.extrapolated, "min_r": row.min_radii[-1],
             "verdict": row.verdict, "converged": row.converged}
            for i, row in enumerate(rows)
        ]
    )
    return Outcome(
        [R.write_report(report, out / "cone_distance.json"), R.write_table(table, out / "cone_distances.csv")],
        all(row.converged for row in rows),
    )


def cmd_dilation_check(args, settings: Settings, out: Path) -> Outcome:
    space = _space(args)
    rng = np.random.default_rng(settings.run.seed)
    pairs = random_pairs(space, args.pairs, rng)
    lambdas = parse_point(args.lambdas)
    check = dilation_isometry_check(space, pairs, lambdas, settings.cone)
    report = R.DilationCheckReport(
        k=space.k, alpha=space.alpha, c=space.c, lambdas=lambdas, pairs=len(pairs),
        max_error=check.max_error, tolerance=check.tolerance, passed=check.passed,
    )
    return Outcome(
        [R.write_report(report, out / "dilation_check.json"), R.write_table(check.table, out / "dilation_check.csv")],
        check.passed,
    )


def cmd_hausdorff(args, settings: Settings, out: Path) -> Outcome:
    space = _space(args)
    fit = hausdorff_dimension_estimate(space, settings.cone.hausdorff_exponents)
    report = R.HausdorffReport(
        k=space.k, alpha=space.alpha, slope=fit.slope, expected=fit.expected,
        relative_error=fit.relative_error, axis_constant=space.axis_constant,
    )
    return Outcome(
        [R.write_report(report, out / "hausdorff.json"), R.write_table(fit.table, out / "hausdorff_fit.csv")],
        fit.relative_error <= 0.05,
    )


def _cd_model(report: CDReport, settings: Settings) -> R.CDCheckReport:
    config = settings.cd.model_dump(mode="json")
    config.update({"K": report.K, "N": report.N})
    return R.CDCheckReport(
        label=report.label, backend=report.backend, config=config,
        per_t=[R.CDRowModel(**vars(row)) for row in report.per_t],
        min_margin=report.min_margin, verdict=report.verdict, note=report.note,
    )


def _backend(name: str) -> DistanceBackend:
    return EuclideanBackend() if name == "euclidean" else ShootingBackend(load_structure(name))


def cmd_cd_check(args, settings: Settings, out: Path) -> Outcome:
    opts = settings.cd
    witness = verdict = note = None
    found_witness = True
    if args.suite == "euclidean":
        found = euclidean_suite(opts)
    elif args.suite == "halfplane":
        found = halfplane_suite(opts)
    elif args.suite == "grushin":
        scan = scan_grushin_violation(opts)
        found = scan.reports
        witness = scan.witness.label if scan.witness else None
        verdict = scan.verdict
        found_witness = scan.witness is not None
        if not found_witness:
            note = f"No configuration violated CD({opts.K:g}, {opts.N:g}) at scales {list(opts.scales)}"
    else:
        if not (args.mu0 and args.mu1):
            raise ConfigError("--suite files needs --mu0 and --mu1 measure CSVs")
        found = [
            cd_inequality_check(
                read_measure(args.mu0), read_measure(args.mu1), _backend(args.backend),
                lebesgue_density, opts, "files",
            )
        ]
    models = [_cd_model(r, settings) for r in found]
    suite = R.CDSuiteReport(suite=args.suite, reports=models, witness=witness, verdict=verdict, note=note)
    artifacts = [R.write_report(suite, out / "cd_check.json")]
    frames = []
    for r in found:
        df = r.to_frame()
        df.insert(0, "label", r.label)
        frames.append(df)
    artifacts.append(R.write_table(pd.concat(frames, ignore_index=True), out / "cd_margins.csv"))
    return Outcome(artifacts, found_witness)


def cmd_schemas(args, settings: Settings, out: Path) -> Outcome:
    return Outcome(R.write_schemas(out / "schemas"))


def cmd_library(args, settings: Settings, out: Path) -> Outcome:
    artifacts = [R.write_report(R.LibraryReport(structures=available_structures()), out / "library.json")]
    if args.dump:
        S = load_structure(args.dump)
        path = out / f"{S.label}.sfield"
        path.write_text(format_structure(S))
        sys.stdout.write(format_structure(S))
        artifacts.append(path)
    return Outcome(artifacts)


COMMANDS: Dict[str, Callable[..., Outcome]] = {
    "flag": cmd_flag,
    "distance": cmd_distance,
    "geodesic": cmd_geodesic,
    "nilpotent": cmd_nilpotent,
    "blowup": cmd_blowup,
    "lift": cmd_lift,
    "ricci": cmd_ricci,
    "gate": cmd_gate,
    "cone-distance": cmd_cone_distance,
    "dilation-check": cmd_dilation_check,
    "hausdorff": cmd_hausdorff,
    "cd-check": cmd_cd_check,
    "schemas": cmd_schemas,
    "library": cmd_library,
}


# ============================================================================
# Parser
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file, deep-merged over the defaults")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    common.add_argument("--out", help="Output directory (overrides run.output_dir)")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level")

    parser = argparse.ArgumentParser(prog="python -m app.cli", description="Sub-Riemannian geometry experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    p = add("flag", "Growth vector and weights at a point")
    p.add_argument("--structure", default="grushin")
    p.add_argument("--point", required=True)

    for name, help_text in (("distance", "Carnot-Caratheodory distance estimate"), ("geodesic", "Geodesic certificate")):
        p = add(name, help_text)
        p.add_argument("--structure", default="grushin")
        p.add_argument("--p", required=True)
        p.add_argument("--q", required=True)
        if name == "geodesic":
            p.add_argument("--samples", type=int, default=101)

    p = add("nilpotent", "Nilpotent approximation at the origin")
    p.add_argument("--structure", default="perturbed_grushin")
    p.add_argument("--x", help="First point of a rescaled-distance table")
    p.add_argument("--y", help="Second point of a rescaled-distance table")

    p = add("blowup", "Blow-up of a normal geodesic at the origin")
    p.add_argument("--structure", default="perturbed_grushin")
    p.add_argument("--direction", default="1,0")

    p = add("lift", "Horizontal lift of a Grushin line to the Heisenberg group")
    p.add_argument("--control", default="1,0.5")
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--samples", type=int, default=50)

    for name, help_text in (("ricci", "Ricci components of a warping triple"), ("gate", "Parameter gate for positive Ricci")):
        p = add(name, help_text)
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--alpha", type=float, default=1.0)
        if name == "ricci":
            p.add_argument("--m", type=int)
            p.add_argument("--c", type=float, default=0.1)
            p.add_argument("--oracle-r", dest="oracle_r", type=float, default=1.0)

    for name, help_text in (
        ("cone-distance", "Cone-Grushin distances"),
        ("dilation-check", "Dilation isometry check on random pairs"),
        ("hausdorff", "Hausdorff dimension of the singular axis"),
    ):
        p = add(name, help_text)
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--c", type=float, default=0.5)
        if name == "cone-distance":
            p.add_argument("--p", action="append")
            p.add_argument("--q", action="append")
        if name == "dilation-check":
            p.add_argument("--pairs", type=int, default=20)
            p.add_argument("--lambdas", default="0.5,2,10")

    p = add("cd-check", "Curvature-dimension entropy inequality")
    p.add_argument("--suite", choices=("euclidean", "halfplane", "grushin", "files"), default="euclidean")
    p.add_argument("--mu0")
    p.add_argument("--mu1")
    p.add_argument("--backend", default="euclidean", help="'euclidean' or a structure name")

    add("schemas", "Write JSON Schemas of all reports")

    p = add("library", "List shipped structures")
    p.add_argument("--dump", help="Print and save one structure")
    return parser


# ============================================================================
# Entry point
# ============================================================================

def _write_error(exc: BaseException, code: int, out: Optional[Path]) -> None:
    report = R.ErrorReport(error=type(exc).__name__, message=str(exc), exit_code=code)
    if out is not None:
        try:
            R.write_report(report, out / "error.json")
        except OSError:
            logger.exception("Could not write error.json")
    sys.stdout.write(report.model_dump_json(indent=2) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    clock = time.perf_counter()
    out: Optional[Path] = Path(args.out) if args.out else None
    try:
        overrides = list(args.overrides)
        if args.out:
            overrides.append(f"run.output_dir={json.dumps(args.out)}")
        settings = load_settings(args.config, overrides)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else settings.logging.level.upper(),
            format=LOG_FORMAT,
            stream=sys.stderr,
            force=True,
        )
        out = Path(args.out) if args.out else settings.output_dir
        out.mkdir(parents=True, exist_ok=True)
        logger.info("Running %s into %s", args.command, out)
        outcome = COMMANDS[args.command](args, settings, out)
        manifest = R.Manifest(
            command=args.command,
            argv=argv,
            config=settings.model_dump(mode="json"),
            versions=_versions(),
            started=started,
            wall_time=time.perf_counter() - clock,
            artifacts=[str(p.relative_to(out)) for p in outcome.artifacts],
        )
        (out / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n")
    except SublabError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        _write_error(exc, exc.exit_code, out)
        return exc.exit_code
    except Exception as exc:
        logger.exception("Unexpected failure")
        _write_error(exc, 4, out)
        return 4
    if not outcome.converged:
        logger.warning("%s finished unconverged", args.command)
        return 3
    return 0
