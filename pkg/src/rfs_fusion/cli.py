"""``rfs-fusion`` command-line entry point.

Subcommands
-----------
simulate   Monte-Carlo evaluation of a scenario; writes CSVs and metadata.
fuse       Fuse serialised densities; writes the fused density and a diagnostics row.
diagnose   Label-consistency diagnostics of serialised densities.
ospa       OSPA distance between two point sets stored as JSON.
validate   Randomised invariant suites; nonzero exit if any fails.

The log level is read from the ``RFS_FUSION_LOG`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import serialization, validation
from .diagnostics import DiagnosticsReport, DiscreteSpace, discretize, label_inconsistency_indicator
from .fusion import FusionConfig, classical_gci_lmb_fuse, r_gci_glmb_fuse
from .gaussian import IncompatibleDensitiesError
from .labeled_rfs import GlmbDensity, LmbDensity, cardinality_distribution, glmb_to_lmb, lmb_to_glmb
from .ospa import OspaParams, ospa_distance
from .sim import ConfigError, bundled_scenario, build_scenario, load_config, monte_carlo, write_outputs

log = logging.getLogger("rfs_fusion")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _key_value(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _weights(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be a comma-separated list of numbers, got {text!r}")


def resolve_config(name: str) -> Path:
    """A config argument is a file path or the name of a bundled scenario."""
    p = Path(name)
    if p.is_file():
        return p
    try:
        return bundled_scenario(name)
    except ConfigError:
        raise CliError(f"config {name!r} is neither a file nor a bundled scenario", EXIT_USAGE)


def _load_densities(paths) -> list:
    out = []
    for p in paths:
        try:
            out.append(serialization.load(p))
        except (OSError, json.JSONDecodeError, serialization.SchemaError) as exc:
            raise CliError(f"{p}: {exc}")
    kinds = {type(d) for d in out}
    if not kinds <= {LmbDensity, GlmbDensity}:
        raise CliError("fusion inputs must be labeled densities (lmb or glmb)")
    return out


def _check_weights(w, n: int) -> tuple:
    if w is None:
        return tuple([1.0 / n] * n)
    if len(w) != n:
        raise CliError(f"{n} densities need {n} weights, got {len(w)}", EXIT_USAGE)
    if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
        raise CliError(f"weights must be nonnegative and sum to one, got {w} (sum {sum(w):.6g})", EXIT_USAGE)
    return tuple(w)


def _diagnose(dens, weights, n_cells: int, max_card: int, prune: float) -> DiagnosticsReport:
    glmbs = [lmb_to_glmb(d, prune_threshold=prune) if isinstance(d, LmbDensity) else d for d in dens]
    space = DiscreteSpace.covering(glmbs, axes=(0,), n_cells=n_cells, max_cardinality=max_card)
    return label_inconsistency_indicator([(discretize(g, space), w) for g, w in zip(glmbs, weights)])


def _print_report(rep: DiagnosticsReport) -> None:
    for name in ("G_labeled", "G_unlabeled", "d_G", "d_G_upper", "p_yes_labeled", "p_yes_unlabeled"):
        print(f"{name:16s} {getattr(rep, name):.9g}")
    if math.isfinite(rep.d_G_upper) and rep.d_G_upper > 0:
        print(f"{'gap_to_upper':16s} {rep.d_G_upper - rep.d_G:.3g} (relative {(rep.d_G_upper - rep.d_G) / rep.d_G_upper:.3g})")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    overrides = dict(args.set or [])
    if args.estimators:
        overrides["estimators"] = "[" + ", ".join(e.strip() for e in args.estimators.split(",")) + "]"
    path = resolve_config(args.config)
    try:
        sc = build_scenario(load_config(path, overrides))
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    jobs = args.jobs or os.cpu_count() or 1
    log.info("scenario %s: %d runs, seed %d, %d jobs", sc.name, args.runs, args.seed, jobs)
    result = monte_carlo(sc, args.runs, args.seed, jobs=jobs)
    files = write_outputs(result, args.out, overrides)
    for f in files:
        print(f"wrote {f}")
    for key, vals in result.summary().items():
        print(f"{key:28s} ospa={vals['post_transient_ospa']:.4g} card_mae={vals['cardinality_mae']:.4g}")
    errs = result.errors()
    if errs:
        log.warning("%d fusion steps failed; see metadata.json", len(errs))
    return EXIT_OK


def cmd_fuse(args) -> int:
    dens = _load_densities(args.files)
    if len(dens) < 2:
        raise CliError("fuse needs at least two density files", EXIT_USAGE)
    weights = _check_weights(args.weights, len(dens))
    if not 0 <= args.home < len(dens):
        raise CliError(f"home sensor {args.home} out of range", EXIT_USAGE)
    cfg = FusionConfig(weights=weights, max_hypotheses=args.max_hypotheses)
    try:
        if args.method == "r_gci":
            fused = r_gci_glmb_fuse(dens, cfg, home_sensor=args.home)
        else:
            lmbs = [glmb_to_lmb(d) if isinstance(d, GlmbDensity) else d for d in dens]
            order = [args.home] + [i for i in range(len(lmbs)) if i != args.home]
            fused, acc = lmbs[order[0]], weights[order[0]]
            for i in order[1:]:
                if weights[i] == 0:
                    continue
                tot = acc + weights[i]
                fused = classical_gci_lmb_fuse(fused, lmbs[i], FusionConfig(weights=(acc / tot, weights[i] / tot)))
                acc = tot
    except IncompatibleDensitiesError as exc:
        print(f"error: incompatible posteriors: {exc}", file=sys.stderr)
        print(json.dumps({"payload": exc.payload}, default=str), file=sys.stderr)
        return EXIT_FAILURE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialization.save(fused, out / "fused.json")
    p_yes = 1.0 - float(cardinality_distribution(fused)[0])
    print(f"wrote {out / 'fused.json'}")
    print(f"method {args.method}")
    print(f"p_yes_fused {p_yes:.9g}")
    code = EXIT_OK
    try:
        rep = _diagnose(dens, weights, args.n_cells, args.max_cardinality, args.prune)
    except (ValueError, MemoryError) as exc:
        log.warning("diagnostics unavailable: %s", exc)
        rep = None
        code = EXIT_FAILURE if args.strict else EXIT_OK
    with (out / "diagnostics.csv").open("w") as fh:
        fh.write("method,p_yes_fused," + DiagnosticsReport.csv_header())
        if rep is not None:
            fh.write(f"{args.method},{p_yes:.9g}," + rep.csv_row(0))
    print(f"wrote {out / 'diagnostics.csv'}")
    return code


def cmd_diagnose(args) -> int:
    dens = _load_densities(args.files)
    if len(dens) < 2:
        raise CliError("diagnose needs at least two density files", EXIT_USAGE)
    weights = _check_weights(args.weights, len(dens))
    try:
        rep = _diagnose(dens, weights, args.n_cells, args.max_cardinality, args.prune)
    except IncompatibleDensitiesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"payload": exc.payload}, default=str), file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        raise CliError(str(exc))
    _print_report(rep)
    return EXIT_OK


def _load_points(path) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}")
    if isinstance(doc, dict):
        doc = doc.get("points")
    if not isinstance(doc, list):
        raise CliError(f"{path}: expected a list of points or {{\"points\": [...]}}")
    pts = np.array(doc, dtype=float)
    return pts.reshape(0, 2) if pts.size == 0 else np.atleast_2d(pts)


def cmd_ospa(args) -> int:
    X, Y = _load_points(args.first), _load_points(args.second)
    dims = {a.shape[1] for a in (X, Y) if len(a)}
    if len(dims) > 1:
        raise CliError("point sets have different dimensions")
    d = ospa_distance(X, Y, OspaParams(args.c, args.p))
    print(f"{d:.9g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    names = args.suite or list(validation.SUITES)
    unknown = [n for n in names if n not in validation.SUITES]
    if unknown:
        raise CliError(f"unknown suite(s) {unknown}; choose from {list(validation.SUITES)}", EXIT_USAGE)
    results = validation.run_all(names)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfs-fusion", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo evaluation of a scenario")
    p.add_argument("--config", required=True, help="scenario YAML file or bundled scenario name")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=_positive_int, default=10)
    p.add_argument("--jobs", type=_positive_int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--set", type=_key_value, action="append", metavar="KEY=VALUE", help="override a config entry")
    p.add_argument("--estimators", help="comma-separated subset of local,r_gci,classical_gci")
    p.set_defaults(func=cmd_simulate)

    def density_args(p):
        p.add_argument("files", nargs="+", help="labeled density JSON files")
        p.add_argument("--weights", type=_weights, help="comma-separated fusion weights (default uniform)")
        p.add_argument("--n-cells", type=_positive_int, default=40, help="grid cells for the diagnostics")
        p.add_argument("--max-cardinality", type=_positive_int, default=2)
        p.add_argument("--prune", type=float, default=1e-6, help="hypothesis pruning when expanding LMB inputs")

    p = sub.add_parser("fuse", help="fuse serialised labeled densities")
    density_args(p)
    p.add_argument("--home", type=int, default=0, help="index of the sensor whose labels are kept")
    p.add_argument("--method", choices=("r_gci", "classical"), default="r_gci")
    p.add_argument("--max-hypotheses", type=_positive_int, default=1000)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--strict", action="store_true", help="fail when the diagnostics cannot be computed")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("diagnose", help="label-consistency diagnostics")
    density_args(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("ospa", help="OSPA distance between two JSON point sets")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--c", type=float, default=100.0, help="cutoff")
    p.add_argument("--p", type=float, default=1.0, help="order")
    p.set_defaults(func=cmd_ospa)

    p = sub.add_parser("validate", help="run the randomised invariant suites")
    p.add_argument("--suite", action="append", help=f"one of {', '.join(validation.SUITES)} (repeatable)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("RFS_FUSION_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
