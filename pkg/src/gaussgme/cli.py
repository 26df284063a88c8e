"""Command-line interface.

Every long flag has a config-file twin: ``--r-step 0.01`` and ``r_step = 0.01``
(or ``r-step = 0.01``) in the file given by ``--config``. Flags win.

Exit codes: 0 success, 2 bracket or configuration errors, 3 solver errors.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from typing import Any

from . import emit
from .config import DEFAULT_TOLERANCES, default_workers, read_config, tolerances_from_mapping
from .exceptions import BracketError, GaussGMEError, InvalidArgumentError, SolverError
from .fock import Method
from .moments import FAMILY_PARAMETERS, Family, second_parameter
from .reproduce import RECIPES, run_recipe
from .scan import (
    ALL_DETECTORS,
    Detector,
    DetectorSpec,
    bisect_threshold,
    detectors_up_to,
    evaluate_point,
    last_detected,
    make_grid,
    scan_1d,
    scan_2d,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
R_STEP_1D, STEP_2D = 0.005, 0.05

# Defaults used when neither the command line nor the config file sets a value.
DEFAULTS: dict[str, Any] = {
    "workers": None,
    "d_max": 4,
    "method": "hermite",
    "detectors": None,
    "output": "-",
    "json": None,
    "svg": None,
    "timing": False,
    "family": None,
    "r": None,
    "second": None,
    "r_min": 0.005,
    "r_max": 1.5,
    "r_step": None,
    "s_min": 0.0,
    "s_max": 1.0,
    "s_step": None,
    "boundary_tol": None,
    "detector": None,
    "lo": None,
    "hi": None,
    "tol": None,
    "parameter": "r",
    "figure": None,
    "out_dir": "results",
}
TOL_KEYS = tuple(f"tol_{f}" for f in DEFAULT_TOLERANCES.__dataclass_fields__)


class ConfigError(InvalidArgumentError):
    pass


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common")
    g.add_argument("--config", help="key = value file; command-line flags take precedence")
    g.add_argument("--workers", type=int, help="worker processes (default: $GAUSSGME_WORKERS or 1)")
    g.add_argument("--d-max", type=int, help="largest local projection dimension used (2, 3 or 4)")
    g.add_argument("--method", choices=[m.value for m in Method], help="Fock element route")
    g.add_argument("--timing", action="store_true", default=None, help="include wall times in outputs")
    for key in TOL_KEYS:
        g.add_argument("--" + key.replace("_", "-"), type=float, dest=key, help=argparse.SUPPRESS)


def _outputs(parser: argparse.ArgumentParser, svg: bool = True) -> None:
    parser.add_argument("-o", "--output", help="CSV path ('-' for stdout)")
    parser.add_argument("--json", help="JSON path")
    if svg:
        parser.add_argument("--svg", help="SVG path")


def _family_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", help="vac, smsv, thermal, coherent or noisy_ghz")
    parser.add_argument("--detectors", help="comma-separated detector names (default: all up to --d-max)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussgme", description="GME detection scans for three-mode Gaussian states")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("families", help="list families and parameter ranges")
    _common(p)
    p.add_argument("--json", help="JSON path")

    p = sub.add_parser("check", help="all detectors at one parameter point")
    _common(p)
    _family_args(p)
    p.add_argument("--r", type=float)
    p.add_argument("--second", type=float, help="value of the family's second parameter")
    p.add_argument("-o", "--output", help="JSON path ('-' for stdout)")

    p = sub.add_parser("scan1d", help="scan in r")
    _common(p)
    _family_args(p)
    _outputs(p)
    for name in ("r-min", "r-max", "r-step", "second"):
        p.add_argument("--" + name, type=float)

    p = sub.add_parser("scan2d", help="scan in r and the second parameter, with per-r boundaries")
    _common(p)
    _family_args(p)
    _outputs(p)
    for name in ("r-min", "r-max", "r-step", "s-min", "s-max", "s-step", "boundary-tol"):
        p.add_argument("--" + name, type=float)

    p = sub.add_parser("bisect", help="threshold of one detector by bisection")
    _common(p)
    p.add_argument("--family")
    p.add_argument("--detector")
    p.add_argument("--parameter", help="'r' or the family's second parameter")
    p.add_argument("--r", type=float, help="fixed r when bisecting the second parameter")
    p.add_argument("--second", type=float, help="fixed second parameter when bisecting r")
    for name in ("lo", "hi", "tol"):
        p.add_argument("--" + name, type=float)
    p.add_argument("-o", "--output", help="JSON path ('-' for stdout)")

    p = sub.add_parser("reproduce", help="canned scans for the figure analogues")
    _common(p)
    p.add_argument("figure", nargs="?", choices=sorted(RECIPES))
    p.add_argument("--out-dir")
    p.add_argument("--r-step", type=float)
    p.add_argument("--s-step", type=float)
    p.add_argument("--tol", type=float)
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge command line over config file over defaults."""
    config: dict[str, Any] = {}
    if getattr(args, "config", None):
        config = read_config(args.config)
    known = set(DEFAULTS) | set(TOL_KEYS)
    unknown = set(config) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key in known:
        cli = getattr(args, key, None)
        if cli is not None:
            out[key] = cli
        elif key in config:
            out[key] = config[key]
        else:
            out[key] = DEFAULTS.get(key)
    out["tolerances"] = tolerances_from_mapping({k: v for k, v in out.items() if k in TOL_KEYS and v is not None})
    if out["workers"] is None:
        out["workers"] = default_workers()
    d_max = int(out["d_max"])
    if d_max not in (2, 3, 4):
        raise ConfigError(f"d_max must be 2, 3 or 4, got {d_max}")
    out["d_max"] = d_max
    return out


def _require(opts: dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise ConfigError("missing required settings: " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _specs(opts: dict) -> list[DetectorSpec]:
    if opts["detectors"]:
        names = [n for n in str(opts["detectors"]).split(",") if n.strip()]
        dets = [Detector.parse(n) for n in names]
    else:
        dets = list(ALL_DETECTORS)
    dets = detectors_up_to(opts["d_max"], dets)
    if not dets:
        raise ConfigError("detector stack is empty after applying --d-max")
    return [DetectorSpec(d, opts["tolerances"]) for d in dets]


def _fixed_second(family: Family, opts: dict) -> dict[str, float]:
    name = second_parameter(family)
    if name is None:
        return {}
    _require(opts, "second")
    return {name: float(opts["second"])}


def cmd_families(opts: dict) -> int:
    rows = []
    for fam in Family:
        ranges = {k: [lo, None if hi == float("inf") else hi] for k, (lo, hi) in FAMILY_PARAMETERS[fam].items()}
        rows.append({"family": fam.value, "parameters": ranges})
        desc = ", ".join(f"{k} in [{lo}, {'inf' if hi is None else hi}]" for k, (lo, hi) in ranges.items())
        print(f"{fam.value:10s} {desc}")
    if opts["json"]:
        emit.write_text(opts["json"], emit.to_json(rows))
    return EXIT_OK


def cmd_check(opts: dict) -> int:
    _require(opts, "family", "r")
    family = Family.parse(opts["family"])
    params = {"r": float(opts["r"]), **_fixed_second(family, opts)}
    rec = evaluate_point(family, params, _specs(opts), opts["method"])
    emit.write_text(opts["output"] or "-", emit.to_json(rec.to_dict(), opts["timing"]))
    return EXIT_SOLVER if rec.has_solver_error else EXIT_OK


def _emit_records(opts: dict, records, payload) -> None:
    emit.write_text(opts["output"] or "-", emit.records_to_csv(records, opts["timing"]))
    if opts["json"]:
        emit.write_text(opts["json"], emit.to_json(payload, opts["timing"]))


def cmd_scan1d(opts: dict) -> int:
    _require(opts, "family")
    family = Family.parse(opts["family"])
    grid = make_grid(opts["r_min"], opts["r_max"], opts["r_step"] or R_STEP_1D)
    records = scan_1d(family, _specs(opts), grid, _fixed_second(family, opts), opts["workers"], opts["method"])
    _emit_records(opts, records, {"records": [r.to_dict() for r in records]})
    if opts["svg"]:
        found = []
        for spec in _specs(opts):
            last = last_detected(records, spec.kind)
            found.append((spec.kind, last, last is not None and last == records[-1].r))
        emit.threshold_bars_svg(found, opts["svg"], f"{family.value} scan", x_max=float(grid[-1]))
    return EXIT_SOLVER if any(r.has_solver_error for r in records) else EXIT_OK


def cmd_scan2d(opts: dict) -> int:
    _require(opts, "family")
    family = Family.parse(opts["family"])
    r_grid = make_grid(opts["r_min"], opts["r_max"], opts["r_step"] or STEP_2D)
    s_grid = make_grid(opts["s_min"], opts["s_max"], opts["s_step"] or STEP_2D)
    result = scan_2d(family, _specs(opts), r_grid, s_grid, opts["workers"], opts["boundary_tol"], opts["method"])
    _emit_records(opts, result.records, result.to_dict())
    if opts["svg"]:
        emit.region_plot_svg(result.boundaries, r_grid, s_grid, second_parameter(family), opts["svg"],
                             f"{family.value} scan")
    return EXIT_SOLVER if any(r.has_solver_error for r in result.records) else EXIT_OK


def cmd_bisect(opts: dict) -> int:
    _require(opts, "family", "detector", "lo", "hi")
    family = Family.parse(opts["family"])
    parameter = opts["parameter"] or "r"
    if parameter == "r":
        fixed = _fixed_second(family, opts)
    else:
        _require(opts, "r")
        fixed = {"r": float(opts["r"])}
    spec = DetectorSpec(Detector.parse(opts["detector"]), opts["tolerances"])
    res = bisect_threshold(family, spec, fixed, (opts["lo"], opts["hi"]), float(opts["tol"] or 1e-4), parameter,
                           opts["method"])
    emit.write_text(opts["output"] or "-", emit.to_json(res.to_dict()))
    return EXIT_OK


def cmd_reproduce(opts: dict) -> int:
    _require(opts, "figure")
    out = run_recipe(opts["figure"], opts["out_dir"], opts["d_max"], opts["workers"], opts["method"],
                     opts["r_step"], opts["s_step"], opts["tol"], opts["timing"])
    for path in out.files:
        print(path)
    return EXIT_SOLVER if out.solver_errors else EXIT_OK


COMMANDS = {
    "families": cmd_families,
    "check": cmd_check,
    "scan1d": cmd_scan1d,
    "scan2d": cmd_scan2d,
    "bisect": cmd_bisect,
    "reproduce": cmd_reproduce,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (BracketError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except GaussGMEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
