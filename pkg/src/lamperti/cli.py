"""Command-line entry point: ``lamperti classify|stats|simulate SPEC.json``.

Exit codes: 0 for a definite verdict (or a successful stats/simulate run),
2 when the headline is Inconclusive, 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .criteria import CriteriaConfig, classify
from .drift_stats import FitConfig, InsufficientGrid, profile
from .simulator import SimConfig, consistency_check, near_critical_note, simulate
from .specfile import SpecFileError, dumps, load_spec
from .splitter import decompose
from .verdict import Label

__all__ = ["main", "build_parser", "build_report", "stats_csv", "STATS_HEADER"]

log = logging.getLogger("lamperti")

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2
STATS_HEADER = ["x", "mu", "v", "nu", "up_part", "down_part", "p_up", "p_down", "two_x_mu", "rho", "x_rho_minus_1"]

_DEFAULT_FIT = FitConfig()
_DEFAULT_CRIT = CriteriaConfig()
_DEFAULT_SIM = SimConfig()


def _grid_arg(text: str) -> FitConfig:
    try:
        x0, g, n = text.split(":")
        cfg = replace(_DEFAULT_FIT, x0=int(x0), growth=float(g), n_points=int(n))
        if cfg.x0 < 1 or cfg.growth <= 1 or cfg.n_points < 8:
            raise ValueError("need x0 >= 1, growth > 1 and at least 8 points")
        cfg.grid()
    except (ValueError, InsufficientGrid) as exc:
        raise argparse.ArgumentTypeError(f"expected x0:growth:n, got {text!r} ({exc})") from None
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("spec", type=Path, help="chain-spec JSON file")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--strict-prob", action="store_true",
                   help="reject probability expressions leaving [0, 1] instead of clipping them")


def _add_sim(p: argparse.ArgumentParser) -> None:
    d = _DEFAULT_SIM
    p.add_argument("--paths", type=int, default=d.n_paths, help=f"number of paths (default {d.n_paths})")
    p.add_argument("--steps", type=int, default=d.n_steps, help=f"steps per path (default {d.n_steps})")
    p.add_argument("--x0", type=int, default=d.x0, help=f"start state (default {d.x0})")
    p.add_argument("--r", type=int, default=d.r, help=f"return radius (default {d.r})")
    p.add_argument("--seed", type=int, default=d.master_seed, help=f"master seed (default {d.master_seed})")
    p.add_argument("--trace", type=Path, help="write every path's states as CSV path_id,step,state")


def _add_fit(p: argparse.ArgumentParser) -> None:
    f = _DEFAULT_FIT
    p.add_argument("--grid", type=_grid_arg, default=_DEFAULT_FIT, metavar="X0:G:N",
                   help=f"geometric fit grid x0*g^k (+k dither) for k<n (default {f.x0}:{f.growth:g}:{f.n_points})")
    p.add_argument("--truncation", type=int, default=_DEFAULT_CRIT.truncation,
                   help=f"state-space truncation for splitting (default {_DEFAULT_CRIT.truncation})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lamperti",
        description="Recurrence/transience classification of nonnegative integer Markov chains.",
        epilog="Set LAMPERTI_LOG=DEBUG|INFO|WARNING for diagnostic output on stderr.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="classify a chain and write a JSON report",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(c)
    _add_fit(c)
    c.add_argument("--fit-tol", type=float, default=_DEFAULT_FIT.fit_tol, help="fit residual tolerance")
    c.add_argument("--eps-min", type=float, default=_DEFAULT_FIT.eps_min, help="smallest acceptable fitted decay exponent")
    c.add_argument("--theta-gap", type=float, default=_DEFAULT_CRIT.transience_gap,
                   help="theta must exceed 1 + gap for Transient")
    c.add_argument("--decision-tol", type=float, default=_DEFAULT_CRIT.decision_tol,
                   help="theta at most 1 + tol is Recurrent")
    c.add_argument("--i-max", type=int, default=_DEFAULT_CRIT.i_max, help="series terms computed")
    c.add_argument("--simulate", action="store_true", help="add a Monte-Carlo cross-check")
    _add_sim(c)

    s = sub.add_parser("stats", help="drift profile table as CSV")
    _add_common(s)
    _add_fit(s)
    s.add_argument("--csv", type=Path, dest="csv_out", help="same as --out")
    s.add_argument("--no-split", action="store_true", help="profile the raw chain without decomposing it")

    m = sub.add_parser("simulate", help="Monte-Carlo summary as JSON")
    _add_common(m)
    _add_sim(m)
    return parser


def _sim_config(args) -> SimConfig:
    return SimConfig(n_paths=args.paths, n_steps=args.steps, x0=args.x0, r=args.r, master_seed=args.seed)


def _run_simulation(spec, args) -> tuple:
    cfg = _sim_config(args)
    if args.trace is None:
        return cfg, simulate(spec, cfg)
    with open(args.trace, "w", newline="", encoding="utf-8") as fh:
        return cfg, simulate(spec, cfg, trace=fh)


def build_report(name: str, doc: dict, crit: CriteriaConfig, strict: bool, result, simulation=None) -> dict:
    """Assemble the report document that ``classify`` writes."""
    return {
        "tool": "lamperti",
        "schema_version": 1,
        "name": name,
        "spec": doc,
        "config": {
            "grid": crit.fit.grid(),
            "truncation": crit.truncation,
            "fit_tol": crit.fit.fit_tol,
            "eps_min": crit.fit.eps_min,
            "decision_tol": crit.decision_tol,
            "theta_gap": crit.transience_gap,
            "i_max": crit.i_max,
            "strict_prob": strict,
        },
        "result": result.to_dict(),
        "simulation": simulation,
    }


def _criteria_config(args) -> CriteriaConfig:
    fit = replace(args.grid, fit_tol=args.fit_tol, eps_min=args.eps_min)
    return CriteriaConfig(
        decision_tol=args.decision_tol,
        transience_gap=args.theta_gap,
        i_max=args.i_max,
        truncation=args.truncation,
        fit=fit,
    )


def _cmd_classify(args, spec, doc) -> tuple[str, int]:
    crit = _criteria_config(args)
    result = classify(spec, crit)
    theta = result.theta()
    simulation = None
    if args.simulate:
        cfg, rep = _run_simulation(spec, args)
        notes = [n for n in [near_critical_note(theta)] if n]
        simulation = {
            "config": asdict(cfg),
            "report": rep.to_dict(),
            "consistency": consistency_check(spec, result.headline, cfg, rep).value,
            "notes": notes,
        }
    name = doc.get("name", args.spec.stem)
    report = build_report(name, doc, crit, args.strict_prob, result, simulation)
    n_comp = len(result.components)
    summary = f"{name}: {result.headline.value}"
    summary += f" (theta={theta:.4g})" if theta is not None else " (theta=n/a)"
    summary += f", {n_comp} component{'s' if n_comp != 1 else ''}"
    if simulation:
        summary += f", simulation {simulation['consistency']}"
    print(summary, file=sys.stderr)
    code = EXIT_INCONCLUSIVE if result.headline is Label.INCONCLUSIVE else EXIT_OK
    return dumps(report), code


def stats_csv(spec, fit: FitConfig, truncation: int, split: bool = True) -> str:
    """Drift profile rows; with several value sets each block opens with a ``# component`` line."""
    grid = fit.grid()
    blocks = [(None, profile(spec, grid))] if not split else [
        (c, profile(spec, grid, c)) for c in decompose(spec, truncation).components
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for comp, rows in blocks:
        if comp is not None and len(blocks) > 1:
            buf.write(f"# component {comp.index} modulus={comp.modulus} residue={comp.residue}\n")
        for q in rows:
            w.writerow([q.x, *(repr(float(v)) for v in (
                q.mu, q.v, q.nu, q.up_part, q.down_part, q.p_up, q.p_down,
                2 * q.x * q.mu, q.rho, q.x * (q.rho - 1),
            ))])
    return buf.getvalue()


def _cmd_stats(args, spec, doc) -> tuple[str, int]:
    if args.csv_out is not None:
        args.out = args.csv_out
    return stats_csv(spec, args.grid, args.truncation, split=not args.no_split), EXIT_OK


def _cmd_simulate(args, spec, doc) -> tuple[str, int]:
    cfg, rep = _run_simulation(spec, args)
    return dumps({"config": asdict(cfg), "report": rep.to_dict()}), EXIT_OK


COMMANDS = {"classify": _cmd_classify, "stats": _cmd_stats, "simulate": _cmd_simulate}


def _configure_logging() -> None:
    level = os.environ.get("LAMPERTI_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; 2 is reserved for Inconclusive
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        spec, doc = load_spec(args.spec, strict=args.strict_prob)
        text, code = COMMANDS[args.command](args, spec, doc)
    except SpecFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - every path must map to an exit code
        log.debug("unhandled error", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if args.out is None:
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            args.out.write_text(text, encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
