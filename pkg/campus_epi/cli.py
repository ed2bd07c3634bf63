"""Command-line surface: one subcommand per analysis, CSV out.

Usage:
    python -m campus_epi dorm --variant single --local 0.5 --npg 0:3:0.05
    python -m campus_epi dorm --variant double --local 0.3,0.5,0.7,0.9 --pl 0.7
    python -m campus_epi dorm --variant single --gd-grid --local 0.1,0.3,0.5,0.7,0.9
    python -m campus_epi classes --schedule scenario2 --p 0.01
    python -m campus_epi cutoff --p 0.004,0.008,0.012 --find-max-safe
    python -m campus_epi simulate --schedule scenario1 --runs 1000 --seed 7
    python -m campus_epi replay --manifest results/simulate.manifest

Exit codes: 0 success, 1 replay mismatch, 2 usage, 3 numeric non-convergence,
4 infeasible schedule.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from pydantic import ValidationError

from campus_epi.classes import (
    CutoffAnalysis,
    block_eigenvalues,
    build_mean_matrix,
    cutoff_sweep,
    max_safe_cutoff,
    reduced_two_block,
    spectral_radius,
)
from campus_epi.config import get_settings
from campus_epi.dorms import gd_curves, sweep_zeta
from campus_epi.errors import CampusEpiError, ManifestError
from campus_epi.output import RunManifest, checksum, to_csv
from campus_epi.pgf import FixedPointConfig
from campus_epi.records import ClassRow
from campus_epi.schedules import load_schedule
from campus_epi.sim.ensemble import run_traces, summarize
from campus_epi.sim.simulator import SimConfig

logger = logging.getLogger(__name__)

Outputs = dict[str, str]

# Absorbs float error in (stop - start) / step
RANGE_SLACK = 1e-9


# ── Argument types ───────────────────────────────────────

def _range_values(text: str, cast: Callable[[str], float]) -> list:
    start, stop, *rest = text.split(":")
    step = cast(rest[0]) if rest else cast("1")
    first, last = cast(start), cast(stop)
    if step <= 0 or last < first:
        raise argparse.ArgumentTypeError(f"invalid range '{text}': need start <= stop and step > 0")
    # stop is inclusive only when the span is a whole number of steps
    count = math.floor((last - first) / step + RANGE_SLACK) + 1
    return [cast(round(first + i * step, 12)) if cast is float else first + i * step for i in range(count)]


def float_grid(text: str) -> list[float]:
    """'0.1,0.3' or 'start:stop:step' (inclusive)."""
    try:
        if ":" in text:
            return _range_values(text, float)
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers or start:stop:step, got '{text}'") from None


def int_grid(text: str) -> list[int]:
    """'30,70' or 'start:stop[:step]' (inclusive)."""
    try:
        if ":" in text:
            return _range_values(text, int)
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or start:stop[:step], got '{text}'") from None


# ── Commands ─────────────────────────────────────────────

def cmd_dorm(args: argparse.Namespace) -> Outputs:
    """G_D curves, or zeta over a grid of N p_G."""
    cfg = FixedPointConfig.from_settings()
    if args.gd_grid:
        rows = gd_curves(args.variant, args.local, args.pl, cfg)
        rows.sort(key=lambda r: (r["local"], r["z"]))
        return {"main": to_csv(rows, ["variant", "local", "pl", "z", "gd"])}

    rows = sweep_zeta(args.variant, args.local, args.npg, args.pl, cfg)
    rows.sort(key=lambda r: (r["local"], r["npg"]))
    return {"main": to_csv(rows, ["variant", "local", "pl", "npg", "zeta", "error"])}


def cmd_classes(args: argparse.Namespace) -> Outputs:
    """Spectral radius of the mean matrix and R0 per p."""
    schedule = load_schedule(args.schedule)
    rho = spectral_radius(build_mean_matrix(schedule))
    logger.info(f"Schedule '{schedule.name}': {schedule.num_classes} classes, {schedule.num_students} students")

    if len(schedule.distinct_sizes) == 2:
        block = reduced_two_block(schedule)
        high, low = block_eigenvalues(block)
        print(
            f"reduced 2x2 for '{schedule.name}' (per unit p):\n"
            f"  [[{block[0, 0]:.3f}, {block[0, 1]:.3f}],\n"
            f"   [{block[1, 0]:.3f}, {block[1, 1]:.3f}]]\n"
            f"  eigenvalues {high:.3f}, {low:.3f}",
            file=sys.stderr,
        )

    rows: list[ClassRow] = [{"schedule": schedule.name, "p": p, "rho": rho, "r0": p * rho} for p in args.p]
    return {"main": to_csv(rows, ["schedule", "p", "rho", "r0"])}


def cmd_cutoff(args: argparse.Namespace) -> Outputs:
    """R0 after moving classes of size > k online."""
    schedule = load_schedule(args.schedule)
    if args.find_max_safe:
        analysis = CutoffAnalysis(schedule)
        rows = []
        for p in args.p:
            k = max_safe_cutoff(schedule, p, analysis)
            rows.append({"p": p, "k": k, "r0": analysis.r0(p, k)})
            logger.info(f"p={p}: largest safe cutoff k={k}")
    else:
        rows = cutoff_sweep(schedule, args.p, args.k)
    return {"main": to_csv(rows, ["p", "k", "r0"])}


def cmd_simulate(args: argparse.Namespace) -> Outputs:
    """Monte-Carlo ensemble of the class-meeting epidemic."""
    config = SimConfig(
        schedule=load_schedule(args.schedule),
        p=args.p,
        quarantine_prob=args.quarantine,
        initial=args.initial,
        max_steps=args.max_steps,
        seed=args.seed,
        freeze_enrollment=args.freeze_enrollment,
    )
    traces = run_traces(config, args.runs, progress=getattr(args, "progress", False))
    stats = summarize(traces)

    outputs: Outputs = {
        "trace.csv": to_csv(stats.percentile_rows(), ["step", "week", "p25", "p50", "p75"]),
        "summary.csv": to_csv(
            [stats.summary_row()],
            [
                "runs", "p_no_community", "p_no_major",
                "final_size_p25", "final_size_p50", "final_size_p75", "final_size_mean",
            ],
        ),
    }
    if args.final_sizes:
        outputs["final_sizes.csv"] = to_csv(stats.final_size_rows(), ["run", "final_size"])
    if args.trace_run:
        outputs["run.csv"] = to_csv(traces[0].rows(), ["step", "week", "infectious", "cumulative"])
    return outputs


COMMANDS: dict[str, Callable[[argparse.Namespace], Outputs]] = {
    "dorm": cmd_dorm,
    "classes": cmd_classes,
    "cutoff": cmd_cutoff,
    "simulate": cmd_simulate,
}

# Arguments that say where results go, not what they are
_LOCATION_ARGS = {"command", "output", "output_dir", "manifest", "progress"}


def _params(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _LOCATION_ARGS}


def _write_outputs(args: argparse.Namespace, outputs: Outputs) -> None:
    params = _params(args)
    manifest = RunManifest(
        command=args.command,
        params=params,
        seed=params.get("seed"),
        checksum=checksum(outputs),
    )

    if args.command == "simulate":
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, body in outputs.items():
            (out_dir / name).write_text(body, encoding="utf-8")
            logger.info(f"Wrote {out_dir / name}")
        manifest.write(Path(args.manifest) if args.manifest else out_dir / "simulate.manifest")
        return

    body = outputs["main"]
    if args.output:
        path = Path(args.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body, encoding="utf-8")
        logger.info(f"Wrote {path}")
        manifest.write(Path(args.manifest) if args.manifest else path.with_name(path.name + ".manifest"))
    else:
        sys.stdout.write(body)
        sys.stdout.flush()
        manifest.write(Path(args.manifest) if args.manifest else Path(f"{args.command}.manifest"))


def cmd_replay(args: argparse.Namespace) -> int:
    manifest = RunManifest.read(Path(args.manifest))
    if manifest.command not in COMMANDS:
        raise ManifestError(f"manifest names unknown command '{manifest.command}'")
    replayed = argparse.Namespace(command=manifest.command, **manifest.params)
    digest = checksum(COMMANDS[manifest.command](replayed))
    if digest != manifest.checksum:
        raise ManifestError(f"replay checksum {digest} differs from recorded {manifest.checksum}")
    logger.info(f"Replay of '{manifest.command}' reproduced {digest}")
    print(digest)
    return 0


# ── Parser ───────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="campus-epi",
        description="Epidemic outcomes for dorm room occupancy and online-class cutoffs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output", help="CSV file (default: stdout)")
        p.add_argument("--manifest",
                       help="Manifest path (default: <output>.manifest, or <command>.manifest for stdout)")

    dorm = sub.add_parser("dorm", help="Large-epidemic probability for single or double rooms")
    dorm.add_argument("--variant", choices=["single", "double"], default="single")
    dorm.add_argument("--local", type=float_grid, default=[0.3, 0.5, 0.7, 0.9],
                      help="n*p_D (single) or 2*n1*p_D (double): list or start:stop:step")
    dorm.add_argument("--pl", type=float, default=0.7, help="Roommate infection probability (double rooms)")
    dorm.add_argument("--npg", type=float_grid, default=float_grid("0:3:0.05"),
                      help="N*p_G values: list or start:stop:step")
    dorm.add_argument("--gd-grid", action="store_true", help="Emit G_D(z) curves instead of zeta")
    add_output(dorm)

    classes = sub.add_parser("classes", help="R0 of a class schedule")
    classes.add_argument("--schedule", default="scenario1",
                         help="Preset (scenario1, scenario2, range10to120) or schedule file")
    classes.add_argument("--p", type=float_grid, default=[0.01], help="Infection probabilities")
    add_output(classes)

    cutoff = sub.add_parser("cutoff", help="R0 after moving large classes online")
    cutoff.add_argument("--schedule", default="range10to120")
    cutoff.add_argument("--p", type=float_grid, default=[0.004, 0.008, 0.012])
    cutoff.add_argument("--k", type=int_grid, default=int_grid("9:120"), help="Cutoffs: list or start:stop[:step]")
    cutoff.add_argument("--find-max-safe", action="store_true", help="Largest k with R0 <= 1, per p")
    add_output(cutoff)

    simulate = sub.add_parser("simulate", help="Monte-Carlo class-meeting epidemic")
    simulate.add_argument("--schedule", default="scenario1")
    simulate.add_argument("--p", type=float, default=0.01, help="Per-meeting infection probability")
    simulate.add_argument("--quarantine", type=float, default=0.5, help="Per-step quarantine probability")
    simulate.add_argument("--runs", type=int, default=1000)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--max-steps", type=int, default=500)
    simulate.add_argument("--initial", default="random", help="random | all | student:<i> | class:<j>")
    simulate.add_argument("--freeze-enrollment", action="store_true", help="One enrollment for all runs")
    simulate.add_argument("--final-sizes", action="store_true", help="Also write per-run final sizes")
    simulate.add_argument("--trace-run", action="store_true", help="Also write the first run's trajectory")
    simulate.add_argument("--output-dir", default="results")
    simulate.add_argument("--manifest", help="Manifest path (default: <output-dir>/simulate.manifest)")
    simulate.add_argument("--progress", action="store_true", help="Show a progress bar")

    replay = sub.add_parser("replay", help="Re-run a manifest and verify its checksum")
    replay.add_argument("--manifest", required=True)
    return parser


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command == "dorm":
        if not args.local or not args.npg:
            parser.error("--local and --npg need at least one value")
        if min(args.local) < 0 or min(args.npg) < 0:
            parser.error("--local and --npg must be nonnegative")
        if not 0.0 <= args.pl <= 1.0:
            parser.error("--pl must lie in [0, 1]")
    elif args.command in ("classes", "cutoff"):
        if not args.p or any(not 0.0 < p <= 1.0 for p in args.p):
            parser.error("--p values must lie in (0, 1]")
    elif args.command == "simulate":
        if args.runs < 1 or args.max_steps < 1:
            parser.error("--runs and --max-steps must be positive")


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)

    try:
        if args.command == "replay":
            return cmd_replay(args)
        outputs = COMMANDS[args.command](args)
        _write_outputs(args, outputs)
    except CampusEpiError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return exc.exit_code
    except (ValidationError, ValueError) as exc:
        logger.error(f"{args.command}: invalid parameters: {exc}")
        return 2
    return 0
