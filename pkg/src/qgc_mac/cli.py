"""Command-line interface for qgc-mac."""

import argparse
import json
import logging
import math
import os
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from . import __version__
from .bounds import (
    DEFAULT_REFINE_STEPS,
    DEFAULT_RESOLUTION,
    OuterSearchConfig,
    gp_outer_max,
    verify_decompositions,
    verify_ptp_table,
)
from .channels import BUILTIN_CHANNELS, DEFAULT_BINARY_BUDGETS, resolve_channel
from .errors import DomainError, QgcMacError, VerificationError
from .loader import BUILTIN_ASSIGNMENTS, parse_number
from .modrings import circular_convolve
from .qgcsim import ExperimentConfig, QgcSimulator, TrialStats, e1_trend_batches, load_experiment
from .regions import (
    INNER_APPROXIMATION,
    CombinedAssignment,
    GpAssignment,
    GpSearchConfig,
    QgcAssignment,
    combined_rates,
    gp_rates,
    gp_rates_audit,
    gp_search,
    group_code_sum_rate,
    qgc_sum_rate,
    region_hull,
    resolve_assignment,
    separation_report,
)

logger = logging.getLogger(__name__)

WORKERS_ENV = "QGC_MAC_WORKERS"
DEFAULT_OUTPUT_DIR = "results"
SIGNIFICANT_DIGITS = 12

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2

DEFAULT_ASSIGNMENTS = {"qgc": "lemma4", "group": "lemma4", "combined": "degenerate-qgc"}


def _significant(value: Any) -> Any:
    """Round every float in a JSON-able tree to 12 significant digits."""
    if isinstance(value, dict):
        return {str(k): _significant(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_significant(v) for v in value]
    if isinstance(value, np.ndarray):
        return _significant(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if not math.isfinite(value) else float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


@dataclass
class RunManifest:
    """Provenance record written next to every output file."""

    command: str
    config_path: str | None
    seed: int | None
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    output_paths: list[str] = field(default_factory=list)


class OutputWriter:
    """Writes reports under one directory, each with a ``.manifest.json``."""

    def __init__(self, output_dir: Path, command: str, config_path: str | None, seed: int | None):
        self.output_dir = Path(output_dir)
        self.command = command
        self.config_path = config_path
        self.seed = seed
        self.written: list[Path] = []

    def _manifest(self, path: Path) -> None:
        manifest = RunManifest(self.command, self.config_path, self.seed, output_paths=[str(path)])
        with open(path.with_name(path.name + ".manifest.json"), "w") as f:
            json.dump(asdict(manifest), f, indent=2)

    def _path(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / name
        self.written.append(path)
        return path

    def json(self, name: str, data: Any) -> Path:
        path = self._path(name)
        with open(path, "w") as f:
            json.dump(_significant(data), f, indent=2)
        self._manifest(path)
        logger.info("Wrote %s", path)
        return path

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=False, float_format=f"%.{SIGNIFICANT_DIGITS}g")
        self._manifest(path)
        logger.info("Wrote %s", path)
        return path


def _default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer, using 1 worker", WORKERS_ENV, value)
        return 1


def _sum_line_frame(value: float) -> pd.DataFrame:
    rate = max(value, 0.0) if math.isfinite(value) else 0.0
    return region_hull([(rate, 0.0), (0.0, rate)]).to_frame()


def _writer(args: argparse.Namespace, config_path: str | None, seed: int | None = None) -> OutputWriter:
    command = " ".join(str(a) for a in args.argv)
    return OutputWriter(args.output_dir, command, config_path, seed)


def cmd_region(args: argparse.Namespace) -> int:
    """Evaluate a rate region for an assignment or search the Gel'fand-Pinsker region."""
    ch = resolve_channel(args.channel, (args.tau1, args.tau2))
    name = args.assignment or DEFAULT_ASSIGNMENTS.get(args.kind)
    stem = f"region-{args.kind}-{ch.name}"

    if args.kind == "gp" and (args.search or name is None):
        cfg = GpSearchConfig(
            q_size=args.q_size,
            restarts=args.restarts,
            iterations=args.iterations,
            seed=args.seed,
            workers=args.workers,
        )
        result = gp_search(ch, cfg)
        out = _writer(args, args.channel, args.seed)
        out.csv(f"{stem}-frontier.csv", result.region.to_frame())
        out.json(
            f"{stem}.json",
            {
                "kind": "gp",
                "channel": ch.name,
                "label": INNER_APPROXIMATION,
                "best_sum_rate": result.best_sum_rate,
                "evaluations": result.evaluations,
                "best_bounds": result.best_bounds.to_dict() if result.best_bounds else None,
                "config": asdict(cfg),
            },
        )
        print(f"{INNER_APPROXIMATION}: max R1+R2 = {result.best_sum_rate:.12g}")
        return EXIT_OK

    a = resolve_assignment(name)
    out = _writer(args, name)
    if args.kind == "gp":
        if not isinstance(a, GpAssignment):
            raise DomainError(f"{name} is not a Gel'fand-Pinsker assignment")
        bounds = gp_rates(ch, a)
        report = {"kind": "gp", "channel": ch.name, **bounds.to_dict(), "audit": gp_rates_audit(ch, a)}
        frame = region_hull(bounds.vertices()).to_frame()
        headline = f"max R1+R2 = {bounds.max_sum():.12g}"
    elif args.kind == "combined":
        if isinstance(a, QgcAssignment):
            a = a.as_combined()
        if not isinstance(a, CombinedAssignment):
            raise DomainError(f"{name} is not a combined assignment")
        bounds = combined_rates(ch, a)
        report = {"kind": "combined", "channel": ch.name, **bounds.to_dict()}
        frame = region_hull(bounds.vertices()).to_frame()
        headline = f"max R1+R2 = {bounds.max_sum():.12g}"
    else:
        if not isinstance(a, QgcAssignment):
            raise DomainError(f"{name} is not a nested-QGC assignment")
        if args.kind == "qgc":
            rate = qgc_sum_rate(ch, a)
            report = {"kind": "qgc", "channel": ch.name, **rate.to_dict()}
            if abs(rate.discrepancy) > 1e-9:
                report["note"] = "the general formula and the simplified expression disagree"
            frame = _sum_line_frame(rate.value)
            headline = (
                f"simplified sum rate = {rate.simplified_value:.12g}, general = {rate.value:.12g}, "
                f"discrepancy = {rate.discrepancy:.12g}"
            )
        else:
            rate = group_code_sum_rate(ch, a)
            report = {"kind": "group", "channel": ch.name, **rate.to_dict()}
            frame = _sum_line_frame(rate.value)
            headline = f"group-code sum rate = {rate.value:.12g}"

    out.csv(f"{stem}-frontier.csv", frame)
    out.json(f"{stem}.json", report)
    print(headline)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Run one of the brute-force verifications; exit 1 on a violated bound."""
    out = _writer(args, None, args.seed)
    if args.target == "ptp-table":
        report = verify_ptp_table(args.resolution, args.refine_steps, workers=args.workers)
        out.csv("verify-ptp-table.csv", report.to_frame())
        data = report.to_dict()
        witnesses = [row.to_dict() for row in report.failures()]
    elif args.target == "gp-outer":
        cfg = OuterSearchConfig(random_candidates=args.budget, seed=args.seed, workers=args.workers)
        report = gp_outer_max(resolve_channel(args.channel), cfg)
        data = report.to_dict()
        witnesses = [] if report.passed else [report.stochastic.to_dict()]
    else:
        report = verify_decompositions(args.resolution)
        out.csv("verify-decompositions.csv", report.to_frame())
        data = report.to_dict()
        witnesses = []
    out.json(f"verify-{args.target}.json", data)

    if report.passed:
        print(f"{args.target}: all checked bounds hold")
        return EXIT_OK
    print(f"{args.target}: verification failed", file=sys.stderr)
    for witness in witnesses:
        print(json.dumps(_significant(witness)), file=sys.stderr)
    return EXIT_VERIFICATION


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulate the nested-QGC scheme on Example 1."""
    config = load_experiment(args.config)
    seed = config.seed if args.seed is None else args.seed
    trials = config.trials if args.trials is None else args.trials
    config = ExperimentConfig(config.n_list, config.rates, trials, seed)
    simulator = QgcSimulator(workers=args.workers)
    out = _writer(args, str(args.config), seed)

    if args.covering:
        frame = simulator.covering_experiment(
            config.n_list, args.offset, trials, seed, config.rates.epsilon_c
        )
        out.csv("covering.csv", frame)
        print(frame.to_string(index=False))
        return EXIT_OK

    stats = simulator.run(config)
    frame = TrialStats.to_frame(stats)
    out.csv("simulate-stats.csv", frame)
    out.json(
        "simulate.json",
        {
            "config": config.to_document(),
            "e1_non_increasing": bool(e1_trend_batches([stats])) if stats else None,
            "stats": [s.to_dict() for s in stats],
        },
    )
    print(frame.to_string(index=False) if len(frame) else "no trials run")
    return EXIT_OK


def _parse_vector(text: str, label: str) -> np.ndarray:
    return np.array([parse_number(item, f"{label}[{i}]") for i, item in enumerate(text.split(","))])


def cmd_convolve(args: argparse.Namespace) -> int:
    """Circular convolution of two pmfs on Z_m."""
    pa = _parse_vector(args.pa, "pa")
    pb = _parse_vector(args.pb, "pb")
    result = circular_convolve(pa, pb)
    _writer(args, None).json("convolve.json", {"pa": pa, "pb": pb, "convolution": result})
    print(",".join(f"{v:.12g}" for v in result))
    return EXIT_OK


def cmd_separation(args: argparse.Namespace) -> int:
    """Best-found GP sum rate against the nested-QGC sum rate on Example 1."""
    cfg = GpSearchConfig(restarts=args.restarts, iterations=args.iterations, seed=args.seed, workers=args.workers)
    report = separation_report(cfg)
    _writer(args, None, args.seed).json("separation.json", report)
    print(
        f"GP {report['gp_label']}: {report['gp_best_sum_rate']:.12g}; "
        f"nested QGC: {report['qgc_simplified_sum_rate']:.12g}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="enable debug logging")
    common.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help=f"worker processes (default: ${WORKERS_ENV} or 1)",
    )
    common.add_argument("--output-dir", type=Path, default=Path(DEFAULT_OUTPUT_DIR), help="report directory")

    parser = argparse.ArgumentParser(
        prog="qgc-mac",
        description="Rate regions, bound verification and nested-QGC simulation for the MAC with states",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    region = sub.add_parser("region", parents=[common], help="evaluate or search a rate region")
    region.add_argument("kind", choices=("gp", "qgc", "combined", "group"))
    region.add_argument("--channel", default="example1", help=f"one of {BUILTIN_CHANNELS} or a document path")
    region.add_argument("--assignment", help=f"one of {BUILTIN_ASSIGNMENTS} or a document path")
    region.add_argument("--search", action="store_true", help="search Gel'fand-Pinsker assignments")
    region.add_argument("--tau1", type=float, default=DEFAULT_BINARY_BUDGETS[0], help="binary-dirty budget 1")
    region.add_argument("--tau2", type=float, default=DEFAULT_BINARY_BUDGETS[1], help="binary-dirty budget 2")
    region.add_argument("--q-size", type=int, default=2)
    region.add_argument("--restarts", type=int, default=8)
    region.add_argument("--iterations", type=int, default=300)
    region.add_argument("--seed", type=int, default=0)
    region.set_defaults(handler=cmd_region)

    verify = sub.add_parser("verify", parents=[common], help="brute-force verification of entropy bounds")
    verify.add_argument("target", choices=("ptp-table", "gp-outer", "decompositions"))
    verify.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    verify.add_argument("--refine-steps", type=int, default=DEFAULT_REFINE_STEPS)
    verify.add_argument("--budget", type=lambda s: int(float(s)), default=100_000, help="random candidates")
    verify.add_argument("--channel", default="example1")
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(handler=cmd_verify)

    simulate = sub.add_parser("simulate", parents=[common], help="Monte-Carlo simulation of Example 1")
    simulate.add_argument("--config", default="example1", help="bundled experiment name or document path")
    simulate.add_argument("--trials", type=int, help="override the configured trial count")
    simulate.add_argument("--seed", type=int, help="override the configured seed")
    simulate.add_argument("--covering", action="store_true", help="run the covering A/B check instead")
    simulate.add_argument("--offset", type=float, default=0.1, help="relative bin-rate offset for --covering")
    simulate.set_defaults(handler=cmd_simulate)

    convolve = sub.add_parser("convolve", parents=[common], help="circular convolution of two pmfs")
    convolve.add_argument("--pa", required=True, help="comma-separated pmf, fractions allowed")
    convolve.add_argument("--pb", required=True, help="comma-separated pmf, fractions allowed")
    convolve.set_defaults(handler=cmd_convolve)

    separation = sub.add_parser("separation", parents=[common], help="GP search against the nested-QGC rate")
    separation.add_argument("--restarts", type=int, default=8)
    separation.add_argument("--iterations", type=int, default=300)
    separation.add_argument("--seed", type=int, default=0)
    separation.set_defaults(handler=cmd_separation)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for the ``qgc-mac`` console script."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = ["qgc-mac", *argv]

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args)
    except VerificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps(_significant(exc.witness)), file=sys.stderr)
        return EXIT_VERIFICATION
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except (QgcMacError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
