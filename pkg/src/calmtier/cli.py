"""Command-line entry point: ``calmtier classify|simulate|tax|reproduce``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from calmtier import __version__
from calmtier.classifier import ClassificationError, Tier, classify, explain
from calmtier.engine import (
    EngineError,
    Mode,
    PartitionPlan,
    RunResult,
    enumerate_runs,
    inject_partition,
    run,
)
from calmtier.lattice import LatticeError
from calmtier.portfolio import (
    DomainError,
    EmptyPortfolio,
    TaxReport,
    estimate_f,
    load_portfolio,
    percent,
    tax_report,
)
from calmtier.report import ReproduceConfig, reproduce
from calmtier.task import TaskError, load_task_file

EXIT_CODES = {Tier.M: 0, Tier.M_O: 10, Tier.NM: 20}
EXIT_ERROR = 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse prints usage over several lines; we want one parsable line
    def error(self, message: str):
        raise CliError(message)


def _fraction(raw: str) -> Fraction:
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {raw!r}") from None


def _c_range(raw: str) -> tuple[Fraction, Fraction]:
    lo, sep, hi = raw.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {raw!r}")
    return _fraction(lo), _fraction(hi)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("--out", type=Path, help="write output here instead of stdout")
    common.add_argument("--seed", type=int, default=0)

    parser = _Parser(prog="calmtier", description=__doc__)
    parser.add_argument("--version", action="version", version=f"calmtier {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", parents=[common], help="assign a coordination tier")
    p.add_argument("paths", nargs="+", type=Path)

    p = sub.add_parser("simulate", parents=[common], help="execute a task spec")
    p.add_argument("--task", type=Path, required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode] + ["all"], default="all")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate every interleaving (sampled beyond the size limit)")
    p.add_argument("--partition", type=Path, help="partition plan JSON")
    p.add_argument("--trace", action="store_true", help="include message traces")

    p = sub.add_parser("tax", parents=[common], help="coordination tax of a portfolio")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--portfolio", type=Path)
    src.add_argument("--f", type=_fraction)
    cost = p.add_mutually_exclusive_group(required=True)
    cost.add_argument("--c", type=_fraction)
    cost.add_argument("--c-range", type=_c_range)

    p = sub.add_parser("reproduce", parents=[common], help="regenerate the full report")
    p.add_argument("--tax-only", action="store_true")
    p.add_argument("--limit", type=int, default=64,
                   help="sample size for specs too large to enumerate")
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --- classify -------------------------------------------------------------

def cmd_classify(args) -> int:
    results = []
    for path in args.paths:
        try:
            spec = load_task_file(path)
        except OSError as exc:
            raise CliError(f"{path}: {exc.strerror or exc}") from None
        results.append(classify(spec))
    if args.format == "json":
        text = _dumps({"schema": 1, "results": [c.to_json() for c in results]})
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task_id", "tier", "inferred_thompson", "defaulted"])
        for c in results:
            w.writerow([c.task_id, c.tier.value, c.inferred_thompson.value, c.defaulted])
        text = buf.getvalue()
    else:
        text = "\n".join(explain(c) for c in results) + "\n"
    _emit(text, args.out)
    return max(EXIT_CODES[c.tier] for c in results)


# --- simulate -------------------------------------------------------------

def _summary(runs: list[RunResult], exhaustive: bool) -> dict:
    valid = sum(r.valid for r in runs)
    cost = Fraction(sum(r.cost_units for r in runs), len(runs))
    return {"runs": len(runs), "valid": valid, "validity_rate": round(valid / len(runs), 6),
            "mean_cost": round(float(cost), 6), "exhaustive": exhaustive}


def cmd_simulate(args) -> int:
    try:
        spec = load_task_file(args.task)
    except OSError as exc:
        raise CliError(f"{args.task}: {exc.strerror or exc}") from None
    plan = None
    if args.partition is not None:
        if args.exhaustive:
            raise CliError("--partition cannot be combined with --exhaustive")
        try:
            plan = PartitionPlan.from_json(json.loads(args.partition.read_text("utf-8")))
        except OSError as exc:
            raise CliError(f"{args.partition}: {exc.strerror or exc}") from None
    if args.runs < 1:
        raise CliError("--runs must be at least 1")

    modes = list(Mode) if args.mode == "all" else [Mode(args.mode)]
    runs: list[RunResult] = []
    summary: dict = {}
    for mode in modes:
        if args.exhaustive:
            batch = enumerate_runs(spec, mode, args.runs, seed=args.seed)
        elif plan is not None:
            batch = [inject_partition(spec, mode, plan, seed=args.seed + i)
                     for i in range(args.runs)]
        else:
            batch = [run(spec, mode, seed=args.seed + i) for i in range(args.runs)]
        runs += batch
        summary[mode.value] = _summary(batch, args.exhaustive)
    if args.mode == "all":
        ratio = (Fraction(summary["orchestrated"]["mean_cost"])
                 / Fraction(summary["uncoordinated"]["mean_cost"]))
        summary["c_ratio"] = round(float(ratio), 6)

    payload = {"schema": 1, "task": spec.id,
               "runs": [r.to_json(with_trace=args.trace) for r in runs], "summary": summary}
    if args.format == "json" or args.out is not None:
        _emit(_dumps(payload), args.out)
    if args.format != "json":
        lines = [f"{spec.id}: {len(runs)} runs"]
        for mode in modes:
            s = summary[mode.value]
            lines.append(f"  {mode.value:<14} valid {s['valid']}/{s['runs']} "
                         f"({percent(Fraction(s['valid'], s['runs']))}), "
                         f"mean cost {s['mean_cost']:g}")
        if "c_ratio" in summary:
            lines.append(f"  c = {summary['c_ratio']:.3f}")
        sys.stdout.write("\n".join(lines) + "\n")
    return 0


# --- tax ------------------------------------------------------------------

def cmd_tax(args) -> int:
    n, f_ci = None, None
    if args.portfolio is not None:
        try:
            records = load_portfolio(args.portfolio.read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"{args.portfolio}: {exc.strerror or exc}") from None
        f, f_ci = estimate_f(records)
        n = len(records)
    else:
        f = args.f
    report: TaxReport = tax_report(f, args.c if args.c is not None else args.c_range,
                                   n=n, f_ci=f_ci)
    if args.format == "json":
        text = _dumps({"schema": 1, **report.to_json()})
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        body = report.to_json()
        w.writerow(list(body))
        w.writerow([json.dumps(v) if isinstance(v, list) else v for v in body.values()])
        text = buf.getvalue()
    else:
        lines = [f"f = {float(report.f):.4f}" + (f" (n = {n})" if n else "")]
        if report.f_ci is not None:
            lines.append(f"95% CI for f: [{report.f_ci[0]:.3f}, {report.f_ci[1]:.3f}]")
        if report.c_range is not None:
            lo, hi = report.c_range
            lines.append(f"c in [{float(lo):g}, {float(hi):g}] -> T in "
                         f"[{percent(report.T_range[0])}, {percent(report.T_range[1])}]")
        lines.append(f"T({float(report.f):g}, {float(report.c):g}) = {percent(report.T)}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


# --- reproduce ------------------------------------------------------------

def cmd_reproduce(args) -> int:
    bundle = reproduce(ReproduceConfig(sample_limit=args.limit, seed=args.seed,
                                       tax_only=args.tax_only))
    if args.out is not None:
        # a directory receives both renderings
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.txt").write_text(bundle.to_text(), encoding="utf-8")
        (args.out / "report.json").write_text(bundle.dumps(), encoding="utf-8")
    else:
        sys.stdout.write(bundle.dumps() if args.format == "json" else bundle.to_text())
    failed = [row.task for row in bundle.simulations if not row.boundary_ok]
    if failed:
        raise CliError(f"boundary mismatch for {', '.join(failed)}")
    return 0


COMMANDS = {"classify": cmd_classify, "simulate": cmd_simulate,
            "tax": cmd_tax, "reproduce": cmd_reproduce}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (CliError, TaskError, ClassificationError, EngineError, LatticeError,
            DomainError, EmptyPortfolio, ValueError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        sys.stderr.write(f"error: {msg}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
