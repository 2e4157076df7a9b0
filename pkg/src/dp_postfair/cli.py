"""Command-line entry point: CSV ingestion, audit runs, JSON/CSV reports.

Reports are serialized deterministically (fixed key order, floats at 17
significant digits), so identical configurations produce byte-identical
output regardless of worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .allocation import (
    AllocationMechanism,
    AllocationProblem,
    AllocationReport,
    allocation_audit,
    compare_mechanisms,
    true_allocation,
)
from .core import TrueDataset
from .mechanisms import NoiseKind, NoiseSpec, scale_from_budget
from .release_audit import (
    BiasReport,
    BoundsMethod,
    BoundsReport,
    PostProcess,
    bounds_empirical,
    bounds_gaussian,
    estimate_bias,
)

__all__ = ["RunConfig", "DatasetFormatError", "load_dataset", "run", "main",
           "DEFAULT_MASTER_SEED"]

# Fixed default so bare invocations reproduce; entropy is explicit opt-in.
DEFAULT_MASTER_SEED = 20100401

_EMPIRICAL_BOUNDS_MIN_TRIALS = 10_000


class DatasetFormatError(ValueError):
    """Input CSV violates the entity,count[,weight] format."""


def load_dataset(path: str | os.PathLike) -> TrueDataset:
    """Parse an `entity,count[,weight]` CSV into a TrueDataset.

    Row order is preserved.  Errors carry the offending line number and
    entity label.
    """
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: line 1: empty file") from None
        header = [h.strip().lower() for h in header]
        if header not in (["entity", "count"], ["entity", "count", "weight"]):
            raise DatasetFormatError(
                f"{path}: line 1: expected header 'entity,count[,weight]', got {','.join(header)!r}"
            )
        has_weight = len(header) == 3
        ids, counts, weights = [], [], []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore blank lines
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            entity = row[0].strip()
            if not entity:
                raise DatasetFormatError(f"{path}: line {lineno}: empty entity label")
            if entity in seen:
                raise DatasetFormatError(f"{path}: line {lineno}: duplicate entity {entity!r}")
            seen.add(entity)
            try:
                count = float(row[1])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: entity {entity!r}: bad count {row[1]!r}"
                ) from None
            if not math.isfinite(count) or count < 0:
                raise DatasetFormatError(
                    f"{path}: line {lineno}: entity {entity!r}: count must be non-negative"
                )
            weight = 1.0
            if has_weight:
                try:
                    weight = float(row[2])
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: entity {entity!r}: bad weight {row[2]!r}"
                    ) from None
                if not math.isfinite(weight) or weight <= 0:
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: entity {entity!r}: weight must be positive"
                    )
            ids.append(entity)
            counts.append(count)
            weights.append(weight)
    if len(ids) < 2:
        raise DatasetFormatError(f"{path}: need at least two entities, got {len(ids)}")
    return TrueDataset(ids, counts, weights)


@dataclass(frozen=True)
class RunConfig:
    """One audit run: command, dataset, mechanism, trials, seed, outputs."""

    command: str                      # release | alloc | bounds
    input_path: str
    mechanism: NoiseSpec
    trials: int = 100_000
    master_seed: int = DEFAULT_MASTER_SEED
    total: float | None = None        # release/bounds: defaults to sum of counts
    budget: float | None = None       # alloc: defaults to 1.0
    alloc_mechanism: str = "both"     # bl | pos | both
    output_path: str = "report.json"
    plot_data_path: str | None = None
    workers: int = 1                  # execution detail; never echoed

    def __post_init__(self):
        if self.command not in ("release", "alloc", "bounds"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.trials < 100:
            raise ValueError("trials must be >= 100")
        if self.alloc_mechanism not in ("bl", "pos", "both"):
            raise ValueError(f"unknown allocation mechanism {self.alloc_mechanism!r}")
        if self.command == "alloc" and self.plot_data_path and self.alloc_mechanism == "both":
            raise ValueError("--plot-data requires a single allocation mechanism")


# --- deterministic JSON ------------------------------------------------------

def _render(value, indent: int) -> str:
    pad = "  " * (indent + 1)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if not math.isfinite(f):
            raise ValueError("reports must contain only finite numbers")
        return format(f, ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        inner = ",\n".join(pad + _render(v, indent + 1) for v in value)
        return "[\n" + inner + "\n" + "  " * indent + "]"
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = ",\n".join(
            f"{pad}{json.dumps(str(k))}: {_render(v, indent + 1)}" for k, v in value.items()
        )
        return "{\n" + inner + "\n" + "  " * indent + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_report(document: dict) -> str:
    return _render(document, 0) + "\n"


# --- report -> dict ----------------------------------------------------------

def _mechanism_dict(spec: NoiseSpec) -> dict:
    out = {"kind": spec.kind.value, "scale": spec.scale}
    if spec.budget is not None:
        out["epsilon"] = spec.budget.epsilon
        out["delta"] = spec.budget.delta
        out["sensitivity"] = spec.budget.sensitivity
    return out


def _bias_dict(dataset: TrueDataset, report: BiasReport) -> dict:
    return {
        "post": report.post.value,
        "entity_ids": list(dataset.entity_ids),
        "per_entity_bias": report.per_entity_bias,
        "per_entity_stderr": report.per_entity_stderr,
        "alpha_fairness": report.alpha_fairness,
        "alpha_stderr": report.alpha_stderr,
        "trials": report.trials,
        "mechanism": _mechanism_dict(report.mechanism),
        "lower_bound": report.lower_bound,
        "upper_bound": report.upper_bound,
    }


def _bounds_dict(report: BoundsReport) -> dict:
    return {
        "method": report.method.value,
        "lower": report.lower,
        "upper": report.upper,
        "relu_bias_first": report.relu_bias_first,
        "relu_bias_last": report.relu_bias_last,
        "expected_negparts": report.expected_negparts,
        "data_range": report.data_range,
        "lower_stderr": report.lower_stderr,
        "upper_stderr": report.upper_stderr,
    }


def _alloc_dict(dataset: TrueDataset, report: AllocationReport) -> dict:
    return {
        "mechanism": report.mechanism.value,
        "entity_ids": list(dataset.entity_ids),
        "per_entity_bias": report.per_entity_bias,
        "per_entity_stderr": report.per_entity_stderr,
        "alpha_fairness": report.alpha_fairness,
        "alpha_stderr": report.alpha_stderr,
        "cost_of_privacy": report.cost_of_privacy,
        "cost_of_privacy_stderr": report.cost_of_privacy_stderr,
        "misallocated_funds": report.misallocated_funds,
        "trials": report.trials,
        "budget": report.budget,
        "degenerate_trials": report.degenerate_trials,
        "noise": _mechanism_dict(report.noise),
    }


def _config_echo(config: RunConfig, total: float | None, budget: float | None) -> dict:
    echo = {
        "command": config.command,
        "input_path": config.input_path,
        "mechanism": _mechanism_dict(config.mechanism),
        "trials": config.trials,
        "master_seed": config.master_seed,
        "output_path": config.output_path,
        "plot_data_path": config.plot_data_path,
    }
    if config.command in ("release", "bounds"):
        echo["total"] = total
    if config.command == "alloc":
        echo["budget"] = budget
        echo["alloc_mechanism"] = config.alloc_mechanism
    return echo


def _write_plot_csv(path: str, rows: list[tuple], with_funds: bool) -> None:
    header = ["entity", "true_count_or_share", "bias", "stderr"]
    if with_funds:
        header.append("misallocated_funds")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[0]] + [format(float(v), ".17g") for v in row[1:]])


def _plot_rows(dataset: TrueDataset, values: np.ndarray, bias: np.ndarray,
               stderr: np.ndarray, funds: np.ndarray | None) -> list[tuple]:
    order = np.argsort(values, kind="stable")
    rows = []
    for k in order:
        row = (dataset.entity_ids[k], values[k], bias[k], stderr[k])
        if funds is not None:
            row = row + (funds[k],)
        rows.append(row)
    return rows


def run(config: RunConfig) -> int:
    """Execute one configured audit; returns a process exit status."""
    try:
        dataset = load_dataset(config.input_path)
        total = budget = None
        document = {}

        if config.command in ("release", "bounds"):
            total = float(config.total) if config.total is not None else float(dataset.counts.sum())
            dataset = TrueDataset(dataset.entity_ids, dataset.counts, dataset.weights,
                                  total=total, consistent=None)

        if config.command == "release":
            bias_report = estimate_bias(
                dataset, config.mechanism, PostProcess.PI_S_PLUS,
                config.trials, config.master_seed, config.workers,
            )
            bounds_report = _bounds_for(dataset, config)
            if bounds_report is not None and bounds_report.lower <= bounds_report.upper:
                # Monte-Carlo noise can push the lower estimate past a
                # range-capped upper; echo the pair only when coherent (the
                # full bounds_report below always carries the raw estimates).
                bias_report = bias_report.with_bounds(bounds_report.lower, bounds_report.upper)
            document["config_echo"] = _config_echo(config, total, None)
            document["bias_report"] = _bias_dict(dataset, bias_report)
            if bounds_report is not None:
                document["bounds_report"] = _bounds_dict(bounds_report)
            if config.plot_data_path:
                rows = _plot_rows(dataset, dataset.counts, bias_report.per_entity_bias,
                                  bias_report.per_entity_stderr, None)
                _write_plot_csv(config.plot_data_path, rows, with_funds=False)

        elif config.command == "bounds":
            bounds_report = _bounds_for(dataset, config, required=True)
            document["config_echo"] = _config_echo(config, total, None)
            document["bounds_report"] = _bounds_dict(bounds_report)

        else:  # alloc
            budget = float(config.budget) if config.budget is not None else 1.0
            problem = AllocationProblem(dataset, budget)
            reports: list[AllocationReport] = []
            if config.alloc_mechanism == "both":
                cmp = compare_mechanisms(problem, config.mechanism, config.trials,
                                         config.master_seed, config.workers)
                reports = [cmp.baseline, cmp.projected]
            else:
                reports = [allocation_audit(problem, config.mechanism,
                                            AllocationMechanism(config.alloc_mechanism),
                                            config.trials, config.master_seed, config.workers)]
            document["config_echo"] = _config_echo(config, None, budget)
            document["allocation_reports"] = [_alloc_dict(dataset, r) for r in reports]
            if config.plot_data_path:
                report = reports[0]
                rows = _plot_rows(dataset, true_allocation(problem), report.per_entity_bias,
                                  report.per_entity_stderr, report.misallocated_funds)
                _write_plot_csv(config.plot_data_path, rows, with_funds=True)

        with open(config.output_path, "w", encoding="utf-8") as handle:
            handle.write(dumps_report(document))
        return 0
    except (ValueError, OSError) as exc:
        print(f"dp-postfair: error: {exc}", file=sys.stderr)
        return 1


def _bounds_for(dataset: TrueDataset, config: RunConfig, required: bool = False):
    spec = config.mechanism
    if spec.kind is NoiseKind.GAUSSIAN:
        return bounds_gaussian(dataset, spec.scale)
    if config.trials >= _EMPIRICAL_BOUNDS_MIN_TRIALS:
        return bounds_empirical(dataset, spec, config.trials, config.master_seed,
                                config.workers)
    if required:
        raise ValueError(
            f"empirical bounds need at least {_EMPIRICAL_BOUNDS_MIN_TRIALS} trials"
        )
    return None


# --- argument parsing ---------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dp-postfair",
        description="Quantify the disparate impact of private data-release "
                    "post-processing and downstream fund allocation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("release", "audit post-processed data release bias"),
        ("alloc", "audit downstream fund-allocation mechanisms"),
        ("bounds", "evaluate fairness-gap bounds only"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--input", required=True, help="dataset CSV: entity,count[,weight]")
        p.add_argument("--mechanism", required=True, choices=["laplace", "gaussian"])
        p.add_argument("--scale", type=float, help="noise scale (lambda or sigma)")
        p.add_argument("--epsilon", type=float, help="privacy budget epsilon")
        p.add_argument("--delta", type=float, default=0.0, help="privacy budget delta")
        p.add_argument("--sensitivity", type=float, default=1.0, help="query sensitivity")
        p.add_argument("--trials", type=int, default=100_000, help="Monte-Carlo trials")
        p.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED,
                       help="master seed (fixed default for reproducibility)")
        p.add_argument("--entropy", action="store_true",
                       help="draw the master seed from OS entropy instead")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads (never changes results)")
        p.add_argument("--out", required=True, help="output JSON report path")
        if name != "bounds":
            p.add_argument("--plot-data", default=None, help="optional per-entity CSV")
        if name in ("release", "bounds"):
            p.add_argument("--total", type=float, default=None,
                           help="public invariant total (default: sum of counts)")
        if name == "alloc":
            p.add_argument("--budget", type=float, default=None,
                           help="total budget B (default 1.0: share units)")
            p.add_argument("--alloc-mech", choices=["bl", "pos", "both"], default="both")
    return parser


def _spec_from_args(args) -> NoiseSpec:
    kind = NoiseKind(args.mechanism)
    if (args.scale is None) == (args.epsilon is None):
        raise ValueError("supply exactly one of --scale or --epsilon")
    if args.scale is not None:
        return NoiseSpec(kind, args.scale)
    return scale_from_budget(kind, args.epsilon, args.delta, args.sensitivity)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        seed = int.from_bytes(os.urandom(8), "little") if args.entropy else args.seed
        config = RunConfig(
            command=args.command,
            input_path=args.input,
            mechanism=_spec_from_args(args),
            trials=args.trials,
            master_seed=seed,
            total=getattr(args, "total", None),
            budget=getattr(args, "budget", None),
            alloc_mechanism=getattr(args, "alloc_mech", "both"),
            output_path=args.out,
            plot_data_path=getattr(args, "plot_data", None),
            workers=args.workers,
        )
    except ValueError as exc:
        print(f"dp-postfair: error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
