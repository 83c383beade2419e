"""Command-line entry point: ``ctxrel strokes | annotate | analyze``.

Every command is idempotent and deterministic given (inputs, config,
seed). Option precedence is flags > config file > defaults, and the
resolved configuration is dumped into the analyze run manifest so a run
can be reproduced from its report directory alone.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .corpus import load_corpus, load_stroke_table, word_stroke_count, UnknownCharacter
from .embeddings import load_embeddings
from .gam import LambdaSearch
from .pipeline import FitConfig, RELEVANCE_METRICS, run_study
from .relevance import (
    PROXIMITY_WEIGHTS,
    UNIFORM_WEIGHTS,
    WeightTable,
    annotate_corpus,
    parse_weight_file,
    read_metric_records,
    write_metric_records,
)
from .report import emit_report

ANALYZABLE_METRICS = RELEVANCE_METRICS + ("surprisal",)


@dataclass
class RunConfig:
    """Resolved settings for one command invocation."""

    embeddings: Optional[str] = None
    corpus: Optional[str] = None
    strokes_table: Optional[str] = None
    metrics_csv: Optional[str] = None
    out: Optional[str] = None
    method: str = "cosine"
    weights: str = "proximity"
    seed: int = 0
    boundary_policy: str = "compute_available"
    expect_header: bool = False
    k_smooth: int = 10
    k_tensor: int = 5
    lambda_min: float = 1e-4
    lambda_max: float = 1e6
    lambda_points: int = 30
    lambda_sweeps: int = 3
    metric: Optional[tuple[str, ...]] = None

    def weight_table(self) -> WeightTable:
        if self.weights == "proximity":
            return PROXIMITY_WEIGHTS
        if self.weights == "uniform":
            return UNIFORM_WEIGHTS
        with open(self.weights, "rb") as fh:
            return parse_weight_file(fh)

    def fit_config(self) -> FitConfig:
        return FitConfig(
            k_smooth=self.k_smooth,
            k_tensor=self.k_tensor,
            search=LambdaSearch(
                n_points=self.lambda_points,
                lam_min=self.lambda_min,
                lam_max=self.lambda_max,
                sweeps=self.lambda_sweeps,
            ),
        )

    def as_manifest_dict(self) -> dict[str, object]:
        d = dataclasses.asdict(self)
        d["metric"] = "" if self.metric is None else ",".join(self.metric)
        return {k: ("" if v is None else v) for k, v in d.items()}


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES.get(name)
    if kind is None:
        raise ValueError(f"unknown config key {name!r}")
    if name in ("seed", "k_smooth", "k_tensor", "lambda_points", "lambda_sweeps"):
        return int(raw)
    if name in ("lambda_min", "lambda_max"):
        return float(raw)
    if name == "expect_header":
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"config key {name}: expected a boolean, got {raw!r}")
    if name == "metric":
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    return raw


def _parse_config_file(path: str) -> dict[str, object]:
    overrides: dict[str, object] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
        overrides[key.strip()] = _coerce(key.strip(), value.strip())
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxrel",
        description=(
            "Annotate segmented corpora with contextual semantic relevance "
            "metrics and evaluate their predictive power for reading times."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file (flags take precedence)")
        p.add_argument("--embeddings", help="word2vec-style embedding text file")
        p.add_argument("--corpus", help="corpus TSV file")
        p.add_argument("--strokes-table", dest="strokes_table",
                       help="character stroke table TSV")
        p.add_argument("--out", help="output file (strokes, annotate) or directory (analyze)")
        p.add_argument("--method", choices=("cosine", "correlation"),
                       help="pairwise relevance method (default cosine)")
        p.add_argument("--weights",
                       help="'proximity' (default), 'uniform', or a key=value weight file")
        p.add_argument("--seed", type=int, help="seed recorded in the run manifest")
        p.add_argument("--boundary-policy", dest="boundary_policy",
                       choices=("compute-available", "drop-initial"),
                       help="sentence-initial tokens: compute with available "
                            "neighbors (default) or drop their metrics")
        p.add_argument("--expect-header", dest="expect_header", action="store_const",
                       const=True, default=None,
                       help="embedding file starts with a '<count> <dim>' line")

    strokes = sub.add_parser("strokes", help="append a stroke_count column to a corpus TSV")
    add_shared(strokes)

    annotate = sub.add_parser("annotate", help="compute per-token relevance metrics CSV")
    add_shared(annotate)

    analyze = sub.add_parser("analyze", help="model comparisons and report emission")
    add_shared(analyze)
    analyze.add_argument("--metrics-csv", dest="metrics_csv",
                         help="metrics CSV produced by 'annotate'")
    analyze.add_argument("--metric", action="append", choices=ANALYZABLE_METRICS,
                         help="restrict the comparison to this metric (repeatable)")
    analyze.add_argument("--k-smooth", dest="k_smooth", type=int,
                         help="basis size for metric smooths (default 10)")
    analyze.add_argument("--k-tensor", dest="k_tensor", type=int,
                         help="marginal basis size for the control tensor (default 5)")
    analyze.add_argument("--lambda-min", dest="lambda_min", type=float)
    analyze.add_argument("--lambda-max", dest="lambda_max", type=float)
    analyze.add_argument("--lambda-points", dest="lambda_points", type=int)
    analyze.add_argument("--lambda-sweeps", dest="lambda_sweeps", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        for key, value in _parse_config_file(args.config).items():
            setattr(config, key, value)
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(config, f.name, tuple(value) if f.name == "metric" else value)
    config.boundary_policy = config.boundary_policy.replace("-", "_")
    return config


def _require(config: RunConfig, *names: str) -> None:
    for name in names:
        value = getattr(config, name)
        if value is None:
            raise ValueError(f"--{name.replace('_', '-')} is required for this command")
        if name != "out" and not Path(value).exists():
            raise ValueError(f"--{name.replace('_', '-')}: no such file: {value}")


def cmd_strokes(config: RunConfig) -> None:
    """Pass the corpus TSV through, appending a stroke_count column."""
    _require(config, "corpus", "strokes_table", "out")
    table = load_stroke_table(config.strokes_table)
    unknown = 0
    total = 0
    with open(config.corpus, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or "surface" not in header:
            raise ValueError("corpus file lacks a 'surface' column")
        surface_idx = header.index("surface")
        rows_out = [header + ["stroke_count"]]
        for row in reader:
            if not row:
                continue
            total += 1
            try:
                count = str(word_stroke_count(row[surface_idx], table))
            except UnknownCharacter:
                unknown += 1
                count = ""
            rows_out.append(row + [count])
    with open(config.out, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, delimiter="\t", lineterminator="\n").writerows(rows_out)
    print(f"strokes: {total} tokens, {unknown} with unknown characters -> {config.out}")


def cmd_annotate(config: RunConfig) -> None:
    """Compute the four relevance metrics per token, write metrics CSV."""
    _require(config, "embeddings", "corpus", "out")
    table, load_diag = load_embeddings(config.embeddings, expect_header=config.expect_header)
    corpus = load_corpus(config.corpus)
    strokes = load_stroke_table(config.strokes_table) if config.strokes_table else None
    records, diag = annotate_corpus(
        corpus,
        table,
        stroke_table=strokes,
        method=config.method,
        weights=config.weight_table(),
        boundary_policy=config.boundary_policy,
    )
    Path(config.out).write_text(write_metric_records(records), encoding="utf-8", newline="")
    covered = diag.tokens - diag.oov_targets
    print(
        f"annotate: {diag.tokens} tokens, {covered} in vocabulary "
        f"({100.0 * covered / max(diag.tokens, 1):.1f}%), "
        f"{diag.oov_targets} OOV targets, "
        f"{diag.unknown_char_tokens} tokens with unknown characters; "
        f"embeddings: {table.count} vectors of dim {table.dim} "
        f"({load_diag.malformed_lines} malformed, {load_diag.duplicate_tokens} duplicate lines)"
    )
    print(f"metrics written to {config.out}")


def cmd_analyze(config: RunConfig) -> None:
    """Run the comparison protocol on a metrics CSV, emit the report."""
    _require(config, "metrics_csv", "out")
    with open(config.metrics_csv, "rb") as fh:
        records = read_metric_records(fh)
    study = run_study(
        records,
        metric_names=list(config.metric) if config.metric else None,
        config=config.fit_config(),
    )
    written = emit_report(
        study,
        config.out,
        config=config.as_manifest_dict(),
        extra_manifest={"records": len(records)},
    )
    for result in study.comparisons:
        print(
            f"analyze: {result.metric_name} x {result.response_name}: "
            f"delta_aic={result.delta_aic:.3f} n={result.n_used} "
            f"edf={result.metric_edf:.2f}"
        )
    print(f"report: {len(written)} files in {config.out}")


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "strokes":
            cmd_strokes(config)
        elif args.command == "annotate":
            cmd_annotate(config)
        else:
            cmd_analyze(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
