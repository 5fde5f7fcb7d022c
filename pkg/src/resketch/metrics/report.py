"""Scoring and aggregation: pass rate, pass@1, structural-change tables.

Pass metrics cover every session.  Structural metrics (AST edit distance,
control-flow depth difference, BLEU) are computed between the seed program
and the final program of a session and only over pairs where both sides
parse; bucket means report how many pairs qualified.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from ..loop import SessionTrace
from .bleu import code_bleu
from .control_flow import cfg_depth_diff
from .tree_distance import (UnparseableSource, ast_to_tree, tree_distance,
                            tree_size)


@dataclass(frozen=True)
class ProblemScore:
    problem_id: str
    hidden_pass_fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.hidden_pass_fraction <= 1.0:
            raise ValueError(
                f"hidden_pass_fraction out of range: "
                f"{self.hidden_pass_fraction}")

    @property
    def solved(self) -> bool:
        return self.hidden_pass_fraction == 1.0


@dataclass(frozen=True)
class StructuralDelta:
    ast_edit_distance: int
    ast_edit_distance_normalized: float
    cfg_depth_diff: int
    bleu: float


def pass_rate(scores: Sequence[ProblemScore]) -> float:
    if not scores:
        raise ValueError("pass_rate over an empty score list")
    return sum(s.hidden_pass_fraction for s in scores) / len(scores)


def pass_at_1(scores: Sequence[ProblemScore]) -> float:
    if not scores:
        raise ValueError("pass_at_1 over an empty score list")
    return sum(1 for s in scores if s.solved) / len(scores)


def structural_delta(src_a: str, src_b: str) -> StructuralDelta | None:
    """Delta between two sources, or None when either side fails to parse."""
    try:
        tree_a = ast_to_tree(src_a)
        tree_b = ast_to_tree(src_b)
        depth = cfg_depth_diff(src_a, src_b)
    except UnparseableSource:
        return None
    distance = tree_distance(tree_a, tree_b)
    denom = max(tree_size(tree_a), tree_size(tree_b))
    return StructuralDelta(
        ast_edit_distance=distance,
        ast_edit_distance_normalized=distance / denom,
        cfg_depth_diff=depth,
        bleu=code_bleu(src_a, src_b),
    )


def score_trace(trace: SessionTrace) -> ProblemScore:
    return ProblemScore(problem_id=trace.problem_id,
                        hidden_pass_fraction=trace.hidden_pass_fraction)


def trace_delta(trace: SessionTrace) -> StructuralDelta | None:
    """Seed-vs-final structural change for one session."""
    if trace.seed is None or not trace.final_code:
        return None
    return structural_delta(trace.seed.code, trace.final_code)


@dataclass(frozen=True)
class BucketReport:
    bucket: str
    n_problems: int
    n_parseable: int
    pass_rate: float | None
    pass_at_1: float | None
    mean_ast_edit_distance: float | None
    mean_ast_edit_distance_normalized: float | None
    mean_cfg_depth_diff: float | None
    mean_bleu: float | None


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _bucket_report(label: str, traces: Sequence[SessionTrace]) -> BucketReport:
    scores = [score_trace(t) for t in traces]
    deltas = [d for d in (trace_delta(t) for t in traces) if d is not None]
    return BucketReport(
        bucket=label,
        n_problems=len(traces),
        n_parseable=len(deltas),
        pass_rate=pass_rate(scores) if scores else None,
        pass_at_1=pass_at_1(scores) if scores else None,
        mean_ast_edit_distance=_mean(
            [float(d.ast_edit_distance) for d in deltas]),
        mean_ast_edit_distance_normalized=_mean(
            [d.ast_edit_distance_normalized for d in deltas]),
        mean_cfg_depth_diff=_mean(
            [float(d.cfg_depth_diff) for d in deltas]),
        mean_bleu=_mean([d.bleu for d in deltas]),
    )


def aggregate(traces: Sequence[SessionTrace],
              buckets: Sequence[str] | None = None) -> list[BucketReport]:
    """Per-difficulty rows (requested or observed order) plus an 'all' row."""
    by_bucket: dict[str, list[SessionTrace]] = {}
    for trace in traces:
        by_bucket.setdefault(trace.difficulty, []).append(trace)
    if buckets is None:
        buckets = sorted(by_bucket)
    rows = [_bucket_report(label, by_bucket.get(label, []))
            for label in buckets]
    rows.append(_bucket_report("all", list(traces)))
    return rows


@dataclass(frozen=True)
class GrowthSplitReport:
    label: str
    count: int
    n_parseable: int
    mean_ast_edit_distance: float | None
    mean_ast_edit_distance_normalized: float | None
    mean_cfg_depth_diff: float | None
    mean_bleu: float | None


def _visible_growth(trace: SessionTrace) -> float | None:
    """Final-minus-seed visible pass fraction; None without a seed record."""
    if trace.seed is None:
        return None
    final_fraction = trace.seed.visible_pass_fraction
    for record in trace.iterations:
        if record.code == trace.final_code:
            final_fraction = record.visible_pass_fraction
    if trace.final_code == trace.seed.code:
        final_fraction = trace.seed.visible_pass_fraction
    return final_fraction - trace.seed.visible_pass_fraction


def growth_split(traces: Sequence[SessionTrace]) -> list[GrowthSplitReport]:
    """Structural means for sessions that improved a lot vs not at all.

    Growth is measured on visible pass fractions (hidden tests are judged
    once, at the end, so no hidden baseline exists).  Sessions with growth
    in (0, 0.5] fall in neither class and are omitted.
    """
    improved: list[SessionTrace] = []
    unchanged: list[SessionTrace] = []
    for trace in traces:
        growth = _visible_growth(trace)
        if growth is None:
            continue
        if growth > 0.5:
            improved.append(trace)
        elif growth == 0.0:
            unchanged.append(trace)
    rows = []
    for label, group in (("growth>0.5", improved), ("no-change", unchanged)):
        deltas = [d for d in (trace_delta(t) for t in group) if d is not None]
        rows.append(GrowthSplitReport(
            label=label,
            count=len(group),
            n_parseable=len(deltas),
            mean_ast_edit_distance=_mean(
                [float(d.ast_edit_distance) for d in deltas]),
            mean_ast_edit_distance_normalized=_mean(
                [d.ast_edit_distance_normalized for d in deltas]),
            mean_cfg_depth_diff=_mean(
                [float(d.cfg_depth_diff) for d in deltas]),
            mean_bleu=_mean([d.bleu for d in deltas]),
        ))
    return rows


# --- rendering ------------------------------------------------------------

def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def render_report(bucket_rows: Sequence[BucketReport],
                  growth_rows: Sequence[GrowthSplitReport]) -> str:
    lines = []
    header = (f"{'bucket':<12} {'n':>4} {'pass_rate':>9} {'pass@1':>7} "
              f"{'ast_ed':>8} {'ast_ed_n':>8} {'cfg_dd':>6} {'bleu':>7} "
              f"{'pairs':>5}")
    lines.append(header)
    lines.append("-" * len(header))
    for row in bucket_rows:
        lines.append(
            f"{row.bucket:<12} {row.n_problems:>4} "
            f"{_fmt(row.pass_rate):>9} {_fmt(row.pass_at_1):>7} "
            f"{_fmt(row.mean_ast_edit_distance, 2):>8} "
            f"{_fmt(row.mean_ast_edit_distance_normalized):>8} "
            f"{_fmt(row.mean_cfg_depth_diff, 2):>6} "
            f"{_fmt(row.mean_bleu):>7} {row.n_parseable:>5}")
    lines.append("")
    header2 = (f"{'growth class':<12} {'n':>4} {'ast_ed':>8} {'ast_ed_n':>8} "
               f"{'cfg_dd':>6} {'bleu':>7} {'pairs':>5}")
    lines.append(header2)
    lines.append("-" * len(header2))
    for row in growth_rows:
        lines.append(
            f"{row.label:<12} {row.count:>4} "
            f"{_fmt(row.mean_ast_edit_distance, 2):>8} "
            f"{_fmt(row.mean_ast_edit_distance_normalized):>8} "
            f"{_fmt(row.mean_cfg_depth_diff, 2):>6} "
            f"{_fmt(row.mean_bleu):>7} {row.n_parseable:>5}")
    return "\n".join(lines) + "\n"


def report_records(bucket_rows: Sequence[BucketReport],
                   growth_rows: Sequence[GrowthSplitReport]) -> str:
    """Machine-readable report: one canonical JSON document."""
    payload = {
        "buckets": [vars(row) for row in bucket_rows],
        "growth_split": [vars(row) for row in growth_rows],
    }
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"),
                      sort_keys=False)
