"""Join per-sample values across metric reports and correlate them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..core import MetricReport
from ..metrics import CorrelationResult, pearson_linfit


class EmptyJoinError(ValueError):
    pass


@dataclass
class TraceResult:
    correlations: list[CorrelationResult]
    columns: list[str]
    rows: list[tuple[int, ...]]  # (sample_id, value per column)

    def to_dict(self) -> dict:
        return {
            "correlations": [c.to_dict() for c in self.correlations],
            "columns": ["sample_id"] + self.columns,
            "rows": [list(r) for r in self.rows],
        }


def _scalar(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    return float(v)


def trace_errors(reports: Sequence[MetricReport], joins: Sequence[tuple[str, str]]) -> TraceResult:
    """Inner-join scalar per-sample values on sample id, then fit each requested pair.

    Reports are addressed by metric name. Samples with a missing or
    non-scalar value in any joined column are dropped.
    """
    by_name: dict[str, MetricReport] = {}
    for rep in reports:
        if rep.metric_name in by_name:
            raise ValueError(f"two reports named {rep.metric_name!r}; merge them before tracing")
        by_name[rep.metric_name] = rep
    columns: list[str] = []
    for x, y in joins:
        for name in (x, y):
            if name not in by_name:
                raise KeyError(f"no report for metric {name!r}; have {sorted(by_name)}")
            if name not in columns:
                columns.append(name)
    if not columns:
        raise ValueError("no joins requested")

    ids = set(by_name[columns[0]].per_sample)
    for name in columns[1:]:
        ids &= set(by_name[name].per_sample)
    rows = []
    for sid in sorted(ids):
        vals = [_scalar(by_name[name].per_sample[sid]) for name in columns]
        if all(v is not None for v in vals):
            rows.append((sid, *vals))
    if not rows:
        raise EmptyJoinError(f"no sample ids shared by {columns}")

    col = {name: k + 1 for k, name in enumerate(columns)}
    results = [
        pearson_linfit([r[col[x]] for r in rows], [r[col[y]] for r in rows], x, y) for x, y in joins
    ]
    return TraceResult(results, columns, rows)


def merge_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Concatenate same-metric reports from several cells; sample ids must not collide."""
    if not reports:
        raise ValueError("nothing to merge")
    name = reports[0].metric_name
    merged: dict[int, object] = {}
    for rep in reports:
        if rep.metric_name != name:
            raise ValueError(f"cannot merge {rep.metric_name!r} into {name!r}")
        clash = set(merged) & set(rep.per_sample)
        if clash:
            raise ValueError(f"sample ids {sorted(clash)[:5]} appear in more than one {name!r} report")
        merged.update(rep.per_sample)
    return MetricReport(name, merged, params=dict(reports[0].params))
