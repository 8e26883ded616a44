"""Retrieval scoring: MRR@K and Average Success@K over ranked page lists,
and the benchmark harness that renders the method-by-k results table.

A query scores the reciprocal rank of the first correct page inside the
top K (zero when absent); success is the binary version of the same check.
Gold labels are page indices: a hit means the page matches, not the box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import ValidationError
from .queryset import QueryRecord

DEFAULT_K_VALUES = (1, 5, 10, 25)

RankedRun = Sequence[tuple[Sequence[int], int]]  # (ranked pages, gold page) per query


def _validate_run(run: RankedRun) -> None:
    if not run:
        raise ValidationError("query set is empty")
    for position, (ranked, _) in enumerate(run):
        if len(set(ranked)) != len(ranked):
            raise ValidationError(f"query {position}: ranked page list contains duplicates")


def mrr_at_k(run: RankedRun, k: int) -> float:
    """Mean over queries of 1/rank of the first gold page within the top k."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    _validate_run(run)
    total = 0.0
    for ranked, gold in run:
        for position, page in enumerate(ranked[:k], start=1):
            if page == gold:
                total += 1.0 / position
                break
    return total / len(run)


def success_at_k(run: RankedRun, k: int) -> float:
    """Fraction of queries whose top k contains the gold page."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    _validate_run(run)
    hits = sum(1 for ranked, gold in run if gold in list(ranked[:k]))
    return hits / len(run)


@dataclass(frozen=True)
class MethodScores:
    """One table row: a labelled method with per-k metric values."""

    label: str
    mrr: dict[int, float]
    success: dict[int, float]


@dataclass(frozen=True)
class BenchmarkTable:
    k_values: tuple[int, ...]
    rows: tuple[MethodScores, ...]

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "rows": [
                {
                    "method": row.label,
                    "metrics": {
                        str(k): {
                            "mrr": row.mrr[k],
                            "success": row.success[k],
                            "mrr_display": f"{row.mrr[k]:.3f}",
                            "success_display": f"{row.success[k]:.3f}",
                        }
                        for k in self.k_values
                    },
                }
                for row in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def render_text(self) -> str:
        """Plain-text table: one method per row, MRR / Avg Success per k."""
        header = ["Method"] + [f"k={k} MRR" for k in self.k_values] + [
            f"k={k} Success" for k in self.k_values
        ]
        lines = ["\t".join(header)]
        for row in self.rows:
            cells = [row.label]
            cells += [f"{row.mrr[k]:.3f}" for k in self.k_values]
            cells += [f"{row.success[k]:.3f}" for k in self.k_values]
            lines.append("\t".join(cells))
        return "\n".join(lines)


SearchFunction = Callable[[str, int], Sequence[int]]
"""Maps (query text, k) to a deduplicated ranked page list."""


def run_benchmark(
    searchers: Mapping[str, SearchFunction],
    queryset: Sequence[QueryRecord],
    k_values: Sequence[int] = DEFAULT_K_VALUES,
) -> BenchmarkTable:
    """Execute every query against every method and score both metrics per k.

    Each searcher is called once per query with the largest k; smaller cutoffs
    reuse the prefix of the same ranking (top-k results are prefixes of
    top-k' results for k < k').
    """
    if not queryset:
        raise ValidationError("query set is empty")
    k_values = tuple(sorted(set(int(k) for k in k_values)))
    if not k_values or k_values[0] < 1:
        raise ValidationError(f"k values must be positive, got {k_values}")
    max_k = k_values[-1]
    rows = []
    for label, searcher in searchers.items():
        run = [(list(searcher(q.query_text, max_k)), q.gold_page_index) for q in queryset]
        rows.append(
            MethodScores(
                label=label,
                mrr={k: mrr_at_k(run, k) for k in k_values},
                success={k: success_at_k(run, k) for k in k_values},
            )
        )
    return BenchmarkTable(k_values=k_values, rows=tuple(rows))


def save_report(table: BenchmarkTable, path: str | Path) -> None:
    Path(path).write_text(table.to_json(), encoding="utf-8")
