"""Evaluation query sets: sampled transcripts with a similarity-dedup filter,
manually written scene descriptions, and the bundled prompt templates used to
produce paraphrased/translated variants offline.

The dedup filter keeps a transcript only when its highest cosine similarity
to any *other* transcript stays below the threshold, so lines that recur
across pages (or have near-duplicates) never become queries with ambiguous
gold pages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AnnotationParseError, ValidationError

DEFAULT_SIMILARITY_THRESHOLD = 0.5
DEFAULT_QUERY_COUNT = 100

ORIGINS = ("exact", "paraphrased", "translated", "scene_manual")

PROMPT_NAMES = ("paraphrase_ja", "translate_en_to_ja", "translate_ja_to_en")
PROMPT_QUERY_SLOT = "[query]"


@dataclass(frozen=True)
class QueryRecord:
    query_text: str
    gold_page_index: int
    origin: str = "exact"

    def __post_init__(self) -> None:
        if not self.query_text:
            raise ValidationError("query_text must be non-empty")
        if self.gold_page_index < 0:
            raise ValidationError(f"gold_page_index must be non-negative, got {self.gold_page_index}")
        if self.origin not in ORIGINS:
            raise ValidationError(f"origin must be one of {ORIGINS}, got {self.origin!r}")


def max_other_similarities(vectors: Sequence) -> np.ndarray:
    """For each vector, the maximum cosine to any other vector (-inf if alone).

    Computed row-at-a-time with the same reduction a naive per-pair scan
    uses, so the retained set is reproducible bit-for-bit by an O(n^2) oracle.
    """
    matrix = np.vstack([v.values for v in vectors])
    n = matrix.shape[0]
    result = np.full(n, -np.inf)
    for i in range(n):
        sims = (matrix * matrix[i]).sum(axis=1)
        sims[i] = -np.inf
        if n > 1:
            result[i] = sims.max()
    return result


def build_dialog_queryset(
    transcripts: Sequence[tuple[str, int]],
    provider,
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
    n: int = DEFAULT_QUERY_COUNT,
    seed: int = 0,
) -> list[QueryRecord]:
    """Sample n dedup-filtered transcripts as exact-match queries.

    transcripts are (text, gold_page_index) pairs. A transcript survives the
    filter iff its max cosine similarity to every other transcript is
    strictly below the threshold; n survivors are then sampled with the seed.
    """
    if not (0 < threshold < 1):
        raise ValidationError(f"threshold must lie in (0,1), got {threshold}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not transcripts:
        raise ValidationError("transcript list is empty")
    texts = [t for t, _ in transcripts]
    vectors = provider.embed_texts(texts)
    max_other = max_other_similarities(vectors)
    survivors = [i for i in range(len(texts)) if max_other[i] < threshold]
    if len(survivors) < n:
        raise ValidationError(
            f"only {len(survivors)} of {len(transcripts)} transcripts survive the "
            f"similarity filter at threshold {threshold}; need {n}"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(survivors), size=n, replace=False)
    return [
        QueryRecord(
            query_text=transcripts[survivors[int(i)]][0],
            gold_page_index=transcripts[survivors[int(i)]][1],
            origin="exact",
        )
        for i in chosen
    ]


# ---------------------------------------------------------------------------
# query-set files: one JSON object per line {query, gold_page, origin}
# ---------------------------------------------------------------------------

def save_queryset(records: Sequence[QueryRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "query": record.query_text,
                        "gold_page": record.gold_page_index,
                        "origin": record.origin,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_queryset(
    path: str | Path,
    default_origin: str = "scene_manual",
    valid_pages: set[int] | None = None,
) -> list[QueryRecord]:
    """Load a query-set file; rows without an origin default to scene_manual.

    When valid_pages is given, gold pages must be members of it.
    """
    records: list[QueryRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationParseError(f"{path}:{line_number}: malformed JSON: {exc}") from exc
            if "gold_page" not in row:
                raise ValidationError(f"{path}:{line_number}: row is missing gold_page")
            if "query" not in row:
                raise ValidationError(f"{path}:{line_number}: row is missing query")
            record = QueryRecord(
                query_text=row["query"],
                gold_page_index=row["gold_page"],
                origin=row.get("origin", default_origin),
            )
            if valid_pages is not None and record.gold_page_index not in valid_pages:
                raise ValidationError(
                    f"{path}:{line_number}: gold page {record.gold_page_index} "
                    f"not present in the target book"
                )
            records.append(record)
    return records


# ---------------------------------------------------------------------------
# prompt templates (static assets with a [query] substitution slot)
# ---------------------------------------------------------------------------

def load_prompt(name: str) -> str:
    if name not in PROMPT_NAMES:
        raise ValidationError(f"unknown prompt {name!r}; available: {PROMPT_NAMES}")
    return resources.files("mangasearch").joinpath(f"assets/prompts/{name}.txt").read_text("utf-8")


def render_prompt(template: str, query: str) -> str:
    if PROMPT_QUERY_SLOT not in template:
        raise ValidationError(f"template has no {PROMPT_QUERY_SLOT} slot")
    return template.replace(PROMPT_QUERY_SLOT, query)
