"""Retrieval pipelines: dialog (per text box), scene (per frame), and the
per-page baseline, plus aggregation of box-level hits into ranked pages.

Pages are ranked by their best-scoring box. The searcher overfetches raw
hits (factor 4, growing until enough distinct pages are found) so that a
page holding several strong boxes cannot crowd others out of the top k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import vector_index
from .annotations import PageAnnotation
from .embeddings import EmbeddingProviderSpec, EmbeddingVector, make_provider
from .errors import ProviderError, ValidationError
from .reading_order import order_page
from .vector_index import IndexEntry, IndexKind, SearchHit, VectorIndex

_MODE_KINDS = {
    "dialog": IndexKind.DIALOG,
    "scene": IndexKind.SCENE,
    "page_baseline": IndexKind.PAGE,
}


@dataclass(frozen=True)
class RetrievalConfig:
    mode: str = "dialog"  # dialog | scene | page_baseline
    k: int = 10
    provider: EmbeddingProviderSpec = field(default_factory=EmbeddingProviderSpec)
    aggregation: str = "max_score"
    overfetch: int = 4

    def __post_init__(self) -> None:
        if self.mode not in _MODE_KINDS:
            raise ValidationError(f"unknown retrieval mode {self.mode!r}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.aggregation != "max_score":
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if self.overfetch < 1:
            raise ValidationError(f"overfetch must be >= 1, got {self.overfetch}")


@dataclass(frozen=True)
class PageHit:
    """One ranked page with the box that earned its score."""

    page_index: int
    score: float
    box_id: str | None


@dataclass(frozen=True)
class RetrievalResult:
    pages: tuple[PageHit, ...]
    hits: tuple[SearchHit, ...]


def page_source_id(page_index: int, box_id: str | None = None) -> str:
    """Source-id convention shared by indexes and embedding files."""
    return f"p{page_index}" if box_id is None else f"p{page_index}/{box_id}"


def _dialog_entries(pages, provider) -> list[IndexEntry]:
    ids, texts, metadata = [], [], []
    for page in pages:
        for text in page.texts:
            ids.append(page_source_id(page.page_index, text.id))
            texts.append(text.text)
            metadata.append((page.page_index, text.id))
    if not hasattr(provider, "embed_texts") and hasattr(provider, "lookup"):
        vectors = provider.lookup(ids)
    elif hasattr(provider, "embed_texts"):
        vectors = provider.embed_texts(texts, ids=ids)
    else:
        raise ProviderError("provider supports neither text embedding nor lookup")
    return [
        IndexEntry(vector=v, page_index=page, kind=IndexKind.DIALOG, box_id=box)
        for v, (page, box) in zip(vectors, metadata)
    ]


def _region_entries(pages, provider, kind: IndexKind) -> list[IndexEntry]:
    """Per-frame (scene) or per-page (baseline) entries from stored vectors."""
    ids, metadata = [], []
    for page in pages:
        if kind is IndexKind.SCENE:
            for frame in page.frames:
                ids.append(page_source_id(page.page_index, frame.id))
                metadata.append((page.page_index, frame.id))
        else:
            ids.append(page_source_id(page.page_index))
            metadata.append((page.page_index, None))
    if hasattr(provider, "lookup"):
        vectors = provider.lookup(ids)
    elif hasattr(provider, "embed_images"):
        vectors = provider.embed_images(ids, ids=ids)
    else:
        raise ValidationError(
            f"{kind.value} indexing needs stored or remote image embeddings; "
            f"provider kind {getattr(provider, 'kind', '?')!r} offers neither"
        )
    return [
        IndexEntry(vector=v, page_index=page, kind=kind, box_id=box)
        for v, (page, box) in zip(vectors, metadata)
    ]


def _page_text_entries(pages, provider) -> list[IndexEntry]:
    """Baseline entries from whole-page transcripts (texts joined in reading order)."""
    ids, texts, metadata = [], [], []
    for page in pages:
        ids.append(page_source_id(page.page_index))
        texts.append(" ".join(entry.text for entry in order_page(page)))
        metadata.append(page.page_index)
    vectors = provider.embed_texts(texts, ids=ids)
    return [
        IndexEntry(vector=v, page_index=page, kind=IndexKind.PAGE, box_id=None)
        for v, page in zip(vectors, metadata)
    ]


def index_book(pages: list[PageAnnotation], cfg: RetrievalConfig, provider=None) -> VectorIndex:
    """Build the index for one book: one entry per text box, frame, or page."""
    provider = provider if provider is not None else make_provider(cfg.provider)
    if cfg.mode == "dialog":
        entries = _dialog_entries(pages, provider)
    elif cfg.mode == "scene":
        entries = _region_entries(pages, provider, IndexKind.SCENE)
    elif hasattr(provider, "embed_texts"):
        entries = _page_text_entries(pages, provider)
    else:
        entries = _region_entries(pages, provider, IndexKind.PAGE)
    if not entries:
        raise ValidationError(f"no {cfg.mode} entries found in {len(pages)} pages")
    return vector_index.build(entries)


def _aggregate_pages(hits: list[SearchHit], k: int) -> list[PageHit]:
    best: dict[int, SearchHit] = {}
    for hit in hits:  # hits arrive score-desc, ordinal-asc: first wins
        best.setdefault(hit.entry.page_index, hit)
    ranked = sorted(best.values(), key=lambda h: (-h.score, h.entry.page_index))
    return [
        PageHit(page_index=h.entry.page_index, score=h.score, box_id=h.entry.box_id)
        for h in ranked[:k]
    ]


def search(
    index: VectorIndex,
    query: str | EmbeddingVector | np.ndarray,
    cfg: RetrievalConfig,
    provider=None,
) -> RetrievalResult:
    """Embed the query, fetch raw hits, and aggregate them into ranked pages."""
    if len(index) == 0:
        raise ValidationError("cannot search an empty index")
    if isinstance(query, str):
        if not query.strip():
            raise ValidationError("query text must be non-empty")
        provider = provider if provider is not None else make_provider(cfg.provider)
        if not hasattr(provider, "embed_texts"):
            raise ProviderError(
                f"provider kind {getattr(provider, 'kind', '?')!r} cannot embed query text"
            )
        vector = provider.embed_texts([query])[0]
    else:
        vector = query

    fetch = min(cfg.k * cfg.overfetch, len(index))
    while True:
        hits = vector_index.query(index, vector, fetch)
        pages = _aggregate_pages(hits, cfg.k)
        if len(pages) >= cfg.k or fetch >= len(index):
            return RetrievalResult(pages=tuple(pages), hits=tuple(hits))
        fetch = min(fetch * 2, len(index))
