"""Retrieval engine and evaluation toolkit for multi-panel page corpora."""

from .annotations import (
    FrameAnnotation,
    PageAnnotation,
    SplitSpec,
    TextBoxAnnotation,
    parse_book,
    rescale_page,
    serialize_book,
    split_pages,
)
from .embeddings import EmbeddingProviderSpec, EmbeddingVector, embed_text_reference
from .geometry import Box, BoxCostConfig, SizeBucket, box_cost, giou, iou, size_bucket
from .matching import MatchResult, Prediction, hungarian, match_page
from .reading_order import OrderedTranscriptEntry, assign_texts, order_frames, order_page
from .retrieval import RetrievalConfig, RetrievalResult, index_book, search
from .retrieval_eval import mrr_at_k, run_benchmark, success_at_k
from .vector_index import IndexEntry, IndexKind, VectorIndex, build, query

__version__ = "0.1.0"

__all__ = [
    "Box",
    "BoxCostConfig",
    "EmbeddingProviderSpec",
    "EmbeddingVector",
    "FrameAnnotation",
    "IndexEntry",
    "IndexKind",
    "MatchResult",
    "OrderedTranscriptEntry",
    "PageAnnotation",
    "Prediction",
    "RetrievalConfig",
    "RetrievalResult",
    "SizeBucket",
    "SplitSpec",
    "TextBoxAnnotation",
    "VectorIndex",
    "assign_texts",
    "box_cost",
    "build",
    "embed_text_reference",
    "giou",
    "hungarian",
    "index_book",
    "iou",
    "match_page",
    "mrr_at_k",
    "order_frames",
    "order_page",
    "parse_book",
    "query",
    "rescale_page",
    "run_benchmark",
    "search",
    "serialize_book",
    "size_bucket",
    "split_pages",
    "success_at_k",
    "__version__",
]
