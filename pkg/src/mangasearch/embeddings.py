"""Embedding providers: the boundary behind which all neural encoders live.

Three provider kinds share one contract (unit-norm float32 vectors of a
declared dimension, or a loud failure):

* reference_text — a deterministic character n-gram hasher used for hermetic
  tests and demos; it makes the retrieval math exercisable without any model.
* file — precomputed vectors produced offline (OCR text or image crops),
  loaded from a binary file and looked up by source id.
* remote — an HTTP embedding service for text or image items.
"""

from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np
import requests

from .errors import (
    DimensionMismatchError,
    FileFormatError,
    NonFiniteValueError,
    ProviderError,
    TruncatedFileError,
    ValidationError,
)

EMBEDDING_FILE_MAGIC = b"MARUEMB1"
NORM_TOLERANCE = 1e-6
DEFAULT_TEXT_DIM = 384


@dataclass(frozen=True)
class EmbeddingVector:
    """Unit-norm float32 vector with a provenance id."""

    values: np.ndarray
    source_id: str = ""

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float32)  # private copy
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError(f"embedding must be a non-empty 1-d vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError(f"embedding {self.source_id!r} contains NaN or infinity")
        norm = float(np.linalg.norm(values.astype(np.float64)))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValidationError(
                f"embedding {self.source_id!r} is not unit norm: |v| = {norm:.8f}"
            )

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.source_id == other.source_id and np.array_equal(self.values, other.values)


def unit_vector(values, source_id: str = "") -> EmbeddingVector:
    """Normalize arbitrary finite values into an EmbeddingVector."""
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise NonFiniteValueError(f"vector {source_id!r} contains NaN or infinity")
    norm = float(np.linalg.norm(array))
    if norm == 0.0:
        raise ValidationError(f"vector {source_id!r} has zero norm and cannot be normalized")
    return EmbeddingVector(values=(array / norm).astype(np.float32), source_id=source_id)


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    """Declarative provider configuration resolved by make_provider."""

    kind: str = "reference_text"  # reference_text | file | remote
    dim: int = DEFAULT_TEXT_DIM
    path: str | None = None  # file kind: embedding file location
    endpoint: str | None = None  # remote kind: service base URL
    lenient: bool = False  # renormalize near-unit vectors instead of failing
    retries: int = 3
    backoff_seconds: float = 0.2

    def __post_init__(self) -> None:
        if self.kind not in ("reference_text", "file", "remote"):
            raise ValidationError(f"unknown provider kind {self.kind!r}")
        if self.dim < 8:
            raise ValidationError(f"embedding dim must be >= 8, got {self.dim}")
        if self.kind == "file" and not self.path:
            raise ValidationError("file provider requires a path")
        if self.kind == "remote" and not self.endpoint:
            raise ValidationError("remote provider requires an endpoint")


# ---------------------------------------------------------------------------
# reference text embedder
# ---------------------------------------------------------------------------

def _stable_bucket(gram: str, dim: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def embed_text_reference(text: str, dim: int = DEFAULT_TEXT_DIM, source_id: str = "") -> EmbeddingVector:
    """Deterministic text embedding from hashed character bigrams and trigrams.

    The string is wrapped in sentinel characters so one-character inputs
    still produce n-grams; empty or whitespace-only text maps to the fixed
    basis vector e_0. Identical strings always embed identically. No
    semantic paraphrase quality is claimed.
    """
    if dim < 8:
        raise ValidationError(f"embedding dim must be >= 8, got {dim}")
    counts = np.zeros(dim, dtype=np.float64)
    if text.strip() == "":
        counts[0] = 1.0
        return EmbeddingVector(values=counts.astype(np.float32), source_id=source_id)
    wrapped = "\x02" + text + "\x03"
    for size in (2, 3):
        for start in range(len(wrapped) - size + 1):
            counts[_stable_bucket(wrapped[start : start + size], dim)] += 1.0
    return unit_vector(counts, source_id=source_id)


class ReferenceTextEmbedder:
    """Provider wrapper around embed_text_reference."""

    kind = "reference_text"

    def __init__(self, dim: int = DEFAULT_TEXT_DIM):
        self.dim = dim

    def embed_texts(
        self, texts: Sequence[str], ids: Sequence[str] | None = None
    ) -> list[EmbeddingVector]:
        ids = ids if ids is not None else [""] * len(texts)
        return [embed_text_reference(t, self.dim, source_id=i) for t, i in zip(texts, ids)]


# ---------------------------------------------------------------------------
# embedding file format: magic, u32 dim, u64 count, then
# (u16 id length, utf-8 id, dim * f32) records; little-endian throughout
# ---------------------------------------------------------------------------

def _read_exact(handle: BinaryIO, size: int, what: str) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"file ended while reading {what} ({len(data)}/{size} bytes)")
    return data


def save_embeddings(vectors: Sequence[EmbeddingVector], path: str | Path) -> None:
    if not vectors:
        raise ValidationError("refusing to write an embedding file with no vectors")
    dim = vectors[0].dim
    with open(path, "wb") as handle:
        handle.write(EMBEDDING_FILE_MAGIC)
        handle.write(struct.pack("<IQ", dim, len(vectors)))
        for vector in vectors:
            if vector.dim != dim:
                raise DimensionMismatchError(
                    f"vector {vector.source_id!r} has dim {vector.dim}, file has dim {dim}"
                )
            encoded = vector.source_id.encode("utf-8")
            handle.write(struct.pack("<H", len(encoded)))
            handle.write(encoded)
            handle.write(vector.values.astype("<f4").tobytes())


def load_embeddings(
    path: str | Path, expected_dim: int | None = None, lenient: bool = False
) -> list[EmbeddingVector]:
    """Read an embedding file, validating every record.

    Strict mode rejects vectors whose norm is off by more than the tolerance;
    lenient mode renormalizes them (external encoders are near-unit but not
    exact). Dimension mismatches, non-finite values, and truncation raise
    distinct error kinds.
    """
    with open(path, "rb") as handle:
        magic = _read_exact(handle, len(EMBEDDING_FILE_MAGIC), "magic")
        if magic != EMBEDDING_FILE_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        dim, count = struct.unpack("<IQ", _read_exact(handle, 12, "header"))
        if expected_dim is not None and dim != expected_dim:
            raise DimensionMismatchError(f"{path}: file dim {dim} != expected {expected_dim}")
        vectors: list[EmbeddingVector] = []
        for _ in range(count):
            (id_length,) = struct.unpack("<H", _read_exact(handle, 2, "id length"))
            source_id = _read_exact(handle, id_length, "id").decode("utf-8")
            raw = _read_exact(handle, 4 * dim, f"vector {source_id!r}")
            values = np.frombuffer(raw, dtype="<f4").astype(np.float32)
            if not np.all(np.isfinite(values)):
                raise NonFiniteValueError(f"{path}: vector {source_id!r} has NaN or infinity")
            if lenient:
                vectors.append(unit_vector(values, source_id=source_id))
            else:
                vectors.append(EmbeddingVector(values=values, source_id=source_id))
        if handle.read(1):
            raise FileFormatError(f"{path}: trailing bytes after {count} records")
    return vectors


class FileEmbeddingProvider:
    """Precomputed embeddings addressed by source id."""

    kind = "file"

    def __init__(self, path: str | Path, expected_dim: int | None = None, lenient: bool = False):
        vectors = load_embeddings(path, expected_dim=expected_dim, lenient=lenient)
        self._by_id = {v.source_id: v for v in vectors}
        self.dim = vectors[0].dim if vectors else (expected_dim or 0)
        self.path = str(path)

    def lookup(self, ids: Sequence[str]) -> list[EmbeddingVector]:
        missing = [i for i in ids if i not in self._by_id]
        if missing:
            raise ProviderError(
                f"{self.path}: no embedding for {missing[0]!r} "
                f"({len(missing)} of {len(ids)} ids missing)"
            )
        return [self._by_id[i] for i in ids]

    def __len__(self) -> int:
        return len(self._by_id)


# ---------------------------------------------------------------------------
# remote embedding service client
# ---------------------------------------------------------------------------

@dataclass
class RemoteEmbeddingClient:
    """Client for the POST /embed service; order-preserving with retries."""

    endpoint: str
    dim: int
    lenient: bool = False
    retries: int = 3
    backoff_seconds: float = 0.2
    timeout_seconds: float = 30.0
    kind: str = field(default="remote", init=False)

    def embed(
        self, items: Sequence[str], item_kind: str = "text", ids: Sequence[str] | None = None
    ) -> list[EmbeddingVector]:
        if item_kind not in ("text", "image"):
            raise ValidationError(f"item kind must be 'text' or 'image', got {item_kind!r}")
        if not items:
            return []
        payload = {"kind": item_kind, "items": list(items)}
        url = self.endpoint.rstrip("/") + "/embed"
        response = self._post_with_retries(url, payload)
        return self._validate_response(response, len(items), ids)

    def embed_texts(
        self, texts: Sequence[str], ids: Sequence[str] | None = None
    ) -> list[EmbeddingVector]:
        return self.embed(texts, item_kind="text", ids=ids)

    def embed_images(
        self, crop_refs: Sequence[str], ids: Sequence[str] | None = None
    ) -> list[EmbeddingVector]:
        return self.embed(crop_refs, item_kind="image", ids=ids)

    def _post_with_retries(self, url: str, payload: dict) -> dict:
        delay = self.backoff_seconds
        last_error: Exception | str | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(delay)
                delay *= 2
            try:
                response = requests.post(url, json=payload, timeout=self.timeout_seconds)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code != 200:
                raise ProviderError(f"{url}: unexpected status {response.status_code}")
            try:
                return response.json()
            except ValueError as exc:
                raise ProviderError(f"{url}: response is not JSON: {exc}") from exc
        raise ProviderError(f"{url}: failed after {self.retries} attempts: {last_error}")

    def _validate_response(
        self, body: dict, expected_count: int, ids: Sequence[str] | None
    ) -> list[EmbeddingVector]:
        if not isinstance(body, dict) or "dim" not in body or "vectors" not in body:
            raise ProviderError(f"malformed response: expected dim/vectors keys, got {type(body)}")
        if body["dim"] != self.dim:
            raise DimensionMismatchError(f"service returned dim {body['dim']}, expected {self.dim}")
        rows = body["vectors"]
        if not isinstance(rows, list) or len(rows) != expected_count:
            raise ProviderError(
                f"malformed response: expected {expected_count} vectors, got "
                f"{len(rows) if isinstance(rows, list) else type(rows)}"
            )
        ids = ids if ids is not None else [""] * expected_count
        vectors = []
        for row, source_id in zip(rows, ids):
            values = np.asarray(row, dtype=np.float32)
            if values.shape != (self.dim,):
                raise DimensionMismatchError(
                    f"vector {source_id!r} has shape {values.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(values)):
                raise NonFiniteValueError(f"vector {source_id!r} has NaN or infinity")
            if self.lenient:
                vectors.append(unit_vector(values, source_id=source_id))
            else:
                vectors.append(EmbeddingVector(values=values, source_id=source_id))
        return vectors


def make_provider(spec: EmbeddingProviderSpec):
    """Instantiate the provider a spec describes."""
    if spec.kind == "reference_text":
        return ReferenceTextEmbedder(dim=spec.dim)
    if spec.kind == "file":
        return FileEmbeddingProvider(spec.path, expected_dim=spec.dim, lenient=spec.lenient)
    return RemoteEmbeddingClient(
        endpoint=spec.endpoint,
        dim=spec.dim,
        lenient=spec.lenient,
        retries=spec.retries,
        backoff_seconds=spec.backoff_seconds,
    )
