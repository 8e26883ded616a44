"""The searchable store: a row matrix of unit vectors with metadata.

Queries are exact brute-force cosine similarity (one vectorized pass over
the matrix) with deterministic tie-breaking; at the corpus sizes this
serves (roughly ten thousand rows per book) that is faster than any index
maintenance would be. The file format carries a trailing CRC-64 so silent
corruption is detected on load.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .embeddings import EmbeddingVector
from .errors import (
    ChecksumError,
    DimensionMismatchError,
    FileFormatError,
    TruncatedFileError,
    ValidationError,
)

INDEX_FILE_MAGIC = b"MARUIDX1"
INDEX_FILE_VERSION = 1


class IndexKind(enum.Enum):
    DIALOG = "dialog"
    SCENE = "scene"
    PAGE = "page"


_KIND_CODES = {IndexKind.DIALOG: 1, IndexKind.SCENE: 2, IndexKind.PAGE: 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class IndexEntry:
    """One searchable row: a vector plus where it came from."""

    vector: EmbeddingVector
    page_index: int
    kind: IndexKind
    box_id: str | None = None

    def __post_init__(self) -> None:
        if self.page_index < 0:
            raise ValidationError(f"page_index must be non-negative, got {self.page_index}")


@dataclass(frozen=True)
class SearchHit:
    entry: IndexEntry
    score: float
    rank: int
    ordinal: int  # position of the entry within the index


class VectorIndex:
    """Immutable row-matrix index; build once, query from any thread."""

    def __init__(self, entries: Sequence[IndexEntry], matrix: np.ndarray):
        self.entries: tuple[IndexEntry, ...] = tuple(entries)
        self._matrix = matrix  # float32, one row per entry, C-contiguous

    @property
    def dim(self) -> int:
        return int(self._matrix.shape[1])

    @property
    def kind(self) -> IndexKind:
        return self.entries[0].kind

    def __len__(self) -> int:
        return len(self.entries)


def build(entries: Sequence[IndexEntry]) -> VectorIndex:
    """Assemble entries into a queryable index, validating uniformity."""
    if not entries:
        raise ValidationError("cannot build an index from zero entries")
    dim = entries[0].vector.dim
    kind = entries[0].kind
    for position, entry in enumerate(entries):
        if entry.vector.dim != dim:
            raise DimensionMismatchError(
                f"entry {position} has dim {entry.vector.dim}, index has dim {dim}"
            )
        if entry.kind is not kind:
            raise ValidationError(
                f"entry {position} has kind {entry.kind.value}, index has kind {kind.value}"
            )
    matrix = np.vstack([entry.vector.values for entry in entries])
    return VectorIndex(entries, np.ascontiguousarray(matrix, dtype=np.float32))


def query(index: VectorIndex, x: EmbeddingVector | np.ndarray, k: int) -> list[SearchHit]:
    """Exact top-k rows by cosine, ties broken by lower entry ordinal.

    Scores are computed as a per-row reduction over the product matrix, which
    makes them bit-identical to a row-at-a-time dot product.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    vector = x.values if isinstance(x, EmbeddingVector) else np.asarray(x, dtype=np.float32)
    if vector.shape != (index.dim,):
        raise DimensionMismatchError(
            f"query has shape {vector.shape}, index expects ({index.dim},)"
        )
    scores = (index._matrix * vector).sum(axis=1)
    n = len(index)
    take = min(k, n)

    if take == n:
        chosen = np.arange(n)
    else:
        boundary = np.argpartition(-scores, take - 1)[:take]
        threshold = scores[boundary].min()
        above = np.flatnonzero(scores > threshold)
        tied = np.flatnonzero(scores == threshold)
        chosen = np.concatenate([above, tied[: take - above.size]])

    order = chosen[np.lexsort((chosen, -scores[chosen]))]
    return [
        SearchHit(entry=index.entries[i], score=float(scores[i]), rank=rank, ordinal=int(i))
        for rank, i in enumerate(int(i) for i in order)
    ]


# ---------------------------------------------------------------------------
# CRC-64 (XZ polynomial, reflected), table driven
# ---------------------------------------------------------------------------

def _crc64_table() -> list[int]:
    poly = 0xC96C5795D7870F42
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC64_TABLE = _crc64_table()


def crc64(data: bytes, crc: int = 0) -> int:
    crc ^= 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc = _CRC64_TABLE[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


# ---------------------------------------------------------------------------
# persistence: magic, u32 version, u32 dim, u8 kind, u64 count, records,
# trailing u64 CRC-64 over everything before it; little-endian
# ---------------------------------------------------------------------------

def save(index: VectorIndex, path: str | Path) -> None:
    chunks = [
        INDEX_FILE_MAGIC,
        struct.pack(
            "<IIBQ", INDEX_FILE_VERSION, index.dim, _KIND_CODES[index.kind], len(index)
        ),
    ]
    for entry in index.entries:
        box = entry.box_id.encode("utf-8") if entry.box_id is not None else None
        source = entry.vector.source_id.encode("utf-8")
        chunks.append(struct.pack("<QB", entry.page_index, 1 if box is not None else 0))
        if box is not None:
            chunks.append(struct.pack("<H", len(box)))
            chunks.append(box)
        chunks.append(struct.pack("<H", len(source)))
        chunks.append(source)
        chunks.append(entry.vector.values.astype("<f4").tobytes())
    body = b"".join(chunks)
    Path(path).write_bytes(body + struct.pack("<Q", crc64(body)))


def _read_exact(handle: BinaryIO, size: int, what: str) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"index file ended while reading {what} ({len(data)}/{size} bytes)")
    return data


def load(path: str | Path) -> VectorIndex:
    """Read an index file back; entries, order, and vectors are bit-identical."""
    blob = Path(path).read_bytes()
    if len(blob) < len(INDEX_FILE_MAGIC) + 17 + 8:
        raise TruncatedFileError(f"{path}: too short to be an index file ({len(blob)} bytes)")
    body, stored = blob[:-8], struct.unpack("<Q", blob[-8:])[0]
    actual = crc64(body)
    if actual != stored:
        raise ChecksumError(f"{path}: checksum mismatch (stored {stored:#x}, computed {actual:#x})")

    import io

    handle = io.BytesIO(body)
    magic = _read_exact(handle, len(INDEX_FILE_MAGIC), "magic")
    if magic != INDEX_FILE_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    version, dim, kind_code, count = struct.unpack("<IIBQ", _read_exact(handle, 17, "header"))
    if version != INDEX_FILE_VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    if kind_code not in _CODE_KINDS:
        raise FileFormatError(f"{path}: unknown kind code {kind_code}")
    kind = _CODE_KINDS[kind_code]

    entries: list[IndexEntry] = []
    rows: list[np.ndarray] = []
    for _ in range(count):
        page_index, has_box = struct.unpack("<QB", _read_exact(handle, 9, "entry header"))
        box_id = None
        if has_box:
            (box_length,) = struct.unpack("<H", _read_exact(handle, 2, "box id length"))
            box_id = _read_exact(handle, box_length, "box id").decode("utf-8")
        (source_length,) = struct.unpack("<H", _read_exact(handle, 2, "source id length"))
        source_id = _read_exact(handle, source_length, "source id").decode("utf-8")
        raw = _read_exact(handle, 4 * dim, "vector")
        values = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        vector = EmbeddingVector(values=values, source_id=source_id)
        entries.append(IndexEntry(vector=vector, page_index=page_index, kind=kind, box_id=box_id))
        rows.append(vector.values)
    if handle.read(1):
        raise FileFormatError(f"{path}: trailing bytes after {count} records")
    if not entries:
        raise ValidationError(f"{path}: index file holds zero entries")
    return VectorIndex(entries, np.ascontiguousarray(np.vstack(rows), dtype=np.float32))
