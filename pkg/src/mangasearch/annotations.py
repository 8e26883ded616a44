"""Annotation parsing, dataset splits, and resize bookkeeping.

The on-disk grammar is an element document shaped book -> pages -> page,
where each page carries index/width/height attributes and contains frame and
text children with id and corner-coordinate attributes; text elements hold
the transcript as element content.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import AnnotationParseError, ValidationError
from .geometry import Box

# Preprocessing constants for downstream model tooling. Pages are resized to
# 1333x800 (landscape) or 800x1333 (portrait); pixel normalization statistics
# are recorded here but applied outside this package.
RESIZE_LONG_SIDE = 1333
RESIZE_SHORT_SIDE = 800
PAGE_PIXEL_MEAN = (0.485, 0.456, 0.406)
PAGE_PIXEL_STD = (0.229, 0.224, 0.225)
CROP_SIZE = 224
OCR_CROP_MEAN = 0.5
OCR_CROP_STD = 0.5
SCENE_CROP_MEAN = PAGE_PIXEL_MEAN
SCENE_CROP_STD = PAGE_PIXEL_STD


@dataclass(frozen=True)
class FrameAnnotation:
    id: str
    box: Box


@dataclass(frozen=True)
class TextBoxAnnotation:
    id: str
    box: Box
    text: str = ""


@dataclass(frozen=True)
class PageAnnotation:
    """One page of a book: dimensions plus its frame and text boxes."""

    book_id: str
    page_index: int
    width: int
    height: int
    frames: tuple[FrameAnnotation, ...] = ()
    texts: tuple[TextBoxAnnotation, ...] = ()

    def __post_init__(self) -> None:
        if self.page_index < 0:
            raise ValidationError(f"page_index must be non-negative, got {self.page_index}")
        if self.width < 0 or self.height < 0:
            raise ValidationError(
                f"page dimensions must be non-negative, got {self.width}x{self.height}"
            )
        for item in (*self.frames, *self.texts):
            box = item.box
            if box.xmax > self.width or box.ymax > self.height:
                raise ValidationError(
                    f"box {item.id!r} exceeds page bounds "
                    f"{self.width}x{self.height}: {box.as_tuple()}"
                )


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test ratios (must sum to 1) and the shuffling seed."""

    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        fractions = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not (0 < f < 1) for f in fractions):
            raise ValidationError(f"split fractions must lie in (0,1), got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(fractions)}")


def _attr(element: ET.Element, name: str, context: str) -> str:
    value = element.get(name)
    if value is None:
        raise AnnotationParseError(f"{context}: missing attribute {name!r}")
    return value


def _float_attr(element: ET.Element, name: str, context: str) -> float:
    raw = _attr(element, name, context)
    try:
        return float(raw)
    except ValueError as exc:
        raise AnnotationParseError(f"{context}: attribute {name}={raw!r} is not a number") from exc


def _int_attr(element: ET.Element, name: str, context: str) -> int:
    raw = _attr(element, name, context)
    try:
        return int(raw)
    except ValueError as exc:
        raise AnnotationParseError(f"{context}: attribute {name}={raw!r} is not an integer") from exc


def _parse_box(element: ET.Element, context: str) -> Box:
    coords = {name: _float_attr(element, name, context) for name in ("xmin", "ymin", "xmax", "ymax")}
    try:
        return Box(**coords)
    except ValidationError as exc:
        raise ValidationError(f"{context}: {exc}") from exc


def parse_book(annotation_document: str, book_id: str) -> list[PageAnnotation]:
    """Parse an annotation document into one PageAnnotation per page element.

    Raises AnnotationParseError with line context for malformed documents and
    ValidationError naming the offending element id for invariant violations.
    """
    try:
        root = ET.fromstring(annotation_document)
    except ET.ParseError as exc:
        line, column = exc.position
        raise AnnotationParseError(f"malformed document at line {line}, column {column}: {exc}") from exc

    pages_element = root if root.tag == "pages" else root.find("pages")
    if pages_element is None:
        raise AnnotationParseError("document has no <pages> element")

    pages: list[PageAnnotation] = []
    seen_indexes: set[int] = set()
    seen_ids: set[str] = set()
    for page_element in pages_element:
        if page_element.tag != "page":
            raise AnnotationParseError(f"unexpected element <{page_element.tag}> inside <pages>")
        index = _int_attr(page_element, "index", "page")
        context = f"page {index}"
        width = _int_attr(page_element, "width", context)
        height = _int_attr(page_element, "height", context)
        if index in seen_indexes:
            raise ValidationError(f"duplicate page index {index}")
        seen_indexes.add(index)

        frames: list[FrameAnnotation] = []
        texts: list[TextBoxAnnotation] = []
        for child in page_element:
            if child.tag not in ("frame", "text"):
                raise AnnotationParseError(f"{context}: unexpected element <{child.tag}>")
            element_id = _attr(child, "id", f"{context} <{child.tag}>")
            if element_id in seen_ids:
                raise ValidationError(f"duplicate element id {element_id!r}")
            seen_ids.add(element_id)
            box = _parse_box(child, f"{context} {child.tag} {element_id!r}")
            if child.tag == "frame":
                frames.append(FrameAnnotation(id=element_id, box=box))
            else:
                texts.append(TextBoxAnnotation(id=element_id, box=box, text=child.text or ""))

        try:
            pages.append(
                PageAnnotation(
                    book_id=book_id,
                    page_index=index,
                    width=width,
                    height=height,
                    frames=tuple(frames),
                    texts=tuple(texts),
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"{context}: {exc}") from exc
    return pages


def _format_coord(value: float) -> str:
    return repr(int(value)) if float(value).is_integer() else repr(value)


def serialize_book(pages: list[PageAnnotation], book_id: str | None = None) -> str:
    """Render pages back into the annotation document grammar.

    parse_book(serialize_book(parse_book(doc))) is a fixed point for any
    valid document.
    """
    if book_id is None:
        book_id = pages[0].book_id if pages else ""
    root = ET.Element("book", {"id": book_id})
    pages_element = ET.SubElement(root, "pages")
    for page in pages:
        page_element = ET.SubElement(
            pages_element,
            "page",
            {"index": str(page.page_index), "width": str(page.width), "height": str(page.height)},
        )
        for frame in page.frames:
            ET.SubElement(
                page_element,
                "frame",
                {
                    "id": frame.id,
                    **{k: _format_coord(v) for k, v in zip(("xmin", "ymin", "xmax", "ymax"), frame.box.as_tuple())},
                },
            )
        for text in page.texts:
            element = ET.SubElement(
                page_element,
                "text",
                {
                    "id": text.id,
                    **{k: _format_coord(v) for k, v in zip(("xmin", "ymin", "xmax", "ymax"), text.box.as_tuple())},
                },
            )
            element.text = text.text
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


def split_pages(
    pages: list[PageAnnotation], spec: SplitSpec
) -> tuple[list[PageAnnotation], list[PageAnnotation], list[PageAnnotation]]:
    """Shuffle pages with the spec seed and partition into train/val/test.

    Validation and test sizes are round(N * fraction); rounding remainders go
    to the training split. Book identity is ignored; filter pages beforehand
    for book-level holdouts.
    """
    if not pages:
        raise ValidationError("cannot split an empty page list")
    n = len(pages)
    n_val = round(n * spec.val_fraction)
    n_test = round(n * spec.test_fraction)
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValidationError(f"split fractions leave no training pages for n={n}")
    order = np.random.default_rng(spec.seed).permutation(n)
    shuffled = [pages[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )


def rescale_page(
    page: PageAnnotation,
    long_side: int = RESIZE_LONG_SIDE,
    short_side: int = RESIZE_SHORT_SIDE,
) -> PageAnnotation:
    """Resize a page to long_side x short_side, keeping its orientation.

    Portrait pages (height >= width) become short x long, landscape pages
    long x short; all boxes are scaled by the per-axis ratios.
    """
    if not (long_side > short_side > 0):
        raise ValidationError(f"need long_side > short_side > 0, got {long_side}/{short_side}")
    if page.width <= 0 or page.height <= 0:
        raise ValidationError(
            f"cannot rescale degenerate page {page.width}x{page.height} "
            f"(book {page.book_id!r} page {page.page_index})"
        )
    portrait = page.height >= page.width
    target_w, target_h = (short_side, long_side) if portrait else (long_side, short_side)
    sx = target_w / page.width
    sy = target_h / page.height

    def scale(box: Box) -> Box:
        return Box(box.xmin * sx, box.ymin * sy, box.xmax * sx, box.ymax * sy)

    return PageAnnotation(
        book_id=page.book_id,
        page_index=page.page_index,
        width=target_w,
        height=target_h,
        frames=tuple(replace(f, box=scale(f.box)) for f in page.frames),
        texts=tuple(replace(t, box=scale(t.box)) for t in page.texts),
    )


# ---------------------------------------------------------------------------
# pages.json persistence (the ingest output consumed by the other commands)
# ---------------------------------------------------------------------------

def page_to_dict(page: PageAnnotation) -> dict:
    return {
        "page_index": page.page_index,
        "width": page.width,
        "height": page.height,
        "frames": [{"id": f.id, "box": list(f.box.as_tuple())} for f in page.frames],
        "texts": [
            {"id": t.id, "box": list(t.box.as_tuple()), "text": t.text} for t in page.texts
        ],
    }


def page_from_dict(record: dict, book_id: str) -> PageAnnotation:
    return PageAnnotation(
        book_id=book_id,
        page_index=record["page_index"],
        width=record["width"],
        height=record["height"],
        frames=tuple(
            FrameAnnotation(id=f["id"], box=Box(*f["box"])) for f in record["frames"]
        ),
        texts=tuple(
            TextBoxAnnotation(id=t["id"], box=Box(*t["box"]), text=t.get("text", ""))
            for t in record["texts"]
        ),
    )


def save_pages(pages: list[PageAnnotation], path: str | Path) -> None:
    book_id = pages[0].book_id if pages else ""
    payload = {"book_id": book_id, "pages": [page_to_dict(p) for p in pages]}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")


def load_pages(path: str | Path) -> list[PageAnnotation]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "pages" not in payload:
        raise AnnotationParseError(f"{path}: expected an object with a 'pages' key")
    book_id = payload.get("book_id", "")
    try:
        return [page_from_dict(record, book_id) for record in payload["pages"]]
    except (KeyError, TypeError) as exc:
        raise AnnotationParseError(f"{path}: malformed page record: {exc}") from exc
