"""Reading order for frames and text boxes: right-to-left, top-to-bottom.

The core is a recursive guillotine cut: split the box set at the widest
horizontal whitespace gap into top/bottom bands (top read first), split
bands at vertical gaps into columns read right-to-left, and recurse.
Overlapping layouts that admit no cut fall back to a deterministic
geometric sort so that every layout receives a total order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .annotations import PageAnnotation
from .geometry import Box, intersection_area


@dataclass(frozen=True)
class OrderedTranscriptEntry:
    """One text box with its reading rank within the page."""

    text_box_id: str
    frame_id: str | None
    page_index: int
    reading_rank: int
    text: str


def _clusters(items: list[tuple[str, Box]], axis: str) -> list[list[tuple[str, Box]]]:
    """Group boxes into maximal runs whose projections onto the axis touch.

    Returned clusters are ordered by ascending coordinate; a strictly
    positive gap between projection intervals separates clusters.
    """
    lo = (lambda b: b.xmin) if axis == "x" else (lambda b: b.ymin)
    hi = (lambda b: b.xmax) if axis == "x" else (lambda b: b.ymax)
    ordered = sorted(items, key=lambda item: (lo(item[1]), hi(item[1]), item[0]))
    clusters: list[list[tuple[str, Box]]] = []
    reach = None
    for item in ordered:
        if reach is not None and lo(item[1]) <= reach:
            clusters[-1].append(item)
            reach = max(reach, hi(item[1]))
        else:
            clusters.append([item])
            reach = hi(item[1])
    return clusters


def _split_at_widest_gap(
    clusters: list[list[tuple[str, Box]]], axis: str
) -> tuple[list[tuple[str, Box]], list[tuple[str, Box]]]:
    hi = (lambda b: b.xmax) if axis == "x" else (lambda b: b.ymax)
    lo = (lambda b: b.xmin) if axis == "x" else (lambda b: b.ymin)
    widest = -1.0
    cut = 1
    for index in range(len(clusters) - 1):
        gap = min(lo(b) for _, b in clusters[index + 1]) - max(hi(b) for _, b in clusters[index])
        if gap > widest:
            widest = gap
            cut = index + 1
    first = [item for cluster in clusters[:cut] for item in cluster]
    second = [item for cluster in clusters[cut:] for item in cluster]
    return first, second


def _order_boxes(items: list[tuple[str, Box]]) -> list[str]:
    if len(items) <= 1:
        return [item_id for item_id, _ in items]

    bands = _clusters(items, "y")
    if len(bands) > 1:
        top, bottom = _split_at_widest_gap(bands, "y")
        return _order_boxes(top) + _order_boxes(bottom)

    columns = _clusters(items, "x")
    if len(columns) > 1:
        ordered: list[str] = []
        for column in reversed(columns):  # manga columns read right to left
            ordered.extend(_order_boxes(column))
        return ordered

    # no whitespace cut exists: overlapping boxes get a fixed geometric order
    fallback = sorted(items, key=lambda item: (-item[1].xmax, item[1].ymin, item[0]))
    return [item_id for item_id, _ in fallback]


def order_frames(page: PageAnnotation) -> list[str]:
    """Frame ids of the page in reading order."""
    return _order_boxes([(f.id, f.box) for f in page.frames])


def assign_texts(page: PageAnnotation) -> dict[str, str | None]:
    """Map each text box to the frame it overlaps most, or None.

    Ties on overlap area go to the frame whose center is nearest the text
    center, then to the lexicographically smallest frame id.
    """
    assignment: dict[str, str | None] = {}
    for text in page.texts:
        tx, ty = text.box.center
        best: tuple[float, float, str] | None = None
        for frame in page.frames:
            overlap = intersection_area(text.box, frame.box)
            if overlap <= 0:
                continue
            fx, fy = frame.box.center
            distance = (fx - tx) ** 2 + (fy - ty) ** 2
            key = (-overlap, distance, frame.id)
            if best is None or key < best:
                best = key
        assignment[text.id] = best[2] if best is not None else None
    return assignment


def order_page(page: PageAnnotation) -> list[OrderedTranscriptEntry]:
    """Texts of one page in reading order, grouped by their assigned frames.

    Frame groups follow order_frames; texts with no frame come last, ordered
    by the same geometric rule; within a group texts are ordered recursively
    just like frames.
    """
    frame_of_text = assign_texts(page)
    texts_by_id = {t.id: t for t in page.texts}
    groups: dict[str | None, list[tuple[str, Box]]] = {}
    for text in page.texts:
        groups.setdefault(frame_of_text[text.id], []).append((text.id, text.box))

    ordered_ids: list[tuple[str, str | None]] = []
    for frame_id in order_frames(page):
        for text_id in _order_boxes(groups.get(frame_id, [])):
            ordered_ids.append((text_id, frame_id))
    for text_id in _order_boxes(groups.get(None, [])):
        ordered_ids.append((text_id, None))

    return [
        OrderedTranscriptEntry(
            text_box_id=text_id,
            frame_id=frame_id,
            page_index=page.page_index,
            reading_rank=rank,
            text=texts_by_id[text_id].text,
        )
        for rank, (text_id, frame_id) in enumerate(ordered_ids)
    ]


def order_book(pages: list[PageAnnotation]) -> list[OrderedTranscriptEntry]:
    """Reading-ordered transcript entries for a whole book, pages ascending."""
    entries: list[OrderedTranscriptEntry] = []
    for page in sorted(pages, key=lambda p: p.page_index):
        entries.extend(order_page(page))
    return entries
