"""Detector evaluation: mAP over IoU thresholds, mAR at detection budgets,
size-bucketed and per-class variants; the full metrics-table row set.

Matching is greedy per page: detections are visited in descending score
order and each takes the highest-IoU still-unmatched ground-truth object at
or above the threshold. AP is the exact area under the max-interpolated
precision-recall envelope; AR averages recall over the ten IoU thresholds
0.50..0.95.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .annotations import PageAnnotation
from .errors import AnnotationParseError, ValidationError
from .geometry import Box, SizeBucket, iou, size_bucket
from .matching import CLASS_FRAME, CLASS_TEXT

DEFAULT_IOU_THRESHOLDS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)
CLASS_LABELS = (CLASS_FRAME, CLASS_TEXT)
UNDEFINED = -1.0  # sentinel for buckets with no ground truth


@dataclass(frozen=True)
class Detection:
    page_index: int
    label: int
    score: float
    box: Box

    def __post_init__(self) -> None:
        if self.label not in CLASS_LABELS:
            raise ValidationError(f"label must be 1 (frame) or 2 (text), got {self.label}")
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"score must lie in [0,1], got {self.score}")


@dataclass(frozen=True)
class DetectionDataset:
    """Aligned per-page ground truth (class, Box) and detections."""

    gt_by_page: dict[int, list[tuple[int, Box]]]
    detections_by_page: dict[int, list[Detection]]

    def __post_init__(self) -> None:
        unknown = set(self.detections_by_page) - set(self.gt_by_page)
        if unknown:
            raise ValidationError(
                f"detections reference pages absent from ground truth: {sorted(unknown)[:5]}"
            )

    @classmethod
    def from_annotations(
        cls, pages: list[PageAnnotation], detections: list[Detection]
    ) -> "DetectionDataset":
        gt_by_page: dict[int, list[tuple[int, Box]]] = {}
        for page in pages:
            objects = [(CLASS_FRAME, f.box) for f in page.frames]
            objects += [(CLASS_TEXT, t.box) for t in page.texts]
            gt_by_page[page.page_index] = objects
        detections_by_page: dict[int, list[Detection]] = {}
        for det in detections:
            detections_by_page.setdefault(det.page_index, []).append(det)
        return cls(gt_by_page=gt_by_page, detections_by_page=detections_by_page)

    def total_ground_truth(self) -> int:
        return sum(len(objs) for objs in self.gt_by_page.values())


def _filtered_page(
    dataset: DetectionDataset,
    page: int,
    class_label: int,
    size_filter: SizeBucket | None,
) -> tuple[list[Box], list[tuple[int, Detection]]]:
    """Ground-truth boxes and (ordinal, detection) pairs surviving the filters.

    Size filtering restricts both sides by their own box bucket.
    """
    gts = [
        box
        for label, box in dataset.gt_by_page.get(page, [])
        if label == class_label and (size_filter is None or size_bucket(box) is size_filter)
    ]
    dets = [
        (ordinal, det)
        for ordinal, det in enumerate(dataset.detections_by_page.get(page, []))
        if det.label == class_label
        and (size_filter is None or size_bucket(det.box) is size_filter)
    ]
    return gts, dets


def _greedy_match(gts: list[Box], dets: list[Detection], threshold: float) -> list[bool]:
    """True-positive flags for score-ordered detections on one page."""
    taken = [False] * len(gts)
    flags = []
    for det in dets:
        best_value = 0.0
        best_index = -1
        for gt_index, gt_box in enumerate(gts):
            if taken[gt_index]:
                continue
            value = iou(det.box, gt_box)
            if value >= threshold and value > best_value:
                best_value = value
                best_index = gt_index
        if best_index >= 0:
            taken[best_index] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _sorted_page_detections(pairs: list[tuple[int, Detection]]) -> list[tuple[int, Detection]]:
    return sorted(pairs, key=lambda item: (-item[1].score, item[0]))


def average_precision(
    dataset: DetectionDataset,
    iou_threshold: float,
    class_label: int,
    size_filter: SizeBucket | None = None,
) -> float | None:
    """Exact area under the interpolated PR envelope, or None without GT."""
    if not (0.0 < iou_threshold <= 1.0):
        raise ValidationError(f"iou threshold must lie in (0,1], got {iou_threshold}")
    pooled: list[tuple[float, int, int, bool]] = []  # (score, page, ordinal, tp)
    npos = 0
    for page in dataset.gt_by_page:
        gts, det_pairs = _filtered_page(dataset, page, class_label, size_filter)
        npos += len(gts)
        det_pairs = _sorted_page_detections(det_pairs)
        flags = _greedy_match(gts, [d for _, d in det_pairs], iou_threshold)
        pooled.extend(
            (det.score, page, ordinal, flag)
            for (ordinal, det), flag in zip(det_pairs, flags)
        )
    if npos == 0:
        return None
    pooled.sort(key=lambda item: (-item[0], item[1], item[2]))
    flags = np.array([flag for *_, flag in pooled], dtype=bool)

    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = np.concatenate(([0.0], tp / npos, [1.0]))
    precision = np.concatenate(([0.0], tp / np.maximum(tp + fp, 1), [0.0]))
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.flatnonzero(recall[1:] != recall[:-1])
    return float(np.sum((recall[steps + 1] - recall[steps]) * envelope[steps + 1]))


def recall_at(
    dataset: DetectionDataset,
    iou_threshold: float,
    class_label: int,
    max_detections: int,
    size_filter: SizeBucket | None = None,
) -> float | None:
    """Dataset recall with at most max_detections top-score detections per page."""
    if max_detections < 1:
        raise ValidationError(f"max_detections must be >= 1, got {max_detections}")
    matched = 0
    npos = 0
    for page in dataset.gt_by_page:
        gts, det_pairs = _filtered_page(dataset, page, class_label, size_filter)
        npos += len(gts)
        det_pairs = _sorted_page_detections(det_pairs)[:max_detections]
        matched += sum(_greedy_match(gts, [d for _, d in det_pairs], iou_threshold))
    if npos == 0:
        return None
    return matched / npos


def _class_mean(values: list[float | None]) -> float:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else UNDEFINED


def mean_ap(
    dataset: DetectionDataset,
    thresholds=DEFAULT_IOU_THRESHOLDS,
    size_filter: SizeBucket | None = None,
    classes=CLASS_LABELS,
) -> float:
    """AP averaged over thresholds then classes; classes without GT are skipped."""
    if dataset.total_ground_truth() == 0:
        raise ValidationError("dataset has no ground-truth objects")
    per_class: list[float | None] = []
    for class_label in classes:
        aps = [average_precision(dataset, t, class_label, size_filter) for t in thresholds]
        per_class.append(None if aps[0] is None else sum(aps) / len(aps))
    return _class_mean(per_class)


def mean_ar(
    dataset: DetectionDataset,
    max_detections: int,
    thresholds=DEFAULT_IOU_THRESHOLDS,
    size_filter: SizeBucket | None = None,
    classes=CLASS_LABELS,
) -> float:
    """Recall averaged over the IoU thresholds then classes, at a detection budget."""
    if dataset.total_ground_truth() == 0:
        raise ValidationError("dataset has no ground-truth objects")
    per_class: list[float | None] = []
    for class_label in classes:
        recalls = [
            recall_at(dataset, t, class_label, max_detections, size_filter) for t in thresholds
        ]
        per_class.append(None if recalls[0] is None else sum(recalls) / len(recalls))
    return _class_mean(per_class)


@dataclass(frozen=True)
class MetricsReport:
    """Every metric row of the detection table; -1 marks empty buckets."""

    mAP: float
    mAP_50: float
    mAP_75: float
    mAP_large: float
    mAP_medium: float
    mAP_small: float
    mAR_1: float
    mAR_10: float
    mAR_100: float
    mAR_large: float
    mAR_medium: float
    mAR_small: float
    mAP_frames: float
    mAP_text: float
    mAR_100_frames: float
    mAR_100_text: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def render_table(self) -> str:
        labels = {
            "mAP_frames": "mAP (frames)",
            "mAP_text": "mAP (text boxes)",
            "mAR_100_frames": "mAR_100 (frames)",
            "mAR_100_text": "mAR_100 (text boxes)",
        }
        lines = ["Metric\tModel Performance"]
        for name, value in self.to_dict().items():
            lines.append(f"{labels.get(name, name)}\t{value:.3f}")
        return "\n".join(lines)


def evaluate(dataset: DetectionDataset) -> MetricsReport:
    """Compute the full metrics table for a dataset."""
    return MetricsReport(
        mAP=mean_ap(dataset),
        mAP_50=mean_ap(dataset, thresholds=(0.50,)),
        mAP_75=mean_ap(dataset, thresholds=(0.75,)),
        mAP_large=mean_ap(dataset, size_filter=SizeBucket.LARGE),
        mAP_medium=mean_ap(dataset, size_filter=SizeBucket.MEDIUM),
        mAP_small=mean_ap(dataset, size_filter=SizeBucket.SMALL),
        mAR_1=mean_ar(dataset, max_detections=1),
        mAR_10=mean_ar(dataset, max_detections=10),
        mAR_100=mean_ar(dataset, max_detections=100),
        mAR_large=mean_ar(dataset, max_detections=100, size_filter=SizeBucket.LARGE),
        mAR_medium=mean_ar(dataset, max_detections=100, size_filter=SizeBucket.MEDIUM),
        mAR_small=mean_ar(dataset, max_detections=100, size_filter=SizeBucket.SMALL),
        mAP_frames=mean_ap(dataset, classes=(CLASS_FRAME,)),
        mAP_text=mean_ap(dataset, classes=(CLASS_TEXT,)),
        mAR_100_frames=mean_ar(dataset, max_detections=100, classes=(CLASS_FRAME,)),
        mAR_100_text=mean_ar(dataset, max_detections=100, classes=(CLASS_TEXT,)),
    )


# ---------------------------------------------------------------------------
# predictions file: one JSON object per line {page, label, score, box}
# ---------------------------------------------------------------------------

def save_detections(detections: list[Detection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for det in detections:
            handle.write(
                json.dumps(
                    {
                        "page": det.page_index,
                        "label": det.label,
                        "score": det.score,
                        "box": list(det.box.as_tuple()),
                    }
                )
                + "\n"
            )


def load_detections(path: str | Path) -> list[Detection]:
    detections: list[Detection] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationParseError(f"{path}:{line_number}: malformed JSON: {exc}") from exc
            try:
                detections.append(
                    Detection(
                        page_index=row["page"],
                        label=row["label"],
                        score=row["score"],
                        box=Box(*row["box"]),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise AnnotationParseError(
                    f"{path}:{line_number}: record missing field: {exc}"
                ) from exc
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line_number}: {exc}") from exc
    return detections
