"""Axis-aligned box geometry: IoU, generalized IoU, L1 box cost, size buckets.

All boxes live in page pixel coordinates (or in [0,1] page-relative
coordinates once normalized); the generalized IoU is scale invariant,
the L1 term is not, which is why `box_cost` expects normalized boxes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ValidationError

# Detector evaluation buckets objects by pixel area: below 32^2 is small,
# 32^2..96^2 inclusive is medium, above is large.
SMALL_AREA_MAX = 32 * 32
MEDIUM_AREA_MAX = 96 * 96


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle; coordinates are finite, non-negative, and strictly ordered."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        coords = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"box has non-finite coordinates: {coords}")
        if any(c < 0 for c in coords):
            raise ValidationError(f"box has negative coordinates: {coords}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValidationError(
                f"box is degenerate (requires xmin < xmax and ymin < ymax): {coords}"
            )

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)

    def contains(self, other: "Box") -> bool:
        return (
            self.xmin <= other.xmin
            and self.ymin <= other.ymin
            and self.xmax >= other.xmax
            and self.ymax >= other.ymax
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


class SizeBucket(enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


@dataclass(frozen=True)
class BoxCostConfig:
    """Weights for the combined box cost: lambda_iou * (1 - giou) + lambda_l1 * L1.

    Defaults follow the common DETR settings (2 and 5); both weights are
    configurable and must not both be zero.
    """

    lambda_iou: float = 2.0
    lambda_l1: float = 5.0

    def __post_init__(self) -> None:
        for name, value in (("lambda_iou", self.lambda_iou), ("lambda_l1", self.lambda_l1)):
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and non-negative, got {value}")
        if self.lambda_iou == 0 and self.lambda_l1 == 0:
            raise ValidationError("lambda_iou and lambda_l1 must not both be zero")


def intersection_area(a: Box, b: Box) -> float:
    """Overlap area of two boxes; 0 when disjoint or merely touching."""
    w = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    h = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def union_area(a: Box, b: Box) -> float:
    return a.area + b.area - intersection_area(a, b)


def enclosing_box(a: Box, b: Box) -> Box:
    """Smallest box containing both inputs."""
    return Box(
        min(a.xmin, b.xmin),
        min(a.ymin, b.ymin),
        max(a.xmax, b.xmax),
        max(a.ymax, b.ymax),
    )


def iou(a: Box, b: Box) -> float:
    """Intersection over union, in [0, 1]."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def giou(a: Box, b: Box) -> float:
    """Generalized IoU: iou - (|enclosing| - |union|) / |enclosing|, in (-1, 1]."""
    hull = enclosing_box(a, b).area
    union = union_area(a, b)
    return iou(a, b) - (hull - union) / hull


def l1_distance(a: Box, b: Box) -> float:
    """Sum of absolute coordinate differences."""
    return (
        abs(a.xmin - b.xmin)
        + abs(a.ymin - b.ymin)
        + abs(a.xmax - b.xmax)
        + abs(a.ymax - b.ymax)
    )


def normalize_box(box: Box, page_width: float, page_height: float) -> Box:
    """Rescale a pixel-coordinate box into [0,1] page-relative coordinates."""
    if page_width <= 0 or page_height <= 0:
        raise ValidationError(
            f"page dimensions must be positive, got {page_width}x{page_height}"
        )
    return Box(
        box.xmin / page_width,
        box.ymin / page_height,
        box.xmax / page_width,
        box.ymax / page_height,
    )


def box_cost(a: Box, b: Box, cfg: BoxCostConfig = BoxCostConfig()) -> float:
    """Weighted combination of (1 - giou) and the coordinate-wise L1 distance.

    Callers are expected to pass boxes in normalized [0,1] coordinates so the
    L1 term is resolution independent; the giou term is scale invariant either
    way.
    """
    cost = 0.0
    if cfg.lambda_iou:
        cost += cfg.lambda_iou * (1.0 - giou(a, b))
    if cfg.lambda_l1:
        cost += cfg.lambda_l1 * l1_distance(a, b)
    return cost


def bucket_of_area(area: float) -> SizeBucket:
    """Total bucketing of non-negative areas; both boundary areas are medium."""
    if area < 0 or not math.isfinite(area):
        raise ValidationError(f"area must be finite and non-negative, got {area}")
    if area < SMALL_AREA_MAX:
        return SizeBucket.SMALL
    if area <= MEDIUM_AREA_MAX:
        return SizeBucket.MEDIUM
    return SizeBucket.LARGE


def size_bucket(box: Box) -> SizeBucket:
    return bucket_of_area(box.area)
