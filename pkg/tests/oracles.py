"""Independent brute-force oracles used by the test suite.

Each oracle deliberately recomputes a result through the most naive route
available (cell counting, permutation enumeration, linear scans) so that the
library implementations are checked against a second, structurally different
path. Keep these slow and obvious; never import the functions they verify.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


# ---------------------------------------------------------------------------
# integer-grid cell counting for IoU / GIoU on integer-coordinate boxes
# ---------------------------------------------------------------------------

def _grid_cells(box: tuple[int, int, int, int]) -> set[tuple[int, int]]:
    x0, y0, x1, y1 = box
    return {(x, y) for x in range(x0, x1) for y in range(y0, y1)}


def cell_count_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> Fraction:
    """IoU of integer boxes by enumerating unit cells."""
    ca, cb = _grid_cells(a), _grid_cells(b)
    union = len(ca | cb)
    return Fraction(len(ca & cb), union)


def cell_count_giou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> Fraction:
    """Generalized IoU of integer boxes by enumerating unit cells."""
    ca, cb = _grid_cells(a), _grid_cells(b)
    hull = (
        max(a[2], b[2]) - min(a[0], b[0])
    ) * (
        max(a[3], b[3]) - min(a[1], b[1])
    )
    union = len(ca | cb)
    return cell_count_iou(a, b) - Fraction(hull - union, hull)


# ---------------------------------------------------------------------------
# exhaustive assignment enumeration
# ---------------------------------------------------------------------------

def brute_force_assignments(cost: list[list[float]]) -> tuple[float, list[list[tuple[int, int]]]]:
    """Enumerate every injective assignment of the smaller side into the larger.

    Returns the minimum total and ALL assignments achieving it (each as a
    row-sorted pair list), so tests can check both the optimum and tie-breaking.
    """
    n_rows = len(cost)
    n_cols = len(cost[0]) if n_rows else 0
    k = min(n_rows, n_cols)
    if k == 0:
        return 0.0, [[]]
    best_total = math.inf
    best: list[list[tuple[int, int]]] = []
    for rows in itertools.combinations(range(n_rows), k):
        for cols in itertools.permutations(range(n_cols), k):
            total = sum(cost[i][j] for i, j in zip(rows, cols))
            if total < best_total - 1e-12:
                best_total = total
                best = [sorted(zip(rows, cols))]
            elif abs(total - best_total) <= 1e-12:
                best.append(sorted(zip(rows, cols)))
    return best_total, best


def brute_force_min_cost(cost: list[list[float]]) -> float:
    return brute_force_assignments(cost)[0]


# ---------------------------------------------------------------------------
# naive top-k over an embedding matrix
# ---------------------------------------------------------------------------

def naive_top_k(matrix, query, k: int) -> list[tuple[int, float]]:
    """Per-row dot products, full sort by (-score, ordinal), truncate to k.

    Uses the same per-row reduction (numpy pairwise sum over the contiguous
    axis) as any straightforward row-at-a-time implementation would.
    """
    import numpy as np

    scores = [float(np.sum(matrix[i] * query)) for i in range(matrix.shape[0])]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [(i, scores[i]) for i in order[:k]]


# ---------------------------------------------------------------------------
# detection metrics by explicit PR-point enumeration
# ---------------------------------------------------------------------------

def _oracle_iou(a, b) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def _oracle_bucket(box) -> str:
    area = (box[2] - box[0]) * (box[3] - box[1])
    if area < 32 * 32:
        return "small"
    if area <= 96 * 96:
        return "medium"
    return "large"


def _filter_dataset(gt_by_page, dets, label, bucket):
    gts = {
        page: [
            (gi, g_box)
            for gi, (g_label, g_box) in enumerate(objs)
            if g_label == label and (bucket is None or _oracle_bucket(g_box) == bucket)
        ]
        for page, objs in gt_by_page.items()
    }
    kept = [
        d
        for d in dets
        if d["label"] == label and (bucket is None or _oracle_bucket(d["box"]) == bucket)
    ]
    return gts, kept


def _match_flags(gts_on_page, page_dets, threshold):
    """Greedy matching of score-ordered detections; returns TP flags."""
    taken: set[int] = set()
    flags = []
    for det in page_dets:
        best_iou = 0.0
        best_gi = None
        for gi, g_box in gts_on_page:
            if gi in taken:
                continue
            value = _oracle_iou(det["box"], g_box)
            if value >= threshold and value > best_iou:
                best_iou = value
                best_gi = gi
        if best_gi is None:
            flags.append(False)
        else:
            taken.add(best_gi)
            flags.append(True)
    return flags


def oracle_average_precision(gt_by_page, detections, threshold, label, bucket=None):
    """AP as the exact area under the max-interpolated precision-recall envelope.

    Enumerates PR points one detection at a time (global score order, per-page
    greedy matching) and integrates the envelope over distinct recall steps.
    Returns None when no ground truth survives the filter.
    """
    gts, dets = _filter_dataset(gt_by_page, detections, label, bucket)
    npos = sum(len(v) for v in gts.values())
    if npos == 0:
        return None
    dets = sorted(dets, key=lambda d: (-d["score"], d["page"], d["ordinal"]))
    flag_by_det = {}
    for page in gts:
        page_dets = [d for d in dets if d["page"] == page]
        for d, flag in zip(page_dets, _match_flags(gts[page], page_dets, threshold)):
            flag_by_det[id(d)] = flag

    points = []  # (recall, precision) after each detection
    tp = fp = 0
    for d in dets:
        if flag_by_det[id(d)]:
            tp += 1
        else:
            fp += 1
        points.append((tp / npos, tp / (tp + fp)))
    if not points:
        return 0.0

    area = 0.0
    prev_recall = 0.0
    for recall in sorted({r for r, _ in points}):
        envelope = max(p for r, p in points if r >= recall)
        area += (recall - prev_recall) * envelope
        prev_recall = recall
    return area


def oracle_recall(gt_by_page, detections, threshold, label, max_dets, bucket=None):
    """Recall with at most max_dets top-score detections per page; None if no GT."""
    gts, dets = _filter_dataset(gt_by_page, detections, label, bucket)
    npos = sum(len(v) for v in gts.values())
    if npos == 0:
        return None
    matched = 0
    for page in gts:
        page_dets = sorted(
            (d for d in dets if d["page"] == page),
            key=lambda d: (-d["score"], d["ordinal"]),
        )[:max_dets]
        matched += sum(_match_flags(gts[page], page_dets, threshold))
    return matched / npos


# ---------------------------------------------------------------------------
# rank metrics by linear scan
# ---------------------------------------------------------------------------

def oracle_mrr(runs: list[tuple[list[int], int]], k: int) -> float:
    total = 0.0
    for ranked, gold in runs:
        for position, page in enumerate(ranked[:k], start=1):
            if page == gold:
                total += 1.0 / position
                break
    return total / len(runs)


def oracle_success(runs: list[tuple[list[int], int]], k: int) -> float:
    hits = sum(1 for ranked, gold in runs if gold in ranked[:k])
    return hits / len(runs)


# ---------------------------------------------------------------------------
# pairwise-similarity retention filter
# ---------------------------------------------------------------------------

def oracle_retained_indices(vectors, threshold: float) -> list[int]:
    """Indices whose max cosine to any other vector is below threshold (pair loop)."""
    import numpy as np

    kept = []
    n = len(vectors)
    for i in range(n):
        max_other = -math.inf
        for j in range(n):
            if i == j:
                continue
            max_other = max(max_other, float(np.sum(vectors[i] * vectors[j])))
        if n == 1 or max_other < threshold:
            kept.append(i)
    return kept
