"""Optimal one-to-one assignment between predicted and ground-truth objects.

The solver is a potentials-based shortest-augmenting-path implementation
(O(n^3)) over the cost matrix, followed by a tie-breaking pass that returns
the lexicographically smallest assignment among all cost-optimal ones. Ties
are resolved on the tight-edge graph certified by the dual potentials, so the
pass is a no-op unless genuinely tied optima exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import Box, BoxCostConfig, box_cost, normalize_box

CLASS_NONE = 0  # "no object" / padding class
CLASS_FRAME = 1
CLASS_TEXT = 2


@dataclass(frozen=True)
class Prediction:
    """One detector output: a box, a predicted label, and a class distribution.

    `class_probabilities[0]` is the no-object probability; indices 1 and 2 are
    frames and text boxes.
    """

    box: Box
    class_label: int
    class_probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = self.class_probabilities
        if self.class_label not in (CLASS_FRAME, CLASS_TEXT):
            raise ValidationError(f"class_label must be 1 (frame) or 2 (text), got {self.class_label}")
        if self.class_label >= len(probs):
            raise ValidationError(
                f"class_label {self.class_label} out of range for {len(probs)} probabilities"
            )
        if any((not math.isfinite(p)) or p < 0 for p in probs):
            raise ValidationError(f"probabilities must be finite and non-negative: {probs}")
        if abs(sum(probs) - 1.0) > 1e-6:
            raise ValidationError(f"probabilities must sum to 1 within 1e-6: sum={sum(probs)}")

    @property
    def score(self) -> float:
        """Maximum probability over the real (non-padding) classes."""
        return max(self.class_probabilities[1:])

    @classmethod
    def from_score(cls, class_label: int, score: float, box: Box) -> "Prediction":
        """Build a prediction from a flat file record (label + confidence only).

        The remaining mass is assigned to the no-object class, which is the
        only consistent completion a score-only record allows.
        """
        if not (0.0 <= score <= 1.0):
            raise ValidationError(f"score must lie in [0,1], got {score}")
        probs = [0.0, 0.0, 0.0]
        probs[0] = 1.0 - score
        probs[class_label] = score
        return cls(box=box, class_label=class_label, class_probabilities=tuple(probs))


@dataclass(frozen=True)
class MatchResult:
    """Injective assignment (gt index, prediction index) pairs, sorted by gt index."""

    assignment: tuple[tuple[int, int], ...]
    total_cost: float
    per_pair_costs: tuple[float, ...] = field(default=())


def _validate_matrix(cost_matrix) -> np.ndarray:
    matrix = np.asarray(cost_matrix, dtype=np.float64)
    if matrix.ndim != 2:
        if matrix.size == 0:
            return matrix.reshape(0, 0)
        raise ValidationError(f"cost matrix must be 2-dimensional, got shape {matrix.shape}")
    if matrix.size and not np.all(np.isfinite(matrix)):
        raise ValidationError("cost matrix entries must all be finite")
    return matrix


def _solve_square(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kuhn-Munkres with potentials on an n x n matrix.

    Returns (col_of_row, u, v) where the duals satisfy a[i,j] >= u[i] + v[j]
    everywhere with equality on the matched edges.
    """
    n = a.shape[0]
    inf = np.inf
    # 1-based working arrays with a virtual column 0
    cost = np.empty((n + 1, n + 1))
    cost[1:, 1:] = a
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j] = row matched to column j, 0 = none
    way = np.zeros(n + 1, dtype=np.int64)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0] - u[i0] - v
            free = ~used
            free[0] = False
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, inf)
            j1 = int(np.argmin(masked[1:])) + 1
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _lex_smallest_matching(
    tight: np.ndarray, row_match: np.ndarray, n_rows: int, n_cols: int
) -> np.ndarray:
    """Lexicographically smallest perfect matching of the tight-edge graph.

    Rows are processed in ascending order; each real row grabs the smallest
    feasible real column (feasible = a perfect rematching still exists),
    falling back to padding columns, which mark the row as unassigned.
    """
    n = tight.shape[0]
    col_match = np.empty(n, dtype=np.int64)
    col_match[row_match] = np.arange(n)
    locked_cols = np.zeros(n, dtype=bool)  # columns committed to an earlier row
    dummy_only = np.zeros(n, dtype=bool)  # rows committed to stay unassigned

    def augment(row: int, banned: np.ndarray) -> bool:
        start = n_cols if dummy_only[row] else 0
        for j in range(start, n):
            if banned[j] or not tight[row, j]:
                continue
            banned[j] = True
            owner = col_match[j]
            if owner == -1 or augment(owner, banned):
                col_match[j] = row
                row_match[row] = j
                return True
        return False

    def try_force(i: int, j: int) -> bool:
        if row_match[i] == j:
            return True
        saved_rows = row_match.copy()
        saved_cols = col_match.copy()
        jc = row_match[i]
        displaced = col_match[j]
        col_match[jc] = -1
        col_match[j] = i
        row_match[i] = j
        banned = locked_cols.copy()
        banned[j] = True
        if augment(int(displaced), banned):
            return True
        row_match[:] = saved_rows
        col_match[:] = saved_cols
        return False

    for i in range(n_rows):
        committed = False
        for j in range(n_cols):
            if tight[i, j] and not locked_cols[j] and try_force(i, j):
                locked_cols[j] = True
                committed = True
                break
        if not committed:
            # no real column is reachable in any optimal completion: the row
            # stays unassigned; keep its padding-column binding flexible
            dummy_only[i] = True
    return row_match


def hungarian(cost_matrix) -> MatchResult:
    """Minimum-cost injective assignment of the smaller side into the larger.

    Among equal-cost optima the lexicographically smallest pair list wins
    (within floating-point tolerance of the optimum).
    """
    matrix = _validate_matrix(cost_matrix)
    n_rows, n_cols = matrix.shape
    if n_rows == 0 or n_cols == 0:
        return MatchResult(assignment=(), total_cost=0.0, per_pair_costs=())

    n = max(n_rows, n_cols)
    padded = np.zeros((n, n))
    padded[:n_rows, :n_cols] = matrix
    row_match, u, v = _solve_square(padded)

    scale = max(1.0, float(np.abs(padded).max()))
    reduced = padded - u[:, None] - v[None, :]
    tight = reduced <= 1e-8 * scale
    tight[np.arange(n), row_match] = True  # never drop the certified optimum

    # rows with a single tight edge admit no alternative optimum
    if np.any(tight.sum(axis=1) > 1):
        row_match = _lex_smallest_matching(tight, row_match, n_rows, n_cols)

    pairs = []
    costs = []
    total = 0.0
    for i in range(n_rows):
        j = int(row_match[i])
        if j < n_cols:
            pairs.append((i, j))
            cost = float(matrix[i, j])
            costs.append(cost)
            total += cost
    return MatchResult(assignment=tuple(pairs), total_cost=total, per_pair_costs=tuple(costs))


def match_cost(
    gt: tuple[int, Box | None], pred: Prediction, cfg: BoxCostConfig = BoxCostConfig()
) -> float:
    """Matching-time pair cost: -p(class) plus the box cost for real classes.

    The probability enters linearly (not as -log) so that zero-probability
    predictions still yield finite costs during assignment.
    """
    gt_class, gt_box = gt
    if gt_class not in (CLASS_NONE, CLASS_FRAME, CLASS_TEXT):
        raise ValidationError(f"unknown class label {gt_class}")
    if gt_class >= len(pred.class_probabilities):
        raise ValidationError(f"class label {gt_class} out of range for prediction")
    cost = -pred.class_probabilities[gt_class]
    if gt_class != CLASS_NONE:
        if gt_box is None:
            raise ValidationError("real-class ground truth requires a box")
        cost += box_cost(gt_box, pred.box, cfg)
    return cost


def pair_loss(
    gt: tuple[int, Box | None], pred: Prediction, cfg: BoxCostConfig = BoxCostConfig()
) -> float:
    """Reported loss form for one pair: -log p(class) plus the box term.

    Infinite when the prediction assigns zero probability to the target class;
    this value is a diagnostic, not a matching criterion.
    """
    gt_class, gt_box = gt
    if gt_class not in (CLASS_NONE, CLASS_FRAME, CLASS_TEXT):
        raise ValidationError(f"unknown class label {gt_class}")
    p = pred.class_probabilities[gt_class]
    loss = -math.log(p) if p > 0 else math.inf
    if gt_class != CLASS_NONE:
        if gt_box is None:
            raise ValidationError("real-class ground truth requires a box")
        loss += box_cost(gt_box, pred.box, cfg)
    return loss


def _normalized(gt_objects, predictions, page_width, page_height):
    if page_width is None and page_height is None:
        return list(gt_objects), list(predictions)
    if page_width is None or page_height is None:
        raise ValidationError("pass both page_width and page_height or neither")
    gt_norm = [(c, normalize_box(b, page_width, page_height)) for c, b in gt_objects]
    preds_norm = [
        Prediction(
            box=normalize_box(p.box, page_width, page_height),
            class_label=p.class_label,
            class_probabilities=p.class_probabilities,
        )
        for p in predictions
    ]
    return gt_norm, preds_norm


def match_page(
    gt_objects,
    predictions,
    cfg: BoxCostConfig = BoxCostConfig(),
    page_width: float | None = None,
    page_height: float | None = None,
) -> MatchResult:
    """Assign predictions to ground-truth objects for one page.

    Ground truth is a sequence of (class_label, Box). Boxes are normalized by
    the page dimensions when provided; otherwise they are used as given (the
    combined cost expects [0,1] coordinates). Unmatched predictions are
    implicitly treated as no-object; padding is never materialized.
    """
    gt_objects, predictions = _normalized(gt_objects, predictions, page_width, page_height)
    if not gt_objects or not predictions:
        return MatchResult(assignment=(), total_cost=0.0, per_pair_costs=())
    matrix = [[match_cost(gt, pred, cfg) for pred in predictions] for gt in gt_objects]
    return hungarian(matrix)


def page_loss(
    gt_objects,
    predictions,
    cfg: BoxCostConfig = BoxCostConfig(),
    page_width: float | None = None,
    page_height: float | None = None,
) -> float:
    """Total -log loss for a page under the optimal assignment.

    Matched pairs contribute their pair_loss; unmatched predictions are scored
    against the padding class. Requires at least as many predictions as
    ground-truth objects so that padding is well defined.
    """
    gt_objects, predictions = _normalized(gt_objects, predictions, page_width, page_height)
    if len(predictions) < len(gt_objects):
        raise ValidationError(
            f"page loss needs len(predictions) >= len(gt): {len(predictions)} < {len(gt_objects)}"
        )
    result = match_page(gt_objects, predictions, cfg)
    total = 0.0
    matched_preds = set()
    for gt_index, pred_index in result.assignment:
        total += pair_loss(gt_objects[gt_index], predictions[pred_index], cfg)
        matched_preds.add(pred_index)
    for pred_index, pred in enumerate(predictions):
        if pred_index not in matched_preds:
            total += pair_loss((CLASS_NONE, None), pred, cfg)
    return total
