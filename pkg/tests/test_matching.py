import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mangasearch.errors import ValidationError
from mangasearch.geometry import Box, BoxCostConfig
from mangasearch.matching import (
    CLASS_FRAME,
    CLASS_TEXT,
    MatchResult,
    Prediction,
    hungarian,
    match_cost,
    match_page,
    page_loss,
    pair_loss,
)
from oracles import brute_force_assignments


class TestHungarianExamples:
    def test_two_by_two(self):
        result = hungarian([[1, 2], [3, 1]])
        assert result.assignment == ((0, 0), (1, 1))
        assert result.total_cost == 2

    def test_zero_diagonal(self):
        result = hungarian([[0, 5], [5, 0]])
        assert result.assignment == ((0, 0), (1, 1))
        assert result.total_cost == 0

    def test_three_by_three(self):
        result = hungarian([[4, 1, 3], [2, 0, 5], [3, 2, 2]])
        assert result.assignment == ((0, 1), (1, 0), (2, 2))
        assert result.total_cost == 5

    def test_empty_matrix(self):
        assert hungarian([]) == MatchResult((), 0.0, ())
        assert hungarian(np.zeros((0, 3))) == MatchResult((), 0.0, ())

    def test_single_cell(self):
        result = hungarian([[7.5]])
        assert result.assignment == ((0, 0),)
        assert result.total_cost == 7.5

    def test_nan_rejected(self):
        with pytest.raises(ValidationError):
            hungarian([[1.0, math.nan], [0.0, 2.0]])

    def test_inf_rejected(self):
        with pytest.raises(ValidationError):
            hungarian([[1.0, math.inf], [0.0, 2.0]])


class TestHungarianTies:
    def test_all_zeros_picks_identity(self):
        result = hungarian(np.zeros((3, 3)))
        assert result.assignment == ((0, 0), (1, 1), (2, 2))

    def test_all_ones_rectangular_wide(self):
        result = hungarian(np.ones((2, 4)))
        assert result.assignment == ((0, 0), (1, 1))

    def test_all_ones_rectangular_tall(self):
        result = hungarian(np.ones((4, 2)))
        assert result.assignment == ((0, 0), (1, 1))

    def test_tie_requiring_lookahead(self):
        # (0,0) blocks row 1 from its only zero; lexicographic optimum is (0,1),(1,0)
        matrix = [[0, 0], [0, 5]]
        result = hungarian(matrix)
        assert result.assignment == ((0, 1), (1, 0))
        assert result.total_cost == 0

    @given(
        st.integers(1, 4),
        st.integers(1, 4),
        st.data(),
    )
    @settings(max_examples=300, deadline=None)
    def test_lexicographic_minimum_among_all_optima(self, n_rows, n_cols, data):
        matrix = [
            [data.draw(st.integers(0, 2)) for _ in range(n_cols)] for _ in range(n_rows)
        ]
        best_total, optima = brute_force_assignments(matrix)
        result = hungarian(matrix)
        assert result.total_cost == pytest.approx(best_total, abs=1e-9)
        assert list(result.assignment) == min(optima)


class TestHungarianProperties:
    @given(
        st.integers(1, 6),
        st.integers(1, 6),
        st.integers(0, 10_000),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force_minimum(self, n_rows, n_cols, seed):
        rng = np.random.default_rng(seed)
        matrix = rng.uniform(-10, 10, size=(n_rows, n_cols))
        expected, _ = brute_force_assignments(matrix.tolist())
        assert hungarian(matrix).total_cost == pytest.approx(expected, abs=1e-9)

    @given(st.integers(2, 6), st.integers(0, 10_000), st.floats(-50, 50))
    @settings(max_examples=100, deadline=None)
    def test_constant_shift_preserves_argmin(self, n, seed, shift):
        rng = np.random.default_rng(seed)
        matrix = rng.uniform(-10, 10, size=(n, n))
        base = hungarian(matrix)
        shifted = hungarian(matrix + shift)
        assert shifted.assignment == base.assignment
        assert shifted.total_cost == pytest.approx(
            base.total_cost + shift * n, rel=1e-9, abs=1e-9
        )

    @given(st.integers(2, 6), st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_row_column_permutation_equivariance(self, n, seed):
        rng = np.random.default_rng(seed)
        matrix = rng.uniform(-10, 10, size=(n, n))
        row_perm = rng.permutation(n)
        col_perm = rng.permutation(n)
        base = dict(hungarian(matrix).assignment)
        permuted = hungarian(matrix[np.ix_(row_perm, col_perm)])
        relabeled = {row_perm[i]: col_perm[j] for i, j in permuted.assignment}
        assert relabeled == base


def _pred(probs, box, label=CLASS_FRAME):
    return Prediction(box=box, class_label=label, class_probabilities=probs)


UNIT = Box(0.1, 0.1, 0.4, 0.4)


class TestMatchCost:
    def test_perfect_prediction(self):
        pred = _pred((0.0, 1.0, 0.0), UNIT)
        assert match_cost((CLASS_FRAME, UNIT), pred) == -1.0

    def test_half_probability_identical_boxes(self):
        pred = _pred((0.5, 0.5, 0.0), UNIT)
        assert match_cost((CLASS_FRAME, UNIT), pred) == -0.5

    def test_l1_term(self):
        gt_box = Box(0, 0, 0.5, 0.5)
        pred_box = Box(0.1, 0, 0.6, 0.5)
        pred = _pred((0.2, 0.8, 0.0), pred_box)
        cfg = BoxCostConfig(lambda_iou=0.0, lambda_l1=1.0)
        assert match_cost((CLASS_FRAME, gt_box), pred, cfg) == pytest.approx(-0.6, abs=1e-12)

    def test_padding_class_drops_box_term(self):
        pred = _pred((0.7, 0.3, 0.0), UNIT)
        assert match_cost((0, None), pred) == pytest.approx(-0.7)

    def test_unknown_class_rejected(self):
        pred = _pred((0.5, 0.5, 0.0), UNIT)
        with pytest.raises(ValidationError):
            match_cost((7, UNIT), pred)


class TestPrediction:
    def test_score_is_max_real_class(self):
        pred = _pred((0.1, 0.3, 0.6), UNIT, label=CLASS_TEXT)
        assert pred.score == 0.6

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            _pred((0.5, 0.2, 0.1), UNIT)

    def test_from_score_round_trip(self):
        pred = Prediction.from_score(CLASS_TEXT, 0.85, UNIT)
        assert pred.score == pytest.approx(0.85)
        assert pred.class_probabilities[0] == pytest.approx(0.15)


class TestMatchPage:
    def test_single_perfect_match(self):
        pred = _pred((0.0, 1.0, 0.0), UNIT)
        result = match_page([(CLASS_FRAME, UNIT)], [pred])
        assert result.assignment == ((0, 0),)
        assert result.total_cost == -1.0

    def test_no_ground_truth(self):
        preds = [_pred((0.0, 1.0, 0.0), UNIT)] * 3
        result = match_page([], preds)
        assert result.assignment == ()
        assert result.total_cost == 0.0

    def test_crossed_boxes_resolve_to_uncrossed(self):
        box_a = Box(0.0, 0.0, 0.3, 0.3)
        box_b = Box(0.5, 0.5, 0.9, 0.9)
        gt = [(CLASS_FRAME, box_a), (CLASS_FRAME, box_b)]
        preds = [_pred((0.1, 0.9, 0.0), box_b), _pred((0.1, 0.9, 0.0), box_a)]
        result = match_page(gt, preds)
        cfg = BoxCostConfig()
        matrix = [[match_cost(g, p, cfg) for p in preds] for g in gt]
        expected_total, optima = brute_force_assignments(matrix)
        assert result.assignment == ((0, 1), (1, 0))
        assert list(result.assignment) in optima
        assert result.total_cost == pytest.approx(expected_total, abs=1e-12)

    def test_page_dimensions_normalize_boxes(self):
        gt_box = Box(0, 0, 400, 400)
        pred_box = Box(80, 0, 480, 400)
        pred = _pred((0.2, 0.8, 0.0), pred_box)
        cfg = BoxCostConfig(lambda_iou=0.0, lambda_l1=1.0)
        result = match_page([(CLASS_FRAME, gt_box)], [pred], cfg, page_width=800, page_height=800)
        # normalized boxes are (0,0,.5,.5) and (.1,0,.6,.5): L1 distance 0.2
        assert result.total_cost == pytest.approx(-0.8 + 0.2, abs=1e-12)


class TestPageLoss:
    def test_perfect_page_has_zero_loss(self):
        pred = _pred((0.0, 1.0, 0.0), UNIT)
        assert page_loss([(CLASS_FRAME, UNIT)], [pred]) == 0.0

    def test_unmatched_predictions_pay_padding_loss(self):
        confident = _pred((0.0, 1.0, 0.0), UNIT)
        background = _pred((0.9, 0.1, 0.0), Box(0.6, 0.6, 0.9, 0.9))
        loss = page_loss([(CLASS_FRAME, UNIT)], [confident, background])
        assert loss == pytest.approx(-math.log(0.9))

    def test_zero_probability_gives_infinite_loss(self):
        pred = _pred((1.0, 0.0, 0.0), UNIT)
        assert pair_loss((CLASS_FRAME, UNIT), pred) == math.inf

    def test_more_gt_than_predictions_rejected(self):
        pred = _pred((0.0, 1.0, 0.0), UNIT)
        with pytest.raises(ValidationError):
            page_loss([(CLASS_FRAME, UNIT), (CLASS_FRAME, UNIT)], [pred])
