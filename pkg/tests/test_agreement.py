"""Agreement statistics against hand-computed and library oracles."""

import numpy as np
import pytest
from sklearn.metrics import cohen_kappa_score

from gte.agreement import (
    DegenerateInputError,
    agreement_metrics,
    chi_square_2x2,
    cohen_kappa,
    krippendorff_alpha,
    scott_pi,
)

E, C, N = "entailment", "contradiction", "neutral"

# Worked four-item example, agreement on items 1, 3, 4:
#   observed = 3/4
#   kappa expected = 2/4*1/4 + 1/4*2/4 + 1/4*1/4 = 5/16 -> kappa = 7/11
#   pi pooled marginals 3/8, 3/8, 2/8 -> expected 11/32 -> pi = 13/21
A_LABELS = [E, E, C, N]
B_LABELS = [E, C, C, N]


class TestCohenKappa:
    def test_perfect_agreement(self):
        assert cohen_kappa([E, C, N], [E, C, N]) == 1.0

    def test_worked_example(self):
        assert cohen_kappa(A_LABELS, B_LABELS) == pytest.approx(7 / 11, abs=1e-9)

    def test_matches_sklearn_on_random_tables(self):
        rng = np.random.default_rng(29)
        labels = np.array([E, C, N])
        for _ in range(25):
            a = list(labels[rng.integers(0, 3, size=40)])
            b = list(labels[rng.integers(0, 3, size=40)])
            want = cohen_kappa_score(a, b)
            assert cohen_kappa(a, b) == pytest.approx(want, abs=1e-12)

    def test_near_zero_for_independent_labels(self):
        rng = np.random.default_rng(31)
        labels = np.array([E, C, N])
        a = list(labels[rng.integers(0, 3, size=20000)])
        b = list(labels[rng.integers(0, 3, size=20000)])
        assert abs(cohen_kappa(a, b)) < 0.03

    def test_constant_labels_degenerate(self):
        with pytest.raises(DegenerateInputError):
            cohen_kappa([E, E], [E, E])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cohen_kappa([E], [E, C])


class TestScottPi:
    def test_worked_example(self):
        assert scott_pi(A_LABELS, B_LABELS) == pytest.approx(13 / 21, abs=1e-9)

    def test_perfect_agreement(self):
        assert scott_pi([E, C], [E, C]) == 1.0

    def test_constant_labels_degenerate(self):
        with pytest.raises(DegenerateInputError):
            scott_pi([C, C, C], [C, C, C])

    def test_at_most_kappa_on_skewed_marginals(self):
        # Shared (pooled) marginals give pi a chance term at least as large as
        # kappa's, so pi <= kappa on the worked example.
        assert scott_pi(A_LABELS, B_LABELS) <= cohen_kappa(A_LABELS, B_LABELS)


class TestKrippendorffAlpha:
    def test_worked_example(self):
        table = list(zip(A_LABELS, B_LABELS))
        assert krippendorff_alpha(table) == pytest.approx(2 / 3, abs=1e-9)

    def test_perfect_agreement(self):
        assert krippendorff_alpha([(E, E), (C, C), (N, N)]) == 1.0

    def test_missing_labels_skipped(self):
        table = [(E, E, None), (C, C, C), (N, None, None)]
        # Third row has one pairable value and contributes nothing.
        same_without = [(E, E), (C, C, C)]
        assert krippendorff_alpha(table) == pytest.approx(
            krippendorff_alpha(same_without)
        )

    def test_three_annotators(self):
        table = [(E, E, E), (C, C, N), (N, N, N), (E, C, E)]
        alpha = krippendorff_alpha(table)
        assert -1.0 <= alpha <= 1.0

    def test_constant_labels_degenerate(self):
        with pytest.raises(DegenerateInputError):
            krippendorff_alpha([(E, E), (E, E)])

    def test_no_pairable_values_degenerate(self):
        with pytest.raises(DegenerateInputError):
            krippendorff_alpha([(E, None), (C, None)])


class TestAgreementMetrics:
    def test_two_annotator_report(self):
        report = agreement_metrics(list(zip(A_LABELS, B_LABELS)))
        assert report.cohen_kappa == pytest.approx(7 / 11, abs=1e-9)
        assert report.scott_pi == pytest.approx(13 / 21, abs=1e-9)
        assert report.krippendorff_alpha == pytest.approx(2 / 3, abs=1e-9)
        assert report.items == 4 and report.annotators == 2

    def test_three_annotators_skip_pairwise_stats(self):
        report = agreement_metrics([(E, E, E), (C, C, N), (E, N, N)])
        assert report.cohen_kappa is None and report.scott_pi is None

    def test_all_statistics_bounded(self):
        rng = np.random.default_rng(37)
        labels = [E, C, N]
        table = [
            tuple(labels[i] for i in rng.integers(0, 3, size=2)) for _ in range(60)
        ]
        report = agreement_metrics(table)
        for value in (report.cohen_kappa, report.scott_pi, report.krippendorff_alpha):
            assert -1.0 <= value <= 1.0

    def test_ragged_table_rejected(self):
        with pytest.raises(ValueError):
            agreement_metrics([(E, E), (C,)])

    def test_single_annotator_rejected(self):
        with pytest.raises(ValueError):
            agreement_metrics([(E,), (C,)])

    def test_to_dict_fields(self):
        report = agreement_metrics(list(zip(A_LABELS, B_LABELS)))
        doc = report.to_dict()
        assert set(doc) == {
            "cohen_kappa", "scott_pi", "krippendorff_alpha", "items", "annotators"
        }


class TestChiSquare:
    def test_identical_proportions_zero(self):
        statistic, significant = chi_square_2x2([[10, 10], [10, 10]])
        assert statistic == 0.0 and not significant

    def test_worked_example(self):
        statistic, significant = chi_square_2x2([[30, 70], [10, 90]])
        assert statistic == pytest.approx(12.5, abs=1e-12)
        assert significant

    def test_scaling_doubles_statistic(self):
        base, _ = chi_square_2x2([[30, 70], [10, 90]])
        doubled, _ = chi_square_2x2([[60, 140], [20, 180]])
        assert doubled == pytest.approx(2 * base, rel=1e-12)

    def test_threshold_boundary(self):
        # 3.841 itself is not strictly greater than the critical value.
        statistic, significant = chi_square_2x2([[13, 37], [27, 23]])
        assert statistic > 3.841 and significant

    def test_zero_margin_rejected(self):
        with pytest.raises(ValueError, match="margin"):
            chi_square_2x2([[0, 0], [5, 5]])
        with pytest.raises(ValueError, match="margin"):
            chi_square_2x2([[0, 5], [0, 5]])

    def test_negative_cell_rejected(self):
        with pytest.raises(ValueError):
            chi_square_2x2([[-1, 5], [5, 5]])

    def test_shape_rejected(self):
        with pytest.raises(ValueError):
            chi_square_2x2([[1, 2, 3], [4, 5, 6]])
