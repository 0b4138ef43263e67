"""Inter-annotator agreement statistics and a 2x2 proportion test."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

CHI_SQUARE_CRITICAL_1DF = 3.841


class DegenerateInputError(ValueError):
    """Raised when an agreement statistic's expected-disagreement term is zero."""


@dataclass
class AgreementReport:
    cohen_kappa: Optional[float]
    scott_pi: Optional[float]
    krippendorff_alpha: float
    items: int
    annotators: int

    def to_dict(self) -> dict:
        return {
            "cohen_kappa": self.cohen_kappa,
            "scott_pi": self.scott_pi,
            "krippendorff_alpha": self.krippendorff_alpha,
            "items": self.items,
            "annotators": self.annotators,
        }


def _check_two_columns(a: Sequence, b: Sequence, name: str) -> None:
    if len(a) != len(b):
        raise ValueError(f"{name} needs equal-length label sequences")
    if not a:
        raise ValueError(f"{name} needs at least one item")


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement with per-annotator marginals."""
    _check_two_columns(a, b, "cohen_kappa")
    n = len(a)
    observed = sum(x == y for x, y in zip(a, b)) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    expected = sum(
        (counts_a[label] / n) * (counts_b[label] / n)
        for label in set(counts_a) | set(counts_b)
    )
    if expected == 1.0:
        raise DegenerateInputError(
            "expected agreement is 1 (constant labels); kappa undefined"
        )
    return (observed - expected) / (1.0 - expected)


def scott_pi(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement with pooled marginals."""
    _check_two_columns(a, b, "scott_pi")
    n = len(a)
    observed = sum(x == y for x, y in zip(a, b)) / n
    pooled = Counter(a) + Counter(b)
    expected = sum((count / (2 * n)) ** 2 for count in pooled.values())
    if expected == 1.0:
        raise DegenerateInputError(
            "expected agreement is 1 (constant labels); pi undefined"
        )
    return (observed - expected) / (1.0 - expected)


def krippendorff_alpha(table: Sequence) -> float:
    """Nominal-distance alpha over an item × annotator label table.

    Rows may contain None for missing labels; rows with fewer than two labels
    are skipped (they contribute no pairable values).
    """
    coincidence = Counter()
    totals = Counter()
    for row in table:
        values = [v for v in row if v is not None]
        m = len(values)
        if m < 2:
            continue
        weight = 1.0 / (m - 1)
        for i, v in enumerate(values):
            for j, w in enumerate(values):
                if i != j:
                    coincidence[(v, w)] += weight
    for (v, _), count in coincidence.items():
        totals[v] += count
    n = sum(totals.values())
    if n == 0:
        raise DegenerateInputError("no item has two or more labels; alpha undefined")
    observed_disagreement = sum(
        count for (v, w), count in coincidence.items() if v != w
    )
    expected_disagreement = sum(
        totals[v] * totals[w]
        for v in totals
        for w in totals
        if v != w
    ) / (n - 1.0)
    if expected_disagreement == 0.0:
        raise DegenerateInputError(
            "expected disagreement is zero (constant labels); alpha undefined"
        )
    return 1.0 - observed_disagreement / expected_disagreement


def agreement_metrics(table: Sequence) -> AgreementReport:
    """All three statistics for an item × annotator table.

    kappa and pi are defined for exactly two annotators and are None
    otherwise; alpha handles any number of annotators and missing labels.
    """
    table = [list(row) for row in table]
    if not table:
        raise ValueError("agreement needs at least one item")
    width = len(table[0])
    if any(len(row) != width for row in table):
        raise ValueError("all rows must list the same annotators")
    if width < 2:
        raise ValueError("agreement needs at least two annotators")
    kappa = pi = None
    if width == 2:
        a = [row[0] for row in table]
        b = [row[1] for row in table]
        if any(v is None for v in a + b):
            raise ValueError("kappa/pi require complete two-annotator labels")
        kappa = cohen_kappa(a, b)
        pi = scott_pi(a, b)
    return AgreementReport(
        cohen_kappa=kappa,
        scott_pi=pi,
        krippendorff_alpha=krippendorff_alpha(table),
        items=len(table),
        annotators=width,
    )


def chi_square_2x2(counts: Sequence) -> tuple:
    """Pearson statistic without continuity correction; returns
    (statistic, significant_at_0.05) against the 1-df critical value."""
    if len(counts) != 2 or any(len(row) != 2 for row in counts):
        raise ValueError("chi_square_2x2 needs a 2x2 table")
    (a, b), (c, d) = counts
    cells = (a, b, c, d)
    if any(x < 0 for x in cells):
        raise ValueError("cell counts must be non-negative")
    total = a + b + c + d
    row1, row2 = a + b, c + d
    col1, col2 = a + c, b + d
    if not all((row1, row2, col1, col2)):
        raise ValueError("both margins must be positive")
    statistic = 0.0
    for observed, row_sum, col_sum in (
        (a, row1, col1),
        (b, row1, col2),
        (c, row2, col1),
        (d, row2, col2),
    ):
        expected = row_sum * col_sum / total
        statistic += (observed - expected) ** 2 / expected
    return statistic, statistic > CHI_SQUARE_CRITICAL_1DF
