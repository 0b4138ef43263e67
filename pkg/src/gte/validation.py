"""Input normalization for the estimator and CLI surfaces.

Sentence inputs may arrive as raw strings or as pre-tokenized lists; both
normalize to token lists here so downstream code only sees one shape.
"""

from typing import Optional, Sequence

from .encoders import tokenize
from .fusion import ImageFeature
from .models import CLASS_ORDER

_VALID_LABELS = frozenset(CLASS_ORDER)


def check_sentence(value, name: str) -> list:
    """Normalize one sentence to a token list."""
    if isinstance(value, str):
        tokens = tokenize(value)
    elif isinstance(value, (list, tuple)):
        tokens = list(value)
        if not all(isinstance(t, str) for t in tokens):
            raise TypeError(f"{name} must contain string tokens")
    else:
        raise TypeError(f"{name} must be a string or a token sequence, got {type(value).__name__}")
    if not tokens:
        raise ValueError(f"{name} must not be empty")
    return tokens


def check_pairs(X) -> list:
    """Rows of (premise, hypothesis) or (premise, hypothesis, image).

    Returns a list of (premise_tokens, hypothesis_tokens, image_or_None).
    """
    try:
        rows = list(X)
    except TypeError:
        raise TypeError("X must be a sequence of sentence pairs") from None
    if not rows:
        raise ValueError("X must contain at least one pair")
    out = []
    for i, row in enumerate(rows):
        if isinstance(row, str) or not isinstance(row, Sequence):
            raise TypeError(f"X[{i}] must be a (premise, hypothesis[, image]) row")
        if len(row) == 2:
            premise, hypothesis, image = row[0], row[1], None
        elif len(row) == 3:
            premise, hypothesis, image = row
        else:
            raise ValueError(f"X[{i}] has {len(row)} fields, expected 2 or 3")
        if image is not None and not isinstance(image, ImageFeature):
            raise TypeError(f"X[{i}]: image must be an ImageFeature or None")
        out.append(
            (
                check_sentence(premise, f"X[{i}] premise"),
                check_sentence(hypothesis, f"X[{i}] hypothesis"),
                image,
            )
        )
    return out


def check_labels(y, n_rows: int) -> list:
    labels = list(y)
    if len(labels) != n_rows:
        raise ValueError(f"X has {n_rows} rows but y has {len(labels)} labels")
    for i, label in enumerate(labels):
        if label not in _VALID_LABELS:
            raise ValueError(
                f"y[{i}] is {label!r}; expected one of {', '.join(CLASS_ORDER)}"
            )
    return labels


def check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{name} must be in [0, 1)")
    return value


def check_optional_positive(value: Optional[float], name: str):
    if value is not None and value <= 0:
        raise ValueError(f"{name} must be positive when given")
    return value
