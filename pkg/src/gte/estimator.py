"""Scikit-learn estimator facade over the entailment models.

X rows are (premise, hypothesis) or (premise, hypothesis, image) with
sentences given as strings or token lists; y holds the three relation labels.
The heavy lifting (vocabulary, model construction, optimization) happens in
fit, keeping __init__ side-effect free the way BaseEstimator expects.
"""

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .encoders import DEFAULT_MAX_VOCAB, build_vocab
from .models import CLASS_ORDER, ModelConfig, build_model
from .training import TrainingExample, train_model
from .validation import (
    check_fraction,
    check_labels,
    check_optional_positive,
    check_pairs,
)


class GroundedEntailmentClassifier(BaseEstimator, ClassifierMixin):
    """Three-way entailment classifier with optional image grounding.

    Parameters mirror the model configuration plus the training loop knobs;
    all are stored verbatim so get_params/set_params/clone behave normally.
    """

    def __init__(
        self,
        architecture: str = "lstm",
        grounding: Optional[str] = None,
        embed_dim: int = 300,
        hidden_dim: int = 512,
        perspectives: int = 8,
        dropout_keep: float = 0.5,
        max_len: int = 82,
        max_vocab: int = DEFAULT_MAX_VOCAB,
        epochs: int = 10,
        batch_size: int = 64,
        learning_rate: float = 0.001,
        clip_norm: Optional[float] = None,
        patience: int = 3,
        validation_fraction: float = 0.0,
        seed: int = 0,
    ):
        self.architecture = architecture
        self.grounding = grounding
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.perspectives = perspectives
        self.dropout_keep = dropout_keep
        self.max_len = max_len
        self.max_vocab = max_vocab
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _examples(self, rows, labels) -> list:
        return [
            TrainingExample(
                self.vocab_.encode(premise),
                self.vocab_.encode(hypothesis),
                label,
                image,
                pair_id=str(i),
            )
            for i, ((premise, hypothesis, image), label) in enumerate(zip(rows, labels))
        ]

    def fit(self, X, y):
        rows = check_pairs(X)
        labels = check_labels(y, len(rows))
        fraction = check_fraction(self.validation_fraction, "validation_fraction")
        check_optional_positive(self.clip_norm, "clip_norm")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")

        self.vocab_ = build_vocab(
            (token for premise, hypothesis, _ in rows for token in premise + hypothesis),
            max_size=self.max_vocab,
        )
        self.config_ = ModelConfig(
            architecture=self.architecture,
            vocab_size=len(self.vocab_),
            grounding=self.grounding,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            perspectives=self.perspectives,
            dropout_keep=self.dropout_keep,
            max_len=self.max_len,
            seed=self.seed,
        )
        self.model_ = build_model(self.config_)

        examples = self._examples(rows, labels)
        dev = None
        if fraction > 0.0:
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(len(examples))
            n_dev = max(1, int(round(fraction * len(examples))))
            if n_dev >= len(examples):
                raise ValueError("validation_fraction leaves no training data")
            dev = [examples[i] for i in order[:n_dev]]
            examples = [examples[i] for i in order[n_dev:]]

        self.training_result_ = train_model(
            self.model_,
            examples,
            dev,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            learning_rate=self.learning_rate,
            clip_norm=self.clip_norm,
            patience=self.patience,
        )
        self.classes_ = np.asarray(CLASS_ORDER, dtype=object)
        return self

    def _predictions(self, X) -> list:
        check_is_fitted(self, "model_")
        return [
            self.model_.predict(
                self.vocab_.encode(premise), self.vocab_.encode(hypothesis), image
            )
            for premise, hypothesis, image in check_pairs(X)
        ]

    def predict(self, X) -> np.ndarray:
        return np.asarray([p.label for p in self._predictions(X)], dtype=object)

    def predict_proba(self, X) -> np.ndarray:
        return np.stack([p.probabilities for p in self._predictions(X)])
