"""Estimator facade: sklearn conventions plus end-to-end fit/predict."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gte.estimator import GroundedEntailmentClassifier
from gte.fusion import GLOBAL_4096
from gte.models import CLASS_ORDER
from gte.validation import check_labels, check_pairs, check_sentence

from helpers import synthetic_image

# One telltale word per class keeps the corpus separable, so a tiny model
# overfits it in a handful of epochs.
_TELLTALE = {
    "entailment": "indeed",
    "contradiction": "however",
    "neutral": "possibly",
}


def text_corpus(n=12):
    X, y = [], []
    for i in range(n):
        label = CLASS_ORDER[i % 3]
        X.append((f"a person walks in scene {i}", f"{_TELLTALE[label]} someone moves"))
        y.append(label)
    return X, y


def small_estimator(**overrides):
    params = dict(
        architecture="lstm",
        embed_dim=8,
        hidden_dim=8,
        dropout_keep=1.0,
        max_len=12,
        epochs=40,
        batch_size=6,
        learning_rate=0.01,
        seed=1,
    )
    params.update(overrides)
    return GroundedEntailmentClassifier(**params)


class TestSklearnConventions:
    def test_get_params_reports_constructor_args(self):
        est = GroundedEntailmentClassifier(hidden_dim=32, seed=9)
        params = est.get_params()
        assert params["hidden_dim"] == 32
        assert params["seed"] == 9
        assert params["architecture"] == "lstm"

    def test_set_params_roundtrip(self):
        est = GroundedEntailmentClassifier()
        est.set_params(architecture="bimpm", perspectives=4)
        assert est.architecture == "bimpm"
        assert est.perspectives == 4

    def test_clone_preserves_params(self):
        est = small_estimator(learning_rate=0.01)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()
        assert cloned is not est

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            GroundedEntailmentClassifier().predict([("a b", "c d")])

    def test_fit_returns_self_and_sets_classes(self):
        X, y = text_corpus()
        est = small_estimator(epochs=1)
        assert est.fit(X, y) is est
        assert list(est.classes_) == list(CLASS_ORDER)


class TestFitPredict:
    def test_overfits_separable_text(self):
        X, y = text_corpus()
        est = small_estimator().fit(X, y)
        assert est.score(X, y) >= 0.95

    def test_predict_proba_rows_are_distributions(self):
        X, y = text_corpus()
        est = small_estimator(epochs=2).fit(X, y)
        proba = est.predict_proba(X)
        assert proba.shape == (len(X), 3)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert (proba >= 0).all()

    def test_proba_argmax_agrees_with_predict(self):
        X, y = text_corpus()
        est = small_estimator(epochs=2).fit(X, y)
        labels = est.predict(X)
        proba = est.predict_proba(X)
        assert all(
            label == est.classes_[int(np.argmax(row))]
            for label, row in zip(labels, proba)
        )

    def test_same_seed_same_predictions(self):
        X, y = text_corpus()
        a = small_estimator(epochs=3).fit(X, y).predict(X)
        b = small_estimator(epochs=3).fit(X, y).predict(X)
        assert list(a) == list(b)

    def test_unseen_words_fall_back_to_unk(self):
        X, y = text_corpus()
        est = small_estimator(epochs=1).fit(X, y)
        out = est.predict([("completely novel words", "unseen vocabulary here")])
        assert out[0] in CLASS_ORDER

    def test_pretokenized_input_accepted(self):
        X = [(["a", "dog"], ["indeed", "an", "animal"])] * 3
        y = ["entailment"] * 3
        est = small_estimator(epochs=1).fit(X, y)
        assert est.predict(X)[0] in CLASS_ORDER

    def test_validation_fraction_enables_early_stop_tracking(self):
        X, y = text_corpus(24)
        est = small_estimator(epochs=4, validation_fraction=0.25).fit(X, y)
        assert est.training_result_.best_dev_accuracy is not None

    def test_grounded_fit_with_images(self):
        X, y = [], []
        for i in range(6):
            label = CLASS_ORDER[i % 3]
            X.append(
                (
                    f"scene {i}",
                    f"{_TELLTALE[label]} thing",
                    synthetic_image(GLOBAL_4096, seed=i),
                )
            )
            y.append(label)
        est = small_estimator(architecture="v-lstm", grounding="h+i", epochs=2)
        est.fit(X, y)
        assert est.predict(X).shape == (6,)

    def test_config_reflects_architecture(self):
        X, y = text_corpus()
        est = small_estimator(architecture="LSTM", epochs=1).fit(X, y)
        assert est.config_.architecture == "lstm"
        assert est.model_.config is est.config_


class TestInputRejection:
    def test_bad_label_named(self):
        X, y = text_corpus(3)
        y = [y[0], "yes", y[2]]
        with pytest.raises(ValueError, match="y\\[1\\] is 'yes'"):
            small_estimator().fit(X, y)

    def test_length_mismatch(self):
        X, _ = text_corpus(4)
        with pytest.raises(ValueError, match="4 rows but y has 3"):
            small_estimator().fit(X, ["entailment"] * 3)

    def test_row_width_checked(self):
        with pytest.raises(ValueError, match="expected 2 or 3"):
            small_estimator().fit([("a", "b", None, "d")], ["entailment"])

    def test_non_sequence_rejected(self):
        with pytest.raises(TypeError):
            small_estimator().fit([42], ["entailment"])

    def test_empty_x_rejected(self):
        with pytest.raises(ValueError, match="at least one pair"):
            small_estimator().fit([], [])

    def test_bad_image_type_rejected(self):
        with pytest.raises(TypeError, match="ImageFeature"):
            small_estimator().fit(
                [("a b", "c d", np.zeros(3))], ["entailment"]
            )

    def test_epochs_validated_at_fit(self):
        X, y = text_corpus(3)
        with pytest.raises(ValueError, match="epochs"):
            small_estimator(epochs=0).fit(X, y)

    def test_validation_fraction_range(self):
        X, y = text_corpus(3)
        with pytest.raises(ValueError, match="validation_fraction"):
            small_estimator(validation_fraction=1.0).fit(X, y)


class TestValidationHelpers:
    def test_check_sentence_tokenizes_strings(self):
        assert check_sentence("A dog runs.", "premise") == ["A", "dog", "runs", "."]

    def test_check_sentence_rejects_empty(self):
        with pytest.raises(ValueError, match="premise"):
            check_sentence("", "premise")

    def test_check_sentence_rejects_non_string_tokens(self):
        with pytest.raises(TypeError, match="string tokens"):
            check_sentence(["a", 3], "hypothesis")

    def test_check_pairs_normalizes(self):
        rows = check_pairs([("a b", ["c", "d"])])
        assert rows == [(["a", "b"], ["c", "d"], None)]

    def test_check_labels_passthrough(self):
        labels = ["neutral", "entailment"]
        assert check_labels(labels, 2) == labels
