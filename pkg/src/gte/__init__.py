"""Grounded textual entailment: models, data tooling, and evaluation."""

__version__ = "0.1.0"
