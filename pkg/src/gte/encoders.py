"""Vocabulary, word embeddings, and LSTM sentence encoders.

Sentences become index sequences through a frequency-ranked vocabulary with
reserved padding and unknown slots, then dense vectors through an embedding
table (optionally warm-started from a pretrained vector file), then either a
single final-state vector or per-time-step contextual states from an LSTM
run in one or both directions.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    add,
    matmul,
    mul,
    row,
    sigmoid,
    stack,
    take_rows,
    tanh,
)

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

DEFAULT_MAX_VOCAB = 300_000
DEFAULT_EMBED_DIM = 300
DEFAULT_HIDDEN_DIM = 512
DEFAULT_MAX_LEN = 82

_TOKEN_RE = re.compile(r"\w+(?:'\w+)*|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Whitespace split with punctuation detached into separate tokens."""
    return _TOKEN_RE.findall(text)


class Vocabulary:
    """Bijective token/index map with PAD at 0 and UNK at 1.

    Lookups are lowercased; stored tokens keep the form they were built with.
    """

    def __init__(self, tokens: Sequence[str]):
        self._index_to_token = [PAD_TOKEN, UNK_TOKEN] + list(tokens)
        self._token_to_index = {t: i for i, t in enumerate(self._index_to_token)}
        if len(self._token_to_index) != len(self._index_to_token):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self._index_to_token)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self._token_to_index

    def index(self, token: str) -> int:
        return self._token_to_index.get(token.lower(), UNK_INDEX)

    def token(self, index: int) -> str:
        return self._index_to_token[index]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index(t) for t in tokens]

    def decode(self, indices: Iterable[int]) -> list[str]:
        return [self.token(i) for i in indices]

    def tokens(self) -> list[str]:
        """Non-reserved tokens in index order, for serialization."""
        return self._index_to_token[2:]


def build_vocab(token_stream: Iterable[str], max_size: int = DEFAULT_MAX_VOCAB) -> Vocabulary:
    """Rank tokens by frequency (ties lexicographic), truncate, add reserved slots."""
    counts: dict[str, int] = {}
    for tok in token_stream:
        t = tok.lower()
        counts[t] = counts.get(t, 0) + 1
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty token stream")
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocabulary(ranked[:max_size])


class EmbeddingTable:
    """Trainable word-vector matrix, one row per vocabulary index.

    The PAD row is all-zero and must stay that way: callers that train the
    table zero its gradient row through `mask_pad_gradient` before stepping.
    """

    def __init__(self, weights: Tensor, trainable: bool = True):
        if weights.ndim != 2:
            raise ShapeError(f"embedding table must be a matrix, got shape {weights.shape}")
        self.weights = weights
        self.trainable = trainable
        self.weights.requires_grad = trainable
        if trainable and self.weights.grad is None:
            self.weights.grad = np.zeros_like(self.weights.data)

    @classmethod
    def seeded(cls, vocab_size: int, embed_dim: int, seed: int = 0, trainable: bool = True) -> "EmbeddingTable":
        rng = np.random.default_rng(seed)
        data = rng.uniform(-0.05, 0.05, size=(vocab_size, embed_dim))
        data[PAD_INDEX] = 0.0
        return cls(Tensor(data), trainable=trainable)

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.weights.shape[1]

    def lookup(self, indices: Sequence[int]) -> Tensor:
        return take_rows(self.weights, np.asarray(indices, dtype=np.intp))

    def mask_pad_gradient(self) -> None:
        if self.weights.grad is not None:
            self.weights.grad[PAD_INDEX] = 0.0


def load_pretrained_embeddings(
    path,
    vocab: Vocabulary,
    embed_dim: Optional[int] = None,
    seed: int = 0,
    trainable: bool = True,
) -> EmbeddingTable:
    """Build a table from a "token float ... float" text file.

    Rows for tokens found in the file are copied; everything else (including
    UNK) gets a reproducible seeded uniform(-0.05, 0.05) row; PAD stays zero.
    Lines whose values fail to parse, or whose width disagrees with the rest
    of the file, raise with the offending line number.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = embed_dim
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split()
            if not parts:
                continue
            token, fields = parts[0], parts[1:]
            try:
                vec = np.array([float(x) for x in fields], dtype=np.float64)
            except ValueError as e:
                raise ValueError(f"line {lineno}: non-numeric embedding value ({e})") from None
            if dim is None:
                dim = vec.size
            if vec.size != dim:
                raise ValueError(
                    f"line {lineno}: expected {dim} values, found {vec.size}"
                )
            if token.lower() in vocab:
                vectors[token.lower()] = vec
    if dim is None:
        raise ValueError("embedding file contains no entries and no dimension was given")

    rng = np.random.default_rng(seed)
    data = np.zeros((len(vocab), dim))
    for idx in range(1, len(vocab)):  # PAD row 0 stays zero
        tok = vocab.token(idx).lower()
        found = vectors.get(tok)
        # Draw unconditionally so row values do not depend on which other
        # tokens the file happens to contain.
        fallback = rng.uniform(-0.05, 0.05, size=dim)
        data[idx] = found if found is not None else fallback
    return EmbeddingTable(Tensor(data), trainable=trainable)


_GATES = ("input", "forget", "output", "candidate")


class LstmParameters:
    """Per-gate weight matrices and biases for one LSTM direction."""

    def __init__(self, weights: dict[str, Tensor]):
        for gate in _GATES:
            for part in ("wx", "wh", "b"):
                if f"{gate}.{part}" not in weights:
                    raise ValueError(f"missing LSTM parameter {gate}.{part}")
        self._weights = weights
        h, e = weights["input.wx"].shape
        for gate in _GATES:
            if weights[f"{gate}.wx"].shape != (h, e) or weights[f"{gate}.wh"].shape != (h, h) or weights[f"{gate}.b"].shape != (h,):
                raise ShapeError(f"inconsistent shapes in gate {gate}")
        self.input_dim = e
        self.hidden_dim = h

    @classmethod
    def seeded(cls, input_dim: int, hidden_dim: int = DEFAULT_HIDDEN_DIM, seed: int = 0) -> "LstmParameters":
        rng = np.random.default_rng(seed)
        weights: dict[str, Tensor] = {}
        for gate in _GATES:
            weights[f"{gate}.wx"] = Tensor(
                rng.uniform(-0.08, 0.08, size=(hidden_dim, input_dim)), requires_grad=True
            )
            weights[f"{gate}.wh"] = Tensor(
                rng.uniform(-0.08, 0.08, size=(hidden_dim, hidden_dim)), requires_grad=True
            )
            # Forget bias starts at 1 so early training does not erase state.
            bias = np.full(hidden_dim, 1.0) if gate == "forget" else np.zeros(hidden_dim)
            weights[f"{gate}.b"] = Tensor(bias, requires_grad=True)
        return cls(weights)

    def __getitem__(self, name: str) -> Tensor:
        return self._weights[name]

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        sep = "." if prefix else ""
        return [(f"{prefix}{sep}{gate}.{part}", self._weights[f"{gate}.{part}"])
                for gate in _GATES for part in ("wx", "wh", "b")]


def lstm_step(x: Tensor, h: Tensor, c: Tensor, params: LstmParameters) -> tuple[Tensor, Tensor]:
    """One LSTM cell update: gated candidate write plus gated carry."""

    def gate(name: str, activate):
        pre = add(add(matmul(params[f"{name}.wx"], x), matmul(params[f"{name}.wh"], h)), params[f"{name}.b"])
        return activate(pre)

    i = gate("input", sigmoid)
    f = gate("forget", sigmoid)
    o = gate("output", sigmoid)
    g = gate("candidate", tanh)
    c_next = add(mul(f, c), mul(i, g))
    h_next = mul(o, tanh(c_next))
    return h_next, c_next


@dataclass
class ContextualEmbedding:
    """Per-time-step encoder states over the real (unpadded) tokens.

    ``forward`` holds states in reading order; ``backward``, when present,
    holds the reverse-direction state aligned to the same positions (row t is
    the backward state after consuming tokens T-1 down to t).
    """

    forward: Tensor
    backward: Optional[Tensor]
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ShapeError("contextual embedding requires at least one time-step")
        if self.forward.shape[0] != self.length:
            raise ShapeError("forward state count disagrees with declared length")
        if self.backward is not None and self.backward.shape != self.forward.shape:
            raise ShapeError("backward states must match forward shape")


def _clean_indices(token_indices: Sequence[int], max_len: int) -> list[int]:
    idx = list(token_indices)
    while idx and idx[-1] == PAD_INDEX:
        idx.pop()
    if not idx:
        raise ValueError("cannot encode an empty token sequence")
    if len(idx) > max_len:
        logger.warning("truncating sequence of %d tokens to %d", len(idx), max_len)
        idx = idx[:max_len]
    return idx


def run_lstm(x_rows: Tensor, params: LstmParameters, reverse: bool = False) -> list[Tensor]:
    """Hidden states over the rows of ``x_rows``, listed in processing order."""
    n = x_rows.shape[0]
    positions = range(n - 1, -1, -1) if reverse else range(n)
    h = Tensor(np.zeros(params.hidden_dim))
    c = Tensor(np.zeros(params.hidden_dim))
    states = []
    for t in positions:
        h, c = lstm_step(row(x_rows, t), h, c, params)
        states.append(h)
    return states


def encode_final(
    token_indices: Sequence[int],
    table: EmbeddingTable,
    params: LstmParameters,
    max_len: int = DEFAULT_MAX_LEN,
    row_transform=None,
) -> Tensor:
    """Final hidden state after reading the real tokens left to right.

    ``row_transform`` (e.g. a dropout closure) is applied to the looked-up
    embedding rows before they enter the recurrence.
    """
    idx = _clean_indices(token_indices, max_len)
    x_rows = table.lookup(idx)
    if row_transform is not None:
        x_rows = row_transform(x_rows)
    return run_lstm(x_rows, params)[-1]


def encode_contextual(
    token_indices: Sequence[int],
    table: EmbeddingTable,
    params_fwd: LstmParameters,
    params_bwd: Optional[LstmParameters] = None,
    max_len: int = DEFAULT_MAX_LEN,
    row_transform=None,
) -> ContextualEmbedding:
    """All per-step states, forward and (when params_bwd given) backward."""
    idx = _clean_indices(token_indices, max_len)
    x_rows = table.lookup(idx)
    if row_transform is not None:
        x_rows = row_transform(x_rows)
    fwd_states = run_lstm(x_rows, params_fwd)
    backward = None
    if params_bwd is not None:
        backward = stack(list(reversed(run_lstm(x_rows, params_bwd, reverse=True))))
    return ContextualEmbedding(forward=stack(fwd_states), backward=backward, length=len(idx))
