from __future__ import annotations

from abc import ABC, abstractmethod
from collections import Counter, defaultdict
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidSequence, ModelSpecError, UntrainedModel
from .schemas import Distribution, TokenSeq, validate_distribution

Context = Tuple[int, ...]


class LanguageModel(ABC):
    """Target-model contract.

    ``next_distribution`` is the single primitive; prefill and tree passes are
    derived from it, so a tree pass over a chain is identical to per-step
    prefill by construction. Implementations are immutable after construction
    (the memo only caches pure results).
    """

    vocab_size: int
    eos_token_id: Optional[int]
    # trailing tokens the model conditions on; None means the whole context
    context_window: Optional[int] = None

    def _tail(self, context: Sequence[int]) -> Context:
        w = self.context_window
        if w is None:
            return tuple(context)
        if w == 0:
            return ()
        return tuple(context[-w:])

    @abstractmethod
    def next_distribution(self, context: Sequence[int]) -> Distribution:
        """Full distribution over the vocabulary for the token after ``context``."""

    def prefill(self, seq: Sequence[int]) -> List[Distribution]:
        """``out[i]`` is the distribution after the first ``i + 1`` tokens."""
        tokens = seq.tokens if isinstance(seq, TokenSeq) else tuple(seq)
        return [self.next_distribution(tokens[: i + 1]) for i in range(len(tokens))]

    def forward_tree(
        self, prefix: Sequence[int], node_tokens: Sequence[int], mask: np.ndarray
    ) -> List[Distribution]:
        """One pass over a linearized draft tree.

        ``prefix`` is the committed sequence; its last token is node 0 (the
        root). Node ``i`` sees the prefix plus exactly the nodes its mask row
        allows.
        """
        if node_tokens[0] != prefix[-1]:
            raise InvalidSequence("tree root must be the last committed token")
        base = self._tail(tuple(prefix[:-1]))
        out = []
        for i in range(len(node_tokens)):
            visible = np.flatnonzero(mask[i])
            ctx = base + tuple(node_tokens[j] for j in visible)
            out.append(self.next_distribution(ctx))
        return out


# -----------------------
# Table model
# -----------------------

class TableModel(LanguageModel):
    """Explicit context-window → distribution table; unlisted contexts are uniform."""

    def __init__(
        self,
        vocab_size: int,
        window: int,
        rows: Mapping[Context, Distribution],
        eos_token_id: Optional[int] = -1,
    ):
        self.vocab_size = vocab_size
        self.context_window = window
        self.eos_token_id = vocab_size - 1 if eos_token_id == -1 else eos_token_id
        self._rows: Dict[Context, Distribution] = {}
        for ctx, dist in rows.items():
            ctx = tuple(int(t) for t in ctx)
            if len(ctx) > window:
                raise ModelSpecError(f"context {ctx} longer than window {window}")
            if dist.kind != "full" or len(dist) != vocab_size:
                raise ModelSpecError(f"row {ctx} must be a full distribution over {vocab_size} tokens")
            validate_distribution(dist)
            self._rows[ctx] = dist
        self._uniform = Distribution.uniform(vocab_size)

    @property
    def rows(self) -> Dict[Context, Distribution]:
        return dict(self._rows)

    def next_distribution(self, context: Sequence[int]) -> Distribution:
        return self._rows.get(self._tail(context), self._uniform)

    @classmethod
    def from_spec(cls, spec: Mapping[str, Any]) -> "TableModel":
        try:
            vocab_size = int(spec["vocab_size"])
            rows = {
                tuple(row["context"]): Distribution.full(row["probs"])
                for row in spec.get("rows", [])
            }
            return cls(
                vocab_size,
                int(spec.get("window", 1)),
                rows,
                spec.get("eos_token_id", -1),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelSpecError(f"Malformed table model: {e}") from e

    def to_spec(self) -> Dict[str, Any]:
        return {
            "vocab_size": self.vocab_size,
            "window": self.context_window,
            "eos_token_id": self.eos_token_id,
            "rows": [
                {"context": list(ctx), "probs": dist.probs.tolist()}
                for ctx, dist in self._rows.items()
            ],
        }


# -----------------------
# N-gram language model
# -----------------------

class NGramLM(LanguageModel):
    """Add-k smoothed n-gram model with fixed-order backoff for short contexts.

    A context shorter than ``order - 1`` (start of sequence) is scored with the
    matching lower-order table; a context never observed in training is uniform.
    """

    def __init__(self, order: int, vocab_size: int, k: float = 1.0, eos_token_id: Optional[int] = -1):
        if order < 1:
            raise ModelSpecError("n-gram order must be >= 1")
        if k < 0:
            raise ModelSpecError("smoothing constant must be >= 0")
        self.order = order
        self.vocab_size = vocab_size
        self.k = float(k)
        self.context_window = order - 1
        self.eos_token_id = vocab_size - 1 if eos_token_id == -1 else eos_token_id
        self._counts: Dict[Context, Counter] = defaultdict(Counter)
        self._totals: Dict[Context, int] = defaultdict(int)
        self._trained = False
        self._memo: Dict[Context, Distribution] = {}

    def train(self, stream: Iterable[int]) -> "NGramLM":
        tokens = [int(t) for t in stream]
        for t in tokens:
            if not 0 <= t < self.vocab_size:
                raise InvalidSequence(f"token id {t} outside vocab of size {self.vocab_size}")
        for i, t in enumerate(tokens):
            for r in range(min(self.order - 1, i) + 1):
                ctx = tuple(tokens[i - r:i])
                self._counts[ctx][t] += 1
                self._totals[ctx] += 1
        self._trained = self._trained or bool(tokens)
        self._memo.clear()
        return self

    def _require_trained(self) -> None:
        if not self._trained:
            raise UntrainedModel("n-gram model has not been trained")

    def count(self, ctx: Sequence[int], token: Optional[int] = None) -> int:
        ctx = tuple(ctx)
        if token is None:
            return self._totals.get(ctx, 0)
        counts = self._counts.get(ctx)
        return counts[token] if counts else 0

    def prob(self, ctx: Sequence[int], token: int) -> float:
        self._require_trained()
        key = self._tail(ctx)
        total = self._totals.get(key, 0)
        if total == 0:
            return 1.0 / self.vocab_size
        return (self._counts[key][token] + self.k) / (total + self.k * self.vocab_size)

    def next_distribution(self, context: Sequence[int]) -> Distribution:
        self._require_trained()
        key = self._tail(context)
        dist = self._memo.get(key)
        if dist is None:
            total = self._totals.get(key, 0)
            if total == 0:
                dist = Distribution.uniform(self.vocab_size)
            else:
                numer = np.full(self.vocab_size, self.k)
                for t, c in self._counts[key].items():
                    numer[t] += c
                dist = Distribution.full(numer / (total + self.k * self.vocab_size))
            self._memo[key] = dist
        return dist


def ngram_prob(lm: NGramLM, ctx: Sequence[int], token: int) -> float:
    return lm.prob(ctx, token)


# -----------------------
# Autoregressive oracle
# -----------------------

def greedy_decode(
    model: LanguageModel,
    seq: TokenSeq,
    max_new: int,
    eos_token_id: Optional[int] = -1,
) -> TokenSeq:
    """One token per forward pass: append the argmax until EOS or ``max_new``."""
    eos = model.eos_token_id if eos_token_id == -1 else eos_token_id
    tokens = list(seq.tokens)
    for _ in range(max_new):
        t = model.next_distribution(tokens).argmax()
        tokens.append(t)
        if t == eos:
            break
    return TokenSeq(tuple(tokens), seq.prompt_len)
