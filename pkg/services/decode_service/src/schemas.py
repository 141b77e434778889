from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import (
    BadConfig,
    DuplicateSupport,
    InvalidSequence,
    NegativeProb,
    NonNormalized,
    UnsortedTruncation,
)

PROB_TOL = 1e-9

DistKind = Literal["full", "truncated"]


# -----------------------
# Token sequences
# -----------------------

@dataclass(frozen=True)
class TokenSeq:
    """Committed tokens; the first ``prompt_len`` belong to the input context."""

    tokens: Tuple[int, ...]
    prompt_len: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if not 0 <= self.prompt_len <= len(self.tokens):
            raise InvalidSequence(
                f"prompt_len={self.prompt_len} outside [0, {len(self.tokens)}]"
            )

    @classmethod
    def from_prompt(cls, tokens: Sequence[int]) -> "TokenSeq":
        return cls(tuple(tokens), len(tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, item):
        return self.tokens[item]

    @property
    def generated(self) -> Tuple[int, ...]:
        return self.tokens[self.prompt_len:]

    def extend(self, new_tokens: Sequence[int]) -> "TokenSeq":
        return TokenSeq(self.tokens + tuple(new_tokens), self.prompt_len)

    def check_vocab(self, vocab_size: int) -> None:
        for t in self.tokens:
            if t < 0 or t >= vocab_size:
                raise InvalidSequence(f"token id {t} outside vocab of size {vocab_size}")

    def to_record(self) -> Dict[str, Any]:
        return {"tokens": list(self.tokens), "prompt_len": self.prompt_len}

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "TokenSeq":
        return cls(tuple(record["tokens"]), int(record["prompt_len"]))


# -----------------------
# Distributions
# -----------------------

@dataclass(frozen=True, eq=False)
class Distribution:
    """Next-token probabilities; ``full`` covers the vocabulary, ``truncated`` a top-K."""

    support: np.ndarray
    probs: np.ndarray
    kind: DistKind = "full"

    def __post_init__(self) -> None:
        support = np.array(self.support, dtype=np.int64)
        probs = np.array(self.probs, dtype=np.float64)
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def full(cls, probs: Sequence[float]) -> "Distribution":
        probs = np.asarray(probs, dtype=np.float64)
        return cls(np.arange(len(probs), dtype=np.int64), probs, "full")

    @classmethod
    def one_hot(cls, token: int, vocab_size: int) -> "Distribution":
        probs = np.zeros(vocab_size, dtype=np.float64)
        probs[token] = 1.0
        return cls.full(probs)

    @classmethod
    def uniform(cls, vocab_size: int) -> "Distribution":
        return cls.full(np.full(vocab_size, 1.0 / vocab_size))

    def __len__(self) -> int:
        return len(self.support)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return (
            self.kind == other.kind
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def _dense(self) -> bool:
        return bool(np.array_equal(self.support, np.arange(len(self.support))))

    @cached_property
    def _index(self) -> Dict[int, int]:
        return {int(t): i for i, t in enumerate(self.support)}

    @cached_property
    def _order(self) -> np.ndarray:
        # descending probability, lowest id first on ties
        return np.lexsort((self.support, -self.probs))

    def prob(self, token: int) -> float:
        if self._dense:
            return float(self.probs[token]) if 0 <= token < len(self.probs) else 0.0
        i = self._index.get(int(token))
        return 0.0 if i is None else float(self.probs[i])

    @cached_property
    def max_prob(self) -> float:
        return float(self.probs.max()) if len(self.probs) else 0.0

    def argmax(self) -> int:
        if self._dense:
            return int(np.argmax(self.probs))
        return int(self.support[self._order[0]])

    def rank(self, token: int) -> Optional[int]:
        """1-based rank of ``token``; None when it is outside the support."""
        if self._dense:
            if not 0 <= token < len(self.probs):
                return None
            p = self.probs[token]
        else:
            i = self._index.get(int(token))
            if i is None:
                return None
            p = self.probs[i]
        above = np.count_nonzero(self.probs > p)
        tied_lower = np.count_nonzero((self.probs == p) & (self.support < token))
        return int(above + tied_lower + 1)

    def top(self, k: int) -> List[int]:
        return [int(t) for t in self.support[self._order[:k]]]

    def truncate(self, k: int) -> "Distribution":
        idx = self._order[:k]
        return Distribution(self.support[idx], self.probs[idx], "truncated")

    def to_record(self) -> Dict[str, Any]:
        return {
            "support": self.support.tolist(),
            "probs": self.probs.tolist(),
            "kind": self.kind,
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Distribution":
        return cls(record["support"], record["probs"], record.get("kind", "full"))


def validate_distribution(d: Distribution) -> None:
    """Raise the matching InvalidDistribution subclass; return None when valid."""
    if len(np.unique(d.support)) != len(d.support):
        raise DuplicateSupport("support contains duplicate token ids")
    if np.any(d.probs < 0):
        raise NegativeProb("negative probability")
    total = float(np.sum(d.probs))
    if d.kind == "full":
        if abs(total - 1.0) > PROB_TOL:
            raise NonNormalized(f"probabilities sum to {total!r}, expected 1")
    else:
        if total > 1.0 + PROB_TOL:
            raise NonNormalized(f"truncated probabilities sum to {total!r} > 1")
        if np.any(np.diff(d.probs) > 0):
            raise UnsortedTruncation("truncated probabilities must be non-increasing")


# -----------------------
# Engine configuration
# -----------------------

class VerificationMode(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["strict", "fixed", "topk", "adaptive"] = "adaptive"
    threshold: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    k: Optional[int] = Field(default=None, ge=1)

    @classmethod
    def parse(cls, text: Union[str, "VerificationMode"]) -> "VerificationMode":
        if isinstance(text, VerificationMode):
            return text
        name, _, arg = str(text).strip().partition(":")
        try:
            if name == "fixed":
                return cls(kind="fixed", threshold=float(arg) if arg else 0.1)
            if name == "topk":
                return cls(kind="topk", k=int(arg) if arg else 5)
            if name in ("strict", "adaptive") and not arg:
                return cls(kind=name)
        except (ValueError, ValidationError) as e:
            raise BadConfig(f"Invalid verification mode {text!r}: {e}") from e
        raise BadConfig(f"Unknown verification mode {text!r}")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.threshold!r}"
        if self.kind == "topk":
            return f"topk:{self.k}"
        return self.kind


class EngineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ngram_len: int = Field(6, ge=1, description="Tokens copied per retrieved candidate")
    max_key_len: int = Field(6, ge=1, description="Longest suffix used as retrieval key")
    min_key_len: int = Field(1, ge=1, description="Shortest suffix used as retrieval key")
    max_expansion: int = Field(2, ge=0, description="Alignment-sampled siblings per slot")
    cache_topk: int = Field(8, ge=1, description="Entries kept per cached distribution")
    alpha: float = Field(0.1, ge=0.0)
    beta: float = Field(0.1, ge=0.0, le=1.0)
    verification_mode: VerificationMode = Field(default_factory=VerificationMode)
    max_candidates: int = Field(4, ge=1)
    max_new_tokens: int = Field(256, ge=0)
    seed: int = 0
    alignment_sampling: bool = True
    eos_token_id: Optional[int] = Field(default=None, ge=0, description="Overrides the model EOS")

    @field_validator("verification_mode", mode="before")
    @classmethod
    def _parse_mode(cls, v):
        return VerificationMode.parse(v) if isinstance(v, str) else v

    @classmethod
    def build(cls, **kwargs) -> "EngineConfig":
        try:
            cfg = cls(**kwargs)
        except ValidationError as e:
            raise BadConfig(str(e)) from e
        if cfg.min_key_len > cfg.max_key_len:
            raise BadConfig("min_key_len must not exceed max_key_len")
        return cfg

    def with_(self, **changes) -> "EngineConfig":
        return EngineConfig.build(**{**self.model_dump(), **changes})


# -----------------------
# HTTP service
# -----------------------

class DecodeRequest(BaseModel):
    prompt: Union[str, List[int]] = Field(..., description="Raw text (byte-level tokens) or token ids")
    mode: Optional[str] = Field(default=None, description="strict | fixed:<d> | topk:<k> | adaptive")
    alpha: Optional[float] = None
    beta: Optional[float] = None
    max_new_tokens: Optional[int] = None
    alignment_sampling: Optional[bool] = None


class DecodeResponse(BaseModel):
    tokens: List[int]
    text: Optional[str] = None
    steps: int
    mal: Optional[float] = None
    accepted_per_step: List[int] = Field(default_factory=list)
    version: str = "v1"


# -----------------------
# Harness reports
# -----------------------

class ItemReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    tokens_emitted: int
    steps: int
    mal: Optional[float] = None
    acc_rate_input: Optional[float] = None
    acc_rate_generated: Optional[float] = None
    acc_rate_sampled: Optional[float] = None
    aligned_acc: Optional[float] = None
    misaligned_acc: Optional[float] = None
    exact_match: Optional[bool] = None
    overlap_score: Optional[float] = None
    lossless: Optional[bool] = None
    wall_ms: Optional[float] = None


class AggregateReport(BaseModel):
    items: int
    tokens_emitted: int
    steps: int
    mal: Optional[float] = Field(None, description="Corpus mean of per-item MAL; unset when no item decoded a step")
    acc_rate_input: Optional[float] = None
    acc_rate_generated: Optional[float] = None
    acc_rate_sampled: Optional[float] = None
    aligned_acc: Optional[float] = None
    misaligned_acc: Optional[float] = None
    exact_match_rate: Optional[float] = None
    overlap_score: Optional[float] = None
    lossless: Optional[bool] = None
    tokens_per_second: Optional[float] = None
    wall_ms: Optional[float] = None


class RunReport(BaseModel):
    command: str = "run"
    model: str
    config: EngineConfig
    items: List[ItemReport]
    aggregate: AggregateReport
    version: str = "v1"


class AblationReport(BaseModel):
    command: str = "ablate"
    model: str
    modes: Dict[str, RunReport]
    version: str = "v1"


class SweepRow(BaseModel):
    threshold: float
    config: Optional[EngineConfig] = None
    mal: Optional[float] = None
    exact_match_rate: Optional[float] = None
    overlap_score: Optional[float] = None


class SweepReport(BaseModel):
    command: str = "sweep"
    model: str
    rows: List[SweepRow]
    monotone: bool = Field(..., description="MAL non-decreasing as the threshold decreases")
    version: str = "v1"


class OverlapRow(BaseModel):
    id: str
    ratio: float
    reference_len: int


class OverlapReport(BaseModel):
    command: str = "overlap"
    variant: Literal["subsequence", "substring"] = "subsequence"
    items: List[OverlapRow]
    mean: float
    version: str = "v1"
