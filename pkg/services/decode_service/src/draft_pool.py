from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import DefaultDict, Dict, List, Optional, Tuple

from .exceptions import EmptySequence, PrefixMutated
from .schemas import TokenSeq

Key = Tuple[int, ...]


@dataclass(frozen=True)
class PoolMatch:
    key_len: int
    positions: List[int]


class DraftPool:
    """Sliding-window index from token tuples to the end positions where they occur.

    A value ``v`` stored under a key of length ``k`` means the key occupies
    ``tokens[v - k:v]``. Position lists are append-only and strictly increasing.
    Single writer; lookups between updates are read-only.
    """

    def __init__(self, max_key_len: int, min_key_len: int = 1):
        self.max_key_len = max_key_len
        self.min_key_len = min_key_len
        self.index: DefaultDict[Key, List[int]] = defaultdict(list)
        self._tokens: Tuple[int, ...] = ()

    @property
    def indexed_len(self) -> int:
        return len(self._tokens)

    def _insert_range(self, tokens: Tuple[int, ...], start: int) -> None:
        # windows ending at v in (start, len(tokens)]
        n = len(tokens)
        for k in range(1, self.max_key_len + 1):
            for v in range(max(start + 1, k), n + 1):
                self.index[tokens[v - k:v]].append(v)

    def extend(self, seq: TokenSeq) -> "DraftPool":
        tokens = seq.tokens
        old = self.indexed_len
        if len(tokens) < old or tokens[:old] != self._tokens:
            raise PrefixMutated(
                f"indexed prefix of {old} tokens differs from the sequence being indexed"
            )
        if len(tokens) > old:
            self._insert_range(tokens, old)
            self._tokens = tokens
        return self

    def lookup(self, seq: TokenSeq, max_candidates: Optional[int] = None) -> Optional[PoolMatch]:
        tokens = seq.tokens
        n = len(tokens)
        for k in range(min(self.max_key_len, n), self.min_key_len - 1, -1):
            hits = self.index.get(tokens[n - k:])
            if not hits:
                continue
            # an occurrence ending at the sequence end has nothing to copy
            positions = [v for v in hits if v < n]
            if not positions:
                continue
            if max_candidates is not None:
                positions = positions[-max_candidates:]
            return PoolMatch(key_len=k, positions=positions)
        return None

    def as_dict(self) -> Dict[Key, List[int]]:
        return {k: list(v) for k, v in self.index.items() if v}


def build_pool(seq: TokenSeq, max_key_len: int, min_key_len: int = 1) -> DraftPool:
    if len(seq) == 0:
        raise EmptySequence("cannot build a draft pool over an empty sequence")
    return DraftPool(max_key_len, min_key_len).extend(seq)


def extend_pool(pool: DraftPool, seq: TokenSeq) -> DraftPool:
    return pool.extend(seq)


def lookup_longest(
    pool: DraftPool, seq: TokenSeq, max_candidates: Optional[int] = None
) -> Optional[PoolMatch]:
    return pool.lookup(seq, max_candidates)
