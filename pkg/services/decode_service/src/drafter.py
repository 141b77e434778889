from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .draft_pool import PoolMatch
from .schemas import Distribution, TokenSeq


class Origin(str, Enum):
    COMMITTED = "committed"
    INPUT_CONTEXT = "input-context"
    GENERATED_CONTEXT = "generated-context"
    ALIGNMENT_SAMPLED = "alignment-sampled"


# -----------------------
# Alignment cache
# -----------------------

class AlignmentCache:
    """Truncated next-token distributions keyed by context length.

    ``cache[i]`` is the model's distribution after the first ``i`` tokens of the
    sequence, i.e. the one that predicts ``tokens[i]``.
    """

    def __init__(self, topk: int = 8):
        self.topk = topk
        self._entries: Dict[int, Distribution] = {}

    def put(self, context_len: int, dist: Distribution) -> None:
        if dist.kind == "truncated" and len(dist) <= self.topk:
            self._entries[context_len] = dist
        else:
            self._entries[context_len] = dist.truncate(self.topk)

    def get(self, context_len: int) -> Optional[Distribution]:
        return self._entries.get(context_len)

    def __contains__(self, context_len: int) -> bool:
        return context_len in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def positions(self) -> List[int]:
        return sorted(self._entries)


# -----------------------
# Candidates and expansion
# -----------------------

@dataclass(frozen=True)
class Candidate:
    tokens: Tuple[int, ...]
    source_pos: Tuple[int, ...]


@dataclass(frozen=True)
class Expansion:
    slot: int
    tokens: Tuple[int, ...]


def collect_candidates(seq: TokenSeq, match: Optional[PoolMatch], n: int) -> List[Candidate]:
    """Copy up to ``n`` tokens after every matched position, most recent first."""
    if match is None:
        return []
    tokens = seq.tokens
    out = []
    for v in reversed(match.positions):
        end = min(v + n, len(tokens))
        if end <= v:
            continue
        out.append(Candidate(tokens[v:end], tuple(range(v, end))))
    return out


def align_expand(
    candidate: Candidate, cache: AlignmentCache, max_expansion: int
) -> List[Expansion]:
    """Higher-ranked alternatives for every slot whose copied token is not the cached top-1."""
    if max_expansion <= 0:
        return []
    out = []
    for slot, (token, pos) in enumerate(zip(candidate.tokens, candidate.source_pos)):
        dist = cache.get(pos)
        if dist is None:
            continue
        rank = dist.rank(token)
        if rank == 1:
            continue
        width = max_expansion if rank is None else min(rank - 1, max_expansion)
        out.append(Expansion(slot, tuple(dist.top(width))))
    return out


# -----------------------
# Draft tree
# -----------------------

@dataclass(frozen=True)
class DraftNode:
    token: int
    parent: int  # -1 for the root
    origin: Origin
    depth: int
    source_pos: Optional[int] = None
    aligned: Optional[bool] = None


@dataclass
class DraftTree:
    """Trie of draft tokens; node 0 is the root (last committed token)."""

    nodes: List[DraftNode] = field(default_factory=list)
    children: List[Dict[int, int]] = field(default_factory=list)

    @classmethod
    def rooted(cls, root_token: int) -> "DraftTree":
        tree = cls()
        tree.nodes.append(DraftNode(root_token, -1, Origin.COMMITTED, 0))
        tree.children.append({})
        return tree

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def root_token(self) -> int:
        return self.nodes[0].token

    @property
    def tokens(self) -> List[int]:
        return [n.token for n in self.nodes]

    @property
    def parents(self) -> List[int]:
        return [n.parent for n in self.nodes]

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes)

    def layer_counts(self) -> List[int]:
        counts = [0] * self.depth
        for n in self.nodes[1:]:
            counts[n.depth - 1] += 1
        return counts

    def add(
        self,
        parent: int,
        token: int,
        origin: Origin,
        source_pos: Optional[int] = None,
        aligned: Optional[bool] = None,
    ) -> int:
        """Attach ``token`` under ``parent``; an existing (parent, token) child is reused."""
        existing = self.children[parent].get(token)
        if existing is not None:
            return existing
        node_id = len(self.nodes)
        depth = self.nodes[parent].depth + 1
        self.nodes.append(DraftNode(token, parent, origin, depth, source_pos, aligned))
        self.children.append({})
        self.children[parent][token] = node_id
        return node_id

    def path(self, node_id: int) -> List[int]:
        """Node ids from the first draft layer down to ``node_id`` (root excluded)."""
        out = []
        while node_id > 0:
            out.append(node_id)
            node_id = self.nodes[node_id].parent
        return out[::-1]

    def draft_ids(self) -> range:
        return range(1, len(self.nodes))


def _copied_origin(source_pos: int, prompt_len: int) -> Origin:
    return Origin.INPUT_CONTEXT if source_pos < prompt_len else Origin.GENERATED_CONTEXT


def build_tree(
    root_token: int,
    candidates: Sequence[Candidate],
    expansions: Optional[Sequence[Sequence[Expansion]]] = None,
    prompt_len: int = 0,
    cache: Optional[AlignmentCache] = None,
) -> DraftTree:
    """Merge candidates into a root-anchored trie, then hang expansions as leaf siblings.

    ``expansions[c]`` belongs to ``candidates[c]``. When a cache is given,
    input-context nodes are tagged aligned/misaligned against its argmax.
    """
    tree = DraftTree.rooted(root_token)
    slot_parents: List[List[int]] = []
    for cand in candidates:
        parent = 0
        parents = []
        for token, pos in zip(cand.tokens, cand.source_pos):
            parents.append(parent)
            origin = _copied_origin(pos, prompt_len)
            aligned = None
            if cache is not None and origin is Origin.INPUT_CONTEXT:
                dist = cache.get(pos)
                if dist is not None:
                    aligned = dist.argmax() == token
            parent = tree.add(parent, token, origin, pos, aligned)
        slot_parents.append(parents)

    for parents, cand_expansions in zip(slot_parents, expansions or ()):
        for exp in cand_expansions:
            for token in exp.tokens:
                tree.add(parents[exp.slot], token, Origin.ALIGNMENT_SAMPLED)
    return tree


def tree_mask(tree: DraftTree) -> np.ndarray:
    """mask[i, j] is True iff node j is node i or one of its ancestors."""
    n = len(tree)
    mask = np.zeros((n, n), dtype=bool)
    for i, node in enumerate(tree.nodes):
        if node.parent >= 0:
            mask[i] = mask[node.parent]
        mask[i, i] = True
    return mask


def draft(
    seq: TokenSeq,
    match: Optional[PoolMatch],
    cache: AlignmentCache,
    ngram_len: int,
    max_expansion: int,
    alignment_sampling: bool = True,
) -> DraftTree:
    candidates = collect_candidates(seq, match, ngram_len)
    expansions: Iterable = ()
    if alignment_sampling:
        expansions = [align_expand(c, cache, max_expansion) for c in candidates]
    return build_tree(seq[-1], candidates, list(expansions), seq.prompt_len, cache)
