from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .drafter import DraftNode, DraftTree, Origin
from .schemas import Distribution, EngineConfig


@dataclass(frozen=True)
class NodeVerdict:
    accepted: bool
    prob: float
    threshold: Optional[float] = None
    entropy: Optional[float] = None
    rule: str = "strict"


@dataclass(frozen=True)
class AcceptedPath:
    node_ids: List[int]
    bonus: int


def entropy(d: Distribution) -> float:
    """Shannon entropy in nats; zero-probability entries contribute nothing."""
    p = d.probs[d.probs > 0]
    return float(-np.sum(p * np.log(p)))


def adaptive_threshold(d: Distribution, alpha: float, beta: float) -> float:
    # capped at the max probability so the argmax token always passes
    return min(alpha * entropy(d) + beta, d.max_prob)


def verify_node(node: DraftNode, d: Distribution, cfg: EngineConfig) -> NodeVerdict:
    """Accept or reject one draft token against the distribution at its parent."""
    mode = cfg.verification_mode
    token = node.token
    p = d.prob(token)

    if mode.kind == "strict" or node.origin is Origin.GENERATED_CONTEXT:
        return NodeVerdict(token == d.argmax(), p, rule="strict")

    if mode.kind == "fixed":
        return NodeVerdict(p >= mode.threshold, p, threshold=mode.threshold, rule="fixed")

    if mode.kind == "topk":
        rank = d.rank(token)
        return NodeVerdict(rank is not None and rank <= mode.k, p, rule="topk")

    h = entropy(d)
    delta = min(cfg.alpha * h + cfg.beta, d.max_prob)
    return NodeVerdict(p >= delta, p, threshold=delta, entropy=h, rule="adaptive")


def verify_tree(
    tree: DraftTree, dists: Sequence[Distribution], cfg: EngineConfig
) -> List[Optional[NodeVerdict]]:
    """Verdict per node (None for the root); ``dists[i]`` is node i's output distribution."""
    out: List[Optional[NodeVerdict]] = [None]
    for node in tree.nodes[1:]:
        out.append(verify_node(node, dists[node.parent], cfg))
    return out


def select_longest(
    tree: DraftTree,
    verdicts: Sequence[Optional[NodeVerdict]],
    dists: Sequence[Distribution],
) -> AcceptedPath:
    """Deepest node whose whole root path was accepted; earliest inserted wins ties."""
    reachable = [True] + [False] * (len(tree) - 1)
    best, best_depth = 0, 0
    for i in tree.draft_ids():
        node = tree.nodes[i]
        # rejection cascades to the whole subtree
        if not (reachable[node.parent] and verdicts[i].accepted):
            continue
        reachable[i] = True
        if node.depth > best_depth:
            best, best_depth = i, node.depth
    return AcceptedPath(tree.path(best), dists[best].argmax())
