from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from opentelemetry import trace

from .draft_pool import DraftPool, build_pool, extend_pool, lookup_longest
from .drafter import AlignmentCache, Origin, draft, tree_mask
from .exceptions import EmptyRecords, EmptySequence
from .logging import jlog
from .models import LanguageModel
from .schemas import EngineConfig, TokenSeq
from .verifier import select_longest, verify_tree

tracer = trace.get_tracer("decode.engine")


@dataclass(frozen=True)
class NodeAudit:
    token: int
    depth: int
    origin: Origin
    prob: float
    threshold: Optional[float]
    entropy: Optional[float]
    verified: bool  # node-level verdict
    accepted: bool  # committed on the emitted path
    aligned: Optional[bool] = None


@dataclass(frozen=True)
class StepRecord:
    drafted: int
    accepted: int
    bonus: Optional[int]
    emitted: Tuple[int, ...]
    nodes: Tuple[NodeAudit, ...] = ()
    wall_time: float = 0.0

    @classmethod
    def summary(cls, accepted: int, drafted: Optional[int] = None) -> "StepRecord":
        """Record without node audits, for accounting over externally produced steps."""
        return cls(
            drafted=accepted if drafted is None else drafted,
            accepted=accepted,
            bonus=0,
            emitted=(0,) * (accepted + 1),
        )


@dataclass
class GenerationResult:
    sequence: TokenSeq
    records: List[StepRecord]

    @property
    def generated(self) -> Tuple[int, ...]:
        return self.sequence.generated


class Session:
    """Decode loop state for one prompt: sequence, draft pool, alignment cache, records.

    Single-threaded; many sessions may share one immutable model.
    """

    def __init__(
        self,
        model: LanguageModel,
        prompt: Union[TokenSeq, Sequence[int]],
        config: EngineConfig,
    ):
        seq = prompt if isinstance(prompt, TokenSeq) else TokenSeq.from_prompt(prompt)
        if len(seq) == 0:
            raise EmptySequence("prompt is empty")
        seq.check_vocab(model.vocab_size)
        self.config = config
        self.model = model
        self.sequence = seq
        self.eos_token_id = (
            config.eos_token_id if config.eos_token_id is not None else model.eos_token_id
        )
        self.cache = AlignmentCache(config.cache_topk)
        self.pool: Optional[DraftPool] = None
        self.records: List[StepRecord] = []
        self.model_calls = 0
        self.finished = False

    @property
    def generated_count(self) -> int:
        return len(self.sequence) - self.sequence.prompt_len

    @property
    def budget_left(self) -> int:
        return self.config.max_new_tokens - self.generated_count

    def prefill(self) -> None:
        dists = self.model.prefill(self.sequence)
        self.model_calls += 1
        for i, d in enumerate(dists):
            self.cache.put(i + 1, d)
        self.pool = build_pool(self.sequence, self.config.max_key_len, self.config.min_key_len)


def step(session: Session) -> StepRecord:
    """Retrieve, alignment-sample, one tree pass, verify, commit, update pool and cache."""
    if session.pool is None:
        session.prefill()
    cfg = session.config
    seq = session.sequence
    started = time.perf_counter()

    match = lookup_longest(session.pool, seq, cfg.max_candidates)
    tree = draft(
        seq,
        match,
        session.cache,
        cfg.ngram_len,
        cfg.max_expansion,
        alignment_sampling=cfg.alignment_sampling,
    )
    dists = session.model.forward_tree(seq.tokens, tree.tokens, tree_mask(tree))
    session.model_calls += 1

    verdicts = verify_tree(tree, dists, cfg)
    path = select_longest(tree, verdicts, dists)

    emitted = [tree.nodes[i].token for i in path.node_ids] + [path.bonus]
    if session.eos_token_id in emitted:
        emitted = emitted[: emitted.index(session.eos_token_id) + 1]
    emitted = emitted[: max(session.budget_left, 0)]
    accepted = min(len(path.node_ids), len(emitted))
    bonus = path.bonus if len(emitted) > accepted else None

    # distributions along the committed path only; rejected branches saw uncommitted tokens
    base = len(seq)
    session.cache.put(base, dists[0])
    for j, node_id in enumerate(path.node_ids[:accepted]):
        session.cache.put(base + j + 1, dists[node_id])

    session.sequence = seq.extend(emitted)
    extend_pool(session.pool, session.sequence)
    if session.eos_token_id in emitted or session.budget_left <= 0:
        session.finished = True

    committed = set(path.node_ids[:accepted])
    audits = tuple(
        NodeAudit(
            token=node.token,
            depth=node.depth,
            origin=node.origin,
            prob=verdicts[i].prob,
            threshold=verdicts[i].threshold,
            entropy=verdicts[i].entropy,
            verified=verdicts[i].accepted,
            accepted=i in committed,
            aligned=node.aligned,
        )
        for i, node in enumerate(tree.nodes)
        if i > 0
    )
    record = StepRecord(
        drafted=len(tree) - 1,
        accepted=accepted,
        bonus=bonus,
        emitted=tuple(emitted),
        nodes=audits,
        wall_time=time.perf_counter() - started,
    )
    session.records.append(record)
    jlog(
        event="decode_step",
        severity="DEBUG",
        step=len(session.records),
        key_len=match.key_len if match else 0,
        drafted=record.drafted,
        accepted=accepted,
        emitted=len(emitted),
    )
    return record


def generate(session: Session) -> GenerationResult:
    """Prefill once, then step until EOS or the token budget is exhausted."""
    with tracer.start_as_current_span("Generate") as span:
        span.set_attribute("prompt_len", session.sequence.prompt_len)
        span.set_attribute("mode", str(session.config.verification_mode))
        if session.pool is None:
            session.prefill()
        if session.budget_left <= 0:
            session.finished = True
        while not session.finished:
            step(session)
        span.set_attribute("steps", len(session.records))
        span.set_attribute("tokens_emitted", session.generated_count)
        jlog(
            event="generate_done",
            severity="DEBUG",
            steps=len(session.records),
            tokens=session.generated_count,
            model_calls=session.model_calls,
        )
    return GenerationResult(session.sequence, list(session.records))


# -----------------------
# Accounting
# -----------------------

@dataclass(frozen=True)
class DecodeMetrics:
    steps: int
    tokens_emitted: int
    mal: Optional[float]
    acc_rate_input: Optional[float] = None
    acc_rate_generated: Optional[float] = None
    acc_rate_sampled: Optional[float] = None
    aligned_acc: Optional[float] = None
    misaligned_acc: Optional[float] = None
    tokens_per_second: Optional[float] = None
    wall_ms: float = 0.0
    accepted_per_step: List[int] = field(default_factory=list)


def _rate(hits: int, total: int) -> Optional[float]:
    return hits / total if total else None


def metrics(records: Sequence[StepRecord]) -> DecodeMetrics:
    """MAL, per-origin acceptance, aligned/misaligned split and throughput."""
    if not records:
        raise EmptyRecords("no step records to summarize")

    tokens = sum(len(r.emitted) for r in records)
    drafted = {o: 0 for o in Origin}
    accepted = {o: 0 for o in Origin}
    aligned = [0, 0]
    misaligned = [0, 0]
    for r in records:
        for n in r.nodes:
            drafted[n.origin] += 1
            accepted[n.origin] += n.accepted
            if n.aligned is True:
                aligned[0] += n.accepted
                aligned[1] += 1
            elif n.aligned is False:
                misaligned[0] += n.accepted
                misaligned[1] += 1

    wall = sum(r.wall_time for r in records)
    return DecodeMetrics(
        steps=len(records),
        tokens_emitted=tokens,
        mal=tokens / len(records),
        acc_rate_input=_rate(accepted[Origin.INPUT_CONTEXT], drafted[Origin.INPUT_CONTEXT]),
        acc_rate_generated=_rate(
            accepted[Origin.GENERATED_CONTEXT], drafted[Origin.GENERATED_CONTEXT]
        ),
        acc_rate_sampled=_rate(
            accepted[Origin.ALIGNMENT_SAMPLED], drafted[Origin.ALIGNMENT_SAMPLED]
        ),
        aligned_acc=_rate(*aligned),
        misaligned_acc=_rate(*misaligned),
        tokens_per_second=tokens / wall if wall > 0 else None,
        wall_ms=wall * 1000.0,
        accepted_per_step=[r.accepted for r in records],
    )
