"""Seeded desk-scale suites: toy target models and high-overlap corpora."""
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np

from services.decode_service.src.models import NGramLM, TableModel
from services.decode_service.src.schemas import Distribution

from .corpus import CorpusItem

Context = Tuple[int, ...]


@dataclass(frozen=True)
class BranchingTable:
    """TableModel whose every context has a favourite, a runner-up and a thin tail."""

    model: TableModel
    favourite: Dict[Context, int]
    runner_up: Dict[Context, int]


def _contexts(vocab_size: int, window: int) -> List[Context]:
    out: List[Context] = []
    for length in range(window + 1):
        out.extend(product(range(vocab_size), repeat=length))
    return out


def branching_table_model(
    vocab_size: int = 48,
    window: int = 1,
    favourite_mass: float = 0.55,
    runner_up_mass: float = 0.30,
    seed: int = 0,
) -> BranchingTable:
    """The tail mass is spread tie-free over the remaining tokens (EOS included).

    Favourite and runner-up never are the EOS token (the last id).
    """
    if vocab_size < 4:
        raise ValueError("vocab_size must be >= 4")
    rng = np.random.default_rng(seed)
    tail_mass = 1.0 - favourite_mass - runner_up_mass
    eos = vocab_size - 1
    rows: Dict[Context, Distribution] = {}
    fav: Dict[Context, int] = {}
    alt: Dict[Context, int] = {}
    for ctx in _contexts(vocab_size, window):
        a, b = (int(t) for t in rng.choice(eos, size=2, replace=False))
        weights = rng.uniform(1.0, 2.0, size=vocab_size)
        weights[[a, b]] = 0.0
        probs = tail_mass * weights / weights.sum()
        probs[a] = favourite_mass
        probs[b] = runner_up_mass
        rows[ctx] = Distribution.full(probs / probs.sum())
        fav[ctx], alt[ctx] = a, b
    return BranchingTable(TableModel(vocab_size, window, rows), fav, alt)


def random_table_model(vocab_size: int = 12, window: int = 2, seed: int = 0) -> TableModel:
    """Dense Dirichlet rows for every context up to ``window``; ties have probability zero."""
    rng = np.random.default_rng(seed)
    rows = {
        ctx: Distribution.full(rng.dirichlet(np.full(vocab_size, 0.5)))
        for ctx in _contexts(vocab_size, window)
    }
    return TableModel(vocab_size, window, rows)


def copy_corpus(
    table: BranchingTable,
    items: int = 40,
    reference_len: int = 64,
    lead: int = 4,
    p_favourite: float = 0.70,
    p_runner_up: float = 0.15,
    seed: int = 0,
) -> List[CorpusItem]:
    """Prompts embed the reference verbatim, then restate its first ``lead`` tokens.

    Each reference token is the context's favourite, its runner-up, or (rest of
    the time) a tail token, so some copied tokens are misaligned with the model.
    """
    rng = np.random.default_rng(seed)
    model = table.model
    window = model.context_window or 0
    eos = model.eos_token_id
    ordinary = [t for t in range(model.vocab_size) if t != eos]
    out = []
    for i in range(items):
        ref = [int(rng.choice(ordinary)) for _ in range(max(window, 1))]
        while len(ref) < reference_len:
            ctx = tuple(ref[-window:]) if window else ()
            u = rng.random()
            if u < p_favourite:
                ref.append(table.favourite[ctx])
            elif u < p_favourite + p_runner_up:
                ref.append(table.runner_up[ctx])
            else:
                tail = [t for t in ordinary if t not in (table.favourite[ctx], table.runner_up[ctx])]
                ref.append(int(rng.choice(tail)))
        sep = int(rng.choice(ordinary))
        prompt = ref + [sep] + ref[:lead]
        out.append(CorpusItem(id=f"copy-{i:04d}", prompt=prompt, reference=ref[lead:]))
    return out


def markov_stream(vocab_size: int, length: int, seed: int = 0, phrase_len: int = 8, phrases: int = 12) -> List[int]:
    """Token stream mixing a sparse random Markov chain with repeated phrases."""
    rng = np.random.default_rng(seed)
    eos = vocab_size - 1
    bank = [list(rng.integers(0, eos, size=phrase_len)) for _ in range(phrases)]
    successors = rng.integers(0, eos, size=(eos, 3))
    stream = [int(rng.integers(0, eos))]
    while len(stream) < length:
        if rng.random() < 0.3:
            stream.extend(int(t) for t in bank[int(rng.integers(len(bank)))])
        else:
            stream.append(int(successors[stream[-1], int(rng.integers(3))]))
    return stream[:length]


def ngram_suite(
    vocab_size: int = 32,
    order: int = 3,
    k: float = 0.1,
    prompts: int = 200,
    prompt_len: int = 48,
    seed: int = 0,
    stream_len: int = 4000,
) -> Tuple[NGramLM, List[CorpusItem]]:
    """An NGramLM trained on a Markov stream plus prompts sliced from fresh streams."""
    lm = NGramLM(order, vocab_size, k).train(markov_stream(vocab_size, stream_len, seed))
    rng = np.random.default_rng(seed + 1)
    items = []
    for i in range(prompts):
        stream = markov_stream(vocab_size, prompt_len * 2, seed=int(rng.integers(1 << 30)))
        start = int(rng.integers(0, prompt_len))
        items.append(CorpusItem(id=f"ngram-{i:04d}", prompt=stream[start:start + prompt_len]))
    return lm, items


def one_hot_cycle_model(cycle: int = 8, vocab_size: Optional[int] = None) -> TableModel:
    """Window-1 deterministic model: token t is always followed by (t + 1) % cycle."""
    vocab_size = vocab_size or cycle + 2
    rows = {(t,): Distribution.one_hot((t + 1) % cycle, vocab_size) for t in range(vocab_size)}
    return TableModel(vocab_size, 1, rows)
