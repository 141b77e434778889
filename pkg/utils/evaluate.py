from statistics import fmean
from typing import List, Optional, Sequence

import numpy as np

from services.decode_service.src.exceptions import MissingReference
from services.decode_service.src.schemas import (
    AggregateReport,
    ItemReport,
    OverlapReport,
    OverlapRow,
)

from .corpus import CorpusItem

PAD = -1


def pad_tokens(rows: Sequence[Sequence[int]]) -> np.ndarray:
    """Stack token rows into one array, right-padded with ``PAD`` (token ids are non-negative)."""
    width = max((len(r) for r in rows), default=0)
    out = np.full((len(rows), width), PAD, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def lcs_lengths(x: Sequence[int], references: np.ndarray) -> np.ndarray:
    """LCS of ``x`` against every row of a ``pad_tokens`` batch.

    One vectorized DP row per token of ``x``: a cell is the running max of
    ``prev[j]`` and ``prev[j-1] + match``. Padding never matches, so the last
    column holds each row's length.
    """
    prev = np.zeros((references.shape[0], references.shape[1] + 1), dtype=np.int64)
    for a in x:
        step = np.maximum(prev[:, 1:], prev[:, :-1] + (references == a))
        prev[:, 1:] = np.maximum.accumulate(step, axis=1)
    return prev[:, -1]


def lcs_length(x: Sequence[int], y: Sequence[int]) -> int:
    """Longest common subsequence, O(|x|·|y|) DP with a rolling row."""
    if not x or not y:
        return 0
    return int(lcs_lengths(x, pad_tokens([y]))[0])


def longest_common_substring(x: Sequence[int], y: Sequence[int]) -> int:
    if not x or not y:
        return 0
    ys = np.asarray(y, dtype=np.int64)
    best = 0
    prev = np.zeros(len(ys) + 1, dtype=np.int64)
    for a in x:
        cur = np.zeros_like(prev)
        cur[1:] = np.where(ys == a, prev[:-1] + 1, 0)
        best = max(best, int(cur.max()))
        prev = cur
    return best


def overlap_ratio(x: Sequence[int], y: Sequence[int], substring: bool = False) -> float:
    """Share of the reference ``y`` recoverable from the input ``x``; 0.0 for an empty reference."""
    if not y:
        return 0.0
    match = longest_common_substring(x, y) if substring else lcs_length(x, y)
    return match / len(y)


def exact_match(generated: Sequence[int], reference: Sequence[int]) -> bool:
    return list(generated[: len(reference)]) == list(reference)


def overlap_score(generated: Sequence[int], reference: Sequence[int]) -> float:
    return overlap_ratio(generated, reference)


def overlap(items: Sequence[CorpusItem], substring: bool = False) -> OverlapReport:
    rows = []
    for item in items:
        ref = item.reference_tokens()
        if ref is None:
            raise MissingReference(f"item {item.id!r} has no reference")
        rows.append(
            OverlapRow(
                id=item.id,
                ratio=overlap_ratio(item.prompt_tokens(), ref, substring=substring),
                reference_len=len(ref),
            )
        )
    rows.sort(key=lambda r: r.id)
    return OverlapReport(
        variant="substring" if substring else "subsequence",
        items=rows,
        mean=fmean(r.ratio for r in rows) if rows else 0.0,
    )


def _mean(values: List[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return fmean(present) if present else None


def aggregate(rows: Sequence[ItemReport]) -> AggregateReport:
    """Corpus summary; every field is recomputable from the item rows."""
    matches = [r.exact_match for r in rows if r.exact_match is not None]
    lossless = [r.lossless for r in rows if r.lossless is not None]
    timed = [r.wall_ms for r in rows if r.wall_ms is not None]
    tokens = sum(r.tokens_emitted for r in rows)
    wall_ms = sum(timed) if timed else None
    return AggregateReport(
        items=len(rows),
        tokens_emitted=tokens,
        steps=sum(r.steps for r in rows),
        mal=_mean([r.mal for r in rows]),
        acc_rate_input=_mean([r.acc_rate_input for r in rows]),
        acc_rate_generated=_mean([r.acc_rate_generated for r in rows]),
        acc_rate_sampled=_mean([r.acc_rate_sampled for r in rows]),
        aligned_acc=_mean([r.aligned_acc for r in rows]),
        misaligned_acc=_mean([r.misaligned_acc for r in rows]),
        exact_match_rate=sum(matches) / len(matches) if matches else None,
        overlap_score=_mean([r.overlap_score for r in rows]),
        lossless=all(lossless) if lossless else None,
        tokens_per_second=tokens / (wall_ms / 1000.0) if wall_ms else None,
        wall_ms=wall_ms,
    )
