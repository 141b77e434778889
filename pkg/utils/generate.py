import sys
from typing import List, Optional, Sequence

import anyio
from anyio import CapacityLimiter, to_thread
from opentelemetry import trace

from services.decode_service.common.context import set_item
from services.decode_service.src.config import settings
from services.decode_service.src.logging import jlog
from services.decode_service.src.models import LanguageModel, greedy_decode
from services.decode_service.src.schemas import EngineConfig, ItemReport, TokenSeq
from services.decode_service.src.service import decode_prompt

from .corpus import CorpusItem
from .evaluate import exact_match, overlap_score

if sys.version_info < (3, 11):
    from exceptiongroup import BaseExceptionGroup

tracer = trace.get_tracer("harness.generate")


def decode_item(
    model: LanguageModel,
    item: CorpusItem,
    config: EngineConfig,
    check_lossless: bool = False,
    timings: bool = False,
) -> ItemReport:
    """Decode one corpus item and score it against its reference and, optionally, the greedy oracle."""
    set_item(item.id)
    prompt = item.prompt_tokens()
    with tracer.start_as_current_span("DecodeItem") as span:
        span.set_attribute("item_id", item.id)
        result, m = decode_prompt(model, prompt, config)
    generated = list(result.generated)

    lossless = None
    if check_lossless:
        oracle = greedy_decode(
            model,
            TokenSeq.from_prompt(prompt),
            config.max_new_tokens,
            eos_token_id=config.eos_token_id if config.eos_token_id is not None else -1,
        )
        lossless = list(oracle.generated) == generated
        if not lossless:
            jlog(event="lossless_mismatch", severity="WARNING", item_id=item.id)

    ref = item.reference_tokens()
    return ItemReport(
        id=item.id,
        tokens_emitted=m.tokens_emitted,
        steps=m.steps,
        mal=m.mal,
        acc_rate_input=m.acc_rate_input,
        acc_rate_generated=m.acc_rate_generated,
        acc_rate_sampled=m.acc_rate_sampled,
        aligned_acc=m.aligned_acc,
        misaligned_acc=m.misaligned_acc,
        exact_match=exact_match(generated, ref) if ref is not None else None,
        overlap_score=overlap_score(generated, ref) if ref is not None else None,
        lossless=lossless,
        wall_ms=m.wall_ms if timings else None,
    )


async def decode_corpus_async(
    model: LanguageModel,
    items: Sequence[CorpusItem],
    config: EngineConfig,
    check_lossless: bool = False,
    timings: bool = False,
    concurrency: Optional[int] = None,
) -> List[ItemReport]:
    limiter = CapacityLimiter(concurrency or settings.concurrency)
    rows: List[ItemReport] = []

    async def worker(item: CorpusItem) -> None:
        row = await to_thread.run_sync(
            decode_item, model, item, config, check_lossless, timings, limiter=limiter
        )
        rows.append(row)

    try:
        async with anyio.create_task_group() as tg:
            for item in items:
                tg.start_soon(worker, item)
    except BaseExceptionGroup as eg:
        # surface the first item failure as-is so PermanentError mapping still applies
        raise eg.exceptions[0] from None

    # completion order is nondeterministic; reports are ordered by id
    rows.sort(key=lambda r: r.id)
    return rows


def decode_corpus(
    model: LanguageModel,
    items: Sequence[CorpusItem],
    config: EngineConfig,
    check_lossless: bool = False,
    timings: bool = False,
    concurrency: Optional[int] = None,
) -> List[ItemReport]:
    return anyio.run(
        decode_corpus_async, model, items, config, check_lossless, timings, concurrency
    )
