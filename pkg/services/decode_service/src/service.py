from typing import List, Optional, Sequence, Tuple, Union

from opentelemetry import trace

from .config import default_engine_config
from .engine import DecodeMetrics, GenerationResult, Session, generate, metrics
from .exceptions import EmptySequence
from .logging import jlog
from .models import LanguageModel
from .schemas import DecodeRequest, DecodeResponse, EngineConfig
from .storage import BYTE_VOCAB, byte_text, byte_tokens

tracer = trace.get_tracer("decode.service")


def tokenize_prompt(prompt: Union[str, Sequence[int]]) -> List[int]:
    if isinstance(prompt, str):
        return byte_tokens(prompt)
    return [int(t) for t in prompt]


def decode_prompt(
    model: LanguageModel,
    prompt: Union[str, Sequence[int]],
    config: EngineConfig,
) -> Tuple[GenerationResult, DecodeMetrics]:
    """Run one AASD session to completion and summarize its steps."""
    tokens = tokenize_prompt(prompt)
    if not tokens:
        raise EmptySequence("prompt is empty")
    session = Session(model, tokens, config)
    result = generate(session)
    if not result.records:
        # zero budget: nothing was decoded
        return result, DecodeMetrics(steps=0, tokens_emitted=0, mal=None)
    return result, metrics(result.records)


def decode_with_config(
    req: DecodeRequest,
    model: LanguageModel,
    correlation_id: Optional[str] = None,
) -> DecodeResponse:
    cfg = default_engine_config(
        verification_mode=req.mode,
        alpha=req.alpha,
        beta=req.beta,
        max_new_tokens=req.max_new_tokens,
        alignment_sampling=req.alignment_sampling,
    )
    jlog(event="decode_start", correlation_id=correlation_id, mode=str(cfg.verification_mode))

    with tracer.start_as_current_span("Decode") as span:
        span.set_attribute("correlation_id", correlation_id or "")
        result, m = decode_prompt(model, req.prompt, cfg)

    generated = list(result.generated)
    text = None
    if isinstance(req.prompt, str) and model.vocab_size <= BYTE_VOCAB:
        text = byte_text(generated)

    jlog(
        event="decode_ok",
        correlation_id=correlation_id,
        steps=m.steps,
        tokens=m.tokens_emitted,
        mal=m.mal,
    )
    return DecodeResponse(
        tokens=generated,
        text=text,
        steps=m.steps,
        mal=m.mal,
        accepted_per_step=m.accepted_per_step,
    )
