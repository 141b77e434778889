from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from opentelemetry import trace
from pydantic import BaseModel

from services.decode_service.common.log_calls import log_calls
from services.decode_service.src.logging import jlog
from services.decode_service.src.models import LanguageModel
from services.decode_service.src.schemas import (
    AblationReport,
    EngineConfig,
    RunReport,
    SweepReport,
    SweepRow,
    VerificationMode,
)

from .corpus import CorpusItem
from .evaluate import aggregate
from .generate import decode_corpus

tracer = trace.get_tracer("harness.experiment")

DEFAULT_THRESHOLDS = (1e-1, 1e-3, 1e-5, 1e-7)


def ablation_configs(config: EngineConfig) -> Dict[str, EngineConfig]:
    """Column name -> config; every column shares the base seed and budgets."""
    return {
        "full": config.with_(verification_mode="adaptive", alignment_sampling=True),
        "no_alignment_sampling": config.with_(verification_mode="adaptive", alignment_sampling=False),
        "no_conditional_verification": config.with_(verification_mode="strict", alignment_sampling=True),
        "fixed_0.1": config.with_(verification_mode="fixed:0.1", alignment_sampling=True),
        "topk_5": config.with_(verification_mode="topk:5", alignment_sampling=True),
    }


@log_calls()
def run(
    model: LanguageModel,
    model_spec: str,
    items: Sequence[CorpusItem],
    config: EngineConfig,
    timings: bool = False,
    concurrency: Optional[int] = None,
) -> RunReport:
    """Decode every item; strict runs are also checked against the greedy oracle."""
    with tracer.start_as_current_span("Run") as span:
        span.set_attribute("mode", str(config.verification_mode))
        span.set_attribute("items", len(items))
        rows = decode_corpus(
            model,
            items,
            config,
            check_lossless=config.verification_mode.kind == "strict",
            timings=timings,
            concurrency=concurrency,
        )
    report = RunReport(model=model_spec, config=config, items=rows, aggregate=aggregate(rows))
    jlog(event="run_done", mode=str(config.verification_mode), items=len(rows), mal=report.aggregate.mal)
    return report


@log_calls()
def ablate(
    model: LanguageModel,
    model_spec: str,
    items: Sequence[CorpusItem],
    config: EngineConfig,
    timings: bool = False,
    concurrency: Optional[int] = None,
) -> AblationReport:
    modes = {}
    for name, cfg in ablation_configs(config).items():
        with tracer.start_as_current_span("AblationColumn") as span:
            span.set_attribute("column", name)
            modes[name] = run(model, model_spec, items, cfg, timings=timings, concurrency=concurrency)
    return AblationReport(model=model_spec, modes=modes)


def is_monotone(rows: Sequence[SweepRow]) -> bool:
    """MAL never drops as the threshold decreases; rows without a decoded step are skipped."""
    ordered = sorted((r for r in rows if r.mal is not None), key=lambda r: -r.threshold)
    return all(a.mal <= b.mal for a, b in zip(ordered, ordered[1:]))


@log_calls()
def sweep(
    model: LanguageModel,
    model_spec: str,
    items: Sequence[CorpusItem],
    config: EngineConfig,
    thresholds: Iterable[float] = DEFAULT_THRESHOLDS,
    concurrency: Optional[int] = None,
    alignment_sampling: bool = False,
) -> SweepReport:
    """One fixed-threshold run per value, highest threshold first.

    Alignment sampling is off unless asked for, so the rows isolate the threshold.
    """
    rows: List[SweepRow] = []
    for delta in sorted(set(thresholds), reverse=True):
        cfg = config.with_(
            verification_mode=VerificationMode(kind="fixed", threshold=delta),
            alignment_sampling=alignment_sampling,
        )
        rep = run(model, model_spec, items, cfg, concurrency=concurrency)
        rows.append(
            SweepRow(
                threshold=delta,
                config=cfg,
                mal=rep.aggregate.mal,
                exact_match_rate=rep.aggregate.exact_match_rate,
                overlap_score=rep.aggregate.overlap_score,
            )
        )
    return SweepReport(model=model_spec, rows=rows, monotone=is_monotone(rows))


def write_report(report: BaseModel, out: Union[str, Path]) -> Path:
    p = Path(out)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    jlog(event="report_written", path=str(p), command=getattr(report, "command", None))
    return p
