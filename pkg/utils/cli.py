"""Command-line harness: run, ablate, sweep, overlap, synth."""
import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

from services.decode_service.common.context import set_context
from services.decode_service.otel import init_tracing
from services.decode_service.src.config import default_engine_config, settings
from services.decode_service.src.exceptions import PermanentError
from services.decode_service.src.logging import jlog
from services.decode_service.src.schemas import EngineConfig
from services.decode_service.src.storage import resolve_model, save_table_model

from . import run_experiment
from .corpus import load_corpus, write_corpus
from .evaluate import overlap
from .synthetic import branching_table_model, copy_corpus


def _engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("corpus", help="JSONL corpus, one {id, prompt, reference?} per line")
    p.add_argument("--model", required=True, help="table:<file> | ngram:<file>,<order>,<k>[,<vocab>]")
    p.add_argument("--mode", default=None, help="strict | fixed:<d> | topk:<k> | adaptive")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--ngram-len", type=int, default=None)
    p.add_argument("--max-key-len", type=int, default=None)
    p.add_argument("--max-expansion", type=int, default=None)
    p.add_argument("--max-candidates", type=int, default=None)
    p.add_argument("--max-new", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-alignment-sampling", action="store_true")
    p.add_argument("--concurrency", type=int, default=None)
    p.add_argument("--out", default=None, help="Report path (default: <experiments_dir>/<command>.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aasd", description="Alignment-augmented speculative decoding harness")
    parser.add_argument("--trace", action="store_true", help="Export spans to the console")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Decode a corpus and report per-item metrics")
    _engine_args(p)
    p.add_argument("--timings", action="store_true", help="Include wall-clock fields")

    p = sub.add_parser("ablate", help="Compare full / w/o alignment sampling / w/o conditional verification / fixed / top-k")
    _engine_args(p)
    p.add_argument("--timings", action="store_true")

    p = sub.add_parser("sweep", help="Fixed-threshold sweep")
    _engine_args(p)
    p.add_argument("--thresholds", type=float, nargs="+", default=list(run_experiment.DEFAULT_THRESHOLDS))
    p.add_argument("--alignment-sampling", action="store_true", help="Keep alignment-sampled siblings in the swept trees")

    p = sub.add_parser("overlap", help="Prompt/reference overlap ratio")
    p.add_argument("corpus")
    p.add_argument("--substring", action="store_true", help="Longest common substring instead of subsequence")
    p.add_argument("--out", default=None)

    p = sub.add_parser("synth", help="Write a branching table model and a copy corpus")
    p.add_argument("out_dir")
    p.add_argument("--vocab", type=int, default=48)
    p.add_argument("--items", type=int, default=40)
    p.add_argument("--reference-len", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args: argparse.Namespace) -> EngineConfig:
    return default_engine_config(
        verification_mode=args.mode,
        alpha=args.alpha,
        beta=args.beta,
        ngram_len=args.ngram_len,
        max_key_len=args.max_key_len,
        max_expansion=args.max_expansion,
        max_candidates=args.max_candidates,
        max_new_tokens=args.max_new,
        seed=args.seed,
        alignment_sampling=False if args.no_alignment_sampling else None,
    )


def _out_path(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out else Path(settings.experiments_dir) / f"{args.command}.json"


def dispatch(args: argparse.Namespace) -> Optional[Path]:
    if args.command == "synth":
        table = branching_table_model(vocab_size=args.vocab, seed=args.seed)
        out = Path(args.out_dir)
        save_table_model(out / "model.json", table.model)
        write_corpus(
            out / "corpus.jsonl",
            copy_corpus(table, items=args.items, reference_len=args.reference_len, seed=args.seed),
        )
        jlog(event="synth_written", out_dir=str(out), items=args.items)
        return out

    items = load_corpus(args.corpus)
    if args.command == "overlap":
        return run_experiment.write_report(overlap(items, substring=args.substring), _out_path(args))

    cfg = config_from_args(args)
    model = resolve_model(args.model)
    if args.command == "run":
        report = run_experiment.run(model, args.model, items, cfg, timings=args.timings, concurrency=args.concurrency)
    elif args.command == "ablate":
        report = run_experiment.ablate(model, args.model, items, cfg, timings=args.timings, concurrency=args.concurrency)
    else:
        report = run_experiment.sweep(
            model,
            args.model,
            items,
            cfg,
            thresholds=args.thresholds,
            concurrency=args.concurrency,
            alignment_sampling=args.alignment_sampling,
        )
    return run_experiment.write_report(report, _out_path(args))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    os.environ.setdefault("SERVICE_NAME", settings.service_name)
    init_tracing(service_name=settings.service_name, exporter="console" if args.trace else settings.trace_exporter)
    set_context(run_id=f"{args.command}-{getattr(args, 'seed', None) or settings.seed}")
    try:
        out = dispatch(args)
    except PermanentError as e:
        jlog(event=f"{args.command}_failed", severity="ERROR", error=str(e), error_type=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
