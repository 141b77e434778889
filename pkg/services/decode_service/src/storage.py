import json
from pathlib import Path
from typing import List, Union

from .exceptions import ModelSpecError
from .models import LanguageModel, NGramLM, TableModel

BYTE_VOCAB = 256


def byte_tokens(text: str) -> List[int]:
    """Default byte-level tokenizer: UTF-8 bytes as token ids."""
    return list(text.encode("utf-8"))


def byte_text(tokens: List[int]) -> str:
    return bytes(t for t in tokens if 0 <= t < BYTE_VOCAB).decode("utf-8", errors="replace")


def load_token_stream(path: Union[str, Path]) -> List[int]:
    """A JSON list of ids (``.json``) or raw text tokenized byte-level."""
    p = Path(path)
    if not p.exists():
        raise ModelSpecError(f"Token stream not found: {p}")
    if p.suffix == ".json":
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ModelSpecError(f"Invalid token stream JSON {p}: {e}") from e
        if not isinstance(data, list) or not all(isinstance(t, int) for t in data):
            raise ModelSpecError(f"Token stream {p} must be a JSON list of integers")
        return data
    return list(p.read_bytes())


def load_table_model(path: Union[str, Path]) -> TableModel:
    p = Path(path)
    if not p.exists():
        raise ModelSpecError(f"Table model file not found: {p}")
    try:
        spec = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelSpecError(f"Invalid table model JSON {p}: {e}") from e
    return TableModel.from_spec(spec)


def save_table_model(path: Union[str, Path], model: TableModel) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(model.to_spec()), encoding="utf-8")


def resolve_model(spec: str) -> LanguageModel:
    """``table:<file>`` or ``ngram:<file>,<order>,<k>[,<vocab_size>]``."""
    kind, _, arg = (spec or "").partition(":")
    if kind == "table" and arg:
        return load_table_model(arg)
    if kind == "ngram" and arg:
        parts = arg.split(",")
        if len(parts) not in (3, 4):
            raise ModelSpecError(f"Expected ngram:<file>,<order>,<k>[,<vocab>], got {spec!r}")
        try:
            order, k = int(parts[1]), float(parts[2])
            vocab = int(parts[3]) if len(parts) == 4 else None
        except ValueError as e:
            raise ModelSpecError(f"Invalid ngram parameters in {spec!r}: {e}") from e
        stream = load_token_stream(parts[0])
        if vocab is None:
            vocab = BYTE_VOCAB if not parts[0].endswith(".json") else max(stream, default=0) + 2
        return NGramLM(order, vocab, k).train(stream)
    raise ModelSpecError(f"Unknown model spec {spec!r}")
