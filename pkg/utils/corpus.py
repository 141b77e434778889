import json
from pathlib import Path
from typing import Iterable, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from services.decode_service.src.exceptions import BadCorpus
from services.decode_service.src.storage import byte_tokens

TokenList = List[int]


class CorpusItem(BaseModel):
    id: str = Field(..., description="Unique within a corpus file")
    prompt: Union[str, TokenList] = Field(..., description="Raw text (byte-level) or token ids")
    reference: Optional[Union[str, TokenList]] = Field(default=None, description="Expected continuation")

    def prompt_tokens(self) -> TokenList:
        return byte_tokens(self.prompt) if isinstance(self.prompt, str) else list(self.prompt)

    def reference_tokens(self) -> Optional[TokenList]:
        if self.reference is None:
            return None
        return byte_tokens(self.reference) if isinstance(self.reference, str) else list(self.reference)


def parse_corpus(lines: Iterable[str]) -> List[CorpusItem]:
    """One JSON record per line; blank lines are ignored."""
    items: List[CorpusItem] = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            item = CorpusItem.model_validate_json(line)
        except ValidationError as e:
            raise BadCorpus(f"line {lineno}: {e}") from e
        if item.id in seen:
            raise BadCorpus(f"line {lineno}: duplicate id {item.id!r}")
        if not item.prompt:
            raise BadCorpus(f"line {lineno}: empty prompt for {item.id!r}")
        seen.add(item.id)
        items.append(item)
    if not items:
        raise BadCorpus("corpus is empty")
    return items


def load_corpus(path: Union[str, Path]) -> List[CorpusItem]:
    p = Path(path)
    if not p.exists():
        raise BadCorpus(f"Corpus not found: {p}")
    with p.open(encoding="utf-8") as f:
        return parse_corpus(f)


def write_corpus(path: Union[str, Path], items: Iterable[CorpusItem]) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        for item in items:
            f.write(item.model_dump_json() + "\n")
