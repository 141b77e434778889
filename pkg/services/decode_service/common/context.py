import contextvars
from typing import Optional, Tuple

_run_id = contextvars.ContextVar("run_id", default=None)
_item_id = contextvars.ContextVar("item_id", default=None)

def set_context(run_id: Optional[str], item_id: Optional[str] = None) -> None:
    _run_id.set(run_id) # type: ignore
    _item_id.set(item_id) # type: ignore

def set_item(item_id: Optional[str]) -> None:
    _item_id.set(item_id) # type: ignore

def get_context() -> Tuple[Optional[str], Optional[str]]:
    return _run_id.get(), _item_id.get()
