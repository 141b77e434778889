# common/log_calls.py
import asyncio
import inspect
import os
import time
from contextlib import contextmanager
from functools import wraps
from typing import Any, Callable, Dict, Iterator, List

from ..src.logging import jlog
from .context import get_context
from .sanitize import sanitize_value

CALL_LOGGER_ENABLED = os.getenv("AASD_CALL_LOGGING", "true").lower() == "true"

def _bind_args(func: Callable, *args, **kwargs) -> Dict[str, Any]:
    sig = inspect.signature(func)
    bound = sig.bind_partial(*args, **kwargs)
    bound.apply_defaults()
    return dict(bound.arguments)

@contextmanager
def _logged(func_name: str, argmap: Dict[str, Any]) -> Iterator[List[Any]]:
    start = time.perf_counter()
    run_id, item_id = get_context()
    jlog(event="call_start", fn=func_name,
         args={k: sanitize_value(k, v) for k, v in argmap.items()},
         run_id=run_id, item_id=item_id)
    box: List[Any] = []
    try:
        yield box
    except Exception as e:
        jlog(event="call_error", severity="ERROR", fn=func_name, error=str(e),
             error_type=type(e).__name__,
             duration_ms=int((time.perf_counter() - start) * 1000),
             run_id=run_id, item_id=item_id)
        raise
    jlog(event="call_end", fn=func_name,
         duration_ms=int((time.perf_counter() - start) * 1000),
         ret=sanitize_value("return", box[0] if box else None),
         run_id=run_id, item_id=item_id)

def log_calls(name: str | None = None):
    """
    Structured call logger for harness entry points (sync or async).
    Logs start/end/error with sanitized args, duration_ms and run/item ids.
    """
    def decorator(func: Callable):
        func_name = name or func.__name__

        if asyncio.iscoroutinefunction(func):
            @wraps(func)
            async def async_wrapper(*args, **kwargs):
                if not CALL_LOGGER_ENABLED:
                    return await func(*args, **kwargs)
                with _logged(func_name, _bind_args(func, *args, **kwargs)) as box:
                    box.append(await func(*args, **kwargs))
                return box[0]
            return async_wrapper

        @wraps(func)
        def sync_wrapper(*args, **kwargs):
            if not CALL_LOGGER_ENABLED:
                return func(*args, **kwargs)
            with _logged(func_name, _bind_args(func, *args, **kwargs)) as box:
                box.append(func(*args, **kwargs))
            return box[0]
        return sync_wrapper
    return decorator
