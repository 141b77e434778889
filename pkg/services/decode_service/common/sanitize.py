# common/sanitize.py
import hashlib
from typing import Any

SAFE_KEYS = {
    "mode", "model", "model_spec", "out", "seed", "alpha", "beta",
    "thresholds", "variant", "substring", "timings",
}
BULKY_KEYS = {
    "prompt", "reference", "tokens", "stream", "corpus", "items", "text",
}

def hash_preview(s: str, n: int = 12) -> str:
    if not isinstance(s, str):
        s = str(s)
    return f"sha256={hashlib.sha256(s.encode('utf-8')).hexdigest()[:n]},len={len(s)}"

def _is_token_list(value: Any) -> bool:
    return isinstance(value, (list, tuple)) and len(value) > 16 and all(isinstance(v, int) for v in value[:16])

def sanitize_value(key: str, value: Any) -> Any:
    k = (key or "").lower()
    if k in SAFE_KEYS:
        return value if isinstance(value, (int, float, bool, str, type(None))) else str(value)
    if k in BULKY_KEYS:
        # prompts and corpora can be large: log only size and hash
        if isinstance(value, (list, tuple)):
            return f"items:{len(value)}"
        return hash_preview(str(value))
    if _is_token_list(value):
        return f"tokens:{len(value)}"
    if isinstance(value, (bytes, bytearray)):
        return f"bytes:{len(value)}"
    if isinstance(value, str):
        return value if len(value) <= 120 else hash_preview(value)
    if isinstance(value, (int, float, bool)) or value is None:
        return value
    # For dict/list, shallow-sanitize children
    if isinstance(value, dict):
        return {k: sanitize_value(k, v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize_value("", v) for v in value[:16]]
    text = str(value)
    return text if len(text) <= 120 else hash_preview(text)
