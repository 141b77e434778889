from typing import Literal, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

from .schemas import EngineConfig, VerificationMode

# -----------------------
# Settings and constants
# -----------------------

class Settings(BaseSettings):

    model_config = SettingsConfigDict(env_file=".env", env_prefix="AASD_", extra="ignore")

    # Core
    service_name: str = "aasd-decode"
    environment: str = "local"
    log_level: str = "INFO"
    trace_exporter: Literal["none", "console"] = "none"

    # Harness
    concurrency: int = 4
    experiments_dir: str = "experiments"

    # Default model for the HTTP service, e.g. "ngram:corpus.txt,3,0.1"
    model_spec: Optional[str] = None

    # Engine defaults
    ngram_len: int = 6
    max_key_len: int = 6
    min_key_len: int = 1
    max_expansion: int = 2
    cache_topk: int = 8
    alpha: float = 0.1
    beta: float = 0.1
    mode: str = "adaptive"
    max_candidates: int = 4
    max_new_tokens: int = 256
    seed: int = 0


settings = Settings()


def default_engine_config(**overrides) -> EngineConfig:
    """EngineConfig seeded from settings; keyword overrides win."""
    base = dict(
        ngram_len=settings.ngram_len,
        max_key_len=settings.max_key_len,
        min_key_len=settings.min_key_len,
        max_expansion=settings.max_expansion,
        cache_topk=settings.cache_topk,
        alpha=settings.alpha,
        beta=settings.beta,
        verification_mode=VerificationMode.parse(settings.mode),
        max_candidates=settings.max_candidates,
        max_new_tokens=settings.max_new_tokens,
        seed=settings.seed,
    )
    base.update({k: v for k, v in overrides.items() if v is not None})
    return EngineConfig.build(**base)
