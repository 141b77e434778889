import os
from contextlib import asynccontextmanager
from typing import AsyncIterator

from fastapi import FastAPI

from .src.routers import decode
from .src.config import settings
from .src.logging import jlog
from .src.storage import resolve_model
from .otel import init_tracing

@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncIterator[None]:
    # Load the target model once; sessions share it read-only
    app.state.model = resolve_model(settings.model_spec) if settings.model_spec else None
    jlog(event="model_loaded", model_spec=settings.model_spec, loaded=app.state.model is not None)
    try:
        yield
    finally:
        app.state.model = None

app = FastAPI(title="AASD Decode API", version="1.0.0", lifespan=lifespan)

# Routers
app.include_router(decode.router, prefix="/api/v1")

os.environ.setdefault("SERVICE_NAME", settings.service_name)
tracer = init_tracing(app, service_name=settings.service_name, service_version="v1", exporter=settings.trace_exporter)

@app.get("/health")
def health():
    return {"status": "ok", "service": settings.service_name}
