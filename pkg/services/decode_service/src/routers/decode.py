from anyio import to_thread
from fastapi import APIRouter, Header, HTTPException, Request, status

from ..exceptions import PermanentError
from ..logging import jlog
from ..schemas import DecodeRequest, DecodeResponse
from ..service import decode_with_config

router = APIRouter()

@router.post(
    "/decode",
    response_model=DecodeResponse,
    summary="Decode a prompt with alignment-augmented speculative decoding",
    status_code=status.HTTP_200_OK,
)
async def decode(
    payload: DecodeRequest,
    request: Request,
    x_correlation_id: str | None = Header(default=None),
) -> DecodeResponse:
    model = getattr(request.app.state, "model", None)
    if model is None:
        raise HTTPException(status_code=503, detail="No model loaded (set AASD_MODEL_SPEC)")
    try:
        # CPU-bound; keep it off the event loop
        return await to_thread.run_sync(decode_with_config, payload, model, x_correlation_id)
    except PermanentError as e:
        jlog(
            event="decode_failed",
            retryable=False,
            error=str(e),
            correlation_id=x_correlation_id,
        )
        raise HTTPException(status_code=422, detail=str(e))
