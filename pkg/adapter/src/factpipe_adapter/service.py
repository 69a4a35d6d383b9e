"""The edit microservice: one inference at a time, protocol-exact responses."""

from __future__ import annotations

import base64
import binascii
import hashlib
import io
import logging
import threading
import time
import traceback
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from .engines import EditEngine
from .protocol import EditRequest, EditResponse, HealthResponse

logger = logging.getLogger(__name__)


def fit_to_size(image: Image.Image, width: int, height: int) -> Image.Image:
    """Resize preserving aspect ratio, then center-crop to exactly (w, h)."""
    scale = max(width / image.width, height / image.height)
    resized = image.resize(
        (max(1, round(image.width * scale)), max(1, round(image.height * scale))),
        Image.LANCZOS,
    )
    left = (resized.width - width) // 2
    top = (resized.height - height) // 2
    return resized.crop((left, top, left + width, top + height))


def _decode_image(value: str, field: str) -> Image.Image:
    try:
        raw = base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise _SchemaViolation(f"{field} is not valid base64") from exc
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise _SchemaViolation(f"{field} is not a decodable image") from exc
    return image.convert("RGB")


class _SchemaViolation(Exception):
    pass


def create_app(engines: dict[str, EditEngine]) -> FastAPI:
    """Wire the loaded engines into the protocol endpoints.

    ``engines`` maps role names ("instruction", "image_prompt") to engine
    instances; the health endpoint advertises exactly those roles and any
    request for an unloaded role gets 409.
    """
    app = FastAPI(title="factpipe model adapter")
    inference_lock = threading.Lock()  # one inference at a time per device

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", roles=sorted(engines))

    @app.post("/v1/edit")
    def edit(request: EditRequest):
        engine = engines.get(request.mode)
        if engine is None:
            return JSONResponse(
                status_code=409, content={"detail": f"role {request.mode!r} not loaded"}
            )
        started = time.monotonic()
        try:
            base = _decode_image(request.base_image_b64, "base_image_b64")
            base = fit_to_size(base, request.width, request.height)
            image_prompt: Optional[Image.Image] = None
            if request.image_prompt_b64 is not None:
                image_prompt = _decode_image(request.image_prompt_b64, "image_prompt_b64")
        except _SchemaViolation as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        try:
            with inference_lock:
                out = engine.edit(
                    base,
                    instruction=request.instruction,
                    image_prompt=image_prompt,
                    factual_prompt=request.factual_prompt,
                    strength=request.strength,
                    seed=request.seed,
                )
        except Exception:
            trace = traceback.format_exc()
            trace_id = hashlib.sha256(trace.encode("utf-8")).hexdigest()[:12]
            logger.error("inference failure %s:\n%s", trace_id, trace)
            return JSONResponse(
                status_code=500,
                content={"detail": "inference failure", "trace_id": trace_id},
            )
        if out.size != (request.width, request.height):
            out = fit_to_size(out, request.width, request.height)
        buffer = io.BytesIO()
        out.save(buffer, format="PNG")
        return EditResponse(
            image_b64=base64.b64encode(buffer.getvalue()).decode("ascii"),
            media_type="image/png",
            model_id=engine.model_id,
            duration_ms=int((time.monotonic() - started) * 1000),
        )

    return app
