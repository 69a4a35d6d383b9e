"""Reference HTTP server for the edit wire protocol, backed by the mocks.

POST /v1/edit and GET /v1/health exactly as a GPU-side model adapter
serves them, but with the deterministic mock editors doing the "inference".
Used to exercise the real edit client end-to-end and as the reference
implementation that protocol conformance suites run against.
"""

from __future__ import annotations

import base64
import binascii
import time
from typing import Literal, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..store import canonicalize_image
from ..errors import CorruptImage
from .base import EditRequest
from .mock import MockImagePromptEditor, MockInstructionEditor

PROTOCOL_ROLES = ("instruction", "image_prompt")


class EditProtocolRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["instruction", "image_prompt"]
    base_image_b64: str
    instruction: Optional[str] = None
    image_prompt_b64: Optional[str] = None
    factual_prompt: Optional[str] = None
    strength: float = Field(default=0.8, gt=0, le=1)
    seed: Optional[int] = None
    width: int = Field(default=512, gt=0)
    height: int = Field(default=512, gt=0)

    @model_validator(mode="after")
    def _check_mode_exclusivity(self) -> "EditProtocolRequest":
        if self.mode == "instruction":
            if self.instruction is None:
                raise ValueError("instruction mode requires 'instruction'")
            if self.image_prompt_b64 is not None or self.factual_prompt is not None:
                raise ValueError("instruction mode forbids image-prompt fields")
        else:
            if self.image_prompt_b64 is None or self.factual_prompt is None:
                raise ValueError(
                    "image_prompt mode requires 'image_prompt_b64' and 'factual_prompt'"
                )
            if self.instruction is not None:
                raise ValueError("image_prompt mode forbids 'instruction'")
        return self


class EditProtocolResponse(BaseModel):
    image_b64: str
    media_type: str
    model_id: str
    duration_ms: int


class HealthResponse(BaseModel):
    status: str
    roles: list[str]


def _decode_b64(value: str, field: str) -> bytes:
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise CorruptImage(f"{field} is not valid base64") from exc


def create_adapter_app(
    roles: tuple[str, ...] = PROTOCOL_ROLES, model_id: str = "mock-editor"
) -> FastAPI:
    app = FastAPI(title="factpipe mock edit adapter")
    instruction_editor = MockInstructionEditor()
    image_prompt_editor = MockImagePromptEditor()

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", roles=list(roles))

    @app.post("/v1/edit")
    def edit(request: EditProtocolRequest):
        if request.mode not in roles:
            return JSONResponse(
                status_code=409,
                content={"detail": f"role {request.mode!r} not loaded"},
            )
        started = time.monotonic()
        try:
            base_raw = _decode_b64(request.base_image_b64, "base_image_b64")
            base_canonical = canonicalize_image(base_raw)
            if request.mode == "instruction":
                edit_request = EditRequest(
                    base_image=base_canonical.content_hash,
                    instruction_text=request.instruction,
                    strength=request.strength,
                    seed=request.seed,
                    output_size=(request.width, request.height),
                )
                out = instruction_editor.edit(edit_request, base_canonical.data, None)
            else:
                prompt_raw = _decode_b64(request.image_prompt_b64 or "", "image_prompt_b64")
                prompt_canonical = canonicalize_image(prompt_raw)
                edit_request = EditRequest(
                    base_image=base_canonical.content_hash,
                    image_prompt=prompt_canonical.content_hash,
                    factual_prompt_text=request.factual_prompt,
                    strength=request.strength,
                    seed=request.seed,
                    output_size=(request.width, request.height),
                )
                out = image_prompt_editor.edit(
                    edit_request, base_canonical.data, prompt_canonical.data
                )
        except CorruptImage as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        duration_ms = int((time.monotonic() - started) * 1000)
        return EditProtocolResponse(
            image_b64=base64.b64encode(out).decode("ascii"),
            media_type="image/png",
            model_id=model_id,
            duration_ms=duration_ms,
        )

    return app
