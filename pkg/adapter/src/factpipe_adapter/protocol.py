"""Wire-protocol schemas: POST /v1/edit and GET /v1/health.

This is the adapter-side statement of the same contract the orchestration
service's edit clients speak; requests with unknown fields, a missing mode
payload, or both modes populated are schema violations (422).
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

MODE_INSTRUCTION = "instruction"
MODE_IMAGE_PROMPT = "image_prompt"


class EditRequest(BaseModel):
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
    def _mode_exclusivity(self) -> "EditRequest":
        if self.mode == MODE_INSTRUCTION:
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


class EditResponse(BaseModel):
    image_b64: str
    media_type: str
    model_id: str
    duration_ms: int


class HealthResponse(BaseModel):
    status: str
    roles: list[str]
