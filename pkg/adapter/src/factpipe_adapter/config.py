"""Adapter configuration: which checkpoints to load and where."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_INSTRUCTION_MODEL = "timbrooks/instruct-pix2pix"
DEFAULT_IMAGE_PROMPT_BASE = "runwayml/stable-diffusion-v1-5"
DEFAULT_IP_ADAPTER_REPO = "h94/IP-Adapter"
DEFAULT_IP_ADAPTER_WEIGHTS = "ip-adapter_sd15.bin"


@dataclass(frozen=True)
class AdapterConfig:
    instruction_model_id: str = DEFAULT_INSTRUCTION_MODEL
    image_prompt_model_id: str = DEFAULT_IMAGE_PROMPT_BASE
    ip_adapter_repo: str = DEFAULT_IP_ADAPTER_REPO
    ip_adapter_weights: str = DEFAULT_IP_ADAPTER_WEIGHTS
    device: str = "cuda"
    max_batch: int = 1

    @classmethod
    def from_file(cls, path: str | Path) -> "AdapterConfig":
        with open(path, "rb") as handle:
            data = tomllib.load(handle).get("adapter", {})
        return cls(
            instruction_model_id=data.get("instruction_model_id", DEFAULT_INSTRUCTION_MODEL),
            image_prompt_model_id=data.get("image_prompt_model_id", DEFAULT_IMAGE_PROMPT_BASE),
            ip_adapter_repo=data.get("ip_adapter_repo", DEFAULT_IP_ADAPTER_REPO),
            ip_adapter_weights=data.get("ip_adapter_weights", DEFAULT_IP_ADAPTER_WEIGHTS),
            device=data.get("device", "cuda"),
            max_batch=int(data.get("max_batch", 1)),
        )
