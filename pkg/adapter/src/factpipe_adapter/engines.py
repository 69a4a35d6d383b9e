"""Inference engines behind the two edit modes.

Both engines wrap pretrained pipelines over the same diffusion base: the
instruction engine runs an instruction-conditioned editor, the image-prompt
engine runs image-to-image with an image-prompt adapter feeding the
reference picture in next to the text condition. Checkpoints that cannot
be loaded simply leave their role out of the served role list; the service
still starts and answers 409 for the missing mode.

Inference defaults (overridable per request where the protocol allows):
30 denoising steps, text guidance 7.5, image guidance 1.5 in instruction
mode, image-prompt weight 0.6.
"""

from __future__ import annotations

import logging
from typing import Optional, Protocol

from PIL import Image

from .config import AdapterConfig

logger = logging.getLogger(__name__)

NUM_INFERENCE_STEPS = 30
TEXT_GUIDANCE_SCALE = 7.5
IMAGE_GUIDANCE_SCALE = 1.5
IMAGE_PROMPT_WEIGHT = 0.6


class EditEngine(Protocol):
    model_id: str

    def edit(
        self,
        base: Image.Image,
        *,
        instruction: Optional[str],
        image_prompt: Optional[Image.Image],
        factual_prompt: Optional[str],
        strength: float,
        seed: Optional[int],
    ) -> Image.Image: ...


def _generator(device: str, seed: Optional[int]):
    import torch

    generator = torch.Generator(device if device != "mps" else "cpu")
    if seed is not None:
        generator = generator.manual_seed(seed)
    return generator


class InstructionEngine:
    """Instruction-conditioned editing over a pretrained checkpoint."""

    def __init__(self, config: AdapterConfig):
        import torch
        from diffusers import StableDiffusionInstructPix2PixPipeline

        dtype = torch.float16 if config.device.startswith("cuda") else torch.float32
        self.model_id = config.instruction_model_id
        self._device = config.device
        self._pipe = StableDiffusionInstructPix2PixPipeline.from_pretrained(
            config.instruction_model_id, torch_dtype=dtype, safety_checker=None
        ).to(config.device)
        self._pipe.set_progress_bar_config(disable=True)

    def edit(self, base, *, instruction, image_prompt, factual_prompt, strength, seed):
        result = self._pipe(
            prompt=instruction,
            image=base,
            num_inference_steps=NUM_INFERENCE_STEPS,
            guidance_scale=TEXT_GUIDANCE_SCALE,
            image_guidance_scale=IMAGE_GUIDANCE_SCALE,
            generator=_generator(self._device, seed),
        )
        return result.images[0]


class ImagePromptEngine:
    """Image-to-image editing conditioned on a reference image plus text."""

    def __init__(self, config: AdapterConfig):
        import torch
        from diffusers import StableDiffusionImg2ImgPipeline

        dtype = torch.float16 if config.device.startswith("cuda") else torch.float32
        self.model_id = f"{config.image_prompt_model_id}+{config.ip_adapter_weights}"
        self._device = config.device
        self._pipe = StableDiffusionImg2ImgPipeline.from_pretrained(
            config.image_prompt_model_id, torch_dtype=dtype, safety_checker=None
        ).to(config.device)
        self._pipe.load_ip_adapter(
            config.ip_adapter_repo, subfolder="models", weight_name=config.ip_adapter_weights
        )
        self._pipe.set_ip_adapter_scale(IMAGE_PROMPT_WEIGHT)
        self._pipe.set_progress_bar_config(disable=True)

    def edit(self, base, *, instruction, image_prompt, factual_prompt, strength, seed):
        result = self._pipe(
            prompt=factual_prompt,
            image=base,
            ip_adapter_image=image_prompt,
            strength=strength,
            num_inference_steps=NUM_INFERENCE_STEPS,
            guidance_scale=TEXT_GUIDANCE_SCALE,
            generator=_generator(self._device, seed),
        )
        return result.images[0]


def load_engines(config: AdapterConfig) -> dict[str, EditEngine]:
    """Instantiate whichever engines can actually load on this host.

    The returned dict keys ("instruction", "image_prompt") become the
    service's advertised roles; a checkpoint that fails to resolve logs the
    reason and drops its role rather than blocking startup of the other.
    """
    engines: dict[str, EditEngine] = {}
    for role, factory in (
        ("instruction", InstructionEngine),
        ("image_prompt", ImagePromptEngine),
    ):
        try:
            engines[role] = factory(config)
            logger.info("loaded %s engine (%s)", role, engines[role].model_id)
        except Exception as exc:
            logger.warning("%s engine unavailable: %s", role, exc)
    return engines
