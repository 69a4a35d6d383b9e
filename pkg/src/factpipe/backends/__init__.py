"""Uniform gateway over the five external capabilities.

Each role (text-to-image, image search, multimodal LLM, instruction
editor, image-prompt editor) has a real network adapter and a
deterministic mock, selected per profile; handles are role-typed so one
role's handle can never service another role's operation.
"""

from .base import (
    AdapterKind,
    BackendDescriptor,
    BackendRole,
    EditRequest,
    FairSemaphore,
    ImagePromptEditorHandle,
    InstructionEditorHandle,
    MultimodalLLMHandle,
    SearchHandle,
    SearchResult,
    TextToImageHandle,
    Transport,
    TransportResponse,
    complete_multimodal,
    edit_by_image_prompt,
    edit_by_instruction,
    generate_image,
)
from .config import BackendSet, build_backends, fixture_root
from .mock import (
    MockFetcher,
    MockImagePromptEditor,
    MockInstructionEditor,
    MockMultimodalLLM,
    MockSearchBackend,
    MockTextToImage,
    read_digest_stamp,
    stamp_digest,
    synthesize_image,
)

__all__ = [
    "AdapterKind",
    "BackendDescriptor",
    "BackendRole",
    "BackendSet",
    "EditRequest",
    "FairSemaphore",
    "ImagePromptEditorHandle",
    "InstructionEditorHandle",
    "MockFetcher",
    "MockImagePromptEditor",
    "MockInstructionEditor",
    "MockMultimodalLLM",
    "MockSearchBackend",
    "MockTextToImage",
    "MultimodalLLMHandle",
    "SearchHandle",
    "SearchResult",
    "TextToImageHandle",
    "Transport",
    "TransportResponse",
    "build_backends",
    "complete_multimodal",
    "edit_by_image_prompt",
    "edit_by_instruction",
    "fixture_root",
    "generate_image",
    "read_digest_stamp",
    "stamp_digest",
    "synthesize_image",
]
