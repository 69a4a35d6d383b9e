"""Backend descriptors, role-typed handles, and the retry machinery.

Concrete model names never appear in code paths: a handle is configured
from a BackendDescriptor and can only service the operations of its own
role. Real adapters share one retry helper so the attempt accounting is
uniform and observable through an injected transport.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Protocol

from ..errors import (
    BackendFailure,
    CapabilityMissing,
    ConfigInvalid,
    InvalidRequest,
    RoleMismatch,
)
from ..guidance import MetaPrompt

DEFAULT_TIMEOUT_S = 120.0
DEFAULT_MAX_RETRIES = 3
DEFAULT_INFLIGHT_CAP = 4
DEFAULT_OUTPUT_SIZE = (512, 512)
DEFAULT_STRENGTH = 0.8


class BackendRole(str, Enum):
    TextToImage = "text_to_image"
    ImageSearch = "image_search"
    MultimodalLLM = "multimodal_llm"
    InstructionEditor = "instruction_editor"
    ImagePromptEditor = "image_prompt_editor"


class AdapterKind(str, Enum):
    Real = "real"
    Mock = "mock"


@dataclass(frozen=True)
class BackendDescriptor:
    role: BackendRole
    adapter_kind: AdapterKind
    endpoint_url: Optional[str] = None
    model_id: Optional[str] = None
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_retries: int = DEFAULT_MAX_RETRIES

    def __post_init__(self) -> None:
        if self.adapter_kind is AdapterKind.Real and not self.endpoint_url:
            raise ConfigInvalid(f"real {self.role.value} backend requires endpoint_url")
        if self.max_retries < 0:
            raise ConfigInvalid("max_retries must be non-negative")


@dataclass(frozen=True)
class EditRequest:
    """One request to an image editor, in exactly one of its two modes."""

    base_image: str
    instruction_text: Optional[str] = None
    image_prompt: Optional[str] = None
    factual_prompt_text: Optional[str] = None
    strength: float = DEFAULT_STRENGTH
    seed: Optional[int] = None
    output_size: tuple[int, int] = DEFAULT_OUTPUT_SIZE

    def __post_init__(self) -> None:
        instruction_mode = self.instruction_text is not None
        image_prompt_mode = (
            self.image_prompt is not None or self.factual_prompt_text is not None
        )
        if instruction_mode and image_prompt_mode:
            raise InvalidRequest("instruction and image-prompt fields are exclusive")
        if image_prompt_mode and (
            self.image_prompt is None or self.factual_prompt_text is None
        ):
            raise InvalidRequest(
                "image-prompt mode requires both image_prompt and factual_prompt_text"
            )
        if not instruction_mode and not image_prompt_mode:
            raise InvalidRequest("one of the two edit modes must be populated")
        if not 0 < self.strength <= 1:
            raise InvalidRequest("strength must be in (0, 1]")
        width, height = self.output_size
        if width <= 0 or height <= 0:
            raise InvalidRequest("output_size must be positive")

    @property
    def mode(self) -> str:
        return "instruction" if self.instruction_text is not None else "image_prompt"


@dataclass(frozen=True)
class SearchResult:
    url: str
    title: Optional[str] = None
    thumbnail_url: Optional[str] = None


# ---------------------------------------------------------------------------
# transport + retries
# ---------------------------------------------------------------------------

@dataclass
class TransportResponse:
    status_code: int
    content: bytes
    headers: dict[str, str] = field(default_factory=dict)

    def json(self) -> Any:
        import json

        return json.loads(self.content.decode("utf-8"))


class Transport(Protocol):
    def request(
        self,
        method: str,
        url: str,
        *,
        headers: Optional[dict[str, str]] = None,
        params: Optional[dict[str, Any]] = None,
        json_body: Optional[dict[str, Any]] = None,
        timeout: Optional[float] = None,
    ) -> TransportResponse: ...


class HttpxTransport:
    """Default transport over a shared httpx client."""

    def __init__(self) -> None:
        import httpx

        self._client = httpx.Client(follow_redirects=True)
        self._httpx = httpx

    def request(self, method, url, *, headers=None, params=None, json_body=None, timeout=None):
        try:
            response = self._client.request(
                method,
                url,
                headers=headers,
                params=params,
                json=json_body,
                timeout=timeout,
            )
        except self._httpx.HTTPError as exc:
            raise TransientBackendError(str(exc)) from exc
        return TransportResponse(
            status_code=response.status_code,
            content=response.content,
            headers=dict(response.headers),
        )


class TransientBackendError(Exception):
    """Connection-level failure worth retrying."""


def call_with_retries(
    descriptor: BackendDescriptor,
    attempt: Callable[[], TransportResponse],
    sleeper: Callable[[float], None] = time.sleep,
) -> TransportResponse:
    """Run a backend call with exponential backoff (1 s, 2 s, 4 s, ...).

    Performs exactly max_retries+1 attempts on transient errors and 5xx
    responses; anything else is surfaced immediately.
    """
    last_error: Optional[str] = None
    for attempt_index in range(descriptor.max_retries + 1):
        if attempt_index:
            sleeper(float(2 ** (attempt_index - 1)))
        try:
            response = attempt()
        except TransientBackendError as exc:
            last_error = str(exc)
            continue
        if response.status_code >= 500:
            last_error = f"upstream returned {response.status_code}"
            continue
        return response
    raise BackendFailure(
        f"{descriptor.role.value} backend failed after "
        f"{descriptor.max_retries + 1} attempts: {last_error}"
    )


class FairSemaphore:
    """FIFO-fair counting semaphore for per-backend in-flight caps."""

    def __init__(self, permits: int):
        self._permits = permits
        self._lock = threading.Lock()
        self._waiters: deque[threading.Event] = deque()

    def __enter__(self) -> "FairSemaphore":
        with self._lock:
            if self._permits > 0 and not self._waiters:
                self._permits -= 1
                return self
            gate = threading.Event()
            self._waiters.append(gate)
        gate.wait()
        return self

    def __exit__(self, *exc_info) -> None:
        with self._lock:
            if self._waiters:
                self._waiters.popleft().set()  # hand the permit straight over
            else:
                self._permits += 1


# ---------------------------------------------------------------------------
# adapter protocols
# ---------------------------------------------------------------------------

class TextToImageAdapter(Protocol):
    def generate(self, prompt_text: str, seed: Optional[int]) -> tuple[bytes, str]: ...


class SearchAdapter(Protocol):
    def search(self, query_text: str, count: int, safe: bool) -> list[SearchResult]: ...


class MultimodalLLMAdapter(Protocol):
    supports_images: bool

    def complete(self, metaprompt: MetaPrompt, blobs: list[bytes]) -> str: ...


class EditAdapter(Protocol):
    def edit(self, request: EditRequest, base_bytes: bytes, image_prompt_bytes: Optional[bytes]) -> bytes: ...


# ---------------------------------------------------------------------------
# role-typed handles
# ---------------------------------------------------------------------------

class _Handle:
    ROLE: BackendRole

    def __init__(self, descriptor: BackendDescriptor):
        if descriptor.role is not self.ROLE:
            raise RoleMismatch(
                f"{type(self).__name__} cannot wrap a {descriptor.role.value} descriptor"
            )
        self.descriptor = descriptor

    @property
    def model_id(self) -> str:
        return self.descriptor.model_id or f"{self.descriptor.adapter_kind.value}-{self.ROLE.value}"


class TextToImageHandle(_Handle):
    ROLE = BackendRole.TextToImage

    def __init__(self, descriptor: BackendDescriptor, adapter: TextToImageAdapter):
        super().__init__(descriptor)
        self._adapter = adapter

    def generate_image(self, prompt_text: str, seed: Optional[int] = None) -> tuple[bytes, str]:
        return self._adapter.generate(prompt_text, seed)


class SearchHandle(_Handle):
    ROLE = BackendRole.ImageSearch

    def __init__(self, descriptor: BackendDescriptor, adapter: SearchAdapter):
        super().__init__(descriptor)
        self._adapter = adapter

    def search(self, query_text: str, count: int, safe: bool = True) -> list[SearchResult]:
        return self._adapter.search(query_text, count, safe)


class MultimodalLLMHandle(_Handle):
    ROLE = BackendRole.MultimodalLLM

    def __init__(self, descriptor: BackendDescriptor, adapter: MultimodalLLMAdapter):
        super().__init__(descriptor)
        self._adapter = adapter

    def complete(self, metaprompt: MetaPrompt, blobs: list[bytes]) -> str:
        if len(blobs) != len(metaprompt.attached_images):
            raise InvalidRequest(
                f"metaprompt attaches {len(metaprompt.attached_images)} image(s), "
                f"got {len(blobs)} blob(s)"
            )
        if metaprompt.attached_images and not self._adapter.supports_images:
            raise CapabilityMissing(
                "configured LLM backend does not accept image input"
            )
        return self._adapter.complete(metaprompt, blobs)


class _EditorHandle(_Handle):
    MODE = ""

    def __init__(
        self,
        descriptor: BackendDescriptor,
        adapter: EditAdapter,
        resolve_blob: Callable[[str], bytes],
    ):
        super().__init__(descriptor)
        self._adapter = adapter
        self._resolve_blob = resolve_blob

    def edit(self, request: EditRequest) -> bytes:
        if request.mode != self.MODE:
            raise InvalidRequest(
                f"{type(self).__name__} only serves {self.MODE!r} requests"
            )
        base_bytes = self._resolve_blob(request.base_image)
        image_prompt_bytes = (
            self._resolve_blob(request.image_prompt) if request.image_prompt else None
        )
        return self._adapter.edit(request, base_bytes, image_prompt_bytes)


class InstructionEditorHandle(_EditorHandle):
    ROLE = BackendRole.InstructionEditor
    MODE = "instruction"


class ImagePromptEditorHandle(_EditorHandle):
    ROLE = BackendRole.ImagePromptEditor
    MODE = "image_prompt"


# ---------------------------------------------------------------------------
# gateway operations (role-checked module-level entry points)
# ---------------------------------------------------------------------------

def _require(handle: object, handle_type: type) -> None:
    if not isinstance(handle, handle_type):
        raise RoleMismatch(
            f"operation requires a {handle_type.__name__}, got {type(handle).__name__}"
        )


def generate_image(
    backend: TextToImageHandle, prompt_text: str, seed: Optional[int] = None
) -> tuple[bytes, str]:
    _require(backend, TextToImageHandle)
    return backend.generate_image(prompt_text, seed)


def edit_by_instruction(backend: InstructionEditorHandle, request: EditRequest) -> bytes:
    _require(backend, InstructionEditorHandle)
    return backend.edit(request)


def edit_by_image_prompt(backend: ImagePromptEditorHandle, request: EditRequest) -> bytes:
    _require(backend, ImagePromptEditorHandle)
    return backend.edit(request)


def complete_multimodal(
    backend: MultimodalLLMHandle, metaprompt: MetaPrompt, blobs: list[bytes]
) -> str:
    _require(backend, MultimodalLLMHandle)
    return backend.complete(metaprompt, blobs)
