"""Network adapters for the five backend roles.

All of them speak plain HTTP/JSON through an injectable transport, never a
vendor SDK: the text-to-image and LLM adapters target OpenAI-compatible
endpoints, search targets the Custom Search JSON API, and both editors
speak the model-adapter edit protocol (POST <endpoint>/v1/edit), whether
the other end is a GPU microservice or a local mock server.
"""

from __future__ import annotations

import base64
import os
import time
from typing import Callable, Optional

from ..errors import (
    BackendFailure,
    ContentPolicyRejection,
    QuotaExceeded,
)
from ..guidance import MetaPrompt
from .base import (
    BackendDescriptor,
    DEFAULT_INFLIGHT_CAP,
    EditRequest,
    FairSemaphore,
    SearchResult,
    Transport,
    TransportResponse,
    call_with_retries,
)

SEARCH_KEY_ENV = "FACTPIPE_SEARCH_KEY"
SEARCH_CX_ENV = "FACTPIPE_SEARCH_CX"
LLM_KEY_ENV = "FACTPIPE_LLM_KEY"
T2I_KEY_ENV = "FACTPIPE_T2I_KEY"

_SEARCH_PAGE_SIZE = 10


def _bearer(env_var: str) -> dict[str, str]:
    token = os.environ.get(env_var, "")
    return {"Authorization": f"Bearer {token}"} if token else {}


class _RealAdapter:
    def __init__(
        self,
        descriptor: BackendDescriptor,
        transport: Transport,
        sleeper: Callable[[float], None] = time.sleep,
        inflight_cap: int = DEFAULT_INFLIGHT_CAP,
    ):
        self.descriptor = descriptor
        self._transport = transport
        self._sleeper = sleeper
        self._inflight = FairSemaphore(inflight_cap)

    def _call(self, method: str, url: str, **kwargs) -> TransportResponse:
        with self._inflight:
            return call_with_retries(
                self.descriptor,
                lambda: self._transport.request(
                    method, url, timeout=self.descriptor.timeout_s, **kwargs
                ),
                sleeper=self._sleeper,
            )


class RealTextToImage(_RealAdapter):
    """OpenAI-compatible images endpoint (model id comes from config)."""

    def generate(self, prompt_text: str, seed: Optional[int]) -> tuple[bytes, str]:
        body = {
            "model": self.descriptor.model_id,
            "prompt": prompt_text,
            "n": 1,
            "size": "1024x1024",
            "response_format": "b64_json",
        }
        if seed is not None:
            body["seed"] = seed
        response = self._call(
            "POST",
            f"{self.descriptor.endpoint_url}/images/generations",
            headers=_bearer(T2I_KEY_ENV),
            json_body=body,
        )
        if response.status_code == 400 and b"content_policy" in response.content:
            raise ContentPolicyRejection(response.content.decode("utf-8", "replace"))
        if response.status_code != 200:
            raise BackendFailure(
                f"text-to-image endpoint returned {response.status_code}"
            )
        payload = response.json()
        data = payload["data"][0]["b64_json"]
        return base64.b64decode(data), "image/png"


class RealSearchBackend(_RealAdapter):
    """Custom Search JSON API image search with pagination."""

    def search(self, query_text: str, count: int, safe: bool) -> list[SearchResult]:
        key = os.environ.get(SEARCH_KEY_ENV)
        cx = os.environ.get(SEARCH_CX_ENV)
        if not key or not cx:
            raise BackendFailure(
                f"search backend requires {SEARCH_KEY_ENV} and {SEARCH_CX_ENV}"
            )
        results: list[SearchResult] = []
        start = 1
        while len(results) < count:
            page = min(_SEARCH_PAGE_SIZE, count - len(results))
            response = self._call(
                "GET",
                self.descriptor.endpoint_url,
                params={
                    "q": query_text,
                    "num": page,
                    "searchType": "image",
                    "safe": "active" if safe else "off",
                    "start": start,
                    "key": key,
                    "cx": cx,
                },
            )
            if response.status_code == 429 or (
                response.status_code == 403 and b"quota" in response.content.lower()
            ):
                raise QuotaExceeded(
                    f"search quota exhausted ({response.status_code})"
                )
            if response.status_code != 200:
                raise BackendFailure(f"search endpoint returned {response.status_code}")
            items = response.json().get("items", [])
            if not items:
                break
            for item in items:
                image_info = item.get("image", {})
                results.append(
                    SearchResult(
                        url=item["link"],
                        title=item.get("title"),
                        thumbnail_url=image_info.get("thumbnailLink"),
                    )
                )
            start += len(items)
        return results[:count]


class RealMultimodalLLM(_RealAdapter):
    """OpenAI-compatible chat-completions endpoint with image attachments."""

    def __init__(self, *args, supports_images: bool = True, **kwargs):
        super().__init__(*args, **kwargs)
        self.supports_images = supports_images

    def complete(self, metaprompt: MetaPrompt, blobs: list[bytes]) -> str:
        content: list[dict] = [{"type": "text", "text": metaprompt.rendered_text}]
        for blob in blobs:
            encoded = base64.b64encode(blob).decode("ascii")
            content.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:image/png;base64,{encoded}"},
                }
            )
        response = self._call(
            "POST",
            f"{self.descriptor.endpoint_url}/chat/completions",
            headers=_bearer(LLM_KEY_ENV),
            json_body={
                "model": self.descriptor.model_id,
                "temperature": 0,
                "max_tokens": 512,
                "messages": [{"role": "user", "content": content}],
            },
        )
        if response.status_code != 200:
            raise BackendFailure(f"LLM endpoint returned {response.status_code}")
        return response.json()["choices"][0]["message"]["content"]


class RealEditClient(_RealAdapter):
    """Client for the edit wire protocol served by model adapters."""

    def edit(
        self, request: EditRequest, base_bytes: bytes, image_prompt_bytes: Optional[bytes]
    ) -> bytes:
        body: dict = {
            "mode": request.mode,
            "base_image_b64": base64.b64encode(base_bytes).decode("ascii"),
            "strength": request.strength,
            "width": request.output_size[0],
            "height": request.output_size[1],
        }
        if request.seed is not None:
            body["seed"] = request.seed
        if request.mode == "instruction":
            body["instruction"] = request.instruction_text
        else:
            body["image_prompt_b64"] = base64.b64encode(image_prompt_bytes or b"").decode("ascii")
            body["factual_prompt"] = request.factual_prompt_text
        response = self._call(
            "POST",
            f"{self.descriptor.endpoint_url}/v1/edit",
            json_body=body,
        )
        if response.status_code != 200:
            raise BackendFailure(
                f"edit endpoint returned {response.status_code}: "
                f"{response.content[:200].decode('utf-8', 'replace')}"
            )
        return base64.b64decode(response.json()["image_b64"])


class HttpFetcher:
    """Downloads candidate images over HTTP with a hard size cap."""

    def __init__(self, transport: Transport, timeout_s: float = 30.0, max_bytes: int = 20 * 1024 * 1024):
        self._transport = transport
        self._timeout_s = timeout_s
        self._max_bytes = max_bytes

    def fetch(self, url: str) -> tuple[bytes, str]:
        from ..errors import FetchFailed
        from .base import TransientBackendError

        try:
            response = self._transport.request("GET", url, timeout=self._timeout_s)
        except TransientBackendError as exc:
            raise FetchFailed(str(exc)) from exc
        if response.status_code >= 400:
            raise FetchFailed(f"HTTP {response.status_code} for {url}")
        if len(response.content) > self._max_bytes:
            raise FetchFailed(f"payload exceeds {self._max_bytes} bytes")
        media_type = response.headers.get("content-type", "application/octet-stream")
        return response.content, media_type.split(";")[0].strip()
