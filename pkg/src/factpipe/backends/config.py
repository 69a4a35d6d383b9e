"""Backend profile loading: mock/real adapter selection per role.

A profile is a TOML file with one ``[backend.<role>]`` table per role.
The built-in "mock" profile needs no file at all: it wires every role to
the deterministic fakes and the fixture manifests shipped with the
package, which is what tests and the CLI default to.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigInvalid
from .base import (
    AdapterKind,
    BackendDescriptor,
    BackendRole,
    ImagePromptEditorHandle,
    InstructionEditorHandle,
    MultimodalLLMHandle,
    SearchHandle,
    TextToImageHandle,
    Transport,
)
from .mock import (
    MockFetcher,
    MockImagePromptEditor,
    MockInstructionEditor,
    MockMultimodalLLM,
    MockSearchBackend,
    MockTextToImage,
)
from .real import (
    HttpFetcher,
    RealEditClient,
    RealMultimodalLLM,
    RealSearchBackend,
    RealTextToImage,
)

DEFAULT_SEARCH_ENDPOINT = "https://www.googleapis.com/customsearch/v1"

_ROLE_KEYS = {
    "text_to_image": BackendRole.TextToImage,
    "image_search": BackendRole.ImageSearch,
    "multimodal_llm": BackendRole.MultimodalLLM,
    "instruction_editor": BackendRole.InstructionEditor,
    "image_prompt_editor": BackendRole.ImagePromptEditor,
}


@dataclass
class BackendSet:
    """The five role handles plus the candidate fetcher, ready to use."""

    text_to_image: TextToImageHandle
    search: SearchHandle
    llm: MultimodalLLMHandle
    instruction_editor: InstructionEditorHandle
    image_prompt_editor: ImagePromptEditorHandle
    fetcher: object
    profile: str


def fixture_root() -> Path:
    return Path(str(resources.files("factpipe") / "fixtures"))


def _mock_descriptor(role: BackendRole) -> BackendDescriptor:
    return BackendDescriptor(
        role=role, adapter_kind=AdapterKind.Mock, model_id=f"mock-{role.value}"
    )


def _parse_descriptor(role: BackendRole, table: dict) -> BackendDescriptor:
    kind = AdapterKind(table.get("adapter_kind", "mock"))
    endpoint = table.get("endpoint")
    if endpoint is None and kind is AdapterKind.Real and role is BackendRole.ImageSearch:
        endpoint = DEFAULT_SEARCH_ENDPOINT
    return BackendDescriptor(
        role=role,
        adapter_kind=kind,
        endpoint_url=endpoint,
        model_id=table.get("model_id"),
        timeout_s=float(table.get("timeout_s", 120.0)),
        max_retries=int(table.get("max_retries", 3)),
    )


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"config file {path} is not valid TOML: {exc}") from exc


def build_backends(
    profile: str,
    resolve_blob: Callable[[str], bytes],
    config_path: Optional[str | Path] = None,
    transport: Optional[Transport] = None,
) -> BackendSet:
    """Assemble the five handles for a named profile.

    ``profile`` is "mock" or "real"; a config file refines either one. The
    real profile requires a config file naming every real endpoint.
    """
    if profile not in ("mock", "real"):
        raise ConfigInvalid(f"unknown backend profile {profile!r}")
    config = load_config_file(config_path) if config_path else {}
    backend_tables = config.get("backend", {})
    mock_table = config.get("mock", {})

    root = Path(mock_table["fixture_root"]) if "fixture_root" in mock_table else fixture_root()
    search_manifest = Path(mock_table.get("search_manifest", root / "search_manifest.json"))
    llm_manifest = Path(mock_table.get("llm_manifest", root / "llm_manifest.json"))
    image_root = Path(mock_table.get("image_root", root / "images"))

    descriptors: dict[BackendRole, BackendDescriptor] = {}
    for key, role in _ROLE_KEYS.items():
        if key in backend_tables:
            descriptors[role] = _parse_descriptor(role, backend_tables[key])
        elif profile == "mock":
            descriptors[role] = _mock_descriptor(role)
        else:
            raise ConfigInvalid(
                f"real profile requires a [backend.{key}] table in the config file"
            )
        if profile == "mock" and descriptors[role].adapter_kind is AdapterKind.Mock:
            # normalize mock model ids so provenance stays profile-stable
            if descriptors[role].model_id is None:
                descriptors[role] = _mock_descriptor(role)

    if transport is None and any(
        d.adapter_kind is AdapterKind.Real for d in descriptors.values()
    ):
        from .base import HttpxTransport

        transport = HttpxTransport()

    def _t2i() -> TextToImageHandle:
        descriptor = descriptors[BackendRole.TextToImage]
        if descriptor.adapter_kind is AdapterKind.Mock:
            return TextToImageHandle(descriptor, MockTextToImage())
        return TextToImageHandle(descriptor, RealTextToImage(descriptor, transport))

    def _search() -> SearchHandle:
        descriptor = descriptors[BackendRole.ImageSearch]
        if descriptor.adapter_kind is AdapterKind.Mock:
            return SearchHandle(descriptor, MockSearchBackend.from_manifest(search_manifest))
        return SearchHandle(descriptor, RealSearchBackend(descriptor, transport))

    def _llm() -> MultimodalLLMHandle:
        descriptor = descriptors[BackendRole.MultimodalLLM]
        if descriptor.adapter_kind is AdapterKind.Mock:
            return MultimodalLLMHandle(descriptor, MockMultimodalLLM.from_manifest(llm_manifest))
        table = backend_tables.get("multimodal_llm", {})
        adapter = RealMultimodalLLM(
            descriptor, transport, supports_images=bool(table.get("supports_images", True))
        )
        return MultimodalLLMHandle(descriptor, adapter)

    def _instruction_editor() -> InstructionEditorHandle:
        descriptor = descriptors[BackendRole.InstructionEditor]
        if descriptor.adapter_kind is AdapterKind.Mock:
            return InstructionEditorHandle(descriptor, MockInstructionEditor(), resolve_blob)
        return InstructionEditorHandle(
            descriptor, RealEditClient(descriptor, transport), resolve_blob
        )

    def _image_prompt_editor() -> ImagePromptEditorHandle:
        descriptor = descriptors[BackendRole.ImagePromptEditor]
        if descriptor.adapter_kind is AdapterKind.Mock:
            return ImagePromptEditorHandle(descriptor, MockImagePromptEditor(), resolve_blob)
        return ImagePromptEditorHandle(
            descriptor, RealEditClient(descriptor, transport), resolve_blob
        )

    fetcher: object
    if profile == "mock" or mock_table.get("fetcher", "") == "mock":
        fetcher = MockFetcher(image_root)
    else:
        fetcher = HttpFetcher(transport)

    return BackendSet(
        text_to_image=_t2i(),
        search=_search(),
        llm=_llm(),
        instruction_editor=_instruction_editor(),
        image_prompt_editor=_image_prompt_editor(),
        fetcher=fetcher,
        profile=profile,
    )
