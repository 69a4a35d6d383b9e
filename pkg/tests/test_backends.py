"""Mock determinism, role safety, retry accounting, and the edit protocol."""

from __future__ import annotations

import base64
import hashlib
import threading
import time

import pytest
from fastapi.testclient import TestClient

from factpipe.backends.adapter_server import create_adapter_app
from factpipe.backends.base import (
    AdapterKind,
    BackendDescriptor,
    BackendRole,
    EditRequest,
    FairSemaphore,
    InstructionEditorHandle,
    MultimodalLLMHandle,
    SearchHandle,
    TextToImageHandle,
    TransientBackendError,
    TransportResponse,
    call_with_retries,
    complete_multimodal,
    generate_image,
)
from factpipe.backends.mock import (
    DIGEST_STAMP_BYTES,
    MockInstructionEditor,
    MockImagePromptEditor,
    MockMultimodalLLM,
    MockTextToImage,
    LLMFixtureEntry,
    read_digest_stamp,
    synthesize_image,
)
from factpipe.backends.real import RealEditClient, RealTextToImage
from factpipe.errors import (
    BackendFailure,
    CapabilityMissing,
    ConfigInvalid,
    InvalidRequest,
    RoleMismatch,
)
from factpipe.guidance import build_classification_metaprompt, build_difference_metaprompt
from factpipe.store import canonicalize_image

from test_guidance import INITIAL, RETRIEVED


def mock_descriptor(role: BackendRole) -> BackendDescriptor:
    return BackendDescriptor(role=role, adapter_kind=AdapterKind.Mock, model_id="m")


# -- mock determinism -----------------------------------------------------------

def test_mock_t2i_is_deterministic():
    adapter = MockTextToImage()
    first, media_type = adapter.generate("The Statue of Liberty in 1890", 1)
    second, _ = adapter.generate("The Statue of Liberty in 1890", 1)
    assert media_type == "image/png"
    assert first == second


def test_mock_t2i_seed_changes_output():
    adapter = MockTextToImage()
    one, _ = adapter.generate("The Statue of Liberty in 1890", 1)
    two, _ = adapter.generate("The Statue of Liberty in 1890", 2)
    assert hashlib.sha256(one).hexdigest() != hashlib.sha256(two).hexdigest()


def test_mock_t2i_prompt_changes_output():
    adapter = MockTextToImage()
    one, _ = adapter.generate("Mt. Fuji in summer", 1)
    two, _ = adapter.generate("Mt. Fuji in winter", 1)
    assert one != two


BASE_IMAGE = canonicalize_image(synthesize_image("base", 0, (128, 128))).data
BASE_HASH = canonicalize_image(BASE_IMAGE).content_hash


def _instruction_request(text="The statue needs to be colored copper brown.", size=(128, 128)):
    return EditRequest(base_image=BASE_HASH, instruction_text=text, output_size=size)


def test_mock_instruction_editor_stamps_guidance_digest():
    """The digest stamped into the pixels is exactly the instruction digest."""
    editor = MockInstructionEditor()
    out = editor.edit(_instruction_request(), BASE_IMAGE, None)
    expected = hashlib.sha256(
        "The statue needs to be colored copper brown.".encode("utf-8")
    ).digest()[:DIGEST_STAMP_BYTES]
    assert read_digest_stamp(out) == expected


def test_mock_instruction_editor_deterministic_and_distinct():
    editor = MockInstructionEditor()
    first = editor.edit(_instruction_request(), BASE_IMAGE, None)
    second = editor.edit(_instruction_request(), BASE_IMAGE, None)
    other = editor.edit(_instruction_request("Remove all snow from the scene."), BASE_IMAGE, None)
    assert first == second
    assert hashlib.sha256(first).hexdigest() != hashlib.sha256(BASE_IMAGE).hexdigest()
    assert first != other


def test_mock_image_prompt_editor_text_matters():
    editor = MockImagePromptEditor()
    request_a = EditRequest(
        base_image=BASE_HASH,
        image_prompt="c" * 64,
        factual_prompt_text="a woman at a podium",
        output_size=(128, 128),
    )
    request_b = EditRequest(
        base_image=BASE_HASH,
        image_prompt="c" * 64,
        factual_prompt_text="a man on a balcony",
        output_size=(128, 128),
    )
    out_a = editor.edit(request_a, BASE_IMAGE, BASE_IMAGE)
    out_b = editor.edit(request_b, BASE_IMAGE, BASE_IMAGE)
    assert out_a != out_b
    assert out_a == editor.edit(request_a, BASE_IMAGE, BASE_IMAGE)


def test_editor_output_size_honored():
    editor = MockInstructionEditor()
    out = editor.edit(_instruction_request(size=(96, 72)), BASE_IMAGE, None)
    canonical = canonicalize_image(out)
    assert (canonical.width, canonical.height) == (96, 72)


# -- edit request invariants --------------------------------------------------

def test_edit_request_mode_exclusivity():
    with pytest.raises(InvalidRequest):
        EditRequest(
            base_image=BASE_HASH,
            instruction_text="x",
            image_prompt="c" * 64,
            factual_prompt_text="y",
        )
    with pytest.raises(InvalidRequest):
        EditRequest(base_image=BASE_HASH, image_prompt="c" * 64)
    with pytest.raises(InvalidRequest):
        EditRequest(base_image=BASE_HASH)
    with pytest.raises(InvalidRequest):
        EditRequest(base_image=BASE_HASH, instruction_text="x", strength=0.0)
    with pytest.raises(InvalidRequest):
        EditRequest(base_image=BASE_HASH, instruction_text="x", strength=1.2)


# -- role safety ----------------------------------------------------------------

def test_handles_reject_wrong_descriptor():
    with pytest.raises(RoleMismatch):
        TextToImageHandle(mock_descriptor(BackendRole.ImageSearch), MockTextToImage())
    with pytest.raises(RoleMismatch):
        SearchHandle(mock_descriptor(BackendRole.TextToImage), MockTextToImage())
    with pytest.raises(RoleMismatch):
        InstructionEditorHandle(
            mock_descriptor(BackendRole.ImagePromptEditor),
            MockInstructionEditor(),
            lambda h: b"",
        )


def test_gateway_rejects_wrong_handle():
    t2i = TextToImageHandle(mock_descriptor(BackendRole.TextToImage), MockTextToImage())
    with pytest.raises(RoleMismatch):
        complete_multimodal(t2i, build_classification_metaprompt("x"), [])
    llm = MultimodalLLMHandle(
        mock_descriptor(BackendRole.MultimodalLLM), MockMultimodalLLM([])
    )
    with pytest.raises(RoleMismatch):
        generate_image(llm, "x")


def test_editor_handle_rejects_other_mode():
    handle = InstructionEditorHandle(
        mock_descriptor(BackendRole.InstructionEditor),
        MockInstructionEditor(),
        lambda h: BASE_IMAGE,
    )
    request = EditRequest(
        base_image=BASE_HASH, image_prompt="c" * 64, factual_prompt_text="y"
    )
    with pytest.raises(InvalidRequest):
        handle.edit(request)


# -- mock LLM fixture lookup ----------------------------------------------------

def test_mock_llm_match_and_exact_precedence():
    metaprompt = build_difference_metaprompt(
        INITIAL, RETRIEVED, "The Statue of Liberty in 1890"
    )
    by_match = MockMultimodalLLM(
        [
            LLMFixtureEntry(
                template="difference_instruction",
                match="The Statue of Liberty in 1890",
                response="The statue needs to be colored copper brown.",
            )
        ]
    )
    assert by_match.complete(metaprompt, [b"1", b"2"]) == (
        "The statue needs to be colored copper brown."
    )
    with_exact = MockMultimodalLLM(
        [
            LLMFixtureEntry(
                template="difference_instruction",
                match="The Statue of Liberty in 1890",
                response="match response",
            ),
            LLMFixtureEntry(
                template="difference_instruction",
                hashes=(INITIAL.content_hash, RETRIEVED.content_hash),
                response="exact response",
            ),
        ]
    )
    assert with_exact.complete(metaprompt, [b"1", b"2"]) == "exact response"


def test_mock_llm_unknown_key_fails():
    llm = MockMultimodalLLM([])
    metaprompt = build_classification_metaprompt("something never fixtured")
    with pytest.raises(BackendFailure, match="no fixture"):
        llm.complete(metaprompt, [])


def test_llm_handle_enforces_blob_count():
    handle = MultimodalLLMHandle(
        mock_descriptor(BackendRole.MultimodalLLM), MockMultimodalLLM([])
    )
    metaprompt = build_difference_metaprompt(INITIAL, RETRIEVED, "x")
    with pytest.raises(InvalidRequest):
        handle.complete(metaprompt, [b"only one"])


def test_capability_missing_without_vision():
    class TextOnlyLLM:
        supports_images = False

        def complete(self, metaprompt, blobs):
            return "never reached"

    handle = MultimodalLLMHandle(mock_descriptor(BackendRole.MultimodalLLM), TextOnlyLLM())
    metaprompt = build_difference_metaprompt(INITIAL, RETRIEVED, "x")
    with pytest.raises(CapabilityMissing):
        handle.complete(metaprompt, [b"1", b"2"])


# -- retries ---------------------------------------------------------------------

class RecordingTransport:
    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.attempts = 0

    def request(self, method, url, *, headers=None, params=None, json_body=None, timeout=None):
        self.attempts += 1
        outcome = self.outcomes[min(self.attempts - 1, len(self.outcomes) - 1)]
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def test_failing_adapter_attempts_max_retries_plus_one():
    descriptor = BackendDescriptor(
        role=BackendRole.TextToImage,
        adapter_kind=AdapterKind.Real,
        endpoint_url="http://t2i.test/v1",
        model_id="m",
        max_retries=3,
    )
    transport = RecordingTransport([TransientBackendError("boom")])
    delays: list[float] = []
    adapter = RealTextToImage(descriptor, transport, sleeper=delays.append)
    with pytest.raises(BackendFailure):
        adapter.generate("x", None)
    assert transport.attempts == 4
    assert delays == [1.0, 2.0, 4.0]


def test_retry_recovers_after_transient_failures():
    descriptor = BackendDescriptor(
        role=BackendRole.TextToImage,
        adapter_kind=AdapterKind.Real,
        endpoint_url="http://t2i.test/v1",
        max_retries=3,
    )
    ok = TransportResponse(status_code=200, content=b"{}")
    transport = RecordingTransport([TransientBackendError("x"), ok])
    response = call_with_retries(descriptor, lambda: transport.request("GET", "u"), sleeper=lambda _: None)
    assert response.status_code == 200
    assert transport.attempts == 2


def test_server_errors_are_retried_then_fail():
    descriptor = BackendDescriptor(
        role=BackendRole.MultimodalLLM,
        adapter_kind=AdapterKind.Real,
        endpoint_url="http://llm.test/v1",
        max_retries=1,
    )
    transport = RecordingTransport([TransportResponse(status_code=503, content=b"")])
    with pytest.raises(BackendFailure):
        call_with_retries(descriptor, lambda: transport.request("GET", "u"), sleeper=lambda _: None)
    assert transport.attempts == 2


def test_fair_semaphore_caps_concurrency():
    semaphore = FairSemaphore(2)
    active = 0
    peak = 0
    lock = threading.Lock()

    def worker():
        nonlocal active, peak
        with semaphore:
            with lock:
                active += 1
                peak = max(peak, active)
            time.sleep(0.01)
            with lock:
                active -= 1

    threads = [threading.Thread(target=worker) for _ in range(10)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert peak <= 2


def test_real_descriptor_requires_endpoint():
    with pytest.raises(ConfigInvalid):
        BackendDescriptor(role=BackendRole.TextToImage, adapter_kind=AdapterKind.Real)


# -- edit wire protocol (mock adapter server + real client) ---------------------

@pytest.fixture(scope="module")
def adapter_client():
    with TestClient(create_adapter_app()) as client:
        yield client


def _protocol_body(**overrides):
    body = {
        "mode": "instruction",
        "base_image_b64": base64.b64encode(BASE_IMAGE).decode("ascii"),
        "instruction": "Remove all snow from the scene.",
        "width": 128,
        "height": 128,
    }
    body.update(overrides)
    return body


def test_protocol_health(adapter_client):
    data = adapter_client.get("/v1/health").json()
    assert data["status"] == "ok"
    assert data["roles"] == ["instruction", "image_prompt"]


def test_protocol_instruction_roundtrip(adapter_client):
    response = adapter_client.post("/v1/edit", json=_protocol_body())
    assert response.status_code == 200
    payload = response.json()
    assert set(payload) == {"image_b64", "media_type", "model_id", "duration_ms"}
    out = base64.b64decode(payload["image_b64"])
    canonical = canonicalize_image(out)
    assert (canonical.width, canonical.height) == (128, 128)


def test_protocol_matches_in_process_mock(adapter_client):
    """Protocol equivalence: the HTTP server and the in-process mock editor
    produce identical bytes for identical canonical inputs."""
    response = adapter_client.post("/v1/edit", json=_protocol_body())
    over_http = base64.b64decode(response.json()["image_b64"])
    in_process = MockInstructionEditor().edit(
        _instruction_request("Remove all snow from the scene."), BASE_IMAGE, None
    )
    assert over_http == in_process


def test_protocol_rejects_both_modes(adapter_client):
    body = _protocol_body(
        image_prompt_b64=base64.b64encode(BASE_IMAGE).decode("ascii"),
        factual_prompt="y",
    )
    assert adapter_client.post("/v1/edit", json=body).status_code == 422


def test_protocol_rejects_missing_factual_prompt(adapter_client):
    body = _protocol_body(mode="image_prompt", instruction=None)
    body["image_prompt_b64"] = base64.b64encode(BASE_IMAGE).decode("ascii")
    body.pop("factual_prompt", None)
    assert adapter_client.post("/v1/edit", json=body).status_code == 422


def test_protocol_rejects_unknown_field(adapter_client):
    assert adapter_client.post(
        "/v1/edit", json=_protocol_body(instructionn="typo")
    ).status_code == 422


def test_protocol_rejects_bad_base64(adapter_client):
    assert adapter_client.post(
        "/v1/edit", json=_protocol_body(base_image_b64="@@not-base64@@")
    ).status_code == 422


def test_protocol_role_not_loaded():
    with TestClient(create_adapter_app(roles=("image_prompt",))) as client:
        assert client.post("/v1/edit", json=_protocol_body()).status_code == 409


class _ASGIBackedTransport:
    """Transport that routes requests into a FastAPI app in-process."""

    def __init__(self, app):
        self._client = TestClient(app, base_url="http://adapter.test")

    def request(self, method, url, *, headers=None, params=None, json_body=None, timeout=None):
        response = self._client.request(method, url, headers=headers, params=params, json=json_body)
        return TransportResponse(
            status_code=response.status_code,
            content=response.content,
            headers=dict(response.headers),
        )


def test_real_edit_client_against_protocol_server():
    descriptor = BackendDescriptor(
        role=BackendRole.InstructionEditor,
        adapter_kind=AdapterKind.Real,
        endpoint_url="http://adapter.test",
        model_id="remote-editor",
        max_retries=0,
    )
    client = RealEditClient(descriptor, _ASGIBackedTransport(create_adapter_app()))
    request = _instruction_request("Remove all snow from the scene.")
    out = client.edit(request, BASE_IMAGE, None)
    in_process = MockInstructionEditor().edit(request, BASE_IMAGE, None)
    assert out == in_process
