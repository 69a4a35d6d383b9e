"""Protocol conformance suite, runnable against any edit-protocol server.

Works with anything exposing ``get(path)`` / ``post(path, json=...)`` that
returns responses with ``status_code`` and ``json()`` — an ``httpx.Client``
with a base_url for live servers, or a FastAPI test client in-process. For
roles the server advertises, valid requests must succeed with a schema-
conformant body and exact output dimensions; for roles it does not, the
same requests must 409. Schema violations must 422 regardless of roles.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass
from typing import Any, Protocol

from PIL import Image

RESPONSE_FIELDS = {"image_b64", "media_type", "model_id", "duration_ms"}


class ProtocolClient(Protocol):
    def get(self, path: str) -> Any: ...

    def post(self, path: str, json: dict) -> Any: ...


@dataclass(frozen=True)
class CaseResult:
    name: str
    passed: bool
    detail: str = ""


def _sample_png(color=(90, 120, 150), size=(96, 96)) -> str:
    buffer = io.BytesIO()
    Image.new("RGB", size, color).save(buffer, format="PNG")
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def _instruction_body(**overrides) -> dict:
    body = {
        "mode": "instruction",
        "base_image_b64": _sample_png(),
        "instruction": "Remove all snow from the scene.",
        "width": 96,
        "height": 80,
    }
    body.update(overrides)
    return body


def _image_prompt_body(**overrides) -> dict:
    body = {
        "mode": "image_prompt",
        "base_image_b64": _sample_png(),
        "image_prompt_b64": _sample_png(color=(10, 200, 40)),
        "factual_prompt": "a copper statue on a harbor island",
        "width": 96,
        "height": 80,
    }
    body.update(overrides)
    return body


def _check_valid(client: ProtocolClient, name: str, body: dict, loaded: bool) -> CaseResult:
    response = client.post("/v1/edit", json=body)
    if not loaded:
        if response.status_code == 409:
            return CaseResult(name, True, "role unloaded, 409 as expected")
        return CaseResult(name, False, f"expected 409 for unloaded role, got {response.status_code}")
    if response.status_code != 200:
        return CaseResult(name, False, f"expected 200, got {response.status_code}")
    payload = response.json()
    if set(payload) != RESPONSE_FIELDS:
        return CaseResult(name, False, f"response fields {sorted(payload)}")
    try:
        image = Image.open(io.BytesIO(base64.b64decode(payload["image_b64"])))
    except Exception as exc:
        return CaseResult(name, False, f"image_b64 not decodable: {exc}")
    if image.size != (body["width"], body["height"]):
        return CaseResult(name, False, f"size {image.size} != requested")
    if payload["media_type"] != "image/png":
        return CaseResult(name, False, f"media_type {payload['media_type']!r}")
    return CaseResult(name, True)


def _check_status(client: ProtocolClient, name: str, body: dict, expected: int) -> CaseResult:
    response = client.post("/v1/edit", json=body)
    if response.status_code == expected:
        return CaseResult(name, True)
    return CaseResult(name, False, f"expected {expected}, got {response.status_code}")


def contract_suite(client: ProtocolClient) -> list[CaseResult]:
    results: list[CaseResult] = []

    health = client.get("/v1/health")
    if health.status_code != 200:
        return [CaseResult("health", False, f"status {health.status_code}")]
    payload = health.json()
    health_ok = payload.get("status") == "ok" and isinstance(payload.get("roles"), list)
    results.append(
        CaseResult("health", health_ok, "" if health_ok else f"body {payload}")
    )
    roles = set(payload.get("roles", []))

    results.append(
        _check_valid(client, "valid-instruction", _instruction_body(), "instruction" in roles)
    )
    results.append(
        _check_valid(client, "valid-image-prompt", _image_prompt_body(), "image_prompt" in roles)
    )
    results.append(
        _check_valid(
            client,
            "size-handling-256",
            _instruction_body(width=256, height=192),
            "instruction" in roles,
        )
    )
    results.append(
        _check_status(
            client,
            "both-modes-populated",
            _instruction_body(
                image_prompt_b64=_sample_png(), factual_prompt="x"
            ),
            422,
        )
    )
    results.append(
        _check_status(
            client,
            "missing-factual-prompt",
            {
                "mode": "image_prompt",
                "base_image_b64": _sample_png(),
                "image_prompt_b64": _sample_png(),
            },
            422,
        )
    )
    results.append(
        _check_status(
            client,
            "missing-mode-payload",
            {"mode": "instruction", "base_image_b64": _sample_png()},
            422,
        )
    )
    results.append(
        _check_status(client, "mutated-field-name", _instruction_body(instructionn="x"), 422)
    )
    # undecodable payloads are caught after the role gate, so an unloaded
    # role answers 409 before the content is ever inspected
    results.append(
        _check_status(
            client,
            "bad-base64",
            _instruction_body(base_image_b64="@@@"),
            422 if "instruction" in roles else 409,
        )
    )
    results.append(
        _check_status(client, "strength-out-of-range", _instruction_body(strength=1.5), 422)
    )
    results.append(
        _check_status(client, "zero-size", _instruction_body(width=0), 422)
    )
    if roles and roles != {"instruction", "image_prompt"}:
        missing = ({"instruction", "image_prompt"} - roles).pop()
        body = _instruction_body() if missing == "instruction" else _image_prompt_body()
        results.append(_check_status(client, f"unloaded-role-{missing}", body, 409))
    return results


def format_report(results: list[CaseResult]) -> str:
    lines = []
    for result in results:
        mark = "PASS" if result.passed else "FAIL"
        suffix = f"  ({result.detail})" if result.detail else ""
        lines.append(f"[{mark}] {result.name}{suffix}")
    failed = sum(1 for r in results if not r.passed)
    lines.append(f"{len(results) - failed}/{len(results)} cases passed")
    return "\n".join(lines)
