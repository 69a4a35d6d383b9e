"""Deterministic local fakes for all five backend roles.

Every mock is a pure function of its request, so full pipeline runs are
hash-stable across processes: the text-to-image fake paints a color field
derived from the digest of (prompt, seed), and the editor fakes stamp the
digest of the guidance they received into the output pixels, which lets
tests read back exactly which guidance reached the editor.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
from urllib.parse import urlparse

from PIL import Image, ImageDraw

from ..errors import BackendFailure, FetchFailed
from ..guidance import MetaPrompt
from .base import EditRequest, SearchResult

DIGEST_STAMP_BYTES = 16


def _block_colors(material: bytes, count: int) -> list[tuple[int, int, int]]:
    colors = []
    for index in range(count):
        chunk = hashlib.sha256(material + bytes([index])).digest()
        colors.append((chunk[0], chunk[1], chunk[2]))
    return colors


def _encode_png(img: Image.Image) -> bytes:
    buffer = io.BytesIO()
    img.save(buffer, format="PNG", compress_level=6, optimize=False)
    return buffer.getvalue()


def synthesize_image(
    label: str, seed: Optional[int], size: tuple[int, int] = (512, 512)
) -> bytes:
    """Render a deterministic placeholder image for (label, seed)."""
    material = f"{label}\x00{seed}".encode("utf-8")
    width, height = size
    img = Image.new("RGB", size)
    draw = ImageDraw.Draw(img)
    colors = _block_colors(material, 16)
    for row in range(4):
        for col in range(4):
            x0, x1 = col * width // 4, (col + 1) * width // 4
            y0, y1 = row * height // 4, (row + 1) * height // 4
            if x1 > x0 and y1 > y0:
                draw.rectangle([x0, y0, x1 - 1, y1 - 1], fill=colors[row * 4 + col])
    return _encode_png(img)


def stamp_digest(base: Image.Image, material: bytes) -> Image.Image:
    """Overlay the digest of ``material`` as a strip of grayscale blocks.

    The first DIGEST_STAMP_BYTES digest bytes become equal-width blocks
    along the bottom edge, so the digest is recoverable from the pixels.
    """
    digest = hashlib.sha256(material).digest()
    width, height = base.size
    strip_h = max(1, height // 8)
    block_w = max(1, width // DIGEST_STAMP_BYTES)
    out = base.copy()
    draw = ImageDraw.Draw(out)
    for index in range(DIGEST_STAMP_BYTES):
        value = digest[index]
        x0 = index * block_w
        x1 = width if index == DIGEST_STAMP_BYTES - 1 else min(width, (index + 1) * block_w)
        if x0 >= width:
            break
        draw.rectangle(
            [x0, height - strip_h, x1 - 1, height - 1], fill=(value, value, value)
        )
    return out


def read_digest_stamp(data: bytes) -> bytes:
    """Recover the stamped digest prefix from an edited mock image."""
    img = Image.open(io.BytesIO(data)).convert("RGB")
    width, height = img.size
    strip_h = max(1, height // 8)
    block_w = max(1, width // DIGEST_STAMP_BYTES)
    row = height - max(1, strip_h // 2)
    values = []
    for index in range(DIGEST_STAMP_BYTES):
        x = min(width - 1, index * block_w + block_w // 2)
        values.append(img.getpixel((x, row))[0])
    return bytes(values)


class MockTextToImage:
    """Text-to-image fake: pixels are a pure function of (prompt, seed)."""

    def __init__(self, size: tuple[int, int] = (512, 512)):
        self._size = size

    def generate(self, prompt_text: str, seed: Optional[int]) -> tuple[bytes, str]:
        return synthesize_image(prompt_text, seed, self._size), "image/png"


class MockInstructionEditor:
    """Instruction editor fake: stamps the instruction digest onto the base."""

    def edit(
        self, request: EditRequest, base_bytes: bytes, image_prompt_bytes: Optional[bytes]
    ) -> bytes:
        base = Image.open(io.BytesIO(base_bytes)).convert("RGB")
        base = base.resize(request.output_size, Image.NEAREST)
        out = stamp_digest(base, (request.instruction_text or "").encode("utf-8"))
        return _encode_png(out)


class MockImagePromptEditor:
    """Image-prompt editor fake: stamps digest of (reference hash, prompt)."""

    def edit(
        self, request: EditRequest, base_bytes: bytes, image_prompt_bytes: Optional[bytes]
    ) -> bytes:
        base = Image.open(io.BytesIO(base_bytes)).convert("RGB")
        base = base.resize(request.output_size, Image.NEAREST)
        material = f"{request.image_prompt}\x00{request.factual_prompt_text}".encode("utf-8")
        out = stamp_digest(base, material)
        return _encode_png(out)


# ---------------------------------------------------------------------------
# manifest-driven fakes (LLM and search)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LLMFixtureEntry:
    template: str
    response: str
    match: Optional[str] = None
    hashes: tuple[str, ...] = ()


class MockMultimodalLLM:
    """Canned-response LLM keyed by (template, attached hashes).

    Exact (template, hashes) entries win; entries with a ``match`` string
    answer any metaprompt of their template whose rendered text contains
    the string, which keeps shipped fixtures stable when image content
    changes. Anything else fails like a backend with no fixture.
    """

    supports_images = True

    def __init__(self, entries: list[LLMFixtureEntry]):
        self._exact = {
            (e.template, e.hashes): e.response for e in entries if e.hashes
        }
        self._matchers = [e for e in entries if e.match is not None]

    @classmethod
    def from_manifest(cls, path: str | Path) -> "MockMultimodalLLM":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [
            LLMFixtureEntry(
                template=entry["template"],
                response=entry["response"],
                match=entry.get("match"),
                hashes=tuple(entry.get("hashes") or ()),
            )
            for entry in data["entries"]
        ]
        return cls(entries)

    def complete(self, metaprompt: MetaPrompt, blobs: list[bytes]) -> str:
        key = (metaprompt.template_id.value, metaprompt.attached_images)
        if key in self._exact:
            return self._exact[key]
        for entry in self._matchers:
            if (
                entry.template == metaprompt.template_id.value
                and entry.match in metaprompt.rendered_text
            ):
                return entry.response
        raise BackendFailure(
            f"no fixture for template {metaprompt.template_id.value!r} "
            f"with images {list(metaprompt.attached_images)}"
        )


class MockSearchBackend:
    """Search fake backed by a manifest mapping query text to results."""

    def __init__(self, manifest: dict[str, list[dict[str, str]]]):
        self._manifest = manifest

    @classmethod
    def from_manifest(cls, path: str | Path) -> "MockSearchBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data["queries"])

    def search(self, query_text: str, count: int, safe: bool) -> list[SearchResult]:
        rows = self._manifest.get(query_text, [])
        return [
            SearchResult(
                url=row["url"],
                title=row.get("title"),
                thumbnail_url=row.get("thumbnail"),
            )
            for row in rows
        ]


_EXTENSION_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".webp": "image/webp",
    ".html": "text/html",
    ".txt": "text/plain",
}


class MockFetcher:
    """Serves candidate downloads from a local fixture directory.

    URL paths map onto files under ``root``; a URL whose file is missing
    behaves like an HTTP 404.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(self, url: str) -> tuple[bytes, str]:
        parsed = urlparse(url)
        relative = parsed.path.lstrip("/")
        path = self.root / relative
        if not path.is_file():
            raise FetchFailed(f"404 for {url}")
        media_type = _EXTENSION_MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return path.read_bytes(), media_type
