from __future__ import annotations

import io

import pytest
from PIL import Image

from factpipe.backends import build_backends
from factpipe.orchestrator import Orchestrator
from factpipe.store import Store


def make_png(width: int = 96, height: int = 96, color=(200, 60, 30)) -> bytes:
    buffer = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buffer, format="PNG")
    return buffer.getvalue()


@pytest.fixture
def store(tmp_path) -> Store:
    return Store(tmp_path / "data")


@pytest.fixture
def mock_backends(store):
    return build_backends("mock", resolve_blob=lambda h: store.get_blob(h)[0])


@pytest.fixture
def orchestrator(store, mock_backends) -> Orchestrator:
    return Orchestrator(store, mock_backends)


def make_orchestrator(root) -> Orchestrator:
    store = Store(root)
    backends = build_backends("mock", resolve_blob=lambda h: store.get_blob(h)[0])
    return Orchestrator(store, backends)
