"""Query building, candidate fetching, and ingestion/dedupe tests."""

from __future__ import annotations

import threading

import pytest

from factpipe.backends.base import AdapterKind, BackendDescriptor, BackendRole, SearchHandle
from factpipe.backends.mock import MockFetcher, MockSearchBackend
from factpipe.domain import IngestStatus, PromptSpec, SourceRole
from factpipe.errors import FetchFailed
from factpipe.retrieval import (
    DedupeIndex,
    RetrievalQuery,
    build_query,
    fetch_candidates,
    ingest_all,
    ingest_candidate,
)

from conftest import make_png


def search_handle(manifest: dict) -> SearchHandle:
    descriptor = BackendDescriptor(
        role=BackendRole.ImageSearch, adapter_kind=AdapterKind.Mock, model_id="mock-search"
    )
    return SearchHandle(descriptor, MockSearchBackend(manifest))


STATUE_ROWS = [
    {"url": f"https://img.example/statue/{i}.png", "title": f"result {i}"} for i in range(12)
]


def test_build_query_is_verbatim():
    query = build_query(PromptSpec(text="The Statue of Liberty in 1890"), 10)
    assert query.query_text == "The Statue of Liberty in 1890"
    assert query.count_n == 10
    assert query.safe_search is True


def test_build_query_normalizes_whitespace():
    query = build_query(PromptSpec(text="  Mt. Fuji   in summer "), 5)
    assert query.query_text == "Mt. Fuji in summer"
    assert query.count_n == 5


def test_build_query_single_candidate():
    query = build_query(PromptSpec(text="The Golden Gate Bridge in winter"), 1)
    assert query.count_n == 1


def test_query_validation():
    with pytest.raises(ValueError):
        RetrievalQuery(query_text="x", count_n=0)
    with pytest.raises(ValueError):
        RetrievalQuery(query_text="", count_n=1)


def test_fetch_caps_at_count_n():
    handle = search_handle({"statue": STATUE_ROWS})
    for n in (1, 3, 10):
        candidates = fetch_candidates(RetrievalQuery("statue", n), handle)
        assert len(candidates) <= n
        assert [c.rank for c in candidates] == list(range(len(candidates)))


def test_fetch_short_results_are_not_an_error():
    handle = search_handle({"statue": STATUE_ROWS[:2]})
    candidates = fetch_candidates(RetrievalQuery("statue", 10), handle)
    assert len(candidates) == 2


def test_fetch_empty_fixture():
    handle = search_handle({})
    assert fetch_candidates(RetrievalQuery("anything", 10), handle) == []


def test_fetch_keeps_duplicate_urls():
    rows = [
        {"url": "https://img.example/same.png", "title": "a"},
        {"url": "https://img.example/same.png", "title": "b"},
    ]
    candidates = fetch_candidates(RetrievalQuery("dup", 10), search_handle({"dup": rows}))
    assert [c.rank for c in candidates] == [0, 1]
    assert candidates[0].origin_url == candidates[1].origin_url


def test_growing_n_is_a_superset():
    handle = search_handle({"statue": STATUE_ROWS})
    seen_urls: set[str] = set()
    for n in (1, 3, 10):
        urls = {c.origin_url for c in fetch_candidates(RetrievalQuery("statue", n), handle)}
        assert seen_urls <= urls
        seen_urls = urls


# -- ingestion ------------------------------------------------------------------

@pytest.fixture
def fixture_dir(tmp_path):
    root = tmp_path / "images"
    root.mkdir()
    (root / "a.png").write_bytes(make_png(96, 96, (10, 20, 30)))
    (root / "b.png").write_bytes(make_png(96, 96, (40, 50, 60)))
    (root / "a_copy.png").write_bytes(make_png(96, 96, (10, 20, 30)))
    (root / "tiny.png").write_bytes(make_png(16, 16, (1, 1, 1)))
    (root / "page.html").write_text("<html>not an image</html>")
    return root


def candidate(rank: int, name: str):
    from factpipe.domain import RetrievalCandidate

    return RetrievalCandidate(rank=rank, origin_url=f"https://img.example/{name}")


def test_ingest_happy_path(fixture_dir, store):
    result = ingest_candidate(candidate(0, "a.png"), MockFetcher(fixture_dir), store)
    assert result.ingest_status is IngestStatus.Ingested
    assert result.artifact is not None
    assert result.artifact.source_role is SourceRole.Retrieved
    assert result.artifact.origin == "https://img.example/a.png"
    assert store.has_blob(result.artifact.content_hash)


def test_ingest_html_is_unsupported(fixture_dir, store):
    result = ingest_candidate(candidate(0, "page.html"), MockFetcher(fixture_dir), store)
    assert result.ingest_status is IngestStatus.Unsupported


def test_ingest_missing_url_is_fetch_failed(fixture_dir, store):
    result = ingest_candidate(candidate(0, "missing.png"), MockFetcher(fixture_dir), store)
    assert result.ingest_status is IngestStatus.FetchFailed
    assert "404" in (result.status_detail or "")


def test_ingest_small_image_is_unsupported(fixture_dir, store):
    result = ingest_candidate(candidate(0, "tiny.png"), MockFetcher(fixture_dir), store)
    assert result.ingest_status is IngestStatus.Unsupported


def test_ingest_is_idempotent(fixture_dir, store):
    first = ingest_candidate(candidate(0, "a.png"), MockFetcher(fixture_dir), store)
    again = ingest_candidate(first, MockFetcher(fixture_dir), store)
    assert again == first


def test_duplicate_payload_yields_one_ingested_one_duplicate(fixture_dir, store):
    results = ingest_all(
        [candidate(0, "a.png"), candidate(1, "a_copy.png")],
        MockFetcher(fixture_dir),
        store,
    )
    assert results[0].ingest_status is IngestStatus.Ingested
    assert results[1].ingest_status is IngestStatus.Duplicate
    assert "rank 0" in (results[1].status_detail or "")


def test_dedupe_is_rank_deterministic(fixture_dir, store):
    """Lowest rank always wins the dedupe regardless of download order."""
    for _ in range(3):
        results = ingest_all(
            [candidate(0, "a.png"), candidate(1, "b.png"), candidate(2, "a_copy.png")],
            MockFetcher(fixture_dir),
            store,
        )
        statuses = [r.ingest_status for r in results]
        assert statuses == [
            IngestStatus.Ingested,
            IngestStatus.Ingested,
            IngestStatus.Duplicate,
        ]


def test_concurrent_identical_ingests_linearize(fixture_dir, store):
    """Two racing ingests of identical bytes: one Ingested, one Duplicate."""
    dedupe = DedupeIndex()
    fetcher = MockFetcher(fixture_dir)
    results = {}

    def work(rank, name):
        results[rank] = ingest_candidate(candidate(rank, name), fetcher, store, dedupe)

    threads = [
        threading.Thread(target=work, args=(0, "a.png")),
        threading.Thread(target=work, args=(1, "a_copy.png")),
    ]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    statuses = sorted(r.ingest_status.value for r in results.values())
    assert statuses == ["duplicate", "ingested"]


def test_oversize_download_rejected(store, monkeypatch):
    import factpipe.retrieval as retrieval_module

    class BigFetcher:
        def fetch(self, url):
            return b"\x89PNG" + b"0" * 128, "image/png"

    monkeypatch.setattr(retrieval_module, "MAX_DOWNLOAD_BYTES", 64)
    result = ingest_candidate(candidate(0, "big.png"), BigFetcher(), store)
    assert result.ingest_status is IngestStatus.FetchFailed


def test_ingested_artifacts_satisfy_invariants(fixture_dir, store):
    results = ingest_all(
        [candidate(0, "a.png"), candidate(1, "b.png")], MockFetcher(fixture_dir), store
    )
    for result in results:
        assert result.artifact is not None
        assert result.artifact.violations() == []
        stored, _ = store.get_blob(result.artifact.content_hash)
        assert len(stored) == result.artifact.byte_length
