"""Candidate image retrieval: query building, search, download, dedupe.

The prompt text is the search query, verbatim apart from whitespace
normalization. Downloads run concurrently up to a small fan-out cap;
dedupe by content hash is linearizable per session, so byte-identical
payloads always yield exactly one Ingested candidate and the rest marked
Duplicate.
"""

from __future__ import annotations

import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol

from .domain import IngestStatus, PromptSpec, RetrievalCandidate, SourceRole
from .errors import CorruptImage, FetchFailed, UnsupportedMediaType
from .store import Store, normalize_media_type
from .backends.base import SearchHandle

MIN_DIMENSION = 64
MAX_DOWNLOAD_BYTES = 20 * 1024 * 1024
INGEST_FANOUT = 4

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class RetrievalQuery:
    query_text: str
    count_n: int
    safe_search: bool = True
    page_cursor: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.query_text:
            raise ValueError("query_text must be non-empty")
        if self.count_n < 1:
            raise ValueError("count_n must be >= 1")


class Fetcher(Protocol):
    def fetch(self, url: str) -> tuple[bytes, str]: ...


def build_query(
    prompt: PromptSpec, n: int, override_text: Optional[str] = None
) -> RetrievalQuery:
    """The prompt text becomes the query, trimmed and space-collapsed."""
    text = override_text if override_text is not None else prompt.text
    return RetrievalQuery(query_text=_WHITESPACE.sub(" ", text).strip(), count_n=n)


def fetch_candidates(query: RetrievalQuery, search_backend: SearchHandle) -> list[RetrievalCandidate]:
    """Ask the search backend for candidates, capped at count_n.

    Ranks are reassigned contiguously from 0 in backend relevance order; a
    shorter result set is returned as-is, never padded or treated as an
    error. Duplicate URLs survive this stage (dedupe happens at ingest).
    """
    results = search_backend.search(query.query_text, query.count_n, query.safe_search)
    return [
        RetrievalCandidate(
            rank=rank,
            origin_url=result.url,
            thumbnail_url=result.thumbnail_url,
            title=result.title,
        )
        for rank, result in enumerate(results[: query.count_n])
    ]


class DedupeIndex:
    """Session-scoped content-hash registry with a linearizable claim step."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._owners: dict[str, int] = {}

    def claim(self, content_hash: str, rank: int) -> Optional[int]:
        """Claim a hash for a candidate; returns the owning rank if already
        claimed, else None (the caller now owns it)."""
        with self._lock:
            owner = self._owners.get(content_hash)
            if owner is None:
                self._owners[content_hash] = rank
            return owner


def ingest_candidate(
    candidate: RetrievalCandidate,
    fetcher: Fetcher,
    store: Store,
    dedupe: Optional[DedupeIndex] = None,
) -> RetrievalCandidate:
    """Download one candidate into the blob store.

    Network and media failures are recorded in the returned candidate's
    status, never raised; only store unavailability propagates. Candidates
    that are no longer Pending are returned unchanged (idempotence).
    """
    if candidate.ingest_status is not IngestStatus.Pending:
        return candidate
    try:
        data, media_type = fetcher.fetch(candidate.origin_url)
    except FetchFailed as exc:
        return candidate.with_status(IngestStatus.FetchFailed, detail=str(exc))
    if len(data) > MAX_DOWNLOAD_BYTES:
        return candidate.with_status(
            IngestStatus.FetchFailed, detail=f"payload exceeds {MAX_DOWNLOAD_BYTES} bytes"
        )
    try:
        normalize_media_type(media_type)
    except UnsupportedMediaType:
        return candidate.with_status(
            IngestStatus.Unsupported, detail=f"media type {media_type!r} rejected"
        )
    try:
        artifact = store.put_artifact(
            data, media_type, SourceRole.Retrieved, origin=candidate.origin_url
        )
    except CorruptImage as exc:
        return candidate.with_status(IngestStatus.Unsupported, detail=str(exc))
    if artifact.width < MIN_DIMENSION or artifact.height < MIN_DIMENSION:
        return candidate.with_status(
            IngestStatus.Unsupported,
            detail=f"image smaller than {MIN_DIMENSION}x{MIN_DIMENSION}",
        )
    if dedupe is not None:
        owner = dedupe.claim(artifact.content_hash, candidate.rank)
        if owner is not None and owner != candidate.rank:
            return candidate.with_status(
                IngestStatus.Duplicate, detail=f"duplicate of rank {owner}"
            )
    return candidate.with_status(IngestStatus.Ingested, artifact=artifact)


def ingest_all(
    candidates: list[RetrievalCandidate],
    fetcher: Fetcher,
    store: Store,
    max_workers: int = INGEST_FANOUT,
) -> list[RetrievalCandidate]:
    """Ingest a whole candidate set: concurrent downloads, rank-order dedupe.

    Fetch and decode run in parallel up to the fan-out cap, but duplicate
    resolution happens in rank order so the lowest-ranked copy always wins,
    keeping results deterministic for a fixed backend fixture.
    """
    if not candidates:
        return []

    fetched: dict[int, tuple[Optional[bytes], Optional[str], Optional[str]]] = {}

    def _fetch(candidate: RetrievalCandidate):
        try:
            data, media_type = fetcher.fetch(candidate.origin_url)
            return candidate.rank, (data, media_type, None)
        except FetchFailed as exc:
            return candidate.rank, (None, None, str(exc))

    with ThreadPoolExecutor(max_workers=min(max_workers, len(candidates))) as pool:
        for rank, outcome in pool.map(_fetch, candidates):
            fetched[rank] = outcome

    class _Prefetched:
        def __init__(self, outcome):
            self._outcome = outcome

        def fetch(self, url: str) -> tuple[bytes, str]:
            data, media_type, error = self._outcome
            if error is not None:
                raise FetchFailed(error)
            return data, media_type

    dedupe = DedupeIndex()
    return [
        ingest_candidate(candidate, _Prefetched(fetched[candidate.rank]), store, dedupe)
        for candidate in candidates
    ]
