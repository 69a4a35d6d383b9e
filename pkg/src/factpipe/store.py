"""Content-addressed blob storage plus event-sourced session persistence.

Layout under the data root (``FACTPIPE_DATA_DIR``, default ``./factpipe-data``):

    blobs/ab/cd/<sha256>.png   canonicalized image blobs, two-level fan-out
    sessions/<session_id>.ndjson   append-only event log, one JSON object/line
    sessions/manifest.json     index of known sessions
    provenance/<edited_hash>.json  one provenance record per edited image

Images are canonicalized (decoded and re-encoded as metadata-free PNG)
before hashing, so the same pixels always map to the same hash regardless
of the container they arrived in.
"""

from __future__ import annotations

import errno
import fcntl
import hashlib
import io
import json
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Optional

from PIL import Image, UnidentifiedImageError

from .domain import (
    EventKind,
    EventRecord,
    Guidance,
    GuidanceKind,
    HallucinationTaxonomy,
    EditScope,
    ImageArtifact,
    IngestStatus,
    PromptSpec,
    RetrievalCandidate,
    Session,
    SessionState,
    SourceRole,
    Strategy,
    transition,
)
from .errors import (
    CorruptImage,
    IllegalTransition,
    IntegrityViolation,
    NotFound,
    ReplayFailure,
    SequenceConflict,
    StorageFull,
    StoreUnavailable,
    UnsupportedMediaType,
)

DEFAULT_DATA_DIR = "./factpipe-data"
DATA_DIR_ENV = "FACTPIPE_DATA_DIR"

_MEDIA_ALIASES = {
    "png": "png",
    "image/png": "png",
    "jpg": "jpeg",
    "jpeg": "jpeg",
    "image/jpg": "jpeg",
    "image/jpeg": "jpeg",
    "webp": "webp",
    "image/webp": "webp",
}

# Fixed encoder parameters keep canonical bytes stable across runs.
_PNG_SAVE_KWARGS = {"format": "PNG", "compress_level": 6, "optimize": False}


def normalize_media_type(media_type: str) -> str:
    normalized = _MEDIA_ALIASES.get(media_type.strip().lower())
    if normalized is None:
        raise UnsupportedMediaType(f"media type {media_type!r} is not accepted")
    return normalized


@contextmanager
def advisory_lock(path: Path):
    """Blocking exclusive flock on ``path``.

    The lock file is opened append-only and never unlinked, so the locked
    inode is stable: no unlink/reopen window in which two lockers can hold
    different inodes of the same path. Works across threads and processes.
    """
    with open(path, "ab") as handle:
        fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(handle.fileno(), fcntl.LOCK_UN)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class CanonicalImage:
    data: bytes
    width: int
    height: int

    @property
    def content_hash(self) -> str:
        return sha256_hex(self.data)


def canonicalize_image(data: bytes) -> CanonicalImage:
    """Decode arbitrary image bytes and re-encode as a metadata-free PNG.

    The result depends only on the pixel buffer, so visually identical
    bytes in different containers collapse to one hash. Idempotent:
    canonicalizing canonical bytes returns them unchanged.
    """
    if not data:
        raise CorruptImage("empty byte string")
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise CorruptImage(f"image decode failed: {exc}") from exc
    has_alpha = img.mode in ("RGBA", "LA", "PA") or (
        img.mode == "P" and "transparency" in img.info
    )
    target_mode = "RGBA" if has_alpha else "RGB"
    if img.mode != target_mode:
        img = img.convert(target_mode)
    # Rebuild from the raw pixel buffer to drop every ancillary chunk
    # (dpi, icc profiles, text) that would otherwise leak into the hash.
    flat = Image.frombytes(target_mode, img.size, img.tobytes())
    buffer = io.BytesIO()
    flat.save(buffer, **_PNG_SAVE_KWARGS)
    return CanonicalImage(buffer.getvalue(), img.width, img.height)


@dataclass(frozen=True)
class BlobRecord:
    content_hash: str
    byte_length: int
    media_type: str
    stored_at: datetime


@dataclass(frozen=True)
class ProvenanceRecord:
    edited_hash: str
    initial_hash: str
    retrieved_hash: Optional[str]
    guidance_text: str
    strategy: Strategy
    backend_model_id: str
    session_id: str
    created_at: datetime


# ---------------------------------------------------------------------------
# serialization codecs (payload and API projections share these)
# ---------------------------------------------------------------------------

def isoformat_utc(value: datetime) -> str:
    return value.astimezone(timezone.utc).isoformat()


def parse_utc(value: str) -> datetime:
    return datetime.fromisoformat(value).astimezone(timezone.utc)


def artifact_to_dict(artifact: ImageArtifact) -> dict[str, Any]:
    return {
        "content_hash": artifact.content_hash,
        "byte_length": artifact.byte_length,
        "media_type": artifact.media_type,
        "width": artifact.width,
        "height": artifact.height,
        "source_role": artifact.source_role.value,
        "origin": artifact.origin,
        "parent_hashes": list(artifact.parent_hashes),
    }


def artifact_from_dict(data: dict[str, Any]) -> ImageArtifact:
    return ImageArtifact(
        content_hash=data["content_hash"],
        byte_length=data["byte_length"],
        media_type=data["media_type"],
        width=data["width"],
        height=data["height"],
        source_role=SourceRole(data["source_role"]),
        origin=data.get("origin"),
        parent_hashes=tuple(data.get("parent_hashes") or ()),
    )


def candidate_to_dict(candidate: RetrievalCandidate) -> dict[str, Any]:
    return {
        "rank": candidate.rank,
        "origin_url": candidate.origin_url,
        "thumbnail_url": candidate.thumbnail_url,
        "title": candidate.title,
        "artifact": artifact_to_dict(candidate.artifact) if candidate.artifact else None,
        "ingest_status": candidate.ingest_status.value,
        "status_detail": candidate.status_detail,
    }


def candidate_from_dict(data: dict[str, Any]) -> RetrievalCandidate:
    artifact = data.get("artifact")
    return RetrievalCandidate(
        rank=data["rank"],
        origin_url=data["origin_url"],
        thumbnail_url=data.get("thumbnail_url"),
        title=data.get("title"),
        artifact=artifact_from_dict(artifact) if artifact else None,
        ingest_status=IngestStatus(data["ingest_status"]),
        status_detail=data.get("status_detail"),
    )


def guidance_to_dict(guidance: Guidance) -> dict[str, Any]:
    return {
        "kind": guidance.kind.value,
        "text": guidance.text,
        "metaprompt_hash": guidance.metaprompt_hash,
        "raw_response": guidance.raw_response,
        "llm_backend_id": guidance.llm_backend_id,
    }


def guidance_from_dict(data: dict[str, Any]) -> Guidance:
    return Guidance(
        kind=GuidanceKind(data["kind"]),
        text=data["text"],
        metaprompt_hash=data["metaprompt_hash"],
        raw_response=data["raw_response"],
        llm_backend_id=data["llm_backend_id"],
    )


def prompt_to_dict(prompt: PromptSpec) -> dict[str, Any]:
    return {
        "text": prompt.text,
        "subject_hint": prompt.subject_hint,
        "temporal_qualifier": prompt.temporal_qualifier,
        "taxonomy_hint": prompt.taxonomy_hint.value if prompt.taxonomy_hint else None,
    }


def prompt_from_dict(data: dict[str, Any]) -> PromptSpec:
    hint = data.get("taxonomy_hint")
    return PromptSpec(
        text=data["text"],
        subject_hint=data.get("subject_hint"),
        temporal_qualifier=data.get("temporal_qualifier"),
        taxonomy_hint=HallucinationTaxonomy(hint) if hint else None,
    )


def provenance_to_dict(record: ProvenanceRecord) -> dict[str, Any]:
    return {
        "edited_hash": record.edited_hash,
        "initial_hash": record.initial_hash,
        "retrieved_hash": record.retrieved_hash,
        "guidance_text": record.guidance_text,
        "strategy": record.strategy.value,
        "backend_model_id": record.backend_model_id,
        "session_id": record.session_id,
        "created_at": isoformat_utc(record.created_at),
    }


def provenance_from_dict(data: dict[str, Any]) -> ProvenanceRecord:
    return ProvenanceRecord(
        edited_hash=data["edited_hash"],
        initial_hash=data["initial_hash"],
        retrieved_hash=data.get("retrieved_hash"),
        guidance_text=data["guidance_text"],
        strategy=Strategy(data["strategy"]),
        backend_model_id=data["backend_model_id"],
        session_id=data["session_id"],
        created_at=parse_utc(data["created_at"]),
    )


def event_to_line(event: EventRecord) -> str:
    return json.dumps(
        {
            "sequence": event.sequence,
            "kind": event.kind.value,
            "payload": event.payload,
            "occurred_at": isoformat_utc(event.occurred_at),
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def event_from_line(line: str) -> EventRecord:
    data = json.loads(line)
    return EventRecord(
        sequence=data["sequence"],
        kind=EventKind(data["kind"]),
        payload=data["payload"],
        occurred_at=parse_utc(data["occurred_at"]),
    )


# ---------------------------------------------------------------------------
# event replay
# ---------------------------------------------------------------------------

def apply_event(session: Session, event: EventRecord) -> Session:
    """Advance a session by one event: state via the transition table, then
    the payload's field updates."""
    state = transition(session.state, event.kind)
    updates: dict[str, Any] = {
        "state": state,
        "event_log": session.event_log + (event,),
        "updated_at": event.occurred_at,
    }
    payload = event.payload
    kind = event.kind
    if kind is EventKind.SessionCreated:
        updates["prompt"] = prompt_from_dict(payload["prompt"])
        updates["retrieval_count_n"] = payload["retrieval_count_n"]
        updates["created_at"] = event.occurred_at
    elif kind is EventKind.InitialGenerated:
        updates["initial_image"] = artifact_from_dict(payload["artifact"])
    elif kind is EventKind.CandidatesRetrieved:
        updates["candidates"] = tuple(
            candidate_from_dict(c) for c in payload["candidates"]
        )
    elif kind is EventKind.CandidateSelected:
        updates["selected_index"] = payload["index"]
    elif kind is EventKind.Classified:
        updates["taxonomy"] = HallucinationTaxonomy(payload["taxonomy"])
        updates["scope"] = EditScope(payload["scope"])
    elif kind is EventKind.Routed:
        updates["taxonomy"] = HallucinationTaxonomy(payload["taxonomy"])
        updates["scope"] = EditScope(payload["scope"])
        updates["strategy"] = Strategy(payload["strategy"])
        updates["strategy_overridden"] = payload["overridden"]
    elif kind is EventKind.GuidanceGenerated:
        updates["guidance"] = guidance_from_dict(payload["guidance"])
    elif kind is EventKind.EditApplied:
        updates["edited_image"] = artifact_from_dict(payload["artifact"])
    elif kind is EventKind.StrategyOverridden:
        if payload["field"] == "strategy":
            updates["strategy"] = Strategy(payload["strategy"])
            updates["strategy_overridden"] = True
        else:
            updates["guidance"] = guidance_from_dict(payload["guidance"])
    # Completed and StepFailed carry no field updates beyond the state.
    return replace(session, **updates)


def replay_session(session_id: str, events: list[EventRecord]) -> Session:
    if not events:
        raise ReplayFailure(f"session {session_id}: empty event log")
    if events[0].kind is not EventKind.SessionCreated:
        raise ReplayFailure(f"session {session_id}: log does not start with creation")
    for position, event in enumerate(events, start=1):
        if event.sequence != position:
            raise ReplayFailure(
                f"session {session_id}: sequence gap at position {position} "
                f"(found {event.sequence})"
            )
    first = events[0]
    session = Session(
        session_id=session_id,
        prompt=prompt_from_dict(first.payload["prompt"]),
        state=SessionState.Created,
        retrieval_count_n=first.payload["retrieval_count_n"],
        created_at=first.occurred_at,
        updated_at=first.occurred_at,
    )
    for event in events:
        try:
            session = apply_event(session, event)
        except IllegalTransition as exc:
            raise ReplayFailure(f"session {session_id}: {exc}") from exc
    return session


# ---------------------------------------------------------------------------
# the store
# ---------------------------------------------------------------------------

class Store:
    """Filesystem-backed blob, event, and provenance store.

    Blob writes go to a temp file then an atomic rename, so concurrent
    writers are safe. Event appends are serialized per session with an
    advisory file lock; each append re-reads the current tail so exactly
    one writer wins each sequence number.
    """

    def __init__(self, root: str | Path | None = None):
        if root is None:
            root = os.environ.get(DATA_DIR_ENV, DEFAULT_DATA_DIR)
        self.root = Path(root)
        self.blobs_dir = self.root / "blobs"
        self.sessions_dir = self.root / "sessions"
        self.provenance_dir = self.root / "provenance"
        self._manifest_path = self.sessions_dir / "manifest.json"
        self._manifest_lock = threading.Lock()
        try:
            for directory in (self.blobs_dir, self.sessions_dir, self.provenance_dir):
                directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreUnavailable(f"cannot create data directory {self.root}: {exc}") from exc

    # -- blobs --------------------------------------------------------------

    def blob_path(self, content_hash: str) -> Path:
        return self.blobs_dir / content_hash[:2] / content_hash[2:4] / f"{content_hash}.png"

    def has_blob(self, content_hash: str) -> bool:
        return self.blob_path(content_hash).exists()

    def put_blob(self, data: bytes, media_type: str) -> str:
        """Canonicalize and store image bytes; returns the content hash.

        Idempotent: identical pixels are stored once.
        """
        if not data:
            raise CorruptImage("empty byte string")
        normalize_media_type(media_type)
        canonical = canonicalize_image(data)
        self._write_canonical(canonical)
        return canonical.content_hash

    def put_artifact(
        self,
        data: bytes,
        media_type: str,
        source_role: SourceRole,
        origin: Optional[str] = None,
        parent_hashes: tuple[str, ...] = (),
    ) -> ImageArtifact:
        """put_blob plus an ImageArtifact describing the stored canonical blob."""
        if not data:
            raise CorruptImage("empty byte string")
        normalize_media_type(media_type)
        canonical = canonicalize_image(data)
        self._write_canonical(canonical)
        return ImageArtifact(
            content_hash=canonical.content_hash,
            byte_length=len(canonical.data),
            media_type="png",
            width=canonical.width,
            height=canonical.height,
            source_role=source_role,
            origin=origin,
            parent_hashes=parent_hashes,
        )

    def _write_canonical(self, canonical: CanonicalImage) -> None:
        path = self.blob_path(canonical.content_hash)
        if path.exists():
            return
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".tmp-{os.getpid()}-{threading.get_ident()}")
            tmp.write_bytes(canonical.data)
            os.replace(tmp, path)
        except OSError as exc:
            if exc.errno == errno.ENOSPC:
                raise StorageFull(str(exc)) from exc
            raise StoreUnavailable(f"blob write failed: {exc}") from exc

    def get_blob(self, content_hash: str) -> tuple[bytes, str]:
        """Return (canonical bytes, media type); digest is verified on read."""
        path = self.blob_path(content_hash)
        if not path.exists():
            raise NotFound(f"no blob {content_hash}")
        data = path.read_bytes()
        actual = sha256_hex(data)
        if actual != content_hash:
            raise IntegrityViolation(
                f"blob {content_hash} reads back with digest {actual}"
            )
        return data, "png"

    def stat_blob(self, content_hash: str) -> BlobRecord:
        path = self.blob_path(content_hash)
        if not path.exists():
            raise NotFound(f"no blob {content_hash}")
        stat = path.stat()
        return BlobRecord(
            content_hash=content_hash,
            byte_length=stat.st_size,
            media_type="png",
            stored_at=datetime.fromtimestamp(stat.st_mtime, tz=timezone.utc),
        )

    def iter_blob_hashes(self) -> Iterator[str]:
        for path in sorted(self.blobs_dir.glob("*/*/*.png")):
            yield path.stem

    # -- session event logs ---------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.ndjson"

    def _session_lock_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.lock"

    def session_exists(self, session_id: str) -> bool:
        return self._session_path(session_id).exists()

    def register_session(self, session_id: str, prompt_text: str) -> None:
        with self._manifest_lock:
            manifest = self._read_manifest()
            manifest["sessions"][session_id] = {
                "file": f"{session_id}.ndjson",
                "prompt": prompt_text,
            }
            self._manifest_path.write_text(
                json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )

    def _read_manifest(self) -> dict[str, Any]:
        if not self._manifest_path.exists():
            return {"sessions": {}}
        return json.loads(self._manifest_path.read_text(encoding="utf-8"))

    def list_sessions(self) -> list[str]:
        return sorted(self._read_manifest()["sessions"])

    def append_event(self, session_id: str, event: EventRecord) -> int:
        """Durably append one event; returns the assigned sequence number.

        ``event.sequence == 0`` means "assign the next number". An explicit
        sequence must equal last+1 or the append fails with SequenceConflict.
        """
        path = self._session_path(session_id)
        try:
            with advisory_lock(self._session_lock_path(session_id)):
                last = self._last_sequence(path)
                if event.sequence == 0:
                    assigned = last + 1
                elif event.sequence == last + 1:
                    assigned = event.sequence
                else:
                    raise SequenceConflict(
                        f"session {session_id}: expected sequence {last + 1}, "
                        f"got {event.sequence}"
                    )
                line = event_to_line(replace(event, sequence=assigned))
                with open(path, "a", encoding="utf-8", newline="\n") as handle:
                    handle.write(line + "\n")
                    handle.flush()
                    os.fsync(handle.fileno())
                return assigned
        except OSError as exc:
            if exc.errno == errno.ENOSPC:
                raise StorageFull(str(exc)) from exc
            raise StoreUnavailable(f"event append failed: {exc}") from exc

    @staticmethod
    def _last_sequence(path: Path) -> int:
        if not path.exists():
            return 0
        last = 0
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    last = json.loads(line)["sequence"]
        return last

    def read_events(self, session_id: str) -> list[EventRecord]:
        path = self._session_path(session_id)
        if not path.exists():
            raise NotFound(f"no session {session_id}")
        events = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    events.append(event_from_line(line))
        return events

    def load_session(self, session_id: str) -> Session:
        """Rebuild a session by replaying its event log."""
        return replay_session(session_id, self.read_events(session_id))

    # -- provenance ------------------------------------------------------------

    def put_provenance(self, record: ProvenanceRecord) -> None:
        for label, content_hash in (
            ("edited_hash", record.edited_hash),
            ("initial_hash", record.initial_hash),
            ("retrieved_hash", record.retrieved_hash),
        ):
            if content_hash is not None and not self.has_blob(content_hash):
                raise NotFound(f"provenance {label} {content_hash} not in blob store")
        if record.strategy is Strategy.ImagePromptEdit and record.retrieved_hash is None:
            raise StoreUnavailable(
                "image-prompt provenance requires a retrieved_hash"
            )
        path = self.provenance_dir / f"{record.edited_hash}.json"
        path.write_text(
            json.dumps(provenance_to_dict(record), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    def iter_provenance(self) -> Iterator[ProvenanceRecord]:
        for path in sorted(self.provenance_dir.glob("*.json")):
            yield provenance_from_dict(json.loads(path.read_text(encoding="utf-8")))

    def audit(self, deep: bool = False) -> list[str]:
        """Full-scan provenance audit; returns one line per violation.

        ``deep=True`` additionally re-verifies the digest of every blob a
        record references.
        """
        problems: list[str] = []
        for record in self.iter_provenance():
            refs = [("edited", record.edited_hash), ("initial", record.initial_hash)]
            if record.retrieved_hash is not None:
                refs.append(("retrieved", record.retrieved_hash))
            elif record.strategy is Strategy.ImagePromptEdit:
                problems.append(
                    f"{record.edited_hash}: image-prompt edit without retrieved_hash"
                )
            for label, content_hash in refs:
                if not self.has_blob(content_hash):
                    problems.append(
                        f"{record.edited_hash}: {label} hash {content_hash} unresolved"
                    )
                elif deep:
                    try:
                        self.get_blob(content_hash)
                    except IntegrityViolation as exc:
                        problems.append(f"{record.edited_hash}: {exc}")
        return problems
