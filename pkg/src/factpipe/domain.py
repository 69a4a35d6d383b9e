"""Shared domain types and the session lifecycle state machine.

Everything here is an immutable value. ``transition`` and
``validate_session`` are pure functions; sessions are only ever mutated by
the orchestrator, which records every change as an event and derives the
new state through ``transition``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional

from .errors import IllegalTransition

HASH_RE = re.compile(r"^[0-9a-f]{64}$")

ACCEPTED_MEDIA_TYPES = ("png", "jpeg", "webp")


class HallucinationTaxonomy(str, Enum):
    """The three categories of factually wrong generations we handle."""

    FactualInconsistency = "factual_inconsistency"
    OutdatedKnowledge = "outdated_knowledge"
    FactualFabrication = "factual_fabrication"


class EditScope(str, Enum):
    """Whether the defect is one property or a broad, complex subject."""

    PropertyLevel = "property_level"
    BroadComplex = "broad_complex"


class Strategy(str, Enum):
    """Which of the two editing pipelines a session is routed to."""

    InstructionEdit = "instruction_edit"
    ImagePromptEdit = "image_prompt_edit"


class SourceRole(str, Enum):
    Generated = "generated"
    Retrieved = "retrieved"
    Edited = "edited"


class GuidanceKind(str, Enum):
    EditInstruction = "edit_instruction"
    FactualPrompt = "factual_prompt"


class IngestStatus(str, Enum):
    Pending = "pending"
    Ingested = "ingested"
    FetchFailed = "fetch_failed"
    Duplicate = "duplicate"
    Unsupported = "unsupported"


class SessionState(str, Enum):
    """Linear pipeline states; Failed is a sink from any non-terminal state."""

    Created = "created"
    InitialGenerated = "initial_generated"
    CandidatesRetrieved = "candidates_retrieved"
    CandidateSelected = "candidate_selected"
    Routed = "routed"
    GuidanceReady = "guidance_ready"
    Edited = "edited"
    Completed = "completed"
    Failed = "failed"


# Position of each state in the pipeline order, used for ">= state" checks.
STATE_ORDER = {state: index for index, state in enumerate(SessionState)}

TERMINAL_STATES = frozenset({SessionState.Completed, SessionState.Failed})


class EventKind(str, Enum):
    SessionCreated = "session_created"
    InitialGenerated = "initial_generated"
    CandidatesRetrieved = "candidates_retrieved"
    CandidateSelected = "candidate_selected"
    Classified = "classified"
    Routed = "routed"
    GuidanceGenerated = "guidance_generated"
    EditApplied = "edit_applied"
    Completed = "completed"
    StepFailed = "step_failed"
    StrategyOverridden = "strategy_overridden"


# The full transition table. Any (state, event) pair not listed is illegal.
# Self-loops record in-place changes: Classified stores taxonomy/scope before
# routing, StrategyOverridden replaces the strategy (at Routed) or the
# guidance text (at GuidanceReady).
TRANSITIONS: dict[tuple[SessionState, EventKind], SessionState] = {
    (SessionState.Created, EventKind.SessionCreated): SessionState.Created,
    (SessionState.Created, EventKind.InitialGenerated): SessionState.InitialGenerated,
    (SessionState.InitialGenerated, EventKind.CandidatesRetrieved): SessionState.CandidatesRetrieved,
    (SessionState.CandidatesRetrieved, EventKind.CandidateSelected): SessionState.CandidateSelected,
    (SessionState.CandidateSelected, EventKind.Classified): SessionState.CandidateSelected,
    (SessionState.CandidateSelected, EventKind.Routed): SessionState.Routed,
    (SessionState.Routed, EventKind.StrategyOverridden): SessionState.Routed,
    (SessionState.Routed, EventKind.GuidanceGenerated): SessionState.GuidanceReady,
    (SessionState.GuidanceReady, EventKind.StrategyOverridden): SessionState.GuidanceReady,
    (SessionState.GuidanceReady, EventKind.EditApplied): SessionState.Edited,
    (SessionState.Edited, EventKind.Completed): SessionState.Completed,
}
for _state in SessionState:
    if _state not in TERMINAL_STATES:
        TRANSITIONS[(_state, EventKind.StepFailed)] = SessionState.Failed


def transition(state: SessionState, event_kind: EventKind) -> SessionState:
    """Return the unique successor state for a legal (state, event) pair.

    Raises IllegalTransition for terminal states and for any pair not in
    the table. Pure function; no side effects.
    """
    if state in TERMINAL_STATES:
        raise IllegalTransition(f"session is terminal in state {state.value!r}")
    successor = TRANSITIONS.get((state, event_kind))
    if successor is None:
        raise IllegalTransition(
            f"event {event_kind.value!r} is not legal in state {state.value!r}"
        )
    return successor


def state_at_least(state: SessionState, floor: SessionState) -> bool:
    return STATE_ORDER[state] >= STATE_ORDER[floor]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class PromptSpec:
    """The user's input prompt plus optional classification hints."""

    text: str
    subject_hint: Optional[str] = None
    temporal_qualifier: Optional[str] = None
    taxonomy_hint: Optional[HallucinationTaxonomy] = None

    def __post_init__(self) -> None:
        from .errors import InvalidPrompt

        if not self.text or not self.text.strip():
            raise InvalidPrompt("prompt text must be non-empty")
        if self.temporal_qualifier is not None and not self.temporal_qualifier.strip():
            raise InvalidPrompt("temporal_qualifier must be non-empty when present")


@dataclass(frozen=True)
class ImageArtifact:
    """Content-addressed descriptor for one stored image blob."""

    content_hash: str
    byte_length: int
    media_type: str
    width: int
    height: int
    source_role: SourceRole
    origin: Optional[str] = None
    parent_hashes: tuple[str, ...] = ()

    def violations(self) -> list[str]:
        problems = []
        if not HASH_RE.match(self.content_hash):
            problems.append("content_hash: not a 64-char lowercase hex digest")
        if self.byte_length < 0:
            problems.append("byte_length: negative")
        if self.media_type not in ACCEPTED_MEDIA_TYPES:
            problems.append(f"media_type: {self.media_type!r} not accepted")
        if self.width <= 0 or self.height <= 0:
            problems.append("width/height: must be positive")
        if self.source_role is SourceRole.Edited and not self.parent_hashes:
            problems.append("parent_hashes: empty for an edited artifact")
        if self.source_role is SourceRole.Generated and self.parent_hashes:
            problems.append("parent_hashes: non-empty for a generated artifact")
        if self.source_role is SourceRole.Retrieved and not self.origin:
            problems.append("origin: missing for a retrieved artifact")
        return problems


@dataclass(frozen=True)
class Guidance:
    """One LLM-produced edit instruction or factual prompt."""

    kind: GuidanceKind
    text: str
    metaprompt_hash: str
    raw_response: str
    llm_backend_id: str

    def violations(self) -> list[str]:
        problems = []
        if not self.text.strip():
            problems.append("text: empty")
        if self.kind is GuidanceKind.EditInstruction:
            if len(self.text) > 300:
                problems.append("text: edit instruction exceeds 300 characters")
            if "\n" in self.text:
                problems.append("text: edit instruction spans multiple lines")
        elif len(self.text) > 1000:
            problems.append("text: factual prompt exceeds 1000 characters")
        return problems


@dataclass(frozen=True)
class RetrievalCandidate:
    """A single search result, before or after download into the blob store."""

    rank: int
    origin_url: str
    thumbnail_url: Optional[str] = None
    title: Optional[str] = None
    artifact: Optional[ImageArtifact] = None
    ingest_status: IngestStatus = IngestStatus.Pending
    status_detail: Optional[str] = None

    def with_status(
        self,
        status: IngestStatus,
        artifact: Optional[ImageArtifact] = None,
        detail: Optional[str] = None,
    ) -> "RetrievalCandidate":
        return replace(self, ingest_status=status, artifact=artifact, status_detail=detail)


@dataclass(frozen=True)
class EventRecord:
    sequence: int
    kind: EventKind
    payload: dict[str, Any]
    occurred_at: datetime


# Strategy whose guidance kind each one requires, and vice versa.
STRATEGY_GUIDANCE_KIND = {
    Strategy.InstructionEdit: GuidanceKind.EditInstruction,
    Strategy.ImagePromptEdit: GuidanceKind.FactualPrompt,
}


@dataclass(frozen=True)
class Session:
    """Event-sourced record of one pipeline run."""

    session_id: str
    prompt: PromptSpec
    state: SessionState
    retrieval_count_n: int
    initial_image: Optional[ImageArtifact] = None
    candidates: tuple[RetrievalCandidate, ...] = ()
    selected_index: Optional[int] = None
    taxonomy: Optional[HallucinationTaxonomy] = None
    scope: Optional[EditScope] = None
    strategy: Optional[Strategy] = None
    strategy_overridden: bool = False
    guidance: Optional[Guidance] = None
    edited_image: Optional[ImageArtifact] = None
    event_log: tuple[EventRecord, ...] = ()
    created_at: datetime = field(default_factory=utc_now)
    updated_at: datetime = field(default_factory=utc_now)

    @property
    def selected_candidate(self) -> Optional[RetrievalCandidate]:
        if self.selected_index is None:
            return None
        if 0 <= self.selected_index < len(self.candidates):
            return self.candidates[self.selected_index]
        return None


def validate_session(session: Session) -> list[str]:
    """Return a violation descriptor per broken Session invariant.

    Total function: never raises, an empty list means the session is
    consistent. The state/field equivalences are skipped for Failed
    sessions, which may legitimately stop with any subset of fields set.
    """
    problems: list[str] = []
    state = session.state

    if session.retrieval_count_n < 1:
        problems.append("retrieval_count_n: must be >= 1")

    index_in_bounds = session.selected_index is not None and (
        0 <= session.selected_index < len(session.candidates)
    )
    if session.selected_index is not None and not index_in_bounds:
        problems.append("selected_index: out of bounds for candidate list")

    if state is not SessionState.Failed:
        if state_at_least(state, SessionState.InitialGenerated) != (
            session.initial_image is not None
        ):
            problems.append(
                "initial_image: state >= initial_generated requires initial_image "
                "(and conversely)"
            )
        if state_at_least(state, SessionState.CandidateSelected) != index_in_bounds:
            if not (session.selected_index is not None and not index_in_bounds):
                problems.append(
                    "selected_index: state >= candidate_selected requires a valid "
                    "selected_index (and conversely)"
                )
        if state_at_least(state, SessionState.Routed) != (session.strategy is not None):
            problems.append("strategy: state >= routed requires strategy (and conversely)")
        guidance_ok = session.guidance is not None
        if guidance_ok and session.strategy is not None:
            guidance_ok = (
                session.guidance.kind == STRATEGY_GUIDANCE_KIND[session.strategy]
            )
        if state_at_least(state, SessionState.GuidanceReady) != guidance_ok:
            if session.guidance is not None and session.strategy is not None:
                problems.append("guidance: kind inconsistent with strategy")
            else:
                problems.append(
                    "guidance: state >= guidance_ready requires matching guidance "
                    "(and conversely)"
                )
        edited_ok = session.edited_image is not None and (
            session.initial_image is not None
            and session.initial_image.content_hash in session.edited_image.parent_hashes
        )
        if state_at_least(state, SessionState.Edited) != edited_ok:
            if session.edited_image is None:
                problems.append("edited_image: state >= edited requires edited_image")
            else:
                problems.append(
                    "edited_image: parent_hashes must contain the initial image hash"
                )

    for artifact_name, artifact in (
        ("initial_image", session.initial_image),
        ("edited_image", session.edited_image),
    ):
        if artifact is not None:
            problems.extend(f"{artifact_name}.{p}" for p in artifact.violations())
    if session.guidance is not None:
        problems.extend(f"guidance.{p}" for p in session.guidance.violations())

    expected_ranks = list(range(len(session.candidates)))
    if [c.rank for c in session.candidates] != expected_ranks:
        problems.append("candidates: ranks are not contiguous from 0")
    for candidate in session.candidates:
        ingested = candidate.ingest_status is IngestStatus.Ingested
        if ingested != (candidate.artifact is not None):
            problems.append(
                f"candidates[{candidate.rank}]: ingested status and artifact presence disagree"
            )

    for position, event in enumerate(session.event_log, start=1):
        if event.sequence != position:
            problems.append(
                f"event_log: sequence {event.sequence} at position {position} "
                "(must be gap-free from 1)"
            )
            break

    return problems


def replay_state(kinds: list[EventKind]) -> SessionState:
    """Fold the transition table over event kinds, starting from Created."""
    state = SessionState.Created
    for kind in kinds:
        state = transition(state, kind)
    return state
