"""Drives a session through the pipeline: generate, retrieve, select,
classify, route, guide, edit, complete.

Every decision lands in the event log; the in-memory session is always the
result of applying the appended event, so replaying the log reproduces it
exactly. Precondition violations raise without touching the session, while
failures during step execution (backends, unusable LLM output) append a
StepFailed event and return the session in its terminal Failed state.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .backends import (
    BackendSet,
    EditRequest,
    complete_multimodal,
    edit_by_image_prompt,
    edit_by_instruction,
    generate_image,
)
from .domain import (
    EditScope,
    EventKind,
    EventRecord,
    HallucinationTaxonomy,
    IngestStatus,
    PromptSpec,
    Session,
    SessionState,
    SourceRole,
    Strategy,
    transition,
    utc_now,
)
from .errors import (
    BackendFailure,
    CapabilityMissing,
    ConcurrentStep,
    ContentPolicyRejection,
    CorruptImage,
    FactpipeError,
    IdenticalInputs,
    IllegalTransition,
    QuotaExceeded,
    SelectionOutOfBounds,
    UnparseableClassification,
    UnparseableGuidance,
)
from .guidance import (
    build_classification_metaprompt,
    build_depiction_metaprompt,
    build_difference_metaprompt,
    parse_classification_response,
    parse_factual_prompt_response,
    parse_instruction_response,
)
from .retrieval import build_query, fetch_candidates, ingest_all
from .store import (
    ProvenanceRecord,
    Store,
    apply_event,
    artifact_to_dict,
    candidate_to_dict,
    guidance_to_dict,
    prompt_to_dict,
)

logger = logging.getLogger(__name__)

# Subject-hint words that mark the subject as a person, which always routes
# to the broad/complex scope.
PERSON_WORDS = frozenset(
    """
    person people man men woman women human portrait face president chancellor
    minister king queen leader politician celebrity
    """.split()
)


@dataclass(frozen=True)
class PipelineConfig:
    retrieval_count_n: int = 10
    auto_select: bool = False
    strategy_override: Optional[Strategy] = None
    backend_profile: str = "mock"
    step_timeout_s: float = 120.0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.retrieval_count_n < 1:
            raise ValueError("retrieval_count_n must be >= 1")


@dataclass(frozen=True)
class RoutingDecision:
    taxonomy: HallucinationTaxonomy
    scope: EditScope
    strategy: Strategy
    rationale: str
    overridden: bool


class StepCommand(str, Enum):
    GenerateInitial = "generate_initial"
    Retrieve = "retrieve"
    Select = "select"
    ClassifyAndRoute = "classify_route"
    GenerateGuidance = "generate_guidance"
    ApplyEdit = "apply_edit"
    Complete = "complete"


STEP_EVENT_KINDS = {
    StepCommand.GenerateInitial: EventKind.InitialGenerated,
    StepCommand.Retrieve: EventKind.CandidatesRetrieved,
    StepCommand.Select: EventKind.CandidateSelected,
    StepCommand.ClassifyAndRoute: EventKind.Routed,
    StepCommand.GenerateGuidance: EventKind.GuidanceGenerated,
    StepCommand.ApplyEdit: EventKind.EditApplied,
    StepCommand.Complete: EventKind.Completed,
}

# Exceptions that mean "the step itself failed": the session moves to
# Failed with a StepFailed event instead of the error propagating.
_STEP_FAILURES: dict[type, str] = {
    QuotaExceeded: "quota_exceeded",
    ContentPolicyRejection: "backend_failure",
    BackendFailure: "backend_failure",
    CapabilityMissing: "capability_missing",
    UnparseableGuidance: "unparseable_guidance",
    UnparseableClassification: "unparseable_guidance",
    IdenticalInputs: "backend_failure",
    CorruptImage: "backend_failure",
}


def _failure_code(exc: Exception) -> Optional[str]:
    for exc_type, code in _STEP_FAILURES.items():
        if isinstance(exc, exc_type):
            return code
    return None


def route_strategy(
    scope: EditScope, override: Optional[Strategy] = None
) -> tuple[Strategy, bool, str]:
    """Map edit scope to strategy; an explicit override always wins.

    Returns (strategy, overridden, rationale). Pure function; taxonomy
    deliberately plays no part, only the scope does.
    """
    if override is not None:
        return override, True, "operator override"
    if scope is EditScope.PropertyLevel:
        return (
            Strategy.InstructionEdit,
            False,
            "single-property defect: edit the generated image by instruction",
        )
    return (
        Strategy.ImagePromptEdit,
        False,
        "broad or person subject: condition the edit on the reference image",
    )


def _is_person_hint(subject_hint: Optional[str]) -> bool:
    if not subject_hint:
        return False
    words = set(subject_hint.lower().split())
    return bool(words & PERSON_WORDS)


class Orchestrator:
    """Pipeline driver bound to one store and one backend profile.

    Steps on different sessions may run concurrently; per session they are
    strictly serialized, and an overlapping attempt raises ConcurrentStep.
    """

    def __init__(self, store: Store, backends: BackendSet):
        self.store = store
        self.backends = backends
        self._configs: dict[str, PipelineConfig] = {}
        self._busy: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- session lifecycle -------------------------------------------------

    def create_session(self, prompt: PromptSpec, config: Optional[PipelineConfig] = None) -> Session:
        config = config or PipelineConfig()
        session_id = str(uuid.uuid4())
        event = EventRecord(
            sequence=1,
            kind=EventKind.SessionCreated,
            payload={
                "prompt": prompt_to_dict(prompt),
                "retrieval_count_n": config.retrieval_count_n,
                "config": {
                    "auto_select": config.auto_select,
                    "strategy_override": (
                        config.strategy_override.value if config.strategy_override else None
                    ),
                    "backend_profile": config.backend_profile,
                    "seed": config.seed,
                },
            },
            occurred_at=utc_now(),
        )
        self.store.append_event(session_id, event)
        self.store.register_session(session_id, prompt.text)
        self._configs[session_id] = config
        return self.store.load_session(session_id)

    def load_session(self, session_id: str) -> Session:
        return self.store.load_session(session_id)

    def config_of(self, session: Session) -> PipelineConfig:
        cached = self._configs.get(session.session_id)
        if cached is not None:
            return cached
        raw = session.event_log[0].payload.get("config", {}) if session.event_log else {}
        override = raw.get("strategy_override")
        config = PipelineConfig(
            retrieval_count_n=session.retrieval_count_n,
            auto_select=bool(raw.get("auto_select", False)),
            strategy_override=Strategy(override) if override else None,
            backend_profile=raw.get("backend_profile", self.backends.profile),
            seed=raw.get("seed"),
        )
        self._configs[session.session_id] = config
        return config

    # -- step execution ------------------------------------------------------

    def run_step(
        self,
        session: Session,
        command: StepCommand,
        select_index: Optional[int] = None,
        strategy_override: Optional[Strategy] = None,
    ) -> Session:
        """Execute one pipeline step and persist its single event."""
        kind = STEP_EVENT_KINDS[command]
        transition(session.state, kind)  # raises IllegalTransition up front
        lock = self._session_lock(session.session_id)
        if not lock.acquire(blocking=False):
            raise ConcurrentStep(
                f"session {session.session_id} already has a step in flight"
            )
        try:
            config = self.config_of(session)
            try:
                payload = self._execute(session, command, config, select_index, strategy_override)
            except FactpipeError as exc:
                code = _failure_code(exc)
                if code is None:
                    raise
                logger.warning(
                    "step %s failed for session %s: %s", command.value, session.session_id, exc
                )
                return self._append(
                    session,
                    EventKind.StepFailed,
                    {"command": command.value, "error_code": code, "error": str(exc)},
                )
            return self._append(session, kind, payload)
        finally:
            lock.release()

    def override_strategy(self, session: Session, strategy: Strategy) -> Session:
        """Replace the routed strategy in place (only legal at Routed)."""
        transition(session.state, EventKind.StrategyOverridden)
        if session.guidance is not None:
            raise IllegalTransition("strategy can no longer change once guidance exists")
        return self._append(
            session,
            EventKind.StrategyOverridden,
            {"field": "strategy", "strategy": strategy.value},
        )

    def replace_guidance(self, session: Session, text: str) -> Session:
        """Swap in human-edited guidance text (only legal at GuidanceReady)."""
        transition(session.state, EventKind.StrategyOverridden)
        current = session.guidance
        if current is None:
            raise IllegalTransition("no guidance to replace yet")
        if session.strategy is Strategy.InstructionEdit:
            parsed = parse_instruction_response(
                text, current.metaprompt_hash, current.llm_backend_id
            )
        else:
            parsed = parse_factual_prompt_response(
                text, current.metaprompt_hash, current.llm_backend_id
            )
        replacement = guidance_to_dict(parsed)
        replacement["raw_response"] = current.raw_response
        return self._append(
            session,
            EventKind.StrategyOverridden,
            {"field": "guidance", "guidance": replacement},
        )

    def run_pipeline(self, prompt: PromptSpec, config: Optional[PipelineConfig] = None) -> Session:
        """Run a whole session non-interactively (auto-selects a candidate)."""
        session = self.create_session(prompt, config)
        for command in (
            StepCommand.GenerateInitial,
            StepCommand.Retrieve,
            StepCommand.Select,
            StepCommand.ClassifyAndRoute,
            StepCommand.GenerateGuidance,
            StepCommand.ApplyEdit,
            StepCommand.Complete,
        ):
            index = self.auto_select_index(session) if command is StepCommand.Select else None
            session = self.run_step(session, command, select_index=index)
            if session.state is SessionState.Failed:
                break
        return session

    @staticmethod
    def auto_select_index(session: Session) -> int:
        """Rank 0, or the lowest-ranked usable candidate if rank 0 failed."""
        for candidate in session.candidates:
            if candidate.ingest_status is IngestStatus.Ingested:
                return candidate.rank
        raise SelectionOutOfBounds("no ingested candidate to select")

    # -- internals ----------------------------------------------------------

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._busy.setdefault(session_id, threading.Lock())

    def _append(self, session: Session, kind: EventKind, payload: dict) -> Session:
        event = EventRecord(
            sequence=len(session.event_log) + 1,
            kind=kind,
            payload=payload,
            occurred_at=utc_now(),
        )
        self.store.append_event(session.session_id, event)
        return apply_event(session, event)

    def _execute(
        self,
        session: Session,
        command: StepCommand,
        config: PipelineConfig,
        select_index: Optional[int],
        strategy_override: Optional[Strategy],
    ) -> dict:
        if command is StepCommand.GenerateInitial:
            return self._generate_initial(session, config)
        if command is StepCommand.Retrieve:
            return self._retrieve(session)
        if command is StepCommand.Select:
            return self._select(session, select_index)
        if command is StepCommand.ClassifyAndRoute:
            return self._classify_and_route(session, strategy_override or config.strategy_override)
        if command is StepCommand.GenerateGuidance:
            return self._generate_guidance(session)
        if command is StepCommand.ApplyEdit:
            return self._apply_edit(session, config)
        return {}  # Complete

    def _generate_initial(self, session: Session, config: PipelineConfig) -> dict:
        data, media_type = generate_image(
            self.backends.text_to_image, session.prompt.text, config.seed
        )
        artifact = self.store.put_artifact(data, media_type, SourceRole.Generated)
        return {"artifact": artifact_to_dict(artifact)}

    def _retrieve(self, session: Session) -> dict:
        query = build_query(session.prompt, session.retrieval_count_n)
        candidates = fetch_candidates(query, self.backends.search)
        candidates = ingest_all(candidates, self.backends.fetcher, self.store)
        return {"candidates": [candidate_to_dict(c) for c in candidates]}

    def _select(self, session: Session, index: Optional[int]) -> dict:
        if index is None:
            raise SelectionOutOfBounds("select requires an index")
        if not 0 <= index < len(session.candidates):
            raise SelectionOutOfBounds(
                f"index {index} outside candidate list of {len(session.candidates)}"
            )
        candidate = session.candidates[index]
        if candidate.ingest_status is not IngestStatus.Ingested:
            raise SelectionOutOfBounds(
                f"candidate {index} is {candidate.ingest_status.value}, not selectable"
            )
        return {"index": index}

    def classify_hallucination(
        self, prompt: PromptSpec
    ) -> tuple[HallucinationTaxonomy, EditScope]:
        """Taxonomy from the hint if present, else the LLM; scope is broad
        whenever either the hint or the LLM marks the subject as a person."""
        person_hint = _is_person_hint(prompt.subject_hint)
        if prompt.taxonomy_hint is not None and person_hint:
            return prompt.taxonomy_hint, EditScope.BroadComplex
        metaprompt = build_classification_metaprompt(prompt.text)
        raw = complete_multimodal(self.backends.llm, metaprompt, [])
        llm_taxonomy, llm_scope = parse_classification_response(raw)
        taxonomy = prompt.taxonomy_hint or llm_taxonomy
        scope = (
            EditScope.BroadComplex
            if person_hint or llm_scope is EditScope.BroadComplex
            else EditScope.PropertyLevel
        )
        return taxonomy, scope

    def _classify_and_route(
        self, session: Session, override: Optional[Strategy]
    ) -> dict:
        taxonomy, scope = self.classify_hallucination(session.prompt)
        strategy, overridden, rationale = route_strategy(scope, override)
        decision = RoutingDecision(taxonomy, scope, strategy, rationale, overridden)
        return {
            "taxonomy": decision.taxonomy.value,
            "scope": decision.scope.value,
            "strategy": decision.strategy.value,
            "rationale": decision.rationale,
            "overridden": decision.overridden,
        }

    def _generate_guidance(self, session: Session) -> dict:
        initial = session.initial_image
        selected = session.selected_candidate
        assert initial is not None and selected is not None and selected.artifact is not None
        retrieved = selected.artifact
        if session.strategy is Strategy.InstructionEdit:
            metaprompt = build_difference_metaprompt(initial, retrieved, session.prompt.text)
            blobs = [
                self.store.get_blob(initial.content_hash)[0],
                self.store.get_blob(retrieved.content_hash)[0],
            ]
            raw = complete_multimodal(self.backends.llm, metaprompt, blobs)
            guidance = parse_instruction_response(
                raw, metaprompt.content_hash, self.backends.llm.model_id
            )
        else:
            metaprompt = build_depiction_metaprompt(session.prompt.text, retrieved)
            blobs = [self.store.get_blob(retrieved.content_hash)[0]]
            raw = complete_multimodal(self.backends.llm, metaprompt, blobs)
            guidance = parse_factual_prompt_response(
                raw, metaprompt.content_hash, self.backends.llm.model_id
            )
        return {"guidance": guidance_to_dict(guidance)}

    def _apply_edit(self, session: Session, config: PipelineConfig) -> dict:
        initial = session.initial_image
        selected = session.selected_candidate
        guidance = session.guidance
        assert initial is not None and selected is not None and guidance is not None
        assert selected.artifact is not None
        retrieved = selected.artifact
        if session.strategy is Strategy.InstructionEdit:
            request = EditRequest(
                base_image=initial.content_hash,
                instruction_text=guidance.text,
                seed=config.seed,
            )
            data = edit_by_instruction(self.backends.instruction_editor, request)
            parents = (initial.content_hash,)
            model_id = self.backends.instruction_editor.model_id
        else:
            request = EditRequest(
                base_image=initial.content_hash,
                image_prompt=retrieved.content_hash,
                factual_prompt_text=guidance.text,
                seed=config.seed,
            )
            data = edit_by_image_prompt(self.backends.image_prompt_editor, request)
            parents = (initial.content_hash, retrieved.content_hash)
            model_id = self.backends.image_prompt_editor.model_id
        artifact = self.store.put_artifact(
            data, "image/png", SourceRole.Edited, parent_hashes=parents
        )
        assert session.strategy is not None
        self.store.put_provenance(
            ProvenanceRecord(
                edited_hash=artifact.content_hash,
                initial_hash=initial.content_hash,
                retrieved_hash=retrieved.content_hash,
                guidance_text=guidance.text,
                strategy=session.strategy,
                backend_model_id=model_id,
                session_id=session.session_id,
                created_at=utc_now(),
            )
        )
        return {"artifact": artifact_to_dict(artifact)}
