"""Exception hierarchy shared by all factpipe modules.

Every error that can cross a module boundary is defined here so the API
layer can map each one onto exactly one wire-level error code.
"""


class FactpipeError(Exception):
    """Base class for all factpipe errors."""


# -- domain / orchestration ------------------------------------------------

class IllegalTransition(FactpipeError):
    """The (state, event) pair is not in the session transition table."""


class InvalidPrompt(FactpipeError):
    """Prompt text is empty or otherwise violates PromptSpec rules."""


class SelectionOutOfBounds(FactpipeError):
    """Candidate index is outside the candidate list or not selectable."""


class ConcurrentStep(FactpipeError):
    """A second step was attempted on a session with one already running."""


# -- backends ----------------------------------------------------------------

class BackendFailure(FactpipeError):
    """A backend call failed after its retry policy was exhausted."""


class QuotaExceeded(BackendFailure):
    """The search backend refused the request because of billing limits."""


class ContentPolicyRejection(BackendFailure):
    """The text-to-image backend refused the prompt; surfaced verbatim."""


class CapabilityMissing(FactpipeError):
    """The configured backend lacks a required capability (e.g. image input)."""


class InvalidRequest(FactpipeError):
    """An edit request violates the instruction/image-prompt exclusivity rule."""


class RoleMismatch(FactpipeError):
    """A backend handle was constructed for or asked to serve the wrong role."""


class ConfigInvalid(FactpipeError):
    """Backend profile configuration cannot be parsed or is incomplete."""


# -- guidance ----------------------------------------------------------------

class IdenticalInputs(FactpipeError):
    """The generated and retrieved images are the same blob; nothing to diff."""


class UnparseableGuidance(FactpipeError):
    """LLM response could not be turned into valid guidance."""


class UnparseableClassification(FactpipeError):
    """LLM classification response does not match the label grammar."""


# -- store -------------------------------------------------------------------

class StoreError(FactpipeError):
    """Base class for persistence errors."""


class StoreUnavailable(StoreError):
    """The data directory cannot be read or written."""


class StorageFull(StoreError):
    """The filesystem rejected a write for lack of space."""


class UnsupportedMediaType(StoreError):
    """Bytes are not one of the accepted image media types."""


class CorruptImage(StoreError):
    """Bytes claim to be an image but cannot be decoded."""


class NotFound(StoreError):
    """No blob or session exists for the given key."""


class IntegrityViolation(StoreError):
    """Stored bytes no longer match their content hash."""


class SequenceConflict(StoreError):
    """An event append raced or supplied a stale sequence number."""


class ReplayFailure(StoreError):
    """A persisted event log cannot be replayed through the transition table."""


# -- retrieval ---------------------------------------------------------------

class FetchFailed(FactpipeError):
    """Downloading a candidate image failed (recorded, never propagated)."""


# -- api ---------------------------------------------------------------------

class BindFailure(FactpipeError):
    """The HTTP service could not bind its listen address."""
