"""LLM meta-prompt construction and response parsing.

Three fixed, versioned templates live here: one that asks for a single
editing instruction from the difference between the generated and the
reference image, one that asks for a dense factual description of the
reference image, and one that classifies the likely factual defect of a
prompt. Templates are pure functions of the prompt text and are pinned
byte-for-byte by golden-file tests; bump TEMPLATE_VERSION for any change.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

from .domain import (
    EditScope,
    Guidance,
    GuidanceKind,
    HallucinationTaxonomy,
    ImageArtifact,
    SourceRole,
)
from .errors import IdenticalInputs, UnparseableClassification, UnparseableGuidance

TEMPLATE_VERSION = "1.0.0"

EDIT_INSTRUCTION_MAX_CHARS = 300
FACTUAL_PROMPT_MAX_CHARS = 1000


class TemplateId(str, Enum):
    DifferenceInstruction = "difference_instruction"
    FactualDepiction = "factual_depiction"
    Classification = "classification"


_ATTACHED_IMAGE_COUNT = {
    TemplateId.DifferenceInstruction: 2,
    TemplateId.FactualDepiction: 1,
    TemplateId.Classification: 0,
}


@dataclass(frozen=True)
class MetaPrompt:
    template_id: TemplateId
    rendered_text: str
    attached_images: tuple[str, ...]
    template_version: str = TEMPLATE_VERSION

    def __post_init__(self) -> None:
        expected = _ATTACHED_IMAGE_COUNT[self.template_id]
        if len(self.attached_images) != expected:
            raise ValueError(
                f"{self.template_id.value} requires exactly {expected} attached "
                f"image(s), got {len(self.attached_images)}"
            )

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.rendered_text.encode("utf-8")).hexdigest()


_DIFFERENCE_TEMPLATE = """\
You are assisting an image-editing pipeline.

Two images are attached. The first was produced by a text-to-image model
for the prompt below. The second is a reference photograph chosen by a
person as the factually correct depiction for the same prompt.

Prompt: "{prompt_text}"

Compare the two images and reply with exactly one imperative sentence, in
the same language as the prompt, telling an image editor how to change the
first image so it reflects the most significant factual difference shown
by the second image. Keep the sentence under 300 characters. Reply with
the sentence only: no quotes, no labels, no explanation.
"""

_DEPICTION_TEMPLATE = """\
You are assisting an image-editing pipeline.

The attached image is a reference photograph chosen by a person as the
factually correct depiction for the prompt below.

Prompt: "{prompt_text}"

Write one dense paragraph, in the same language as the prompt, describing
exactly what the photograph shows: the subject's identity, attire, pose,
setting, and any cues of the time period. The paragraph will be used
directly as a text prompt for an image generator, so phrase it as a plain
visual description. Keep it under 1000 characters. Reply with the
paragraph only: no quotes, no labels, no commentary.
"""

_CLASSIFICATION_TEMPLATE = """\
You are assisting an image-editing pipeline.

A text-to-image model will render the prompt below, and its output may
contradict real-world facts. Classify the most likely factual defect.

Prompt: "{prompt_text}"

Reply with exactly two lowercase labels separated by one space.

First label, the defect category:
  factual_inconsistency - the model favors how the subject most commonly
    looks over how the prompt says it should look
  outdated_knowledge - the prompt pins a specific time that the model's
    frozen knowledge cannot reflect
  factual_fabrication - the prompt invites a scene that rarely or never
    occurs in reality

Second label, the subject kind:
  person - the subject is a person or a group of people
  complex - a broad scene with many interacting subjects
  property - a single object, place, or attribute

Reply with the two labels only.
"""


def build_difference_metaprompt(
    initial: ImageArtifact, retrieved: ImageArtifact, prompt_text: str
) -> MetaPrompt:
    """Meta-prompt asking for one editing instruction from the difference
    between the generated image and the human-chosen reference."""
    if initial.source_role is not SourceRole.Generated:
        raise ValueError("first image must have source_role=Generated")
    if retrieved.source_role is not SourceRole.Retrieved:
        raise ValueError("second image must have source_role=Retrieved")
    if initial.content_hash == retrieved.content_hash:
        raise IdenticalInputs("generated and retrieved images are identical")
    return MetaPrompt(
        template_id=TemplateId.DifferenceInstruction,
        rendered_text=_DIFFERENCE_TEMPLATE.format(prompt_text=prompt_text),
        attached_images=(initial.content_hash, retrieved.content_hash),
    )


def build_depiction_metaprompt(prompt_text: str, retrieved: ImageArtifact) -> MetaPrompt:
    """Meta-prompt asking for a dense factual description of the reference
    image, usable as a generation prompt."""
    if retrieved.source_role is not SourceRole.Retrieved:
        raise ValueError("attached image must have source_role=Retrieved")
    return MetaPrompt(
        template_id=TemplateId.FactualDepiction,
        rendered_text=_DEPICTION_TEMPLATE.format(prompt_text=prompt_text),
        attached_images=(retrieved.content_hash,),
    )


def build_classification_metaprompt(prompt_text: str) -> MetaPrompt:
    """Meta-prompt asking for the defect category and subject kind labels."""
    return MetaPrompt(
        template_id=TemplateId.Classification,
        rendered_text=_CLASSIFICATION_TEMPLATE.format(prompt_text=prompt_text),
        attached_images=(),
    )


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------

_LABEL_PREFIX = re.compile(r"^[A-Za-z][A-Za-z ]{0,24}:\s*")
_QUOTE_PAIRS = [('"', '"'), ("'", "'"), ("“", "”"), ("«", "»")]

# Verbs an instruction is allowed to hinge on; the response must contain at
# least one so that plain noun phrases are rejected.
_VERB_LEXICON = frozenset(
    """
    add adjust alter apply be bring change clear color colour convert correct
    cover create crop darken depict draw edit eliminate enhance erase fill fix
    give has have include insert keep lighten make melt modify move must need
    needs paint place put recolor recolour reduce remove render repaint
    replace restore retouch set shift should show soften swap transform turn
    update use wear
    """.split()
)

# Trailing tokens after which a period does not end a sentence.
_ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof st mt no vs etc e.g i.e eg ie jr sr inc ltd fig approx".split()
)

_SENTENCE_BOUNDARY = re.compile(r"[.!?]\s+(?=\S)")


def _strip_wrappers(raw: str) -> str:
    text = raw.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if lines and lines[0].startswith("```"):
            lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        text = "\n".join(lines).strip()
    for _ in range(3):
        before = text
        text = _LABEL_PREFIX.sub("", text, count=1).strip()
        for opener, closer in _QUOTE_PAIRS:
            if len(text) >= 2 and text.startswith(opener) and text.endswith(closer):
                text = text[1:-1].strip()
        if text == before:
            break
    return text


def _is_multi_sentence(text: str) -> bool:
    for match in _SENTENCE_BOUNDARY.finditer(text):
        preceding = text[: match.start()].rstrip()
        last_word = preceding.split()[-1].lower().rstrip(".") if preceding.split() else ""
        if last_word in _ABBREVIATIONS or len(last_word) == 1:
            continue
        return True
    return False


def _contains_verb(text: str) -> bool:
    words = re.findall(r"[a-z']+", text.lower())
    return any(word in _VERB_LEXICON for word in words)


def parse_instruction_response(
    raw: str, metaprompt_hash: str = "", llm_backend_id: str = ""
) -> Guidance:
    """Turn a raw LLM reply into an EditInstruction guidance value.

    Strips fences, quotes, and leading labels, then requires a single
    directive sentence of at most 300 characters. The raw response is
    preserved verbatim on the returned guidance.
    """
    text = _strip_wrappers(raw)
    if not text:
        raise UnparseableGuidance("empty instruction response")
    if "\n\n" in text:
        raise UnparseableGuidance("instruction response has multiple paragraphs")
    text = re.sub(r"\s*\n\s*", " ", text).strip()
    if len(text) > EDIT_INSTRUCTION_MAX_CHARS:
        raise UnparseableGuidance(
            f"instruction exceeds {EDIT_INSTRUCTION_MAX_CHARS} characters"
        )
    if _is_multi_sentence(text):
        raise UnparseableGuidance("instruction response has multiple sentences")
    if not _contains_verb(text):
        raise UnparseableGuidance("instruction response contains no directive verb")
    return Guidance(
        kind=GuidanceKind.EditInstruction,
        text=text,
        metaprompt_hash=metaprompt_hash,
        raw_response=raw,
        llm_backend_id=llm_backend_id,
    )


def parse_factual_prompt_response(
    raw: str, metaprompt_hash: str = "", llm_backend_id: str = ""
) -> Guidance:
    """Turn a raw LLM reply into a FactualPrompt guidance value.

    Strips wrappers, collapses internal newlines to spaces, and enforces
    the 1000-character cap.
    """
    text = _strip_wrappers(raw)
    text = re.sub(r"\s*\n\s*", " ", text).strip()
    if not text:
        raise UnparseableGuidance("empty factual prompt response")
    if len(text) > FACTUAL_PROMPT_MAX_CHARS:
        raise UnparseableGuidance(
            f"factual prompt exceeds {FACTUAL_PROMPT_MAX_CHARS} characters"
        )
    return Guidance(
        kind=GuidanceKind.FactualPrompt,
        text=text,
        metaprompt_hash=metaprompt_hash,
        raw_response=raw,
        llm_backend_id=llm_backend_id,
    )


_TAXONOMY_LABELS = {
    "factual_inconsistency": HallucinationTaxonomy.FactualInconsistency,
    "outdated_knowledge": HallucinationTaxonomy.OutdatedKnowledge,
    "factual_fabrication": HallucinationTaxonomy.FactualFabrication,
}

_SUBJECT_LABELS = {
    "person": EditScope.BroadComplex,
    "complex": EditScope.BroadComplex,
    "property": EditScope.PropertyLevel,
}


def parse_classification_response(raw: str) -> tuple[HallucinationTaxonomy, EditScope]:
    """Parse the two-label classification reply.

    Exactly one defect-category label and one subject-kind label must be
    present somewhere in the response.
    """
    text = _strip_wrappers(raw).lower()
    found_taxonomies = [
        label for label in _TAXONOMY_LABELS if re.search(rf"\b{label}\b", text)
    ]
    found_subjects = [
        label for label in _SUBJECT_LABELS if re.search(rf"\b{label}\b", text)
    ]
    if len(found_taxonomies) != 1 or len(found_subjects) != 1:
        raise UnparseableClassification(
            f"expected one defect label and one subject label, got {raw!r}"
        )
    return _TAXONOMY_LABELS[found_taxonomies[0]], _SUBJECT_LABELS[found_subjects[0]]
