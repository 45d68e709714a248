"""Prompt construction for context generation and question generation.

Templates carry {style}, {q_i}, {a_i}, {c}, {a} placeholders which are
substituted in a single pass (inserted values are never re-scanned, so
literal braces inside questions or answers survive untouched). Exact
template wording is frozen by golden-file snapshots in the test suite; the
few-shot message framing is a documented choice exposed through
``as_single_message`` for completion-style endpoints.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import QAPair
from .metrics import contains_normalized_phrase

ROLES = ("system", "user", "assistant")
MODES = ("zero_shot", "few_shot")

CONTEXT_INSTRUCTION = (
    "Your job is to write a {style} paragraph that significantly expands "
    "the given question {q_i} and answer {a_i}."
)

FEW_SHOT_SQUAD_INSTRUCTION = (
    "Your job is to write a wikipedia-style paragraph on a specific topic. "
    "Your written paragraph should contains the answer to a question that "
    "asks about certain information related to the topic. The user will "
    "first provide the topic, question, and answer and some example paragraphs."
)

FEW_SHOT_GENERIC_INSTRUCTION = (
    "Your job is to write a {style} paragraph that significantly expands a "
    "given question and answer. The user will first provide the question "
    "and answer and some example paragraphs."
)

QUESTION_TEMPLATE = "Based on the context {c} and answer {a}, generate a {style} question"

OSBIO_QUESTION_INSTRUCTION = (
    "Based on the context below, generate an introductory college level "
    "biology question with {a} as the answer."
)

_PLACEHOLDER_RE = re.compile(r"\{(style|q_i|a_i|c|a)\}")


class PromptError(ValueError):
    pass


def _fill(template: str, values: dict[str, str]) -> str:
    # Single-pass substitution: values containing brace tokens stay literal.
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)


@dataclass(frozen=True)
class Message:
    role: str
    text: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise PromptError(f"unknown message role {self.role!r}")


@dataclass(frozen=True)
class Prompt:
    messages: tuple[Message, ...]
    resolved_placeholders: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        # Placeholder completeness is guaranteed by single-pass _fill (values
        # are never re-scanned) and asserted by the property tests; it cannot
        # be checked here because answers may legitimately contain braces.
        if not self.messages:
            raise PromptError("prompt must contain at least one message")
        if self.messages[0].role == "assistant":
            raise PromptError("first prompt message must be system or user")

    @property
    def text(self) -> str:
        """All message texts joined; handy for substring checks and hashing."""
        return "\n".join(m.text for m in self.messages)

    def to_payload(self) -> list[dict[str, str]]:
        return [{"role": m.role, "content": m.text} for m in self.messages]


@dataclass(frozen=True)
class Exemplar:
    """A pre-selected (title, context, question, answer) few-shot example.

    The context must contain the answer (normalized token match); this is
    checked at load time so broken exemplars never reach a prompt.
    """

    context: str
    question: str
    answer: str
    title: str | None = None

    def __post_init__(self):
        if not contains_normalized_phrase(self.context, self.answer):
            raise PromptError(
                f"exemplar context does not contain its answer {self.answer!r}"
            )

    def block(self) -> str:
        lines = []
        if self.title is not None:
            lines.append(f"title: {self.title}")
        lines.append(f"context: {self.context}")
        lines.append(f"question: {self.question}")
        lines.append(f"answer: {self.answer}")
        return "\n".join(lines)


@dataclass(frozen=True)
class StylePreset:
    name: str
    context_style_text: str
    question_style_text: str
    exemplars: tuple[Exemplar, ...] = ()


SOLAR_ENERGY_EXEMPLAR = Exemplar(
    title="Solar_energy",
    context=(
        "Solar power is the conversion of sunlight into electricity, either "
        "directly using photovoltaics (PV), or indirectly using concentrated "
        "solar power (CSP). CSP systems use lenses or mirrors and tracking "
        "systems to focus a large area of sunlight into a small beam. PV "
        "converts light into electric current using the photoelectric effect."
    ),
    question="What method does the photovoltaics system use to turn light into electricity?",
    answer="photoelectric effect",
)

_OSBIO_EXEMPLARS = (
    Exemplar(
        context=(
            "Bacteria possess a variety of extracellular appendages that allow "
            "them to attach to surfaces, including fimbriae. Fimbriae are thin, "
            "hair-like projections composed of proteins that allow bacteria to "
            "adhere to surfaces such as cell membranes in the body. Bacteria "
            "lacking fimbriae are less likely to adhere to cell surfaces and "
            "therefore less likely to cause infection."
        ),
        question="Bacteria that lack fimbriae are less likely to ____.",
        answer="adhere to cell surfaces",
    ),
    Exemplar(
        context=(
            "Meiosis is an important process of cell division that is vital for "
            "the production of gametes in sexually-reproducing species. It is a "
            "unique type of cell division as it results in the production of "
            "four haploid daughter cells, each with only one set of chromosomes."
        ),
        question="Meiosis usually produces ____ daughter cells.",
        answer="four haploid",
    ),
)

PRESETS: dict[str, StylePreset] = {
    "squad_wiki": StylePreset(
        name="squad_wiki",
        context_style_text="wikipedia-style paragraph",
        question_style_text="wikipedia-style",
        exemplars=(SOLAR_ENERGY_EXEMPLAR,),
    ),
    "osbio_science": StylePreset(
        name="osbio_science",
        context_style_text="an introductory college level scientific paragraph about biology",
        question_style_text="introductory college level biology",
        exemplars=_OSBIO_EXEMPLARS,
    ),
}


def load_preset(source: str | Path) -> StylePreset:
    """Resolve a builtin preset name or load a custom preset from a JSON file.

    Custom preset files carry {name, context_style_text, question_style_text,
    exemplars?: [{title?, context, question, answer}]}.
    """
    if isinstance(source, str) and source in PRESETS:
        return PRESETS[source]
    path = Path(source)
    if not path.exists():
        raise PromptError(
            f"unknown preset {source!r}: not a builtin ({', '.join(sorted(PRESETS))}) "
            f"and no such file"
        )
    payload = json.loads(path.read_text(encoding="utf-8"))
    exemplars = tuple(
        Exemplar(
            context=item["context"],
            question=item["question"],
            answer=item["answer"],
            title=item.get("title"),
        )
        for item in payload.get("exemplars", [])
    )
    return StylePreset(
        name=payload.get("name", "custom"),
        context_style_text=payload["context_style_text"],
        question_style_text=payload["question_style_text"],
        exemplars=exemplars,
    )


def load_exemplars(path: str | Path) -> tuple[Exemplar, ...]:
    """Load a JSON array of exemplar records (same shape as preset exemplars)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, list):
        raise PromptError(f"{path}: exemplar file must be a JSON array")
    return tuple(
        Exemplar(
            context=item["context"],
            question=item["question"],
            answer=item["answer"],
            title=item.get("title"),
        )
        for item in payload
    )


def build_context_prompt(
    pair: QAPair,
    style: StylePreset,
    exemplars: Sequence[Exemplar] = (),
    mode: str = "zero_shot",
    as_single_message: bool = False,
) -> Prompt:
    """Build the context-generation prompt for one QA pair.

    zero_shot renders the instruction with question and answer inlined as a
    single user message. few_shot renders the instruction (the squad preset
    uses its dedicated wording), the exemplar blocks in input order, then
    the target pair with a trailing ``context:`` label for the model to
    complete.
    """
    if mode not in MODES:
        raise PromptError(f"unknown mode {mode!r}")
    question = pair.question.strip()
    answer = pair.answers[0].strip() if pair.answers else ""
    if not question or not answer:
        raise PromptError(f"pair {pair.id!r}: question and answer must be non-empty")

    if mode == "zero_shot":
        resolved = {"style": style.context_style_text, "q_i": question, "a_i": answer}
        text = _fill(CONTEXT_INSTRUCTION, resolved)
        return Prompt(messages=(Message("user", text),), resolved_placeholders=resolved)

    if not exemplars:
        raise PromptError("few_shot mode requires at least one exemplar")
    if style.name == "squad_wiki":
        instruction = FEW_SHOT_SQUAD_INSTRUCTION
        resolved = {"q_i": question, "a_i": answer}
    else:
        resolved = {"style": style.context_style_text, "q_i": question, "a_i": answer}
        instruction = _fill(FEW_SHOT_GENERIC_INSTRUCTION, resolved)

    target_lines = []
    if pair.title is not None:
        target_lines.append(f"title: {pair.title}")
    target_lines.append(f"question: {question}")
    target_lines.append(f"answer: {answer}")
    target_lines.append("context:")
    body = "\n\n".join([ex.block() for ex in exemplars] + ["\n".join(target_lines)])

    if as_single_message:
        return Prompt(
            messages=(Message("user", instruction + "\n\n" + body),),
            resolved_placeholders=resolved,
        )
    return Prompt(
        messages=(Message("system", instruction), Message("user", body)),
        resolved_placeholders=resolved,
    )


def build_question_prompt(context: str, answer: str, style: StylePreset) -> Prompt:
    """Build the question-generation prompt from a context and target answer."""
    if not context.strip() or not answer.strip():
        raise PromptError("context and answer must be non-empty")
    if style.name == "osbio_science":
        resolved = {"a": answer}
        text = _fill(OSBIO_QUESTION_INSTRUCTION, resolved) + "\n\n" + context
    else:
        resolved = {"c": context, "a": answer, "style": style.question_style_text}
        text = _fill(QUESTION_TEMPLATE, resolved)
    return Prompt(messages=(Message("user", text),), resolved_placeholders=resolved)


def render_training_input(triplet, style: StylePreset) -> tuple[str, str]:
    """Serialize a triplet into the (input_text, target_text) training pair.

    This is the exact serialization the fine-tune driver consumes: the
    question-generation template with context and answer substituted, and
    the gold question verbatim as the target.
    """
    context = triplet.context
    answer = triplet.answer
    question = triplet.question
    if not context.strip() or not answer.strip() or not question.strip():
        raise PromptError(f"triplet {triplet.pair_id!r}: incomplete fields")
    values = {"c": context, "a": answer, "style": style.question_style_text}
    return _fill(QUESTION_TEMPLATE, values), question
