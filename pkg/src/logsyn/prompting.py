"""Few-shot extraction prompts and judge prompts, built from templates and exemplars."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .ingestion import ACTION_PREFIX, PROBLEM_PREFIX, CleanRecord
from .ontology import SCHEMA_KEYS, EventStatus, Ontology, StructuredEvent

# The judge must return these integer keys, each scored 1-5.
JUDGE_KEYS = ("summary_accuracy", "component_accuracy", "category_relevance")
JUDGE_SCALE = (1, 5)

CATEGORIES_PLACEHOLDER = "{categories}"

_RECORD_MARKER = re.compile(r"\[record ([^\]]*)\]")


def record_marker(record_id: str) -> str:
    """Marker embedded in a prompt's target block so backends can key on the record."""
    return f"[record {record_id}]"


def extract_record_key(prompt: str) -> str | None:
    """Pull the record id back out of a rendered prompt (last marker wins)."""
    matches = _RECORD_MARKER.findall(prompt)
    return matches[-1] if matches else None


@dataclass(frozen=True)
class Exemplar:
    """One worked input/output pair shown to the model in-context."""

    problem: str
    action: str
    expected_output: str

    def validate(self, ontology: Ontology) -> None:
        """Raise ValueError unless expected_output is a JSON object with exactly
        the four schema keys and an in-ontology category."""
        try:
            parsed = json.loads(self.expected_output)
        except json.JSONDecodeError as exc:
            raise ValueError(f"expected_output is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ValueError("expected_output must be a JSON object")
        if set(parsed) != set(SCHEMA_KEYS):
            raise ValueError(
                f"expected_output keys {sorted(parsed)} != required {sorted(SCHEMA_KEYS)}"
            )
        for key in SCHEMA_KEYS:
            if not isinstance(parsed[key], str):
                raise ValueError(f"expected_output field {key!r} must be a string")
        if parsed["category"] not in ontology:
            raise ValueError(f"category {parsed['category']!r} is not in the ontology")


def _exemplar_from_entry(entry: dict[str, Any]) -> Exemplar:
    output = entry["expected_output"]
    if isinstance(output, dict):
        output = json.dumps(output, ensure_ascii=False)
    return Exemplar(problem=entry["problem"], action=entry["action"], expected_output=output)


def load_exemplars(path: str | Path) -> list[Exemplar]:
    """Read exemplars from JSONL: {"problem", "action", "expected_output"} per line."""
    exemplars = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
        exemplars.append(_exemplar_from_entry(entry))
    return exemplars


def default_exemplars() -> list[Exemplar]:
    text = resources.files("logsyn").joinpath("data/exemplars.jsonl").read_text(encoding="utf-8")
    return [_exemplar_from_entry(json.loads(line)) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class PromptTemplate:
    """Template strings for the extraction prompt.

    instructions may embed {categories}; exemplar blocks take {problem},
    {action}, {output}; the target block takes {record_id} and {combined_text}.
    """

    instructions: str
    exemplar_block_format: str
    target_block_format: str
    variant_id: str

    def __post_init__(self) -> None:
        if not self.instructions.strip():
            raise ValueError("template instructions must be non-empty")


def load_template(path: str | Path) -> PromptTemplate:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return PromptTemplate(
        instructions=data["instructions"],
        exemplar_block_format=data["exemplar_block_format"],
        target_block_format=data["target_block_format"],
        variant_id=data["variant_id"],
    )


def default_template() -> PromptTemplate:
    text = resources.files("logsyn").joinpath("data/template_default.json").read_text(encoding="utf-8")
    data = json.loads(text)
    return PromptTemplate(
        instructions=data["instructions"],
        exemplar_block_format=data["exemplar_block_format"],
        target_block_format=data["target_block_format"],
        variant_id=data["variant_id"],
    )


def _fill(template: str, values: dict[str, str]) -> str:
    # Plain token replacement: templates legitimately contain literal JSON
    # braces, so str.format is off the table.
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def _categories_block(ontology: Ontology) -> str:
    return "\n".join(f"- {label}" for label in ontology.labels)


def build_extraction_prompt(
    record: CleanRecord,
    exemplars: list[Exemplar],
    template: PromptTemplate,
    ontology: Ontology,
) -> str:
    """Render the full extraction prompt: instructions, exemplars, then the target.

    Every canonical ontology label appears verbatim in the instructions, and
    rendering is a pure function of the inputs. An exemplar that violates its
    schema invariant aborts with an error naming its index.
    """
    categories = _categories_block(ontology)
    if CATEGORIES_PLACEHOLDER in template.instructions:
        instructions = template.instructions.replace(CATEGORIES_PLACEHOLDER, categories)
    else:
        instructions = f"{template.instructions}\n\nAllowed categories:\n{categories}"

    parts = [instructions]
    for index, exemplar in enumerate(exemplars):
        try:
            exemplar.validate(ontology)
        except ValueError as exc:
            raise ValueError(f"exemplar {index}: {exc}") from exc
        parts.append(
            _fill(
                template.exemplar_block_format,
                {
                    "problem": exemplar.problem,
                    "action": exemplar.action,
                    "output": exemplar.expected_output,
                },
            )
        )
    parts.append(
        _fill(
            template.target_block_format,
            {
                "record_id": record.record.id,
                "combined_text": record.combined_text,
                "problem": record.problem_clean,
                "action": record.action_clean,
            },
        )
    )
    return "\n\n".join(parts)


_JUDGE_INSTRUCTIONS = (
    "You are reviewing an automatically structured aircraft maintenance log entry.\n"
    "Compare the generated fields against the original text and rate each criterion\n"
    "on an integer scale from 1 (wrong) to 5 (fully correct):\n"
    "- summary_accuracy: do the summaries faithfully restate the problem and action?\n"
    "- component_accuracy: is the failed component identified correctly?\n"
    "- category_relevance: is the category the right one for this event?\n"
    "Respond with only a JSON object of the form\n"
    '{"summary_accuracy": <1-5>, "component_accuracy": <1-5>, "category_relevance": <1-5>}'
)


def build_judge_prompt(record: CleanRecord, event: StructuredEvent) -> str:
    """Render the judge prompt for one valid event. Anomalous events are not judgeable."""
    if event.status is not EventStatus.VALID:
        raise ValueError(f"cannot judge anomalous event {event.record_id}")
    return (
        f"{_JUDGE_INSTRUCTIONS}\n\n"
        f"{record_marker(event.record_id)}\n"
        "Original log entry:\n"
        f"{PROBLEM_PREFIX}{record.problem_clean}\n"
        f"{ACTION_PREFIX}{record.action_clean}\n\n"
        "Generated fields:\n"
        f"summary_problem: {event.summary_problem}\n"
        f"summary_action: {event.summary_action}\n"
        f"failed_component: {event.failed_component}\n"
        f"category: {event.category}\n\n"
        "Output:"
    )
