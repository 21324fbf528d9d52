"""Per-record structuring: call the backend, locate JSON, validate, flag anomalies."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .backends import BackendError, CompletionBackend, CompletionParams
from .ingestion import CleanRecord
from .ontology import (
    SCHEMA_KEYS,
    ActionCategory,
    AnomalyReason,
    EventStatus,
    Ontology,
    StructuredEvent,
    canonicalize_category,
    record_sort_key,
)
from .prompting import Exemplar, PromptTemplate, build_extraction_prompt

MAX_CONTENT_RETRIES = 5


@dataclass(frozen=True)
class ExtractionConfig:
    """Budgets for re-asking on malformed output (distinct from transport retries)."""

    content_retries: int = 2
    strict_extra_fields: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.content_retries <= MAX_CONTENT_RETRIES:
            raise ValueError(f"content_retries must be in [0, {MAX_CONTENT_RETRIES}]")


_FENCED_BLOCK = re.compile(r"```[a-zA-Z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)


def _first_balanced_object(text: str) -> str | None:
    """First balanced top-level {...} substring, honoring JSON string literals."""
    search_from = 0
    while True:
        start = text.find("{", search_from)
        if start == -1:
            return None
        depth = 0
        in_string = False
        escaped = False
        for index in range(start, len(text)):
            char = text[index]
            if in_string:
                if escaped:
                    escaped = False
                elif char == "\\":
                    escaped = True
                elif char == '"':
                    in_string = False
                continue
            if char == '"':
                in_string = True
            elif char == "{":
                depth += 1
            elif char == "}":
                depth -= 1
                if depth == 0:
                    return text[start : index + 1]
        search_from = start + 1


def extract_json_block(text: str) -> str | None:
    """Locate the model's JSON object, stripping markdown code fences if present.

    Returns None when no balanced object exists anywhere in the text.
    """
    for fenced in _FENCED_BLOCK.findall(text):
        block = _first_balanced_object(fenced)
        if block is not None:
            return block
    return _first_balanced_object(text)


# Keyword rules in fixed priority order; the first rule with any matching
# substring wins, so a response never lands in two buckets.
_ACTION_RULES: tuple[tuple[ActionCategory, tuple[str, ...]], ...] = (
    (
        ActionCategory.COMPONENT_REPLACEMENT,
        ("removed and replaced", "installed new", "replaced", "r&r"),
    ),
    (
        ActionCategory.REPAIR_ADJUSTMENT,
        ("repaired", "adjusted", "tightened", "resealed", "stop drilled", "re-torqued"),
    ),
    (ActionCategory.SERVICING, ("cleaned", "washed", "serviced", "lubricated")),
    (
        ActionCategory.INSPECTION_TEST,
        ("inspected", "checked", "ops check", "no fault found", "compression check"),
    ),
)


def classify_action(summary_action: str) -> ActionCategory:
    """Bucket a corrective-action summary by keyword; OTHER is the fallback."""
    lowered = summary_action.lower()
    for category, keywords in _ACTION_RULES:
        if any(keyword in lowered for keyword in keywords):
            return category
    return ActionCategory.OTHER


def _anomalous(record_id: str, reason: AnomalyReason, attempts: int = 1) -> StructuredEvent:
    return StructuredEvent(
        record_id=record_id,
        summary_problem="",
        summary_action="",
        failed_component="",
        category="",
        action_category=ActionCategory.OTHER,
        status=EventStatus.ANOMALOUS,
        anomaly_reason=reason,
        attempts=attempts,
    )


def parse_structured_event(
    json_text: str,
    record_id: str,
    ontology: Ontology,
    config: ExtractionConfig | None = None,
) -> StructuredEvent:
    """Validate one candidate JSON object into a StructuredEvent.

    Anomalies are values, not exceptions; the first failing check decides the
    reason (MalformedJson > MissingField > EmptyField > CategoryOutOfOntology).
    """
    config = config or ExtractionConfig()
    try:
        parsed = json.loads(json_text)
    except json.JSONDecodeError:
        return _anomalous(record_id, AnomalyReason.MALFORMED_JSON)
    if not isinstance(parsed, dict):
        return _anomalous(record_id, AnomalyReason.MALFORMED_JSON)
    if config.strict_extra_fields and set(parsed) - set(SCHEMA_KEYS):
        return _anomalous(record_id, AnomalyReason.MALFORMED_JSON)
    if any(key not in parsed for key in SCHEMA_KEYS):
        return _anomalous(record_id, AnomalyReason.MISSING_FIELD)

    values: dict[str, str] = {}
    for key in SCHEMA_KEYS:
        value = parsed[key]
        if not isinstance(value, str) or not value.strip():
            return _anomalous(record_id, AnomalyReason.EMPTY_FIELD)
        values[key] = value.strip()

    category = canonicalize_category(values["category"], ontology)
    if category is None:
        return _anomalous(record_id, AnomalyReason.CATEGORY_OUT_OF_ONTOLOGY)

    return StructuredEvent(
        record_id=record_id,
        summary_problem=values["summary_problem"],
        summary_action=values["summary_action"],
        failed_component=values["failed_component"],
        category=category,
        action_category=classify_action(values["summary_action"]),
        status=EventStatus.VALID,
    )


def structure_record(
    record: CleanRecord,
    backend: CompletionBackend,
    exemplars: list[Exemplar],
    template: PromptTemplate,
    ontology: Ontology,
    config: ExtractionConfig,
    params: CompletionParams,
) -> StructuredEvent:
    """Structure one record, re-asking with the identical prompt on bad output.

    Always yields exactly one event. Transport exhaustion becomes
    Anomalous(BackendError); auth failures propagate because no record can
    succeed after one.
    """
    prompt = build_extraction_prompt(record, exemplars, template, ontology)
    record_id = record.record.id
    event = _anomalous(record_id, AnomalyReason.NO_JSON_FOUND)
    for attempt in range(1, config.content_retries + 2):
        try:
            result = backend.complete(prompt, params)
        except BackendError:
            return _anomalous(record_id, AnomalyReason.BACKEND_ERROR, attempts=attempt)
        block = extract_json_block(result.text)
        if block is None:
            event = _anomalous(record_id, AnomalyReason.NO_JSON_FOUND, attempts=attempt)
            continue
        event = replace(
            parse_structured_event(block, record_id, ontology, config), attempts=attempt
        )
        if event.is_valid:
            return event
    return event


def structure_corpus(
    records: Sequence[CleanRecord],
    backend: CompletionBackend,
    exemplars: list[Exemplar],
    template: PromptTemplate,
    ontology: Ontology,
    config: ExtractionConfig,
    params: CompletionParams,
    parallelism: int = 4,
) -> list[StructuredEvent]:
    """Structure every record, fanning out across a worker pool of size parallelism.

    The result is sorted by record id (numeric-aware), so the output is
    independent of worker scheduling.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def work(record: CleanRecord) -> StructuredEvent:
        return structure_record(record, backend, exemplars, template, ontology, config, params)

    if parallelism == 1 or len(records) <= 1:
        events = [work(record) for record in records]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            events = list(pool.map(work, records))
    events.sort(key=lambda event: record_sort_key(event.record_id))
    return events


def events_to_jsonl(events: Iterable[StructuredEvent]) -> str:
    """Serialize events one JSON object per line, sorted by record id."""
    ordered = sorted(events, key=lambda event: record_sort_key(event.record_id))
    return "".join(json.dumps(event.to_dict(), ensure_ascii=False) + "\n" for event in ordered)


def write_events(events: Iterable[StructuredEvent], path: str | Path) -> None:
    Path(path).write_text(events_to_jsonl(events), encoding="utf-8")


def read_events(path: str | Path) -> list[StructuredEvent]:
    events = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(StructuredEvent.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{line_no}: bad event line: {exc}") from exc
    return events
