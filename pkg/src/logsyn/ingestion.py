"""Corpus loading and text normalization: CSV records in, cleaned records out."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, TextIO

from .ontology import MaintenanceRecord

SYNTHESIZE_ID = "synthesize"

PROBLEM_PREFIX = "Problem: "
ACTION_PREFIX = "Action Taken: "


@dataclass(frozen=True)
class ColumnMap:
    """Which CSV headers hold the id, problem, and action fields.

    id == "synthesize" numbers rows from 1 instead of reading a column.
    """

    id: str = SYNTHESIZE_ID
    problem: str = "Problem"
    action: str = "Action Taken"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ColumnMap":
        return cls(
            id=data.get("id", SYNTHESIZE_ID),
            problem=data.get("problem", "Problem"),
            action=data.get("action", "Action Taken"),
        )


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    reason: str
    raw: dict[str, str] = field(default_factory=dict)


def clean_text(raw: str) -> str:
    """Trim and collapse all internal whitespace runs to single spaces.

    Every non-whitespace character (including "#", "&", "/") passes through.
    """
    return " ".join(raw.split())


@dataclass(frozen=True)
class AbbreviationDictionary:
    """Ordered whole-token substitutions, matched case-insensitively."""

    entries: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for pattern, replacement in self.entries:
            if not pattern:
                raise ValueError("abbreviation pattern must be non-empty")
            if not replacement:
                raise ValueError(f"replacement for {pattern!r} must be non-empty")
            key = pattern.casefold()
            if key in seen:
                raise ValueError(f"duplicate abbreviation pattern: {pattern!r}")
            seen.add(key)

    def lookup(self) -> dict[str, str]:
        return {pattern.casefold(): replacement for pattern, replacement in self.entries}


def load_abbreviations(path: str | Path) -> AbbreviationDictionary:
    """Read a JSON array of {"pattern": ..., "replacement": ...} entries."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"abbreviation file must be a JSON array: {path}")
    entries = tuple((entry["pattern"], entry["replacement"]) for entry in data)
    return AbbreviationDictionary(entries=entries)


def normalize_abbreviations(text: str, abbreviations: AbbreviationDictionary) -> str:
    """Replace whole tokens in one left-to-right pass; replacements are not re-scanned.

    Tokens are space-separated chunks, so patterns like "R&R" or "W/" match as
    single tokens. Expects text already run through clean_text.
    """
    if not abbreviations.entries or not text:
        return text
    lookup = abbreviations.lookup()
    out = [lookup.get(token.casefold(), token) for token in text.split(" ")]
    return " ".join(out)


@dataclass(frozen=True)
class CleanRecord:
    """A record after whitespace cleanup and abbreviation normalization."""

    record: MaintenanceRecord
    problem_clean: str
    action_clean: str

    @property
    def combined_text(self) -> str:
        return f"{PROBLEM_PREFIX}{self.problem_clean}\n{ACTION_PREFIX}{self.action_clean}"


def prepare_record(
    record: MaintenanceRecord,
    abbreviations: AbbreviationDictionary | None = None,
) -> CleanRecord:
    """Clean both text fields and apply the abbreviation dictionary."""
    abbreviations = abbreviations or AbbreviationDictionary()
    return CleanRecord(
        record=record,
        problem_clean=normalize_abbreviations(clean_text(record.problem_text), abbreviations),
        action_clean=normalize_abbreviations(clean_text(record.action_text), abbreviations),
    )


def prepare_records(
    records: Iterable[MaintenanceRecord],
    abbreviations: AbbreviationDictionary | None = None,
) -> list[CleanRecord]:
    abbreviations = abbreviations or AbbreviationDictionary()
    return [prepare_record(record, abbreviations) for record in records]


def load_records(
    source: TextIO,
    column_map: ColumnMap | None = None,
) -> tuple[list[MaintenanceRecord], list[RejectedRow]]:
    """Read maintenance records from a CSV stream (UTF-8, header row, RFC-4180).

    Rows with an empty problem field, an empty id, or a duplicate id are
    returned in the rejected list instead of being silently kept or dropped.
    Unmapped columns pass through in each record's meta map.
    """
    column_map = column_map or ColumnMap()
    reader = csv.DictReader(source)
    headers = reader.fieldnames
    if headers is None:
        raise ValueError("CSV stream has no header row")

    required = [column_map.problem, column_map.action]
    if column_map.id != SYNTHESIZE_ID:
        required.append(column_map.id)
    for header in required:
        if header not in headers:
            raise ValueError(f"CSV is missing mapped header: {header!r}")

    mapped = {column_map.problem, column_map.action}
    if column_map.id != SYNTHESIZE_ID:
        mapped.add(column_map.id)

    records: list[MaintenanceRecord] = []
    rejected: list[RejectedRow] = []
    seen_ids: set[str] = set()
    for row_number, row in enumerate(reader, start=1):
        raw = {key: (value if value is not None else "") for key, value in row.items() if key is not None}
        problem = raw.get(column_map.problem, "")
        action = raw.get(column_map.action, "")
        if column_map.id == SYNTHESIZE_ID:
            record_id = str(row_number)
        else:
            record_id = raw.get(column_map.id, "").strip()

        if not problem.strip():
            rejected.append(RejectedRow(row_number, "empty problem", raw))
            continue
        if not record_id:
            rejected.append(RejectedRow(row_number, "empty id", raw))
            continue
        if record_id in seen_ids:
            rejected.append(RejectedRow(row_number, f"duplicate id: {record_id}", raw))
            continue

        seen_ids.add(record_id)
        meta = {key: value for key, value in raw.items() if key not in mapped}
        records.append(
            MaintenanceRecord(id=record_id, problem_text=problem, action_text=action, meta=meta)
        )
    return records, rejected


def load_records_from_path(
    path: str | Path,
    column_map: ColumnMap | None = None,
) -> tuple[list[MaintenanceRecord], list[RejectedRow]]:
    with open(path, encoding="utf-8", newline="") as handle:
        return load_records(handle, column_map)
