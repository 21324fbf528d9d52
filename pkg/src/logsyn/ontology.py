"""Domain types: maintenance records, the fault ontology, and structured events."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

LEVEL_SEPARATOR = " - "

# The four keys every schematized event must carry, in output order.
SCHEMA_KEYS = ("summary_problem", "summary_action", "failed_component", "category")

_HYPHEN_RUN = re.compile(r"\s*-\s*")


class InvariantViolation(RuntimeError):
    """A cross-module guarantee broke; indicates a bug upstream, not bad input."""


class ActionCategory(str, Enum):
    """Corrective-action buckets derived from summary_action text.

    Only "Component Replacement" is fixed by the source data; the other
    four partition common corrective-action verbs, with OTHER as the
    mandatory fallback.
    """

    COMPONENT_REPLACEMENT = "Component Replacement"
    REPAIR_ADJUSTMENT = "Repair & Adjustment"
    SERVICING = "Servicing"
    INSPECTION_TEST = "Inspection & Test"
    OTHER = "Other"


class EventStatus(str, Enum):
    VALID = "Valid"
    ANOMALOUS = "Anomalous"


class AnomalyReason(str, Enum):
    """Why a model response failed structural validation, in triage priority order."""

    NO_JSON_FOUND = "NoJsonFound"
    MALFORMED_JSON = "MalformedJson"
    MISSING_FIELD = "MissingField"
    EMPTY_FIELD = "EmptyField"
    CATEGORY_OUT_OF_ONTOLOGY = "CategoryOutOfOntology"
    BACKEND_ERROR = "BackendError"


@dataclass(frozen=True)
class MaintenanceRecord:
    """One raw log entry: free-text problem and corrective-action fields."""

    id: str
    problem_text: str
    action_text: str
    meta: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class GoldLabel:
    record_id: str
    category: str


@dataclass(frozen=True)
class OntologyLeaf:
    """A two-level category: system (level 1) and subcategory (level 2)."""

    system: str
    subcategory: str
    reference_count: int | None = None

    def __post_init__(self) -> None:
        if not self.system.strip() or not self.subcategory.strip():
            raise ValueError("ontology leaf needs non-empty system and subcategory")
        if LEVEL_SEPARATOR in self.system or LEVEL_SEPARATOR in self.subcategory:
            raise ValueError(
                f"level names must not contain {LEVEL_SEPARATOR!r}: "
                f"{self.system!r} / {self.subcategory!r}"
            )
        if self.reference_count is not None and self.reference_count < 0:
            raise ValueError("reference_count must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.system}{LEVEL_SEPARATOR}{self.subcategory}"


def canonical_key(raw: str) -> str:
    """Matching key for a category string: collapsed whitespace,
    normalized hyphen separators, case-insensitive."""
    text = " ".join(raw.split())
    text = _HYPHEN_RUN.sub(LEVEL_SEPARATOR, text)
    return text.casefold()


@dataclass(frozen=True)
class Ontology:
    """Ordered two-level category taxonomy with canonical labels."""

    leaves: tuple[OntologyLeaf, ...]
    version: str = "custom"

    def __post_init__(self) -> None:
        by_key: dict[str, OntologyLeaf] = {}
        for leaf in self.leaves:
            key = canonical_key(leaf.label)
            if key in by_key:
                raise ValueError(f"leaves collide under canonicalization: {leaf.label!r}")
            by_key[key] = leaf
        object.__setattr__(self, "_by_key", by_key)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(leaf.label for leaf in self.leaves)

    def find(self, raw: str) -> OntologyLeaf | None:
        return getattr(self, "_by_key").get(canonical_key(raw))

    def __contains__(self, raw: str) -> bool:
        return self.find(raw) is not None

    def to_json(self) -> list[dict[str, Any]]:
        return [
            {
                "system": leaf.system,
                "subcategory": leaf.subcategory,
                "reference_count": leaf.reference_count,
            }
            for leaf in self.leaves
        ]


def canonicalize_category(raw: str, ontology: Ontology) -> str | None:
    """Map a possibly sloppy category string onto its canonical ontology label.

    Returns None when no leaf matches; ambiguity is impossible because the
    ontology rejects leaves that collide under canonicalization.
    """
    leaf = ontology.find(raw)
    return leaf.label if leaf is not None else None


# (system, subcategory, reference count) for the eight default categories,
# in fixed display order. Counts sum to 6169, the size of the source corpus.
_DEFAULT_LEAVES = (
    ("Powerplant", "Mechanical", 553),
    ("Powerplant", "Sealing & Gaskets", 3454),
    ("Powerplant", "Structural Components", 846),
    ("Powerplant", "Fasteners & Hardware", 588),
    ("Ignition System", "Component Failure", 76),
    ("Fuel System", "Delivery & Control", 50),
    ("Performance", "Operational Issue", 403),
    ("Servicing", "General Maintenance", 199),
)

FALLBACK_CATEGORY = "Performance - Operational Issue"


def default_ontology() -> Ontology:
    """The built-in eight-leaf general-aviation maintenance ontology."""
    leaves = tuple(
        OntologyLeaf(system, subcategory, count)
        for system, subcategory, count in _DEFAULT_LEAVES
    )
    return Ontology(leaves=leaves, version="ga-default-v1")


def load_ontology(path: str | Path) -> Ontology:
    """Read an ontology from a JSON array of {system, subcategory, reference_count}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list) or not data:
        raise ValueError(f"ontology file must be a non-empty JSON array: {path}")
    leaves = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "system" not in entry or "subcategory" not in entry:
            raise ValueError(f"ontology entry {i} needs 'system' and 'subcategory' keys")
        leaves.append(
            OntologyLeaf(
                system=str(entry["system"]),
                subcategory=str(entry["subcategory"]),
                reference_count=entry.get("reference_count"),
            )
        )
    return Ontology(leaves=tuple(leaves))


@dataclass(frozen=True)
class StructuredEvent:
    """Schematized representation of one record, or the anomaly that prevented it."""

    record_id: str
    summary_problem: str
    summary_action: str
    failed_component: str
    category: str
    action_category: ActionCategory
    status: EventStatus
    anomaly_reason: AnomalyReason | None = None
    attempts: int = 1

    def __post_init__(self) -> None:
        if (self.status is EventStatus.ANOMALOUS) != (self.anomaly_reason is not None):
            raise ValueError("anomaly_reason must be present iff status is Anomalous")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")

    @property
    def is_valid(self) -> bool:
        return self.status is EventStatus.VALID

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "summary_problem": self.summary_problem,
            "summary_action": self.summary_action,
            "failed_component": self.failed_component,
            "category": self.category,
            "action_category": self.action_category.value,
            "status": self.status.value,
            "anomaly_reason": self.anomaly_reason.value if self.anomaly_reason else None,
            "attempts": self.attempts,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "StructuredEvent":
        reason = data.get("anomaly_reason")
        return cls(
            record_id=str(data["record_id"]),
            summary_problem=data["summary_problem"],
            summary_action=data["summary_action"],
            failed_component=data["failed_component"],
            category=data["category"],
            action_category=ActionCategory(data["action_category"]),
            status=EventStatus(data["status"]),
            anomaly_reason=AnomalyReason(reason) if reason is not None else None,
            attempts=int(data["attempts"]),
        )


def record_sort_key(record_id: str) -> tuple[int, int, str]:
    """Numeric-aware ordering: integer ids sort numerically, others lexically after."""
    if record_id.isdigit():
        return (0, int(record_id), "")
    return (1, 0, record_id)
