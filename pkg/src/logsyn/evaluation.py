"""Evaluation harnesses: confusion-matrix metrics, system comparison, the keyword
rule baseline, the judge workflow, and a deterministic synthetic corpus generator."""

from __future__ import annotations

import csv
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .backends import BackendError, CompletionBackend, CompletionParams
from .extraction import classify_action, extract_json_block
from .ingestion import CleanRecord
from .ontology import (
    FALLBACK_CATEGORY,
    ActionCategory,
    EventStatus,
    GoldLabel,
    MaintenanceRecord,
    Ontology,
    StructuredEvent,
    canonicalize_category,
    default_ontology,
    record_sort_key,
)
from .prompting import JUDGE_KEYS, JUDGE_SCALE, build_judge_prompt

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Confusion matrix and macro-averaged metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Gold-by-predicted counts plus, per gold label, the records that produced
    no usable prediction (anomalous or absent)."""

    labels: tuple[str, ...]
    cells: dict[tuple[str, str], int]
    coverage_by_label: dict[str, int]

    @property
    def coverage(self) -> int:
        return sum(self.coverage_by_label.values())

    @property
    def total_scored(self) -> int:
        return sum(self.cells.values())

    def cell(self, gold: str, predicted: str) -> int:
        return self.cells.get((gold, predicted), 0)

    def gold_count(self, label: str) -> int:
        row = sum(value for (gold, _), value in self.cells.items() if gold == label)
        return row + self.coverage_by_label.get(label, 0)

    def predicted_count(self, label: str) -> int:
        return sum(value for (_, predicted), value in self.cells.items() if predicted == label)


def confusion_matrix(
    gold: Sequence[GoldLabel],
    events: Sequence[StructuredEvent],
    ontology: Ontology,
) -> ConfusionMatrix:
    """Score predictions against gold labels.

    Gold records whose event is anomalous or missing count as coverage;
    predicted events without a gold label are ignored.
    """
    seen: set[str] = set()
    for label in gold:
        if label.record_id in seen:
            raise ValueError(f"duplicate gold id: {label.record_id}")
        seen.add(label.record_id)

    predictions: dict[str, str | None] = {}
    for event in events:
        predictions[event.record_id] = event.category if event.is_valid else None

    cells: dict[tuple[str, str], int] = {}
    coverage_by_label: dict[str, int] = {}
    for entry in gold:
        gold_category = canonicalize_category(entry.category, ontology)
        if gold_category is None:
            raise ValueError(
                f"gold label for {entry.record_id} is not in the ontology: {entry.category!r}"
            )
        predicted = predictions.get(entry.record_id)
        if predicted is None:
            coverage_by_label[gold_category] = coverage_by_label.get(gold_category, 0) + 1
            continue
        key = (gold_category, predicted)
        cells[key] = cells.get(key, 0) + 1
    return ConfusionMatrix(labels=ontology.labels, cells=cells, coverage_by_label=coverage_by_label)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy plus per-class and macro-averaged precision/recall/F1.

    Both macro-F1 conventions are reported: the mean of per-class F1 scores,
    and the harmonic mean of macro precision and macro recall.
    """

    accuracy: float
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1_mean: float
    macro_f1_harmonic: float

    def __post_init__(self) -> None:
        for name in ("accuracy", "macro_precision", "macro_recall", "macro_f1_mean", "macro_f1_harmonic"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {value}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "per_class": {
                label: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for label, m in self.per_class.items()
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1_mean": self.macro_f1_mean,
            "macro_f1_harmonic": self.macro_f1_harmonic,
        }


def harmonic_f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Metrics from a confusion matrix; unscored gold records count as wrong.

    Macro averages are unweighted means over the ontology labels that actually
    occur in the gold set.
    """
    total = cm.total_scored + cm.coverage
    if total == 0:
        raise ValueError("no scored records")

    trace = sum(cm.cell(label, label) for label in cm.labels)
    accuracy = trace / total

    present = [label for label in cm.labels if cm.gold_count(label) > 0]
    per_class: dict[str, ClassMetrics] = {}
    for label in present:
        true_positive = cm.cell(label, label)
        predicted = cm.predicted_count(label)
        gold_count = cm.gold_count(label)
        precision = true_positive / predicted if predicted else 0.0
        recall = true_positive / gold_count if gold_count else 0.0
        per_class[label] = ClassMetrics(
            precision=precision, recall=recall, f1=harmonic_f1(precision, recall)
        )

    count = len(per_class)
    macro_precision = sum(m.precision for m in per_class.values()) / count
    macro_recall = sum(m.recall for m in per_class.values()) / count
    macro_f1_mean = sum(m.f1 for m in per_class.values()) / count
    return MetricsReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_precision=macro_precision,
        macro_recall=macro_recall,
        macro_f1_mean=macro_f1_mean,
        macro_f1_harmonic=harmonic_f1(macro_precision, macro_recall),
    )


# ---------------------------------------------------------------------------
# System comparison table
# ---------------------------------------------------------------------------

COMPARISON_METRIC_ROWS = (
    "Accuracy",
    "Precision (Macro)",
    "Recall (Macro)",
    "F1-Score (Macro, Mean)",
    "F1-Score (Macro, Harmonic)",
)


@dataclass(frozen=True)
class ComparisonTable:
    """Metric rows by system columns, cells kept as formatted strings so a
    parsed table re-emits byte-identically."""

    systems: tuple[str, ...]
    rows: tuple[tuple[str, tuple[str, ...]], ...]

    def to_csv_text(self) -> str:
        lines = [",".join(["Metric", *self.systems])]
        for metric, values in self.rows:
            lines.append(",".join([metric, *values]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "ComparisonTable":
        reader = csv.reader(text.splitlines())
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty comparison table") from None
        if not header or header[0] != "Metric":
            raise ValueError("comparison table must start with a 'Metric' header column")
        systems = tuple(header[1:])
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(systems) + 1:
                raise ValueError(f"ragged comparison row: {row!r}")
            rows.append((row[0], tuple(row[1:])))
        return cls(systems=systems, rows=tuple(rows))

    def to_dict(self) -> dict[str, Any]:
        return {
            "systems": list(self.systems),
            "metrics": {metric: dict(zip(self.systems, values)) for metric, values in self.rows},
        }


@dataclass(frozen=True)
class ComparisonResult:
    table: ComparisonTable
    reports: dict[str, MetricsReport]
    ignored_predictions: dict[str, int]


def compare_systems(
    systems: Mapping[str, Sequence[StructuredEvent]],
    gold: Sequence[GoldLabel],
    ontology: Ontology,
) -> ComparisonResult:
    """Score each named prediction set against the same gold labels.

    Predictions whose record ids never appear in the gold set are ignored,
    with a per-system count surfaced (and logged) rather than dropped silently.
    """
    if not systems:
        raise ValueError("need at least one system to compare")
    gold_ids = {label.record_id for label in gold}
    reports: dict[str, MetricsReport] = {}
    ignored: dict[str, int] = {}
    for name, events in systems.items():
        unknown = sum(1 for event in events if event.record_id not in gold_ids)
        if unknown:
            logger.warning("system %s: %d predictions have no gold label; ignored", name, unknown)
        ignored[name] = unknown
        reports[name] = compute_metrics(confusion_matrix(gold, list(events), ontology))

    names = tuple(systems)
    rows = []
    for metric, attr in zip(
        COMPARISON_METRIC_ROWS,
        ("accuracy", "macro_precision", "macro_recall", "macro_f1_mean", "macro_f1_harmonic"),
    ):
        rows.append((metric, tuple(f"{getattr(reports[name], attr):.4f}" for name in names)))
    table = ComparisonTable(systems=names, rows=tuple(rows))
    return ComparisonResult(table=table, reports=reports, ignored_predictions=ignored)


# ---------------------------------------------------------------------------
# Keyword gazetteer rule baseline
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> frozenset[str]:
    return frozenset(_TOKEN.findall(text.lower()))


@dataclass(frozen=True)
class GazetteerRule:
    keywords: tuple[str, ...]
    label: str

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValueError(f"gazetteer rule for {self.label!r} has no keywords")


@dataclass(frozen=True)
class Gazetteer:
    """Ordered keyword rules; the first rule whose phrase matches wins.

    A phrase matches when every one of its word tokens occurs in the text,
    so "Leaking rocker cover gasket" still hits "rocker cover gasket is
    leaking" despite the reordering.
    """

    rules: tuple[GazetteerRule, ...]

    def validate(self, ontology: Ontology) -> None:
        for rule in self.rules:
            if canonicalize_category(rule.label, ontology) is None:
                raise ValueError(f"gazetteer label not in ontology: {rule.label!r}")


def load_gazetteer(path: str | Path, ontology: Ontology | None = None) -> Gazetteer:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    rules = tuple(
        GazetteerRule(keywords=tuple(entry["keywords"]), label=entry["label"]) for entry in data
    )
    gazetteer = Gazetteer(rules=rules)
    if ontology is not None:
        gazetteer.validate(ontology)
    return gazetteer


def default_gazetteer() -> Gazetteer:
    text = resources.files("logsyn").joinpath("data/gazetteer.json").read_text(encoding="utf-8")
    data = json.loads(text)
    gazetteer = Gazetteer(
        rules=tuple(
            GazetteerRule(keywords=tuple(entry["keywords"]), label=entry["label"])
            for entry in data
        )
    )
    gazetteer.validate(default_ontology())
    return gazetteer


def rule_based_classify(record: CleanRecord, gazetteer: Gazetteer) -> str:
    """First matching rule wins; unmatched records fall back to the catch-all
    category for discrepancies without an identified component."""
    text_tokens = _tokens(record.combined_text)
    for rule in gazetteer.rules:
        for keyword in rule.keywords:
            keyword_tokens = _tokens(keyword)
            if keyword_tokens and keyword_tokens <= text_tokens:
                return rule.label
    return FALLBACK_CATEGORY


def rule_based_events(
    records: Sequence[CleanRecord], gazetteer: Gazetteer
) -> list[StructuredEvent]:
    """Wrap gazetteer predictions as events so they feed the same scoring path.

    The rule baseline classifies but does not extract, so the component field
    is an explicit placeholder rather than empty.
    """
    events = []
    for record in records:
        action = record.action_clean or "(none recorded)"
        events.append(
            StructuredEvent(
                record_id=record.record.id,
                summary_problem=record.problem_clean,
                summary_action=action,
                failed_component="(not extracted)",
                category=rule_based_classify(record, gazetteer),
                action_category=classify_action(action),
                status=EventStatus.VALID,
            )
        )
    events.sort(key=lambda event: record_sort_key(event.record_id))
    return events


# ---------------------------------------------------------------------------
# Judge harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeScores:
    record_id: str
    summary_accuracy: int
    component_accuracy: int
    category_relevance: int

    def __post_init__(self) -> None:
        low, high = JUDGE_SCALE
        for key in JUDGE_KEYS:
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or not low <= value <= high:
                raise ValueError(f"{key} must be an integer in [{low}, {high}], got {value!r}")


@dataclass(frozen=True)
class JudgeOutcome:
    """One judged event: scores on success, or an anomaly note after the re-ask."""

    record_id: str
    scores: JudgeScores | None
    attempts: int
    error: str | None = None

    @property
    def anomalous(self) -> bool:
        return self.scores is None

    def to_dict(self) -> dict[str, Any]:
        entry: dict[str, Any] = {"record_id": self.record_id, "attempts": self.attempts}
        if self.scores is None:
            entry.update({key: None for key in JUDGE_KEYS})
            entry["anomalous"] = True
            entry["error"] = self.error
        else:
            entry.update({key: getattr(self.scores, key) for key in JUDGE_KEYS})
            entry["anomalous"] = False
        return entry


def _parse_judge_scores(text: str, record_id: str) -> JudgeScores:
    block = extract_json_block(text)
    if block is None:
        raise ValueError("no JSON object in judge response")
    parsed = json.loads(block)
    if not isinstance(parsed, dict):
        raise ValueError("judge response is not a JSON object")
    missing = [key for key in JUDGE_KEYS if key not in parsed]
    if missing:
        raise ValueError(f"judge response missing keys: {missing}")
    return JudgeScores(record_id=record_id, **{key: parsed[key] for key in JUDGE_KEYS})


def judge_event(
    record: CleanRecord,
    event: StructuredEvent,
    judge_backend: CompletionBackend,
    params: CompletionParams,
    re_asks: int = 1,
) -> JudgeOutcome:
    """Score one valid event with the judge model.

    A malformed, incomplete, or out-of-range response earns one re-ask; a
    second failure (or backend exhaustion) yields an anomalous outcome that
    aggregation excludes and counts.
    """
    prompt = build_judge_prompt(record, event)
    error = "unreached"
    attempts = 0
    for attempt in range(1, re_asks + 2):
        attempts = attempt
        try:
            result = judge_backend.complete(prompt, params)
        except BackendError as exc:
            error = f"backend: {exc}"
            break
        try:
            scores = _parse_judge_scores(result.text, event.record_id)
        except (ValueError, json.JSONDecodeError) as exc:
            error = str(exc)
            continue
        return JudgeOutcome(record_id=event.record_id, scores=scores, attempts=attempt)
    return JudgeOutcome(record_id=event.record_id, scores=None, attempts=attempts, error=error)


def judge_corpus(
    records: Sequence[CleanRecord],
    events: Sequence[StructuredEvent],
    judge_backend: CompletionBackend,
    params: CompletionParams,
    parallelism: int = 4,
    re_asks: int = 1,
) -> list[JudgeOutcome]:
    """Judge every valid event that has a matching record; anomalous extraction
    events are not judgeable and are skipped."""
    by_id = {record.record.id: record for record in records}
    judgeable = [event for event in events if event.is_valid]
    missing = [event.record_id for event in judgeable if event.record_id not in by_id]
    if missing:
        raise ValueError(f"events without matching records: {missing[:5]}")

    def work(event: StructuredEvent) -> JudgeOutcome:
        return judge_event(by_id[event.record_id], event, judge_backend, params, re_asks)

    if parallelism <= 1 or len(judgeable) <= 1:
        outcomes = [work(event) for event in judgeable]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(work, judgeable))
    outcomes.sort(key=lambda outcome: record_sort_key(outcome.record_id))
    return outcomes


def aggregate_judgements(scores: Sequence[JudgeScores], anomalous: int = 0) -> dict[str, Any]:
    """Arithmetic means per criterion (reported raw and rounded to 1 decimal)."""
    n = len(scores)
    summary: dict[str, Any] = {"n": n, "anomalous": anomalous}
    if n == 0:
        summary["means"] = None
        summary["means_raw"] = None
        return summary
    raw = {key: sum(getattr(s, key) for s in scores) / n for key in JUDGE_KEYS}
    summary["means"] = {key: round(value, 1) for key, value in raw.items()}
    summary["means_raw"] = raw
    return summary


# ---------------------------------------------------------------------------
# Deterministic synthetic corpus
# ---------------------------------------------------------------------------


class SplitMix64:
    """SplitMix64 PRNG, implemented here and frozen so generated corpora and
    fixtures never drift across platforms or interpreter versions."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int) -> None:
        self._state = seed & self._MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self._MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (2.0**-53)

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return self.next_u64() % n

    def choice(self, seq: Sequence[Any]) -> Any:
        return seq[self.randrange(len(seq))]

    def weighted_index(self, weights: Sequence[float]) -> int:
        total = float(sum(weights))
        if total <= 0:
            raise ValueError("weights must sum to a positive value")
        point = self.random() * total
        cumulative = 0.0
        for index, weight in enumerate(weights):
            cumulative += weight
            if point < cumulative:
                return index
        return len(weights) - 1


_PROBLEM_TEMPLATES = (
    "{phrase} noted during {context}.",
    "Pilot reported {phrase} during {context}.",
    "{phrase} observed on {context}.",
)

_CONTEXTS = ("preflight", "runup", "taxi", "climb", "descent", "cruise")

# Per-category fault phrases double as the default gazetteer keywords, which is
# what makes the rule baseline exact on corpora generated from these tables.
_FAULT_PHRASES: dict[str, tuple[str, ...]] = {
    "Powerplant - Mechanical": ("Low compression", "Piston/ring failure", "Sticking valves"),
    "Powerplant - Sealing & Gaskets": (
        "Leaking rocker cover gasket",
        "Intake manifold leak",
        "Oil seal failure",
    ),
    "Powerplant - Structural Components": (
        "Cracked engine baffle",
        "Worn engine mount",
        "Broken bracket",
    ),
    "Powerplant - Fasteners & Hardware": (
        "Loose rocker cover screws",
        "Broken hose clamp",
        "Sheared rivets",
    ),
    "Ignition System - Component Failure": (
        "Fouled spark plug",
        "Magneto failure",
        "Faulty ignition lead",
    ),
    "Fuel System - Delivery & Control": (
        "Fuel servo malfunction",
        "Clogged injector nozzle",
        "Incorrect idle mixture",
    ),
    "Performance - Operational Issue": ("Rough running engine", "Power loss", "Hard start", "Vibration"),
    "Servicing - General Maintenance": ("FOD removal", "Engine wash", "Scheduled compression check"),
}

_COMPONENTS: dict[str, tuple[str, ...]] = {
    "Powerplant - Mechanical": ("Cylinder", "Piston Rings", "Valves"),
    "Powerplant - Sealing & Gaskets": ("Rocker Cover Gasket", "Intake Manifold Gasket", "Oil Seal"),
    "Powerplant - Structural Components": ("Engine Baffle", "Engine Mount", "Support Bracket"),
    "Powerplant - Fasteners & Hardware": ("Rocker Cover Screws", "Hose Clamp", "Rivets"),
    "Ignition System - Component Failure": ("Spark Plug", "Magneto", "Ignition Lead"),
    "Fuel System - Delivery & Control": ("Fuel Servo", "Injector Nozzle", "Idle Mixture Control"),
    "Performance - Operational Issue": (
        "Not identified",
        "Not identified",
        "Not identified",
        "Not identified",
    ),
    "Servicing - General Maintenance": (
        "None (scheduled task)",
        "None (scheduled task)",
        "None (scheduled task)",
    ),
}

_ACTION_TEMPLATES: dict[ActionCategory, tuple[str, ...]] = {
    ActionCategory.COMPONENT_REPLACEMENT: (
        "Removed and replaced the affected unit.",
        "Installed new unit and verified normal operation.",
    ),
    ActionCategory.REPAIR_ADJUSTMENT: (
        "Repaired and adjusted as required.",
        "Tightened and resealed the affected area.",
    ),
    ActionCategory.SERVICING: (
        "Cleaned and serviced per the schedule.",
        "Washed and lubricated as required.",
    ),
    ActionCategory.INSPECTION_TEST: (
        "Inspected and checked, no defects noted.",
        "Performed ops check, no fault found.",
    ),
}

_ACTION_MIX: dict[str, tuple[tuple[ActionCategory, int], ...]] = {
    "Powerplant - Mechanical": (
        (ActionCategory.COMPONENT_REPLACEMENT, 5),
        (ActionCategory.REPAIR_ADJUSTMENT, 3),
        (ActionCategory.INSPECTION_TEST, 2),
    ),
    "Powerplant - Sealing & Gaskets": (
        (ActionCategory.COMPONENT_REPLACEMENT, 15),
        (ActionCategory.REPAIR_ADJUSTMENT, 4),
        (ActionCategory.INSPECTION_TEST, 1),
    ),
    "Powerplant - Structural Components": (
        (ActionCategory.REPAIR_ADJUSTMENT, 5),
        (ActionCategory.COMPONENT_REPLACEMENT, 4),
        (ActionCategory.INSPECTION_TEST, 1),
    ),
    "Powerplant - Fasteners & Hardware": (
        (ActionCategory.REPAIR_ADJUSTMENT, 6),
        (ActionCategory.COMPONENT_REPLACEMENT, 3),
        (ActionCategory.INSPECTION_TEST, 1),
    ),
    "Ignition System - Component Failure": (
        (ActionCategory.COMPONENT_REPLACEMENT, 7),
        (ActionCategory.SERVICING, 2),
        (ActionCategory.INSPECTION_TEST, 1),
    ),
    "Fuel System - Delivery & Control": (
        (ActionCategory.REPAIR_ADJUSTMENT, 5),
        (ActionCategory.COMPONENT_REPLACEMENT, 3),
        (ActionCategory.INSPECTION_TEST, 2),
    ),
    "Performance - Operational Issue": (
        (ActionCategory.INSPECTION_TEST, 6),
        (ActionCategory.REPAIR_ADJUSTMENT, 2),
        (ActionCategory.COMPONENT_REPLACEMENT, 2),
    ),
    "Servicing - General Maintenance": (
        (ActionCategory.SERVICING, 7),
        (ActionCategory.INSPECTION_TEST, 3),
    ),
}

_DEFAULT_ACTION_MIX: tuple[tuple[ActionCategory, int], ...] = (
    (ActionCategory.COMPONENT_REPLACEMENT, 4),
    (ActionCategory.REPAIR_ADJUSTMENT, 3),
    (ActionCategory.SERVICING, 1),
    (ActionCategory.INSPECTION_TEST, 2),
)


@dataclass(frozen=True)
class SyntheticCorpus:
    """A generated corpus with gold labels and ideal scripted-backend responses."""

    records: tuple[MaintenanceRecord, ...]
    gold: tuple[GoldLabel, ...]
    fixtures: dict[str, str]


def _phrases_for(label: str, subcategory: str) -> tuple[str, ...]:
    return _FAULT_PHRASES.get(label, (f"{subcategory} discrepancy",))


def _components_for(label: str, count: int) -> tuple[str, ...]:
    components = _COMPONENTS.get(label)
    if components is None or len(components) < count:
        return tuple("Not identified" for _ in range(count))
    return components


def generate_corpus(seed: int, n: int, ontology: Ontology | None = None) -> SyntheticCorpus:
    """Deterministic desk-scale corpus: categories follow the ontology's
    reference-count proportions, and text is rendered from the same phrase
    tables that seed the default gazetteer."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ontology = ontology or default_ontology()
    rng = SplitMix64(seed)

    weights = [leaf.reference_count for leaf in ontology.leaves]
    if any(weight is None or weight <= 0 for weight in weights):
        weights = [1 for _ in ontology.leaves]

    records: list[MaintenanceRecord] = []
    gold: list[GoldLabel] = []
    fixtures: dict[str, str] = {}
    for index in range(1, n + 1):
        leaf = ontology.leaves[rng.weighted_index(weights)]
        label = leaf.label
        phrases = _phrases_for(label, leaf.subcategory)
        phrase_index = rng.randrange(len(phrases))
        phrase = phrases[phrase_index]
        context = rng.choice(_CONTEXTS)
        problem = rng.choice(_PROBLEM_TEMPLATES).replace("{phrase}", phrase).replace(
            "{context}", context
        )

        mix = _ACTION_MIX.get(label, _DEFAULT_ACTION_MIX)
        action_category = mix[rng.weighted_index([weight for _, weight in mix])][0]
        action = rng.choice(_ACTION_TEMPLATES[action_category])

        record_id = str(index)
        component = _components_for(label, len(phrases))[phrase_index]
        records.append(
            MaintenanceRecord(id=record_id, problem_text=problem, action_text=action, meta={})
        )
        gold.append(GoldLabel(record_id=record_id, category=label))
        fixtures[record_id] = json.dumps(
            {
                "summary_problem": f"{phrase} reported during {context}.",
                "summary_action": action,
                "failed_component": component,
                "category": label,
            },
            ensure_ascii=False,
        )
    return SyntheticCorpus(records=tuple(records), gold=tuple(gold), fixtures=fixtures)


def inject_label_noise(
    gold: Sequence[GoldLabel],
    rate: float,
    seed: int,
    ontology: Ontology | None = None,
) -> list[GoldLabel]:
    """Replace each label with a uniformly random different one with probability rate.

    Both the flip draw and the replacement draw are consumed for every record,
    so the flipped set grows monotonically with the rate for a fixed seed.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    ontology = ontology or default_ontology()
    labels = ontology.labels
    rng = SplitMix64(seed)
    noisy = []
    for entry in gold:
        flip = rng.random() < rate
        alternatives = [label for label in labels if label != entry.category]
        replacement = alternatives[rng.randrange(len(alternatives))] if alternatives else entry.category
        noisy.append(GoldLabel(entry.record_id, replacement) if flip else entry)
    return noisy


# ---------------------------------------------------------------------------
# Gold label and fixture files
# ---------------------------------------------------------------------------


def write_gold(gold: Iterable[GoldLabel], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["record_id", "category"])
        for entry in gold:
            writer.writerow([entry.record_id, entry.category])


def read_gold(path: str | Path, ontology: Ontology) -> list[GoldLabel]:
    gold = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"record_id", "category"} <= set(reader.fieldnames):
            raise ValueError(f"gold file needs record_id and category columns: {path}")
        for row in reader:
            record_id = row["record_id"].strip()
            category = canonicalize_category(row["category"], ontology)
            if category is None:
                raise ValueError(f"gold category not in ontology: {row['category']!r}")
            if record_id in seen:
                raise ValueError(f"duplicate gold id: {record_id}")
            seen.add(record_id)
            gold.append(GoldLabel(record_id=record_id, category=category))
    return gold


def write_fixtures(fixtures: Mapping[str, str | Sequence[str]], path: str | Path) -> None:
    serializable = {
        key: value if isinstance(value, str) else list(value) for key, value in fixtures.items()
    }
    Path(path).write_text(
        json.dumps(serializable, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def load_fixtures(path: str | Path) -> dict[str, str | list[str]]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"fixtures file must be a JSON object: {path}")
    return data
