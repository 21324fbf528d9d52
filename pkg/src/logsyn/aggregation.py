"""Fold structured events into category distributions and problem-to-action flows."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

from .ontology import ActionCategory, InvariantViolation, Ontology, StructuredEvent

PROBLEM_SIDE = "Problem"
ACTION_SIDE = "Action"


@dataclass(frozen=True)
class Distribution:
    """Valid-event counts per canonical label; every ontology leaf is present."""

    counts: dict[str, int]
    total_valid: int
    total_anomalous: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.total_valid:
            raise ValueError("distribution counts must sum to total_valid")


@dataclass(frozen=True)
class PathwayMatrix:
    """Counts of (category, action category) pairs over valid events."""

    flows: dict[tuple[str, ActionCategory], int]

    @property
    def total(self) -> int:
        return sum(self.flows.values())


@dataclass(frozen=True)
class SankeyNode:
    id: str
    side: str


@dataclass(frozen=True)
class SankeyLink:
    source: str
    target: str
    value: int


@dataclass(frozen=True)
class SankeyData:
    nodes: tuple[SankeyNode, ...]
    links: tuple[SankeyLink, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [{"id": node.id, "side": node.side} for node in self.nodes],
            "links": [
                {"source": link.source, "target": link.target, "value": link.value}
                for link in self.links
            ],
        }


def category_distribution(events: Iterable[StructuredEvent], ontology: Ontology) -> Distribution:
    """Tally valid events per category; anomalous events are counted separately.

    A valid event whose category is not in the ontology means an upstream
    invariant broke, so that is a hard error rather than a bucket.
    """
    counts = {label: 0 for label in ontology.labels}
    total_valid = 0
    total_anomalous = 0
    for event in events:
        if not event.is_valid:
            total_anomalous += 1
            continue
        if event.category not in counts:
            raise InvariantViolation(
                f"valid event {event.record_id} has out-of-ontology category {event.category!r}"
            )
        counts[event.category] += 1
        total_valid += 1
    return Distribution(counts=counts, total_valid=total_valid, total_anomalous=total_anomalous)


def pathway_matrix(events: Iterable[StructuredEvent]) -> PathwayMatrix:
    flows: dict[tuple[str, ActionCategory], int] = {}
    for event in events:
        if not event.is_valid:
            continue
        key = (event.category, event.action_category)
        flows[key] = flows.get(key, 0) + 1
    return PathwayMatrix(flows=flows)


def to_sankey(matrix: PathwayMatrix) -> SankeyData:
    """Node/link flow data: problem categories on the left, action buckets on the right.

    Nodes are ordered by descending total flow (ties alphabetical) per side, and
    links follow node order, so emitted files are byte-stable.
    """
    problem_totals: dict[str, int] = {}
    action_totals: dict[str, int] = {}
    for (category, action), value in matrix.flows.items():
        if value == 0:
            continue
        problem_totals[category] = problem_totals.get(category, 0) + value
        action_totals[action.value] = action_totals.get(action.value, 0) + value

    problem_order = sorted(problem_totals, key=lambda label: (-problem_totals[label], label))
    action_order = sorted(action_totals, key=lambda label: (-action_totals[label], label))
    nodes = tuple(
        [SankeyNode(id=label, side=PROBLEM_SIDE) for label in problem_order]
        + [SankeyNode(id=label, side=ACTION_SIDE) for label in action_order]
    )

    problem_rank = {label: i for i, label in enumerate(problem_order)}
    action_rank = {label: i for i, label in enumerate(action_order)}
    links = tuple(
        SankeyLink(source=category, target=action.value, value=value)
        for (category, action), value in sorted(
            ((pair, value) for pair, value in matrix.flows.items() if value > 0),
            key=lambda item: (problem_rank[item[0][0]], action_rank[item[0][1].value]),
        )
    )
    return SankeyData(nodes=nodes, links=links)


def build_manifest(
    model: str | None,
    template_variant: str | None,
    exemplar_file_hash: str | None,
    config_snapshot: dict[str, Any],
    counts: dict[str, int],
) -> dict[str, Any]:
    """Machine-readable run record. The timestamp is the only non-reproducible field."""
    return {
        "model": model,
        "template_variant": template_variant,
        "exemplar_file_hash": exemplar_file_hash,
        "config": config_snapshot,
        "counts": counts,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(path: str | Path, manifest: dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_report(
    events: Sequence[StructuredEvent],
    ontology: Ontology,
    out_dir: str | Path,
    manifest: dict[str, Any],
) -> dict[str, Path]:
    """Write the plot-ready report bundle and return the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    distribution = category_distribution(events, ontology)
    matrix = pathway_matrix(events)
    sankey = to_sankey(matrix)

    paths = {
        "distribution_json": out / "distribution.json",
        "distribution_csv": out / "distribution.csv",
        "sankey_json": out / "sankey.json",
        "pathways_csv": out / "pathways.csv",
        "manifest_json": out / "manifest.json",
    }

    paths["distribution_json"].write_text(
        json.dumps(
            {
                "counts": distribution.counts,
                "total_valid": distribution.total_valid,
                "total_anomalous": distribution.total_anomalous,
            },
            indent=2,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )

    with open(paths["distribution_csv"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "count"])
        for label, count in distribution.counts.items():
            writer.writerow([label, count])

    paths["sankey_json"].write_text(
        json.dumps(sankey.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    with open(paths["pathways_csv"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["category", "action_category", "count"])
        for (category, action), value in sorted(
            matrix.flows.items(), key=lambda item: (item[0][0], item[0][1].value)
        ):
            writer.writerow([category, action.value, value])

    write_manifest(paths["manifest_json"], manifest)
    return paths
