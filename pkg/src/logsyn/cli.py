"""Single executable exposing the pipeline and harnesses as subcommands.

Exit codes: 0 success, 1 usage error, 2 input validation failure,
3 backend/auth failure, 4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .aggregation import build_manifest, write_manifest, write_report
from .backends import (
    AuthError,
    BackendError,
    CompletionBackend,
    CompletionParams,
    HttpBackend,
    ScriptedBackend,
)
from .evaluation import (
    aggregate_judgements,
    compare_systems,
    default_gazetteer,
    generate_corpus,
    judge_corpus,
    load_fixtures,
    load_gazetteer,
    read_gold,
    rule_based_events,
    write_fixtures,
    write_gold,
)
from .extraction import ExtractionConfig, read_events, structure_corpus, write_events
from .ingestion import (
    AbbreviationDictionary,
    ColumnMap,
    load_abbreviations,
    load_records_from_path,
    prepare_records,
)
from .ontology import InvariantViolation, Ontology, default_ontology, load_ontology
from .prompting import (
    JUDGE_KEYS,
    default_exemplars,
    default_template,
    load_exemplars,
    load_template,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """One reviewable artifact holding every knob a run needs; flags override it."""

    corpus: str | None = None
    column_map: ColumnMap = field(default_factory=ColumnMap)
    ontology: str | None = None
    exemplars: str | None = None
    template: str | None = None
    abbreviations: str | None = None
    gazetteer: str | None = None
    gold: str | None = None
    backend: str = "scripted"
    fixtures: str | None = None
    model: str = "gpt-4"
    temperature: float = 0.1
    max_output_tokens: int = 512
    timeout_seconds: float = 60.0
    transport_retries: int = 3
    content_retries: int = 2
    strict_extra_fields: bool = False
    parallelism: int = 4
    shots: int | None = None
    seed: int = 1
    output_dir: str = "out"

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError(f"config file must hold a JSON object: {path}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "column_map" in data:
            data["column_map"] = ColumnMap.from_dict(data["column_map"])
        return cls(**data)

    def snapshot(self) -> dict[str, Any]:
        data = asdict(self)
        data["column_map"] = asdict(self.column_map)
        return data

    def require_files(self, *attrs: str) -> None:
        for attr in attrs:
            path = getattr(self, attr)
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"{attr} file not found: {path}")


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, Any] = {}
    for name in (
        "corpus",
        "ontology",
        "exemplars",
        "abbreviations",
        "gazetteer",
        "gold",
        "backend",
        "fixtures",
        "model",
        "parallelism",
        "shots",
        "seed",
        "content_retries",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "prompt_variant", None) is not None:
        overrides["template"] = args.prompt_variant
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    return replace(config, **overrides) if overrides else config


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    return _apply_overrides(config, args)


def _packaged_bytes(name: str) -> bytes:
    return resources.files("logsyn").joinpath(f"data/{name}").read_bytes()


def _exemplar_source(config: RunConfig) -> tuple[list, str]:
    """Exemplar list (truncated to --shots) and the sha256 of their source file."""
    if config.exemplars:
        exemplars = load_exemplars(config.exemplars)
        digest = hashlib.sha256(Path(config.exemplars).read_bytes()).hexdigest()
    else:
        exemplars = default_exemplars()
        digest = hashlib.sha256(_packaged_bytes("exemplars.jsonl")).hexdigest()
    if config.shots is not None:
        if config.shots < 0:
            raise ValueError("shots must be >= 0")
        exemplars = exemplars[: config.shots]
    return exemplars, digest


def _resolve_ontology(config: RunConfig) -> Ontology:
    return load_ontology(config.ontology) if config.ontology else default_ontology()


def _resolve_template(config: RunConfig):
    return load_template(config.template) if config.template else default_template()


def _resolve_abbreviations(config: RunConfig) -> AbbreviationDictionary:
    if config.abbreviations:
        return load_abbreviations(config.abbreviations)
    data = json.loads(_packaged_bytes("abbreviations.json"))
    return AbbreviationDictionary(
        entries=tuple((entry["pattern"], entry["replacement"]) for entry in data)
    )


def _resolve_gazetteer(config: RunConfig, ontology: Ontology):
    if config.gazetteer:
        return load_gazetteer(config.gazetteer, ontology)
    gazetteer = default_gazetteer()
    gazetteer.validate(ontology)
    return gazetteer


def _make_backend(config: RunConfig) -> CompletionBackend:
    if config.backend == "scripted":
        if not config.fixtures:
            raise ValueError("scripted backend needs a fixtures file (--fixtures)")
        return ScriptedBackend(fixtures=load_fixtures(config.fixtures))
    if config.backend == "http":
        try:
            return HttpBackend(transport_retries=config.transport_retries)
        except ValueError as exc:
            raise BackendError(str(exc)) from exc
    raise ValueError(f"unknown backend kind: {config.backend!r} (expected scripted or http)")


def _completion_params(config: RunConfig) -> CompletionParams:
    return CompletionParams(
        model=config.model,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
        timeout=config.timeout_seconds,
    )


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.corpus:
        raise UsageError("ingest needs a corpus CSV (--corpus or config)")
    config.require_files("corpus", "abbreviations")
    records, rejected = load_records_from_path(config.corpus, config.column_map)
    out = _out_dir(config)
    counts = {"rows": len(records) + len(rejected), "accepted": len(records), "rejected": len(rejected)}
    write_manifest(
        out / "manifest.json",
        build_manifest(None, None, None, config.snapshot(), counts),
    )
    print(f"accepted: {len(records)}")
    print(f"rejected: {len(rejected)}")
    for row in rejected[:20]:
        print(f"  row {row.row_number}: {row.reason}", file=sys.stderr)
    return EXIT_OK


def cmd_structure(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.corpus:
        raise UsageError("structure needs a corpus CSV (--corpus or config)")
    config.require_files(
        "corpus", "ontology", "exemplars", "template", "abbreviations", "fixtures"
    )

    ontology = _resolve_ontology(config)
    template = _resolve_template(config)
    exemplars, exemplar_hash = _exemplar_source(config)
    abbreviations = _resolve_abbreviations(config)
    backend = _make_backend(config)
    params = _completion_params(config)
    extraction_config = ExtractionConfig(
        content_retries=config.content_retries, strict_extra_fields=config.strict_extra_fields
    )

    records, rejected = load_records_from_path(config.corpus, config.column_map)
    cleaned = prepare_records(records, abbreviations)
    events = structure_corpus(
        cleaned,
        backend,
        exemplars,
        template,
        ontology,
        extraction_config,
        params,
        parallelism=config.parallelism,
    )

    out = _out_dir(config)
    write_events(events, out / "events.jsonl")
    valid = sum(1 for event in events if event.is_valid)
    counts = {
        "rows": len(records) + len(rejected),
        "accepted": len(records),
        "rejected": len(rejected),
        "valid": valid,
        "anomalous": len(events) - valid,
    }
    model_name = config.model if config.backend == "http" else f"scripted:{config.model}"
    write_manifest(
        out / "manifest.json",
        build_manifest(model_name, template.variant_id, exemplar_hash, config.snapshot(), counts),
    )
    print(f"events: {len(events)} ({valid} valid, {len(events) - valid} anomalous)")
    print(f"wrote {out / 'events.jsonl'}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    config = _load_config(args)
    events_path = Path(args.events)
    if not events_path.exists():
        raise FileNotFoundError(f"events file not found: {events_path}")
    config.require_files("ontology")
    ontology = _resolve_ontology(config)
    events = read_events(events_path)
    valid = sum(1 for event in events if event.is_valid)
    counts = {"events": len(events), "valid": valid, "anomalous": len(events) - valid}
    out = _out_dir(config)
    write_report(
        events,
        ontology,
        out,
        build_manifest(None, None, None, config.snapshot(), counts),
    )
    print(f"report bundle written to {out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    events_path = Path(args.events)
    if not events_path.exists():
        raise FileNotFoundError(f"events file not found: {events_path}")
    gold_path = args.gold or config.gold
    if not gold_path:
        raise UsageError("evaluate needs gold labels (--gold or config)")
    if not Path(gold_path).exists():
        raise FileNotFoundError(f"gold file not found: {gold_path}")
    config.require_files("ontology", "gazetteer", "abbreviations")

    ontology = _resolve_ontology(config)
    gold = read_gold(gold_path, ontology)
    systems = {"few-shot": read_events(events_path)}
    if args.zero_shot_events:
        zero_path = Path(args.zero_shot_events)
        if not zero_path.exists():
            raise FileNotFoundError(f"zero-shot events file not found: {zero_path}")
        systems["zero-shot"] = read_events(zero_path)
    if args.baseline == "rules":
        if not config.corpus:
            raise UsageError("--baseline rules needs the corpus CSV (--corpus or config)")
        config.require_files("corpus")
        records, _ = load_records_from_path(config.corpus, config.column_map)
        cleaned = prepare_records(records, _resolve_abbreviations(config))
        systems["rule-based"] = rule_based_events(cleaned, _resolve_gazetteer(config, ontology))

    result = compare_systems(systems, gold, ontology)
    out = _out_dir(config)
    (out / "comparison.csv").write_text(result.table.to_csv_text(), encoding="utf-8")
    comparison = result.table.to_dict()
    comparison["ignored_predictions"] = result.ignored_predictions
    (out / "comparison.json").write_text(
        json.dumps(comparison, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    counts = {"gold": len(gold), "systems": len(systems)}
    write_manifest(
        out / "manifest.json",
        build_manifest(None, None, None, config.snapshot(), counts),
    )
    print(result.table.to_csv_text(), end="")
    return EXIT_OK


def cmd_judge(args: argparse.Namespace) -> int:
    config = _load_config(args)
    events_path = Path(args.events)
    if not events_path.exists():
        raise FileNotFoundError(f"events file not found: {events_path}")
    if not config.corpus:
        raise UsageError("judge needs the corpus CSV (--corpus or config)")
    config.require_files("corpus", "ontology", "abbreviations", "fixtures")

    events = read_events(events_path)
    records, _ = load_records_from_path(config.corpus, config.column_map)
    cleaned = prepare_records(records, _resolve_abbreviations(config))
    backend = _make_backend(config)
    params = _completion_params(config)
    outcomes = judge_corpus(cleaned, events, backend, params, parallelism=config.parallelism)

    out = _out_dir(config)
    with open(out / "judgements.jsonl", "w", encoding="utf-8") as handle:
        for outcome in outcomes:
            handle.write(json.dumps(outcome.to_dict(), ensure_ascii=False) + "\n")

    scores = [outcome.scores for outcome in outcomes if outcome.scores is not None]
    anomalous = sum(1 for outcome in outcomes if outcome.anomalous)
    summary = aggregate_judgements(scores, anomalous=anomalous)
    summary["skipped_invalid_events"] = sum(1 for event in events if not event.is_valid)
    (out / "judge_summary.json").write_text(
        json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    counts = {"judged": len(outcomes), "anomalous": anomalous}
    write_manifest(
        out / "manifest.json",
        build_manifest(config.model, None, None, config.snapshot(), counts),
    )
    if summary["means"] is not None:
        means = summary["means"]
        print(" / ".join(f"{key}: {means[key]}" for key in JUDGE_KEYS))
    print(f"judged {len(outcomes)} events ({anomalous} anomalous)")
    return EXIT_OK


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config.require_files("ontology")
    ontology = _resolve_ontology(config)
    corpus = generate_corpus(seed=config.seed, n=args.n, ontology=ontology)

    out = _out_dir(config)
    corpus_path = out / "corpus.csv"
    with open(corpus_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([config.column_map.problem, config.column_map.action])
        for record in corpus.records:
            writer.writerow([record.problem_text, record.action_text])
    write_gold(corpus.gold, out / "gold.csv")
    write_fixtures(corpus.fixtures, out / "fixtures.json")
    counts = {"records": len(corpus.records)}
    write_manifest(
        out / "manifest.json",
        build_manifest(None, None, None, config.snapshot(), counts),
    )
    print(f"generated {len(corpus.records)} records into {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run config; flags override its values")
    parser.add_argument("--corpus", help="corpus CSV path")
    parser.add_argument("--ontology", help="ontology JSON path (default: built-in)")
    parser.add_argument("--abbreviations", help="abbreviation dictionary JSON path")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="deterministic seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logsyn", description="Structure maintenance logs and evaluate the result")
    commands = parser.add_subparsers(dest="command", metavar="command")

    ingest = commands.add_parser("ingest", help="validate a corpus CSV and report counts")
    _add_common(ingest)
    ingest.set_defaults(func=cmd_ingest)

    structure = commands.add_parser("structure", help="run stages a-d and write events.jsonl")
    _add_common(structure)
    structure.add_argument("--backend", choices=("scripted", "http"), help="completion backend")
    structure.add_argument("--fixtures", help="scripted backend fixtures JSON")
    structure.add_argument("--exemplars", help="exemplar JSONL path (default: built-in)")
    structure.add_argument("--prompt-variant", help="prompt template JSON path")
    structure.add_argument("--shots", type=int, help="number of exemplars (0 = zero-shot)")
    structure.add_argument("--model", help="model name recorded and sent to the backend")
    structure.add_argument("--parallelism", type=int, help="worker pool size")
    structure.add_argument("--content-retries", dest="content_retries", type=int,
                           help="re-asks for malformed output")
    structure.set_defaults(func=cmd_structure)

    report = commands.add_parser("report", help="aggregate an events file into the report bundle")
    _add_common(report)
    report.add_argument("--events", required=True, help="events.jsonl path")
    report.set_defaults(func=cmd_report)

    evaluate = commands.add_parser("evaluate", help="compare systems against gold labels")
    _add_common(evaluate)
    evaluate.add_argument("--events", required=True, help="few-shot events.jsonl path")
    evaluate.add_argument("--gold", help="gold labels CSV")
    evaluate.add_argument("--zero-shot-events", dest="zero_shot_events",
                          help="events.jsonl from a zero-shot run")
    evaluate.add_argument("--baseline", choices=("rules",), help="add the rule-based baseline")
    evaluate.add_argument("--gazetteer", help="gazetteer JSON path (default: built-in)")
    evaluate.set_defaults(func=cmd_evaluate)

    judge = commands.add_parser("judge", help="score valid events with a judge backend")
    _add_common(judge)
    judge.add_argument("--events", required=True, help="events.jsonl path")
    judge.add_argument("--backend", choices=("scripted", "http"), help="judge backend")
    judge.add_argument("--fixtures", help="scripted judge fixtures JSON")
    judge.add_argument("--model", help="judge model name")
    judge.add_argument("--parallelism", type=int, help="worker pool size")
    judge.set_defaults(func=cmd_judge)

    gen = commands.add_parser("gen-corpus", help="generate a synthetic corpus, gold set, and fixtures")
    _add_common(gen)
    gen.add_argument("--n", type=int, default=200, help="number of records")
    gen.set_defaults(func=cmd_gen_corpus)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuthError as exc:
        print(f"auth error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except InvariantViolation as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (FileNotFoundError, ValueError, OSError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
