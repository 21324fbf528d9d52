from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from logsyn.cli import (
    EXIT_BACKEND,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    run,
)


def _gen(tmp_path: Path, n: int = 10, seed: int = 1) -> Path:
    out = tmp_path / "corpus"
    assert run(["gen-corpus", "--n", str(n), "--seed", str(seed), "--out", str(out)]) == EXIT_OK
    return out


def _structure(tmp_path: Path, corpus_dir: Path, name: str = "run", extra: list[str] | None = None) -> Path:
    out = tmp_path / name
    argv = [
        "structure",
        "--corpus",
        str(corpus_dir / "corpus.csv"),
        "--backend",
        "scripted",
        "--fixtures",
        str(corpus_dir / "fixtures.json"),
        "--out",
        str(out),
    ]
    assert run(argv + (extra or [])) == EXIT_OK
    return out


def test_gen_corpus_writes_corpus_gold_fixtures_manifest(tmp_path) -> None:
    out = _gen(tmp_path, n=12)
    for name in ("corpus.csv", "gold.csv", "fixtures.json", "manifest.json"):
        assert (out / name).exists()
    with open(out / "corpus.csv", newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["Problem", "Action Taken"]
    assert len(rows) == 13


def test_structure_happy_path_writes_events_and_manifest(tmp_path, capsys) -> None:
    corpus = _gen(tmp_path, n=10)
    out = _structure(tmp_path, corpus)
    lines = (out / "events.jsonl").read_text().splitlines()
    assert len(lines) == 10
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["counts"]["valid"] == 10
    assert manifest["counts"]["anomalous"] == 0
    assert manifest["exemplar_file_hash"]
    assert manifest["template_variant"] == "default-v1"
    captured = capsys.readouterr()
    assert "10" in captured.out


def test_structure_reruns_are_byte_identical(tmp_path) -> None:
    corpus = _gen(tmp_path, n=15)
    first = _structure(tmp_path, corpus, "a")
    second = _structure(tmp_path, corpus, "b")
    assert (first / "events.jsonl").read_bytes() == (second / "events.jsonl").read_bytes()


def test_structure_zero_shot_flag(tmp_path) -> None:
    corpus = _gen(tmp_path, n=5)
    out = _structure(tmp_path, corpus, "zs", extra=["--shots", "0"])
    assert len((out / "events.jsonl").read_text().splitlines()) == 5


def test_structure_with_prompt_variant(tmp_path) -> None:
    from importlib import resources

    corpus = _gen(tmp_path, n=5)
    variant = tmp_path / "variant.json"
    variant.write_text(
        resources.files("logsyn").joinpath("data/template_concise.json").read_text()
    )
    out = _structure(tmp_path, corpus, "variant", extra=["--prompt-variant", str(variant)])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["template_variant"] == "concise-v1"


def test_report_counts_match_events(tmp_path) -> None:
    corpus = _gen(tmp_path, n=10)
    structured = _structure(tmp_path, corpus)
    report = tmp_path / "report"
    assert (
        run(["report", "--events", str(structured / "events.jsonl"), "--out", str(report)])
        == EXIT_OK
    )
    distribution = json.loads((report / "distribution.json").read_text())
    valid_lines = sum(
        1
        for line in (structured / "events.jsonl").read_text().splitlines()
        if json.loads(line)["status"] == "Valid"
    )
    assert sum(distribution["counts"].values()) == valid_lines
    assert (report / "manifest.json").exists()


def test_report_bundle_reruns_byte_identical_data_files(tmp_path) -> None:
    corpus = _gen(tmp_path, n=10)
    structured = _structure(tmp_path, corpus)
    first, second = tmp_path / "r1", tmp_path / "r2"
    for report in (first, second):
        assert (
            run(["report", "--events", str(structured / "events.jsonl"), "--out", str(report)])
            == EXIT_OK
        )
    for name in ("distribution.json", "distribution.csv", "sankey.json", "pathways.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_evaluate_with_rule_baseline_has_two_columns(tmp_path) -> None:
    corpus = _gen(tmp_path, n=10)
    structured = _structure(tmp_path, corpus)
    out = tmp_path / "eval"
    code = run(
        [
            "evaluate",
            "--events",
            str(structured / "events.jsonl"),
            "--gold",
            str(corpus / "gold.csv"),
            "--baseline",
            "rules",
            "--corpus",
            str(corpus / "corpus.csv"),
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    with open(out / "comparison.csv", newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["Metric", "few-shot", "rule-based"]
    assert len(rows[0]) >= 3
    comparison = json.loads((out / "comparison.json").read_text())
    assert comparison["metrics"]["Accuracy"]["few-shot"] == "1.0000"
    assert comparison["metrics"]["Accuracy"]["rule-based"] == "1.0000"
    assert (out / "manifest.json").exists()


def test_evaluate_with_zero_shot_events_column(tmp_path) -> None:
    corpus = _gen(tmp_path, n=8)
    few = _structure(tmp_path, corpus, "few")
    zero = _structure(tmp_path, corpus, "zero", extra=["--shots", "0"])
    out = tmp_path / "eval"
    code = run(
        [
            "evaluate",
            "--events",
            str(few / "events.jsonl"),
            "--zero-shot-events",
            str(zero / "events.jsonl"),
            "--gold",
            str(corpus / "gold.csv"),
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    with open(out / "comparison.csv", newline="") as handle:
        header = next(csv.reader(handle))
    assert header == ["Metric", "few-shot", "zero-shot"]


def test_judge_subcommand_writes_judgements_and_summary(tmp_path) -> None:
    corpus = _gen(tmp_path, n=4)
    structured = _structure(tmp_path, corpus)
    judge_fixtures = tmp_path / "judge_fixtures.json"
    scores = {
        str(i): json.dumps(
            {"summary_accuracy": 5, "component_accuracy": 4, "category_relevance": 5}
        )
        for i in range(1, 5)
    }
    judge_fixtures.write_text(json.dumps(scores))
    out = tmp_path / "judged"
    code = run(
        [
            "judge",
            "--events",
            str(structured / "events.jsonl"),
            "--corpus",
            str(corpus / "corpus.csv"),
            "--backend",
            "scripted",
            "--fixtures",
            str(judge_fixtures),
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    lines = (out / "judgements.jsonl").read_text().splitlines()
    assert len(lines) == 4
    summary = json.loads((out / "judge_summary.json").read_text())
    assert summary["n"] == 4
    assert summary["anomalous"] == 0
    assert (out / "manifest.json").exists()
    assert summary["means"] == {
        "summary_accuracy": 5.0,
        "component_accuracy": 4.0,
        "category_relevance": 5.0,
    }


def test_unknown_subcommand_is_usage_error(capsys) -> None:
    assert run(["frobnicate"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()


def test_no_subcommand_is_usage_error(capsys) -> None:
    assert run([]) == EXIT_USAGE
    assert capsys.readouterr().err


def test_missing_corpus_file_is_input_error(tmp_path, capsys) -> None:
    code = run(
        [
            "structure",
            "--corpus",
            str(tmp_path / "absent.csv"),
            "--backend",
            "scripted",
            "--fixtures",
            str(tmp_path / "absent.json"),
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_INPUT
    assert capsys.readouterr().err


def test_structure_scripted_without_fixtures_is_input_error(tmp_path) -> None:
    corpus = _gen(tmp_path, n=3)
    code = run(
        [
            "structure",
            "--corpus",
            str(corpus / "corpus.csv"),
            "--backend",
            "scripted",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_INPUT


def test_http_backend_without_endpoint_is_backend_error(tmp_path, monkeypatch) -> None:
    monkeypatch.delenv("LOGSYN_API_BASE", raising=False)
    corpus = _gen(tmp_path, n=3)
    code = run(
        [
            "structure",
            "--corpus",
            str(corpus / "corpus.csv"),
            "--backend",
            "http",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_BACKEND


def test_ingest_reports_counts(tmp_path, capsys) -> None:
    corpus_csv = tmp_path / "corpus.csv"
    corpus_csv.write_text("Problem,Action Taken\nleak,fixed\n,skipped\ncrack,patched\n")
    out = tmp_path / "out"
    assert run(["ingest", "--corpus", str(corpus_csv), "--out", str(out)]) == EXIT_OK
    captured = capsys.readouterr()
    assert "accepted: 2" in captured.out
    assert "rejected: 1" in captured.out
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["counts"] == {"rows": 3, "accepted": 2, "rejected": 1}


def test_config_file_with_flag_override(tmp_path) -> None:
    corpus = _gen(tmp_path, n=6)
    config_path = tmp_path / "run.json"
    config_path.write_text(
        json.dumps(
            {
                "corpus": str(corpus / "corpus.csv"),
                "backend": "scripted",
                "fixtures": str(corpus / "fixtures.json"),
                "output_dir": str(tmp_path / "from-config"),
                "parallelism": 2,
            }
        )
    )
    override_out = tmp_path / "from-flag"
    assert run(["structure", "--config", str(config_path), "--out", str(override_out)]) == EXIT_OK
    assert (override_out / "events.jsonl").exists()
    assert not (tmp_path / "from-config").exists()


def test_config_rejects_unknown_keys(tmp_path) -> None:
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"corups": "typo.csv"}))
    assert run(["structure", "--config", str(config_path)]) == EXIT_INPUT


def test_run_config_snapshot_is_json_serializable() -> None:
    snapshot = RunConfig().snapshot()
    json.dumps(snapshot)
    assert snapshot["column_map"] == {"id": "synthesize", "problem": "Problem", "action": "Action Taken"}


def test_subcommands_do_not_mutate_inputs(tmp_path) -> None:
    corpus = _gen(tmp_path, n=5)
    before = {name: (corpus / name).read_bytes() for name in ("corpus.csv", "gold.csv", "fixtures.json")}
    structured = _structure(tmp_path, corpus)
    run(["report", "--events", str(structured / "events.jsonl"), "--out", str(tmp_path / "rep")])
    run(
        [
            "evaluate",
            "--events",
            str(structured / "events.jsonl"),
            "--gold",
            str(corpus / "gold.csv"),
            "--out",
            str(tmp_path / "ev"),
        ]
    )
    after = {name: (corpus / name).read_bytes() for name in ("corpus.csv", "gold.csv", "fixtures.json")}
    assert before == after
