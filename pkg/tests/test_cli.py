from __future__ import annotations

import json

import pytest

from locsum.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main


def run(argv):
    return main(argv)


def test_ingest_writes_normalized_dump(meetings_dir, tmp_path, capsys):
    out = tmp_path / "dump.json"
    assert run(["ingest", "--input", str(meetings_dir), "--output", str(out)]) == EXIT_OK
    payload = json.loads(out.read_text())
    assert {m["id"] for m in payload["meetings"]} == {"covid_committee", "product_kickoff"}


def test_validate_clean_corpus(meetings_dir, capsys):
    assert run(["validate", "--input", str(meetings_dir)]) == EXIT_OK
    assert "0 violations" in capsys.readouterr().out


def test_validate_missing_directory_is_data_error(tmp_path, capsys):
    assert run(["validate", "--input", str(tmp_path / "nowhere")]) == EXIT_DATA


def test_bad_config_key_is_config_error(meetings_dir, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"no_such_key": 1}))
    code = run(
        [
            "evaluate",
            "--config",
            str(config),
            "--test-dir",
            str(meetings_dir),
            "--seed",
            "0",
            "--output-dir",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_CONFIG


def test_gold_evaluate_writes_reports(meetings_dir, tmp_path, capsys):
    out_dir = tmp_path / "out"
    code = run(
        [
            "evaluate",
            "--test-dir",
            str(meetings_dir),
            "--seed",
            "0",
            "--span-source",
            "gold",
            "--summarizer",
            "lead3",
            "--output-dir",
            str(out_dir),
        ]
    )
    assert code == EXIT_OK
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "report.json").exists()
    assert (out_dir / "artifacts.jsonl").exists()
    rows = json.loads((out_dir / "rows.json").read_text())
    assert {r["span_source"] for r in rows} == {"gold", "gold-general"}


def test_evaluate_twice_is_byte_identical(meetings_dir, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        assert (
            run(
                [
                    "evaluate",
                    "--test-dir",
                    str(meetings_dir),
                    "--seed",
                    "7",
                    "--span-source",
                    "gold",
                    "--summarizer",
                    "lead3",
                    "--output-dir",
                    str(out_dir),
                ]
            )
            == EXIT_OK
        )
        outputs.append(
            {
                "csv": (out_dir / "report.csv").read_bytes(),
                "json": (out_dir / "report.json").read_bytes(),
                "artifacts": (out_dir / "artifacts.jsonl").read_bytes(),
            }
        )
    assert outputs[0] == outputs[1]


def test_train_then_locate_then_evaluate(meetings_dir, tmp_path, capsys):
    checkpoint = tmp_path / "locator.qloc"
    code = run(
        [
            "train",
            "--train-dir",
            str(meetings_dir),
            "--seed",
            "3",
            "--backend",
            "hash",
            "--dim",
            "16",
            "--epochs",
            "2",
            "--output",
            str(checkpoint),
        ]
    )
    assert code == EXIT_OK
    assert checkpoint.exists()
    assert (tmp_path / "locator.qloc.json").exists()

    # a backend whose dimension disagrees with the checkpoint is refused
    code = run(
        [
            "locate",
            "--input",
            str(meetings_dir),
            "--checkpoint",
            str(checkpoint),
        ]
    )
    assert code == EXIT_CONFIG  # default hash dim 64 != checkpoint dim 16

    spans_file = tmp_path / "spans.json"
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"embedding_backend": "hash", "embedding_dim": 16}))
    code = run(
        [
            "locate",
            "--config",
            str(config),
            "--input",
            str(meetings_dir),
            "--checkpoint",
            str(checkpoint),
            "--output",
            str(spans_file),
        ]
    )
    assert code == EXIT_OK
    records = json.loads(spans_file.read_text())
    assert len(records) == 4  # specific queries in the fixture
    for record in records:
        assert 0 <= record["start"] <= record["end"]

    out_dir = tmp_path / "located_out"
    config = tmp_path / "eval.json"
    config.write_text(
        json.dumps(
            {
                "embedding_backend": "hash",
                "embedding_dim": 16,
                "embedding_seed": 0,
                "span_source": "located",
                "summarizer": "lead3",
            }
        )
    )
    code = run(
        [
            "evaluate",
            "--config",
            str(config),
            "--test-dir",
            str(meetings_dir),
            "--seed",
            "3",
            "--checkpoint",
            str(checkpoint),
            "--output-dir",
            str(out_dir),
        ]
    )
    assert code == EXIT_OK
    rows = json.loads((out_dir / "rows.json").read_text())
    assert rows[0]["span_source"] == "located (hash)"


def test_report_renders_table(meetings_dir, tmp_path, capsys):
    out_dir = tmp_path / "out"
    run(
        [
            "evaluate",
            "--test-dir",
            str(meetings_dir),
            "--seed",
            "0",
            "--span-source",
            "gold",
            "--summarizer",
            "lead3",
            "--output-dir",
            str(out_dir),
        ]
    )
    capsys.readouterr()
    assert run(["report", "--rows", str(out_dir / "rows.json"), "--format", "table"]) == EXIT_OK
    table = capsys.readouterr().out
    assert "span_source" in table
    assert "Mean" in table


def test_summarize_gold_spans(meetings_dir, tmp_path):
    out = tmp_path / "summaries.json"
    code = run(
        [
            "summarize",
            "--input",
            str(meetings_dir),
            "--summarizer",
            "lead2",
            "--output",
            str(out),
        ]
    )
    assert code == EXIT_OK
    records = json.loads(out.read_text())
    assert len(records) == 4
    assert all(r["summary"] for r in records)
