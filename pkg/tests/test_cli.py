#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json

import pytest

import cli

SYNTHETIC = [
    "--dataset", "synthetic",
    "--n-classes", "3",
    "--synthetic-dim", "4",
    "--synthetic-per-class", "10",
    "--seed", "5",
]


def test_parser_parses_lists():
    args = cli.build_parser().parse_args(
        ["holdout", "--arch", "4,8,3", "--holdout-fractions", "0,0.9", "--checkpoints", "1,5"]
    )
    assert args.arch == [4, 8, 3]
    assert args.holdout_fractions == [0.0, 0.9]
    assert args.checkpoints == [1, 5]


def test_train_sample_report(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(
        ["train", *SYNTHETIC, "--arch", "4,6,3", "--epochs", "3", "--output-dir", str(out)]
    )
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["subcommand"] == "train"

    code = cli.main(
        [
            "sample", *SYNTHETIC,
            "--model-path", printed["outputs"]["model"],
            "--samples", "8",
            "--precision", "4",
            "--output-dir", str(out),
        ]
    )
    assert code == 0
    votes = json.loads(capsys.readouterr().out)["outputs"]["votes"]

    assert cli.main(["report", "--votes-path", votes, "--output-dir", str(out)]) == 0
    assert (out / "confusion_second.csv").is_file()
    assert (out / "manifest_report.json").is_file()


def test_missing_dataset_exits_2(tmp_path):
    code = cli.main(["train", "--data-dir", str(tmp_path / "none"), "--output-dir", str(tmp_path / "o")])
    assert code == 2
    assert not (tmp_path / "o").exists()


def test_invalid_precision_exits_2(tmp_path):
    code = cli.main(
        ["sample", "--model-path", "m.scann", "--precision", "20", "--output-dir", str(tmp_path)]
    )
    assert code == 2


def test_sampling_flag_on_train_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--precision", "4"])
    assert exc.value.code == 2


def test_malformed_votes_exits_2(tmp_path, capsys):
    path = tmp_path / "votes.csv"
    path.write_text("not,a,votes,file\n", encoding="utf-8")
    assert cli.main(["report", "--votes-path", str(path), "--output-dir", str(tmp_path)]) == 2
    assert "第 1 行" in capsys.readouterr().err


def test_unexpected_error_exits_1(tmp_path, monkeypatch):
    def explode(run):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "run_command", explode)
    votes = tmp_path / "v.csv"
    assert cli.main(["report", "--votes-path", str(votes), "--output-dir", str(tmp_path)]) == 1


def test_config_file_values_are_overridden(tmp_path, capsys):
    config_path = tmp_path / "c.json"
    config_path.write_text(
        json.dumps({"dataset": "synthetic", "n_classes": 3, "synthetic_dim": 4,
                    "synthetic_per_class": 10, "arch": [4, 5, 3], "epochs": 50}),
        encoding="utf-8",
    )
    code = cli.main(
        ["train", "--config", str(config_path), "--epochs", "2", "--output-dir", str(tmp_path)]
    )
    assert code == 0
    manifest = json.loads((tmp_path / "manifest_train.json").read_text(encoding="utf-8"))
    assert manifest["config"]["train"]["epochs"] == 2
    assert manifest["config"]["arch"] == [4, 5, 3]
