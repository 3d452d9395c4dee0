#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json

import numpy as np
import pytest

from core.analytics import ConfusionMatrix
from core.errors import DataPathError, VotesParseError
from core.reports import (
    format_value,
    read_votes_csv,
    write_confusion_csv,
    write_json,
    write_votes_csv,
)

STREAMS = np.array([[0, 0, 1, 0], [2, 2, 2, 2], [1, 0, 1, 1]])
LABELS = np.array([0, 2, 0])


@pytest.fixture
def votes_file(tmp_path):
    return write_votes_csv(tmp_path / "votes.csv", LABELS, STREAMS, 3)


class TestVotesCsv:
    def test_layout(self, votes_file):
        lines = votes_file.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "item,label,first,second,entropy,c0,c1,c2,stream"
        assert lines[1].startswith("0,0,0,1,")
        assert lines[1].endswith(",3,1,0,0 0 1 0")
        # 全票一致时第二选择为空
        assert lines[2].split(",")[3] == ""

    def test_read_back(self, votes_file):
        table = read_votes_csv(votes_file)
        assert table.n_classes == 3
        assert table.samples == 4
        assert np.array_equal(table.streams, STREAMS)
        assert np.array_equal(table.labels, LABELS)
        assert table.counts().tolist() == [[3, 1, 0], [0, 0, 4], [1, 3, 0]]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataPathError):
            read_votes_csv(tmp_path / "missing.csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "v.csv"
        path.write_text("item,label,stream\n", encoding="utf-8")
        with pytest.raises(VotesParseError) as exc:
            read_votes_csv(path)
        assert exc.value.line == 1

    @pytest.mark.parametrize(
        "row",
        [
            "0,0,0,,0,1,0,0",
            "0,x,0,,0,1,0,0,0",
            "0,0,0,,0,1,0,0,7",
            "0,0,0,,0,2,0,0,0",
            "0,0,0,,0,0,0,0,",
        ],
    )
    def test_malformed_row_reports_line(self, votes_file, row):
        text = votes_file.read_text(encoding="utf-8") + row + "\n"
        votes_file.write_text(text, encoding="utf-8")
        with pytest.raises(VotesParseError) as exc:
            read_votes_csv(votes_file)
        assert exc.value.line == 5

    def test_inconsistent_stream_length(self, votes_file):
        text = votes_file.read_text(encoding="utf-8") + "3,0,0,,0,1,0,0,0\n"
        votes_file.write_text(text, encoding="utf-8")
        with pytest.raises(VotesParseError) as exc:
            read_votes_csv(votes_file)
        assert "不一致" in str(exc.value)

    def test_header_only(self, tmp_path):
        path = tmp_path / "v.csv"
        path.write_text("item,label,first,second,entropy,c0,c1,stream\n", encoding="utf-8")
        with pytest.raises(VotesParseError):
            read_votes_csv(path)


def test_confusion_csv(tmp_path):
    path = write_confusion_csv(tmp_path / "cm.csv", ConfusionMatrix(np.array([[2, 1], [0, 3]])))
    assert path.read_text(encoding="utf-8").splitlines() == [
        "true,pred_0,pred_1",
        "0,2,1",
        "1,0,3",
    ]


def test_json_sorted_and_nan_as_null(tmp_path):
    path = write_json(tmp_path / "s.json", {"b": float("nan"), "a": np.int64(3)})
    text = path.read_text(encoding="utf-8")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": 3, "b": None}


def test_format_value():
    assert format_value(None) == ""
    assert format_value(0.1 + 0.2) == "0.3"
    assert format_value(np.float64(1.0)) == "1"
    assert format_value(7) == "7"
