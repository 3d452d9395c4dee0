#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
报告读写
投票 CSV、训练日志、混淆矩阵、曲线与摘要 JSON 的序列化；
投票 CSV 同时保存逐次投票序列，报告可以完全由它重算
"""

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from .analytics import NO_CHOICE, ConfusionMatrix, choices, entropy_bits, vote_counts
from .errors import DataPathError, VotesParseError
from .trainer import TrainingLog

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

VOTES_PREFIX = ["item", "label", "first", "second", "entropy"]
VOTES_STREAM = "stream"


@dataclass(frozen=True)
class VoteTable:
    """投票 CSV 的内容：每项标签与 K 次投票"""

    items: np.ndarray
    labels: np.ndarray
    streams: np.ndarray
    n_classes: int

    @property
    def samples(self) -> int:
        return int(self.streams.shape[1])

    def counts(self) -> np.ndarray:
        return vote_counts(self.streams, self.n_classes)


def format_value(value: Any) -> str:
    """CSV 单元格格式：浮点数固定 10 位有效数字，None 为空"""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def _replace_atomically(path: Path, write) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "w", encoding="utf-8", newline="") as f:
        write(f)
    os.replace(tmp_path, path)
    return path


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    """写入键排序的 JSON（NaN 记为 null）"""

    def dump(f):
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")

    return _replace_atomically(Path(path), dump)


def write_rows(
    path: PathLike, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]
) -> Path:
    """按列名写入字典行"""

    def dump(f):
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_value(row.get(name)) for name in fieldnames])

    return _replace_atomically(Path(path), dump)


def write_votes_csv(
    path: PathLike, labels: np.ndarray, streams: np.ndarray, n_classes: int
) -> Path:
    """
    写入逐项投票表

    列: item, label, first, second, entropy, c0..c{n-1}, stream
    stream 为空格分隔的 K 次投票；second 不存在时为空。
    """
    streams = np.asarray(streams, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    counts = vote_counts(streams, n_classes)
    first, second = choices(counts)
    entropy = entropy_bits(counts)
    header = VOTES_PREFIX + [f"c{c}" for c in range(n_classes)] + [VOTES_STREAM]

    def dump(f):
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for item in range(streams.shape[0]):
            writer.writerow(
                [
                    item,
                    int(labels[item]),
                    int(first[item]),
                    "" if second[item] == NO_CHOICE else int(second[item]),
                    format_value(entropy[item]),
                    *counts[item].tolist(),
                    " ".join(map(str, streams[item].tolist())),
                ]
            )

    _replace_atomically(Path(path), dump)
    logger.info("投票表已写入: %s (%d 项, K=%d)", path, streams.shape[0], streams.shape[1])
    return Path(path)


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise VotesParseError(line, f"列 {column} 不是整数: {text!r}") from None


def _parse_header(header: List[str]) -> int:
    if header[: len(VOTES_PREFIX)] != VOTES_PREFIX or header[-1:] != [VOTES_STREAM]:
        raise VotesParseError(1, f"表头不符合投票表格式: {','.join(header)}")
    class_columns = header[len(VOTES_PREFIX) : -1]
    expected = [f"c{c}" for c in range(len(class_columns))]
    if len(class_columns) < 2 or class_columns != expected:
        raise VotesParseError(1, f"类别计数列必须为 c0..cN: {','.join(class_columns)}")
    return len(class_columns)


def read_votes_csv(path: PathLike) -> VoteTable:
    """
    读取投票表并校验每一行

    Raises:
        DataPathError: 文件不存在
        VotesParseError: 格式错误（带行号）
    """
    if not Path(path).is_file():
        raise DataPathError(f"投票表不存在: {path}")

    items: List[int] = []
    labels: List[int] = []
    streams: List[List[int]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise VotesParseError(1, "文件为空")
        n_classes = _parse_header(header)
        width = len(header)

        for row in reader:
            line = reader.line_num
            if len(row) != width:
                raise VotesParseError(line, f"列数 {len(row)}，期望 {width}")
            label = _parse_int(row[1], line, "label")
            if not 0 <= label < n_classes:
                raise VotesParseError(line, f"标签超出范围: {label}")
            stream = [_parse_int(t, line, VOTES_STREAM) for t in row[-1].split()]
            if not stream:
                raise VotesParseError(line, "投票序列为空")
            if streams and len(stream) != len(streams[0]):
                raise VotesParseError(
                    line, f"投票次数 {len(stream)} 与前文 {len(streams[0])} 不一致"
                )
            if min(stream) < 0 or max(stream) >= n_classes:
                raise VotesParseError(line, "投票类别超出范围")
            recorded = [_parse_int(t, line, "count") for t in row[len(VOTES_PREFIX) : -1]]
            if recorded != np.bincount(stream, minlength=n_classes).tolist():
                raise VotesParseError(line, "计数列与投票序列不一致")
            items.append(_parse_int(row[0], line, "item"))
            labels.append(label)
            streams.append(stream)

    if not streams:
        raise VotesParseError(2, "投票表没有数据行")
    return VoteTable(
        items=np.asarray(items, dtype=np.int64),
        labels=np.asarray(labels, dtype=np.int64),
        streams=np.asarray(streams, dtype=np.int64),
        n_classes=n_classes,
    )


def write_training_log(path: PathLike, log: TrainingLog) -> Path:
    """训练日志：epoch, loss, train_acc, test_acc"""
    rows = [
        {
            "epoch": r.epoch,
            "loss": r.loss,
            "train_acc": r.train_acc,
            "test_acc": r.test_acc,
        }
        for r in log.records
    ]
    return write_rows(path, ["epoch", "loss", "train_acc", "test_acc"], rows)


def write_confusion_csv(path: PathLike, matrix: ConfusionMatrix) -> Path:
    """混淆矩阵：第一列为真实类别，其余列为各预测类别的计数"""
    names = [f"pred_{c}" for c in range(matrix.n_classes)]
    rows = []
    for true_class in range(matrix.n_classes):
        row = {"true": true_class}
        row.update(zip(names, matrix.counts[true_class].tolist()))
        rows.append(row)
    return write_rows(path, ["true"] + names, rows)


def write_curve_csv(path: PathLike, curve: Sequence[Sequence[float]]) -> Path:
    return write_rows(
        path, ["k", "accuracy"], ({"k": k, "accuracy": acc} for k, acc in curve)
    )
