#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
采样投票统计分析
将多次采样的投票汇总为第一/第二选择、混淆矩阵、香农熵与信息量，
以及准确率-采样数曲线和留出类熵对比
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AnalysisError

logger = logging.getLogger(__name__)

# 第二选择不存在时的标记（数组形式）
NO_CHOICE = -1


@dataclass(frozen=True)
class VoteDistribution:
    """单个输入在 K 次采样中的类别投票直方图"""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise AnalysisError("投票计数必须是非空一维数组")
        if np.any(counts < 0):
            raise AnalysisError("投票计数不能为负")
        if counts.sum() < 1:
            raise AnalysisError("投票总数必须至少为 1")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return int(self.counts.size)

    @classmethod
    def from_votes(cls, votes: Sequence[int], n_classes: int) -> "VoteDistribution":
        """由逐次采样的类别序列构造"""
        votes = np.asarray(votes, dtype=np.int64)
        return cls(np.bincount(votes, minlength=n_classes)[:n_classes])

    def shares(self) -> np.ndarray:
        """各类别投票占比"""
        return self.counts / self.total


@dataclass(frozen=True)
class ConfusionMatrix:
    """混淆矩阵：行为真实类别，列为预测类别"""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        total = self.total
        return float(np.trace(self.counts) / total) if total else 0.0


@dataclass(frozen=True)
class EntropyReport:
    """逐项熵/信息量以及按正确性划分的均值"""

    entropy: np.ndarray
    information: np.ndarray
    correct: np.ndarray
    labels: np.ndarray
    first: np.ndarray
    n_classes: int

    @property
    def mean_entropy_correct(self) -> float:
        return _safe_mean(self.entropy[self.correct])

    @property
    def mean_entropy_incorrect(self) -> float:
        return _safe_mean(self.entropy[~self.correct])

    def summary(self) -> Dict[str, float]:
        return {
            "items": int(self.entropy.size),
            "mean_entropy": _safe_mean(self.entropy),
            "mean_information": _safe_mean(self.information),
            "mean_entropy_correct": self.mean_entropy_correct,
            "mean_entropy_incorrect": self.mean_entropy_incorrect,
            "n_correct": int(self.correct.sum()),
            "n_incorrect": int((~self.correct).sum()),
        }


@dataclass(frozen=True)
class HoldoutEntropy:
    """留出类与其他类的熵/信息量对比"""

    holdout_class: int
    h_in: float
    h_out: float
    i_in: float
    i_out: float
    n_in: int
    n_out: int


def _safe_mean(values: np.ndarray) -> float:
    return float(np.mean(values)) if values.size else float("nan")


def first_choice(votes: VoteDistribution) -> int:
    """得票最多的类别，平票取最小下标"""
    return int(np.argmax(votes.counts))


def second_choice(votes: VoteDistribution) -> Optional[int]:
    """
    得票第二多的类别

    Returns:
        Optional[int]: 少于两个类别有票时返回 None
    """
    if np.count_nonzero(votes.counts) < 2:
        return None
    remaining = votes.counts.copy()
    remaining[first_choice(votes)] = -1
    return int(np.argmax(remaining))


def shannon_entropy(votes: VoteDistribution) -> float:
    """投票分布的香农熵（比特），0 * log2(0) 记为 0"""
    p = votes.counts[votes.counts > 0] / votes.total
    # 均匀分布的舍入误差可能略超 log2(n)
    upper = float(np.log2(votes.n_classes))
    return float(min(max(-np.sum(p * np.log2(p)), 0.0), upper))


def information(votes: VoteDistribution, n_classes: int) -> float:
    """信息量 log2(N_classes) - H"""
    if votes.n_classes > n_classes:
        raise AnalysisError(f"投票类别数 {votes.n_classes} 超过 n_classes={n_classes}")
    return float(np.log2(n_classes)) - shannon_entropy(votes)


def vote_counts(streams: np.ndarray, n_classes: int) -> np.ndarray:
    """(N, K) 投票序列 -> (N, n_classes) 计数"""
    streams = np.asarray(streams, dtype=np.int64)
    counts = np.zeros((streams.shape[0], n_classes), dtype=np.int64)
    rows = np.repeat(np.arange(streams.shape[0]), streams.shape[1])
    np.add.at(counts, (rows, streams.ravel()), 1)
    return counts


def choices(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    批量计算第一/第二选择

    Returns:
        Tuple[np.ndarray, np.ndarray]: (first, second)，second 不存在时为 NO_CHOICE
    """
    counts = np.asarray(counts, dtype=np.int64)
    first = np.argmax(counts, axis=1)
    remaining = counts.copy()
    remaining[np.arange(counts.shape[0]), first] = -1
    second = np.argmax(remaining, axis=1)
    second[np.count_nonzero(counts, axis=1) < 2] = NO_CHOICE
    return first, second


def entropy_bits(counts: np.ndarray) -> np.ndarray:
    """批量香农熵（比特）"""
    counts = np.asarray(counts, dtype=np.float64)
    p = counts / counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return np.clip(-terms.sum(axis=1), 0.0, np.log2(counts.shape[1]))


def build_confusion(
    selector: str,
    predictions: Sequence[int],
    labels: Sequence[int],
    n_classes: int,
) -> ConfusionMatrix:
    """
    构建混淆矩阵

    Args:
        selector: "first" 或 "second"；second 会跳过 NO_CHOICE 项
        predictions: 每项的预测类别
        labels: 每项的真实类别
        n_classes: 类别数
    """
    if selector not in ("first", "second"):
        raise AnalysisError(f"未知的选择器: {selector}")
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise AnalysisError(
            f"预测与标签长度不一致: {predictions.shape[0]} vs {labels.shape[0]}"
        )
    keep = predictions != NO_CHOICE
    if selector == "first" and not np.all(keep):
        raise AnalysisError("第一选择不能为空")
    bad = keep & ((predictions < 0) | (predictions >= n_classes))
    if np.any(bad):
        index = int(np.argmax(bad))
        raise AnalysisError(f"第 {index} 项预测类别越界: {int(predictions[index])}")
    if np.any((labels < 0) | (labels >= n_classes)):
        raise AnalysisError(f"标签超出类别范围 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels[keep], predictions[keep]), 1)
    return ConfusionMatrix(counts)


def accuracy_vs_samples(
    streams: np.ndarray, labels: np.ndarray, checkpoints: Sequence[int], n_classes: int
) -> List[Tuple[int, float]]:
    """
    准确率-采样数曲线：检查点 k 只使用每项前 k 次投票

    Returns:
        List[Tuple[int, float]]: [(k, 第一选择准确率), ...]
    """
    streams = np.asarray(streams, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    total = streams.shape[1]
    checkpoints = [int(k) for k in checkpoints]
    if any(k < 1 for k in checkpoints) or checkpoints != sorted(set(checkpoints)):
        raise AnalysisError(f"检查点必须为严格递增的正整数: {checkpoints}")
    if checkpoints and checkpoints[-1] > total:
        raise AnalysisError(f"检查点 {checkpoints[-1]} 超过采样次数 K={total}")

    curve = []
    for k in checkpoints:
        first, _ = choices(vote_counts(streams[:, :k], n_classes))
        curve.append((k, float(np.mean(first == labels))))
    return curve


def per_sample_accuracy(streams: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """每个采样网络（第 k 次投票）单独的准确率"""
    streams = np.asarray(streams, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    return np.mean(streams == labels[:, None], axis=0)


def build_entropy_report(
    counts: np.ndarray, labels: np.ndarray, n_classes: int
) -> EntropyReport:
    """由投票计数构建逐项熵报告（正确性只看第一选择）"""
    counts = np.asarray(counts, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if counts.shape[0] != labels.shape[0]:
        raise AnalysisError(f"计数与标签长度不一致: {counts.shape[0]} vs {labels.shape[0]}")
    entropy = entropy_bits(counts)
    first, _ = choices(counts)
    return EntropyReport(
        entropy=entropy,
        information=np.log2(n_classes) - entropy,
        correct=first == labels,
        labels=labels,
        first=first,
        n_classes=n_classes,
    )


def holdout_entropy_report(report: EntropyReport, holdout_class: int) -> HoldoutEntropy:
    """
    留出类（out）与其余类（in）的平均熵与信息量

    Raises:
        AnalysisError: 类别越界或某一侧没有样本
    """
    if not 0 <= holdout_class < report.n_classes:
        raise AnalysisError(f"留出类别越界: {holdout_class}")
    out = report.labels == holdout_class
    if not out.any() or out.all():
        raise AnalysisError(
            f"留出类 {holdout_class} 划分为空: out={int(out.sum())} in={int((~out).sum())}"
        )
    return HoldoutEntropy(
        holdout_class=int(holdout_class),
        h_in=float(np.mean(report.entropy[~out])),
        h_out=float(np.mean(report.entropy[out])),
        i_in=float(np.mean(report.information[~out])),
        i_out=float(np.mean(report.information[out])),
        n_in=int((~out).sum()),
        n_out=int(out.sum()),
    )


def bootstrap_mean_difference(
    a: np.ndarray, b: np.ndarray, resamples: int = 1000, seed: int = 0
) -> Tuple[float, float, float]:
    """
    mean(a) - mean(b) 的自助法 95% 置信区间

    Returns:
        Tuple[float, float, float]: (差值, 下界, 上界)
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise AnalysisError("自助法两组样本都不能为空")
    rng = np.random.default_rng(seed)
    idx_a = rng.integers(0, a.size, size=(resamples, a.size))
    idx_b = rng.integers(0, b.size, size=(resamples, b.size))
    diffs = a[idx_a].mean(axis=1) - b[idx_b].mean(axis=1)
    low, high = np.percentile(diffs, [2.5, 97.5])
    return float(a.mean() - b.mean()), float(low), float(high)


def entropy_histogram(report: EntropyReport, bins: int = 20) -> List[Dict[str, float]]:
    """按正确/错误分组的熵直方图，区间覆盖 [0, log2(n_classes)]"""
    edges = np.linspace(0.0, float(np.log2(report.n_classes)), bins + 1)
    correct, _ = np.histogram(report.entropy[report.correct], bins=edges)
    incorrect, _ = np.histogram(report.entropy[~report.correct], bins=edges)
    return [
        {
            "bin_low": float(edges[i]),
            "bin_high": float(edges[i + 1]),
            "n_correct": int(correct[i]),
            "n_incorrect": int(incorrect[i]),
        }
        for i in range(bins)
    ]


def misclassified_examples(
    counts: np.ndarray, labels: np.ndarray, limit: int = 25
) -> List[Dict[str, float]]:
    """熵最高的错误分类样本及其第一/第二选择的投票占比"""
    counts = np.asarray(counts, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    first, second = choices(counts)
    entropy = entropy_bits(counts)
    totals = counts.sum(axis=1)
    wrong = np.nonzero(first != labels)[0]
    # 熵降序，相同熵按下标升序
    order = wrong[np.lexsort((wrong, -entropy[wrong]))][:limit]
    rows = []
    for item in order.tolist():
        rows.append(
            {
                "item": item,
                "label": int(labels[item]),
                "first": int(first[item]),
                "first_share": float(counts[item, first[item]] / totals[item]),
                "second": int(second[item]),
                "second_share": (
                    float(counts[item, second[item]] / totals[item])
                    if second[item] != NO_CHOICE
                    else 0.0
                ),
                "label_share": float(counts[item, labels[item]] / totals[item]),
                "entropy": float(entropy[item]),
            }
        )
    return rows
