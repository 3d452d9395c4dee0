#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
稠密线性代数与激活函数
训练、确定性推理以及打包内核的对照实现都依赖这里的定义
"""

from enum import Enum

import numpy as np

from .errors import DimensionError, ScannError

# 交叉熵概率下限
PROB_FLOOR = 1e-12


class ActivationKind(str, Enum):
    """激活函数类型（封闭枚举）"""

    RELU = "relu"
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"
    IDENTITY = "identity"

    @property
    def tag(self) -> int:
        """模型文件中的单字节标签"""
        return _ACTIVATION_TAGS[self]

    @classmethod
    def from_tag(cls, tag: int) -> "ActivationKind":
        for kind, value in _ACTIVATION_TAGS.items():
            if value == tag:
                return kind
        raise ValueError(f"未知的激活函数标签: {tag}")


_ACTIVATION_TAGS = {
    ActivationKind.IDENTITY: 0,
    ActivationKind.RELU: 1,
    ActivationKind.SIGMOID: 2,
    ActivationKind.SOFTMAX: 3,
}


def as_matrix(values) -> np.ndarray:
    """转换为有限值的 float64 二维矩阵"""
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError("需要二维矩阵", matrix.shape, (-1, -1))
    if not np.all(np.isfinite(matrix)):
        raise ScannError("矩阵包含 NaN 或 Inf")
    return matrix


def as_vector(values) -> np.ndarray:
    """转换为有限值的 float64 向量"""
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise DimensionError("需要一维向量", vector.shape, (-1,))
    if not np.all(np.isfinite(vector)):
        raise ScannError("向量包含 NaN 或 Inf")
    return vector


# 单次 cumsum 展开的乘积项上限（按元素计）
_TERM_BUDGET = 1 << 22


def _ordered_sum(terms: np.ndarray) -> np.ndarray:
    """沿最后一维从左到右逐项累加，起点为 0.0（cumsum 不做成对求和）"""
    terms[..., 0] += 0.0
    return np.cumsum(terms, axis=-1)[..., -1]


def matvec(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    矩阵向量乘法 result[b] = sum_a w[b, a] * x[a]

    按列下标升序逐项累加，保证与标量三重循环逐位一致，
    也是打包内核的对照实现。批量输入分块展开，控制内存占用。

    Args:
        w: (rows, cols) 权重矩阵
        x: 长度为 cols 的向量，或 (batch, cols) 批量输入

    Returns:
        np.ndarray: 长度为 rows 的向量，或 (batch, rows)
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.shape[-1] != w.shape[1]:
        raise DimensionError("matvec 维度不匹配", w.shape, x.shape)

    rows, cols = w.shape
    if cols == 0:
        return np.zeros(x.shape[:-1] + (rows,), dtype=np.float64)
    if x.ndim == 1:
        return _ordered_sum(w * x)

    flat = x.reshape(-1, cols)
    out = np.empty((flat.shape[0], rows), dtype=np.float64)
    chunk = max(1, _TERM_BUDGET // max(rows * cols, 1))
    for start in range(0, flat.shape[0], chunk):
        block = flat[start : start + chunk]
        out[start : start + chunk] = _ordered_sum(block[:, None, :] * w)
    return out.reshape(x.shape[:-1] + (rows,))


def apply_activation(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    """逐元素激活；Softmax 沿最后一维归一化"""
    z = np.asarray(z, dtype=np.float64)
    kind = ActivationKind(kind)
    if kind is ActivationKind.RELU:
        return np.maximum(z, 0.0)
    if kind is ActivationKind.SIGMOID:
        # 两侧分开计算避免 exp 溢出
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if kind is ActivationKind.SOFTMAX:
        shifted = z - np.max(z, axis=-1, keepdims=True)
        exps = np.exp(shifted)
        return exps / np.sum(exps, axis=-1, keepdims=True)
    return z.copy()


def activation_derivative(
    kind: ActivationKind, z: np.ndarray, a: np.ndarray
) -> np.ndarray:
    """隐藏层激活函数对预激活值的导数（Softmax 由交叉熵联合处理）"""
    kind = ActivationKind(kind)
    if kind is ActivationKind.RELU:
        return (z > 0).astype(np.float64)
    if kind is ActivationKind.SIGMOID:
        return a * (1.0 - a)
    if kind is ActivationKind.IDENTITY:
        return np.ones_like(z)
    raise ScannError("Softmax 只能用于输出层")


def cross_entropy(probs: np.ndarray, target_class: int) -> float:
    """
    分类交叉熵 -ln(probs[target])

    Args:
        probs: 概率向量，和为 1
        target_class: 目标类别下标

    Returns:
        float: 非负损失值
    """
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= int(target_class) < probs.shape[-1]:
        raise ScannError(f"目标类别越界: {target_class} (类别数 {probs.shape[-1]})")
    if abs(float(np.sum(probs)) - 1.0) > 1e-6:
        raise ScannError(f"概率之和必须为 1: {float(np.sum(probs))}")
    p = max(float(probs[int(target_class)]), PROB_FLOOR)
    return max(-float(np.log(p)), 0.0)


def batch_cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """批量平均交叉熵（训练日志使用）"""
    picked = probs[np.arange(len(targets)), targets]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))
