#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
网络结构定义模块
提供层参数、确定性前向传播、权重区间校验以及模型文件读写
"""

import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from .errors import (
    DimensionError,
    ModelParseError,
    ModelValidationError,
    ModelVersionError,
    ScannError,
)
from .linalg import ActivationKind, apply_activation, as_matrix, as_vector, matvec

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"SCANN"
MODEL_VERSION = 1

_HEADER = struct.Struct("<HII")  # version, input_dim, layer_count
_LAYER_HEADER = struct.Struct("<IIB")  # rows, cols, activation tag
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class LayerParams:
    """单层参数：weights 形状为 (fan_out, fan_in)"""

    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind

    def __post_init__(self):
        weights = as_matrix(np.array(self.weights, dtype=np.float64))
        bias = as_vector(np.array(self.bias, dtype=np.float64))
        if bias.shape[0] != weights.shape[0]:
            raise DimensionError("偏置长度必须等于权重行数", bias.shape, weights.shape)
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", ActivationKind(self.activation))

    @property
    def fan_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def fan_out(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True)
class NetworkSpec:
    """前馈网络：有序层列表 + 输入维度 + 元数据"""

    layers: List[LayerParams]
    input_dim: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        layers = list(self.layers)
        if not layers:
            raise ModelValidationError("网络至少需要一层")
        if layers[0].fan_in != self.input_dim:
            raise ModelValidationError(
                f"输入维度 {self.input_dim} 与第 0 层 fan_in {layers[0].fan_in} 不一致"
            )
        for i in range(len(layers) - 1):
            if layers[i].fan_out != layers[i + 1].fan_in:
                raise ModelValidationError(
                    f"第 {i} 层输出 {layers[i].fan_out} 与第 {i + 1} 层输入 "
                    f"{layers[i + 1].fan_in} 不一致"
                )
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_dim", int(self.input_dim))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def arch(self) -> List[int]:
        """网络结构，如 [784, 400, 10]"""
        return [self.input_dim] + [layer.fan_out for layer in self.layers]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].fan_out

    def with_layers(self, layers: Sequence[LayerParams]) -> "NetworkSpec":
        """返回替换层参数后的新网络（元数据保持不变）"""
        return NetworkSpec(list(layers), self.input_dim, self.metadata)


@dataclass(frozen=True)
class WeightViolation:
    """区间校验失败的单个权重"""

    layer: int
    row: int
    col: int
    value: float


def deterministic_forward(net: NetworkSpec, inputs: np.ndarray) -> np.ndarray:
    """
    确定性前向传播 x_{i+1} = sigma(W_i x_i + b_{i+1})

    Args:
        net: 网络
        inputs: 长度为 input_dim 的向量，或 (batch, input_dim)

    Returns:
        np.ndarray: 最后一层激活值
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1] != net.input_dim:
        raise DimensionError("输入维度与网络不一致", x.shape, (net.input_dim,))
    for layer in net.layers:
        x = apply_activation(layer.activation, matvec(layer.weights, x) + layer.bias)
    return x


def predict_classes(net: NetworkSpec, images: np.ndarray) -> np.ndarray:
    """批量 argmax 预测（BLAS 矩阵乘法，用于训练日志和大规模评估）"""
    x = np.asarray(images, dtype=np.float64)
    if x.shape[-1] != net.input_dim:
        raise DimensionError("输入维度与网络不一致", x.shape, (net.input_dim,))
    for layer in net.layers:
        x = apply_activation(layer.activation, x @ layer.weights.T + layer.bias)
    return np.argmax(x, axis=-1)


def validate_unit_interval(net: NetworkSpec) -> List[WeightViolation]:
    """
    检查所有可采样权重是否位于 [-1, 1]

    Returns:
        List[WeightViolation]: 为空表示全部合法
    """
    violations: List[WeightViolation] = []
    for index, layer in enumerate(net.layers):
        rows, cols = np.nonzero(np.abs(layer.weights) > 1.0)
        for row, col in zip(rows.tolist(), cols.tolist()):
            violations.append(
                WeightViolation(index, row, col, float(layer.weights[row, col]))
            )
    return violations


def encode_model(net: NetworkSpec) -> bytes:
    """序列化为 SCANN 容器格式（小端序 float64）"""
    metadata = json.dumps(net.metadata, sort_keys=True, ensure_ascii=False).encode(
        "utf-8"
    )
    parts = [
        MODEL_MAGIC,
        _HEADER.pack(MODEL_VERSION, net.input_dim, len(net.layers)),
        _U32.pack(len(metadata)),
        metadata,
    ]
    for layer in net.layers:
        parts.append(
            _LAYER_HEADER.pack(layer.fan_out, layer.fan_in, layer.activation.tag)
        )
        parts.append(layer.weights.astype("<f8").tobytes(order="C"))
        parts.append(layer.bias.astype("<f8").tobytes())
    return b"".join(parts)


def decode_model(blob: bytes) -> NetworkSpec:
    """从 SCANN 容器格式反序列化"""
    view = memoryview(blob)
    offset = 0

    def take(size: int, what: str) -> memoryview:
        nonlocal offset
        if offset + size > len(view):
            raise ModelParseError(
                f"模型文件截断: 读取{what}需要 {size} 字节，剩余 {len(view) - offset}"
            )
        chunk = view[offset : offset + size]
        offset += size
        return chunk

    if bytes(take(len(MODEL_MAGIC), "魔数")) != MODEL_MAGIC:
        raise ModelParseError("魔数错误，不是 SCANN 模型文件")
    version, input_dim, layer_count = _HEADER.unpack(take(_HEADER.size, "文件头"))
    if version != MODEL_VERSION:
        raise ModelVersionError(f"不支持的模型版本: {version} (期望 {MODEL_VERSION})")
    (meta_len,) = _U32.unpack(take(_U32.size, "元数据长度"))
    try:
        metadata = json.loads(bytes(take(meta_len, "元数据")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelParseError(f"元数据无法解析: {e}") from e
    if not isinstance(metadata, dict):
        raise ModelParseError(f"元数据必须是 JSON 对象: {type(metadata).__name__}")

    layers = []
    for index in range(layer_count):
        rows, cols, tag = _LAYER_HEADER.unpack(take(_LAYER_HEADER.size, f"第 {index} 层头"))
        weights = np.frombuffer(take(rows * cols * 8, f"第 {index} 层权重"), dtype="<f8")
        bias = np.frombuffer(take(rows * 8, f"第 {index} 层偏置"), dtype="<f8")
        try:
            activation = ActivationKind.from_tag(tag)
        except ValueError as e:
            raise ModelParseError(str(e)) from e
        try:
            layers.append(
                LayerParams(
                    weights.reshape(rows, cols).astype(np.float64),
                    bias.astype(np.float64),
                    activation,
                )
            )
        except ScannError as e:
            raise ModelParseError(f"第 {index} 层参数无效: {e}") from e
    if offset != len(view):
        raise ModelParseError(f"模型文件末尾有 {len(view) - offset} 字节多余数据")
    return NetworkSpec(layers, input_dim, metadata)


def save_model(net: NetworkSpec, path: Union[str, Path]) -> str:
    """
    保存模型（先写临时文件再原子替换）

    Returns:
        str: 模型文件的 sha256
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = encode_model(net)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "wb") as f:
        f.write(blob)
    os.replace(tmp_path, path)
    digest = hashlib.sha256(blob).hexdigest()
    logger.info("模型已保存: %s (arch=%s, sha256=%s)", path, net.arch, digest[:12])
    return digest


def load_model(path: Union[str, Path]) -> NetworkSpec:
    """读取模型文件"""
    with open(path, "rb") as f:
        blob = f.read()
    net = decode_model(blob)
    logger.info("模型已加载: %s (arch=%s)", path, net.arch)
    return net
