#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
受约束网络的常规小批量训练
RMSProp + 分类交叉熵 + 隐藏层 Dropout，每步更新后将权重裁剪到 [-1, 1]
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .data import Dataset
from .errors import ConfigError, DimensionError
from .linalg import (
    ActivationKind,
    activation_derivative,
    apply_activation,
    batch_cross_entropy,
    matvec,
)
from .model import LayerParams, NetworkSpec, predict_classes

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """训练超参数（学习率、Dropout 比例等为约定默认值）"""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(100, ge=1, description="训练轮数")
    batch_size: int = Field(100, ge=1, description="批大小")
    learning_rate: float = Field(1e-3, gt=0, description="RMSProp 学习率")
    rmsprop_decay: float = Field(0.9, ge=0, lt=1, description="均方累加器衰减")
    rmsprop_epsilon: float = Field(1e-8, gt=0, description="数值稳定项")
    dropout_rate: float = Field(0.2, ge=0, lt=1, description="隐藏层 Dropout 比例")
    clip_low: float = Field(-1.0, description="权重下限")
    clip_high: float = Field(1.0, description="权重上限")
    init_low: float = Field(-0.99, description="初始化下限")
    init_high: float = Field(0.99, description="初始化上限")
    seed: int = Field(0, ge=0, description="训练随机种子")

    @model_validator(mode="after")
    def _check_bounds(self) -> "TrainConfig":
        if not self.clip_low < self.clip_high:
            raise ValueError(f"clip_low 必须小于 clip_high: {self.clip_low}, {self.clip_high}")
        if not self.init_low < self.init_high:
            raise ValueError(f"init_low 必须小于 init_high: {self.init_low}, {self.init_high}")
        if self.init_low < self.clip_low or self.init_high > self.clip_high:
            raise ValueError("初始化区间必须位于裁剪区间之内")
        return self


@dataclass
class OptimizerState:
    """RMSProp 均方累加器（形状与参数一致）"""

    weight_acc: List[np.ndarray]
    bias_acc: List[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, net: NetworkSpec) -> "OptimizerState":
        return cls(
            [np.zeros_like(layer.weights) for layer in net.layers],
            [np.zeros_like(layer.bias) for layer in net.layers],
        )


@dataclass
class ForwardTrace:
    """带 Dropout 的前向传播记录；activations[0] 为输入"""

    activations: List[np.ndarray]
    pre_activations: List[np.ndarray]
    masks: List[Optional[np.ndarray]]


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    test_acc: Optional[float]


@dataclass
class TrainingLog:
    records: List[EpochRecord] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [record.loss for record in self.records]


def init_network(
    arch: Sequence[int],
    cfg: TrainConfig,
    rng: np.random.Generator,
    hidden_activation: ActivationKind = ActivationKind.RELU,
) -> NetworkSpec:
    """
    初始化网络：权重独立均匀分布于 [init_low, init_high]，偏置为 0

    Args:
        arch: 各层维度，如 [784, 400, 10]
        cfg: 训练配置
        rng: 随机数生成器
        hidden_activation: 隐藏层激活函数，输出层固定为 Softmax
    """
    arch = [int(d) for d in arch]
    if len(arch) < 2 or any(d < 1 for d in arch):
        raise ConfigError(f"网络结构至少需要两个正整数维度: {arch}")
    layers = []
    for index, (fan_in, fan_out) in enumerate(zip(arch[:-1], arch[1:])):
        last = index == len(arch) - 2
        layers.append(
            LayerParams(
                weights=rng.uniform(cfg.init_low, cfg.init_high, size=(fan_out, fan_in)),
                bias=np.zeros(fan_out),
                activation=ActivationKind.SOFTMAX if last else hidden_activation,
            )
        )
    return NetworkSpec(layers, arch[0], {"seed": cfg.seed})


def forward_with_dropout(
    net: NetworkSpec,
    inputs: np.ndarray,
    dropout_rate: float,
    rng: Optional[np.random.Generator] = None,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> ForwardTrace:
    """
    训练用前向传播（反向 Dropout）

    隐藏层输出以 dropout_rate 的概率置零，保留的乘以 1/(1 - dropout_rate)；
    输出层不做 Dropout。可通过 masks 指定固定的保留掩码。
    """
    if not 0.0 <= dropout_rate < 1.0:
        raise ConfigError(f"dropout_rate 必须位于 [0, 1): {dropout_rate}")
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1] != net.input_dim:
        raise DimensionError("输入维度与网络不一致", x.shape, (net.input_dim,))

    trace = ForwardTrace([x], [], [])
    for index, layer in enumerate(net.layers):
        if x.ndim == 1:
            # 单个输入走固定求和顺序，与 deterministic_forward 逐位一致
            z = matvec(layer.weights, x) + layer.bias
        else:
            z = x @ layer.weights.T + layer.bias
        a = apply_activation(layer.activation, z)
        mask = None
        if index < len(net.layers) - 1 and (dropout_rate > 0 or masks is not None):
            if masks is not None and masks[index] is not None:
                mask = np.asarray(masks[index], dtype=bool)
            else:
                mask = rng.random(a.shape) >= dropout_rate
            a = a * mask / (1.0 - dropout_rate)
        trace.pre_activations.append(z)
        trace.activations.append(a)
        trace.masks.append(mask)
        x = a
    return trace


def backprop(
    net: NetworkSpec, trace: ForwardTrace, targets: np.ndarray, dropout_rate: float
) -> Gradients:
    """
    平均交叉熵对所有权重与偏置的梯度

    Args:
        net: 网络（输出层须为 Softmax）
        trace: forward_with_dropout 的结果
        targets: 每个样本的目标类别
        dropout_rate: 与前向传播一致的 Dropout 比例
    """
    if net.layers[-1].activation is not ActivationKind.SOFTMAX:
        raise ConfigError("训练要求输出层为 Softmax")
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    probs = np.atleast_2d(trace.activations[-1])
    batch = probs.shape[0]

    delta = probs.copy()
    delta[np.arange(batch), targets] -= 1.0
    delta /= batch

    weight_grads: List[np.ndarray] = [None] * len(net.layers)
    bias_grads: List[np.ndarray] = [None] * len(net.layers)
    for index in range(len(net.layers) - 1, -1, -1):
        below = np.atleast_2d(trace.activations[index])
        weight_grads[index] = delta.T @ below
        bias_grads[index] = delta.sum(axis=0)
        if index == 0:
            break
        upstream = delta @ net.layers[index].weights
        mask = trace.masks[index - 1]
        if mask is not None:
            upstream = upstream * np.atleast_2d(mask) / (1.0 - dropout_rate)
        z = np.atleast_2d(trace.pre_activations[index - 1])
        # 导数使用 Dropout 之前的激活值
        a = apply_activation(net.layers[index - 1].activation, z)
        delta = upstream * activation_derivative(net.layers[index - 1].activation, z, a)
    return Gradients(weight_grads, bias_grads)


def clip_weights(net: NetworkSpec, low: float, high: float) -> NetworkSpec:
    """将权重裁剪到 [low, high]，偏置不变"""
    if not low < high:
        raise ConfigError(f"裁剪下限必须小于上限: {low}, {high}")
    return net.with_layers(
        [
            LayerParams(np.clip(layer.weights, low, high), layer.bias, layer.activation)
            for layer in net.layers
        ]
    )


def rmsprop_step(
    net: NetworkSpec, grads: Gradients, state: OptimizerState, cfg: TrainConfig
) -> Tuple[NetworkSpec, OptimizerState]:
    """
    一步 RMSProp 更新，随后裁剪权重

    acc <- decay * acc + (1 - decay) * g^2
    param <- param - lr * g / (sqrt(acc) + eps)
    """
    decay, lr, eps = cfg.rmsprop_decay, cfg.learning_rate, cfg.rmsprop_epsilon
    layers, weight_acc, bias_acc = [], [], []
    for index, layer in enumerate(net.layers):
        gw, gb = grads.weights[index], grads.biases[index]
        if gw.shape != layer.weights.shape or gb.shape != layer.bias.shape:
            raise DimensionError("梯度形状与参数不一致", gw.shape, layer.weights.shape)
        acc_w = decay * state.weight_acc[index] + (1.0 - decay) * gw * gw
        acc_b = decay * state.bias_acc[index] + (1.0 - decay) * gb * gb
        weights = layer.weights - lr * gw / (np.sqrt(acc_w) + eps)
        bias = layer.bias - lr * gb / (np.sqrt(acc_b) + eps)
        layers.append(
            LayerParams(np.clip(weights, cfg.clip_low, cfg.clip_high), bias, layer.activation)
        )
        weight_acc.append(acc_w)
        bias_acc.append(acc_b)
    return net.with_layers(layers), OptimizerState(weight_acc, bias_acc, state.step + 1)


def evaluate_accuracy(net: NetworkSpec, dataset: Dataset) -> float:
    """确定性网络 argmax 准确率"""
    if len(dataset) == 0:
        return float("nan")
    return float(np.mean(predict_classes(net, dataset.images) == dataset.labels))


def train(
    dataset: Dataset,
    arch: Sequence[int],
    cfg: TrainConfig,
    test_set: Optional[Dataset] = None,
    hidden_activation: ActivationKind = ActivationKind.RELU,
    on_step: Optional[Callable[[NetworkSpec, int], None]] = None,
) -> Tuple[NetworkSpec, TrainingLog]:
    """
    训练受约束网络

    初始化、每轮打乱和 Dropout 都来自同一个种子生成器，
    相同配置两次运行得到逐位一致的权重。on_step 在每次参数更新后
    以 (net, step) 调用。

    Returns:
        Tuple[NetworkSpec, TrainingLog]: 训练好的网络与逐轮日志
    """
    arch = [int(d) for d in arch]
    if len(dataset) == 0:
        raise ConfigError("训练集为空")
    if dataset.dim != arch[0]:
        raise ConfigError(f"数据维度 {dataset.dim} 与网络输入 {arch[0]} 不一致")
    if dataset.labels.max() >= arch[-1]:
        raise ConfigError(f"标签 {dataset.labels.max()} 超出输出维度 {arch[-1]}")

    rng = np.random.default_rng(cfg.seed)
    net = init_network(arch, cfg, rng, hidden_activation)
    state = OptimizerState.zeros_like(net)
    log = TrainingLog()
    n_items = len(dataset)
    n_batches = math.ceil(n_items / cfg.batch_size)
    logger.info(
        "开始训练: arch=%s items=%d epochs=%d batch=%d lr=%g dropout=%.2f",
        arch,
        n_items,
        cfg.epochs,
        cfg.batch_size,
        cfg.learning_rate,
        cfg.dropout_rate,
    )

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_items)
        total_loss = 0.0
        for start in range(0, n_items, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            trace = forward_with_dropout(
                net, dataset.images[batch], cfg.dropout_rate, rng
            )
            targets = dataset.labels[batch]
            total_loss += batch_cross_entropy(trace.activations[-1], targets)
            grads = backprop(net, trace, targets, cfg.dropout_rate)
            net, state = rmsprop_step(net, grads, state, cfg)
            if on_step is not None:
                on_step(net, state.step)

        record = EpochRecord(
            epoch=epoch,
            loss=total_loss / n_batches,
            train_acc=evaluate_accuracy(net, dataset),
            test_acc=evaluate_accuracy(net, test_set) if test_set is not None else None,
        )
        log.records.append(record)
        logger.info(
            "epoch %d/%d loss=%.5f train_acc=%.4f test_acc=%s",
            epoch,
            cfg.epochs,
            record.loss,
            record.train_acc,
            "n/a" if record.test_acc is None else f"{record.test_acc:.4f}",
        )

    metadata = {
        "seed": cfg.seed,
        "dataset": dataset.tag,
        "hidden_activation": ActivationKind(hidden_activation).value,
    }
    return NetworkSpec(net.layers, net.input_dim, metadata), log
