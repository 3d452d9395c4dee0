#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
scANN 采样核心
将训练好的权重拆分为正/负伯努利概率矩阵，可选量化，
抽取按位打包的二值权重样本并执行采样前向传播
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .analytics import VoteDistribution
from .bitpack import pack_rows, padding_is_clear, popcount, unpack_rows
from .errors import ConfigError, DimensionError, WeightRangeError
from .linalg import ActivationKind, apply_activation, matvec
from .model import NetworkSpec, validate_unit_interval

logger = logging.getLogger(__name__)


# 准确率-采样数曲线的默认检查点；report 始终使用它
DEFAULT_CHECKPOINTS = (1, 3, 10, 30, 100, 300, 1000)

Kernel = Literal["packed", "dense"]
MaskMode = Literal["per-input", "shared"]
PrecisionMode = Literal["round", "coarse-uniform"]


class SamplingConfig(BaseModel):
    """采样阶段配置"""

    model_config = ConfigDict(extra="forbid")

    samples: int = Field(1000, ge=1, description="每个输入的采样次数 K")
    precision: Union[Literal["full"], int] = Field(
        "full", description="概率精度：full 或比特数 1..16"
    )
    precision_mode: PrecisionMode = Field(
        "round", description="round 量化概率；coarse-uniform 使用低精度均匀随机数比较"
    )
    mask_mode: MaskMode = Field(
        "per-input", description="per-input 每个输入重新抽样；shared 所有输入共享 K 个样本"
    )
    kernel: Kernel = Field("packed", description="packed 按位打包升序累加；dense 使用 BLAS")
    seed: int = Field(0, ge=0, description="采样主种子")
    workers: int = Field(1, ge=1, description="采样线程数")
    checkpoints: List[int] = Field(
        default_factory=lambda: list(DEFAULT_CHECKPOINTS),
        description="准确率-采样数曲线的检查点",
    )
    max_items: Optional[int] = Field(None, ge=1, description="只采样前 N 个测试样本")

    @field_validator("precision", mode="before")
    @classmethod
    def _parse_precision(cls, value: Any) -> Any:
        if isinstance(value, str) and value != "full":
            try:
                value = int(value)
            except ValueError as e:
                raise ValueError(f"精度必须是 full 或整数比特数: {value}") from e
        if isinstance(value, int) and not 1 <= value <= 16:
            raise ValueError(f"精度比特数必须在 1..16: {value}")
        return value

    @field_validator("checkpoints")
    @classmethod
    def _check_checkpoints(cls, value: List[int]) -> List[int]:
        if any(k < 1 for k in value) or value != sorted(set(value)):
            raise ValueError(f"检查点必须为严格递增的正整数: {value}")
        return value

    @property
    def precision_bits(self) -> Optional[int]:
        return None if self.precision == "full" else int(self.precision)

    def effective_checkpoints(self) -> List[int]:
        """截断到 K 以内的检查点，K 本身总是包含在内"""
        points = [k for k in self.checkpoints if k < self.samples]
        return points + [self.samples]


@dataclass(frozen=True)
class BernoulliLayer:
    """单层的正/负伯努利概率矩阵；偏置不参与采样"""

    pos_prob: np.ndarray
    neg_prob: np.ndarray
    bias: np.ndarray
    activation: ActivationKind

    @property
    def fan_in(self) -> int:
        return int(self.pos_prob.shape[1])

    @property
    def fan_out(self) -> int:
        return int(self.pos_prob.shape[0])

    def weights(self) -> np.ndarray:
        """pos - neg，重建（可能量化后的）权重"""
        return self.pos_prob - self.neg_prob


@dataclass(frozen=True)
class BernoulliWeightModel:
    """整网的伯努利权重模型"""

    layers: List[BernoulliLayer]
    input_dim: int
    precision_bits: Optional[int] = None
    uniform_bits: Optional[int] = None

    @property
    def n_classes(self) -> int:
        return self.layers[-1].fan_out


@dataclass(frozen=True)
class PackedLayer:
    """一个采样样本中单层的正/负二值平面（按行打包）"""

    pos_bits: np.ndarray
    neg_bits: np.ndarray
    rows: int
    cols: int

    def signed_matrix(self) -> np.ndarray:
        """解包为 +1/0/-1 的 float64 矩阵"""
        pos = unpack_rows(self.pos_bits, self.cols)
        neg = unpack_rows(self.neg_bits, self.cols)
        return pos.astype(np.float64) - neg.astype(np.float64)

    def overlap_free(self) -> bool:
        return not np.any(self.pos_bits & self.neg_bits)

    def padding_clear(self) -> bool:
        return padding_is_clear(self.pos_bits, self.cols) and padding_is_clear(
            self.neg_bits, self.cols
        )


@dataclass(frozen=True)
class SampledMask:
    """第 k 次采样的全部层"""

    layers: List[PackedLayer]
    sample_index: int
    item: int = 0


@dataclass(frozen=True)
class SamplerSeedPlan:
    """
    基于计数器的随机流划分

    主种子经 SeedSequence 派生为 Philox 密钥；样本 k、输入 item、层 layer
    写入计数器的高位字，不同组合的随机流互不重叠且可复现。
    """

    master_seed: int

    @cached_property
    def key(self) -> np.ndarray:
        return np.random.SeedSequence(self.master_seed).generate_state(2, dtype=np.uint64)

    def generator(self, k: int, item: int = 0, layer: int = 0) -> np.random.Generator:
        counter = np.array([0, layer, item, k], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=self.key))


def split_weights(net: NetworkSpec) -> BernoulliWeightModel:
    """
    拆分权重：w > 0 计入正概率，w < 0 计入负概率

    Raises:
        WeightRangeError: 存在超出 [-1, 1] 的权重
    """
    violations = validate_unit_interval(net)
    if violations:
        raise WeightRangeError(violations)

    layers = []
    for layer in net.layers:
        w = layer.weights
        layers.append(
            BernoulliLayer(
                pos_prob=np.where(w > 0, w, 0.0),
                neg_prob=np.where(w < 0, -w, 0.0),
                bias=layer.bias.copy(),
                activation=layer.activation,
            )
        )
    return BernoulliWeightModel(layers, net.input_dim)


def _round_to_grid(p: np.ndarray, bits: int) -> np.ndarray:
    levels = float(1 << bits)
    # 四舍五入，平局向上
    return np.floor(p * levels + 0.5) / levels


def quantize_probabilities(model: BernoulliWeightModel, bits: int) -> BernoulliWeightModel:
    """将所有概率舍入到 2^-bits 的整数倍（0 与 1 都可表示）"""
    if not 1 <= int(bits) <= 16:
        raise ConfigError(f"精度比特数必须在 1..16: {bits}")
    layers = [
        BernoulliLayer(
            pos_prob=_round_to_grid(layer.pos_prob, bits),
            neg_prob=_round_to_grid(layer.neg_prob, bits),
            bias=layer.bias,
            activation=layer.activation,
        )
        for layer in model.layers
    ]
    return BernoulliWeightModel(layers, model.input_dim, int(bits), model.uniform_bits)


def coarsen_uniforms(model: BernoulliWeightModel, bits: int) -> BernoulliWeightModel:
    """概率保持不变，抽样时与 bits 位精度的均匀随机数比较"""
    if not 1 <= int(bits) <= 16:
        raise ConfigError(f"精度比特数必须在 1..16: {bits}")
    return BernoulliWeightModel(
        model.layers, model.input_dim, model.precision_bits, int(bits)
    )


def prepare_model(
    net: NetworkSpec, precision_bits: Optional[int] = None, precision_mode: str = "round"
) -> BernoulliWeightModel:
    """拆分权重并按精度模式处理"""
    model = split_weights(net)
    if precision_bits is None:
        return model
    if precision_mode == "coarse-uniform":
        return coarsen_uniforms(model, precision_bits)
    return quantize_probabilities(model, precision_bits)


def draw_sample(
    model: BernoulliWeightModel, k: int, plan: SamplerSeedPlan, item: int = 0
) -> SampledMask:
    """
    抽取第 k 个样本：每个突触一枚硬币，u < pos_prob 置正位，u < neg_prob 置负位

    同一 (model, k, item, plan) 总是得到相同的掩码。
    """
    if k < 0:
        raise ConfigError(f"样本下标不能为负: {k}")
    packed = []
    for index, layer in enumerate(model.layers):
        u = plan.generator(k, item, index).random(layer.pos_prob.shape)
        if model.uniform_bits is not None:
            levels = float(1 << model.uniform_bits)
            u = np.floor(u * levels) / levels
        packed.append(
            PackedLayer(
                pos_bits=pack_rows(u < layer.pos_prob),
                neg_bits=pack_rows(u < layer.neg_prob),
                rows=layer.fan_out,
                cols=layer.fan_in,
            )
        )
    return SampledMask(packed, int(k), int(item))


def packed_matvec(mask_layer: PackedLayer, x: np.ndarray) -> np.ndarray:
    """
    打包二值矩阵乘向量：result[b] = sum(正位 x[a]) - sum(负位 x[a])

    每层只解包一次为 +1/0/-1 矩阵，再按 fan-in 下标升序累加，
    与 linalg.matvec 作用于同一矩阵逐位一致。

    Args:
        mask_layer: 单层打包样本
        x: 长度为 cols 的向量，或 (batch, cols)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != mask_layer.cols:
        raise DimensionError(
            "packed_matvec 维度不匹配", (mask_layer.rows, mask_layer.cols), x.shape
        )
    return matvec(mask_layer.signed_matrix(), x)


def dense_sampled_matmul(mask_layer: PackedLayer, x: np.ndarray) -> np.ndarray:
    """解包后用 BLAS 计算，吞吐量优先，不保证与升序累加逐位一致"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != mask_layer.cols:
        raise DimensionError(
            "dense_sampled_matmul 维度不匹配", (mask_layer.rows, mask_layer.cols), x.shape
        )
    return x @ mask_layer.signed_matrix().T


def sampled_preactivation(
    model: BernoulliWeightModel,
    mask: SampledMask,
    inputs: np.ndarray,
    layer: int = 0,
    kernel: str = "packed",
) -> np.ndarray:
    """指定层的采样预激活值 W~ x + b（之前各层照常采样传播）"""
    x = np.asarray(inputs, dtype=np.float64)
    matmul = packed_matvec if kernel == "packed" else dense_sampled_matmul
    for index in range(layer):
        params = model.layers[index]
        x = apply_activation(params.activation, matmul(mask.layers[index], x) + params.bias)
    return matmul(mask.layers[layer], x) + model.layers[layer].bias


def sampled_forward(
    model: BernoulliWeightModel,
    mask: SampledMask,
    inputs: np.ndarray,
    kernel: str = "packed",
) -> np.ndarray:
    """
    采样前向传播 x~_{i+1} = sigma(W~_i x~_i + b_{i+1})

    Returns:
        np.ndarray: 该样本的输出 y~
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionError("输入维度与模型不一致", x.shape, (model.input_dim,))
    if len(mask.layers) != len(model.layers):
        raise DimensionError(
            "掩码层数与模型不一致", (len(mask.layers),), (len(model.layers),)
        )
    matmul = packed_matvec if kernel == "packed" else dense_sampled_matmul
    for params, packed in zip(model.layers, mask.layers):
        x = apply_activation(params.activation, matmul(packed, x) + params.bias)
    return x


def sample_votes(
    model: BernoulliWeightModel,
    inputs: np.ndarray,
    samples: int,
    plan: SamplerSeedPlan,
    item: int = 0,
    kernel: str = "packed",
) -> np.ndarray:
    """单个输入的 K 次投票序列（每次 argmax，平票取最小下标）"""
    votes = np.empty(samples, dtype=np.int64)
    for k in range(samples):
        mask = draw_sample(model, k, plan, item)
        votes[k] = int(np.argmax(sampled_forward(model, mask, inputs, kernel)))
    return votes


def run_sampling(
    net: Union[NetworkSpec, BernoulliWeightModel],
    inputs: np.ndarray,
    samples: int,
    plan: SamplerSeedPlan,
    bits: Optional[int] = None,
    kernel: str = "packed",
    item: int = 0,
) -> VoteDistribution:
    """
    对单个输入运行 K 次采样推理

    Args:
        net: 网络或已拆分的伯努利模型
        inputs: 输入向量
        samples: 采样次数 K
        plan: 随机流划分
        bits: 可选的概率量化比特数
    """
    if samples < 1:
        raise ConfigError(f"采样次数必须至少为 1: {samples}")
    if isinstance(net, NetworkSpec):
        model = prepare_model(net, bits)
    else:
        model = quantize_probabilities(net, bits) if bits is not None else net
    votes = sample_votes(model, inputs, samples, plan, item, kernel)
    return VoteDistribution.from_votes(votes, model.n_classes)


def sample_dataset(
    model: BernoulliWeightModel,
    images: np.ndarray,
    samples: int,
    plan: SamplerSeedPlan,
    mask_mode: str = "per-input",
    kernel: str = "packed",
    workers: int = 1,
) -> np.ndarray:
    """
    对整个数据集采样

    per-input 模式下每个输入使用 (k, item) 派生的独立样本，按输入并行；
    shared 模式下所有输入共享第 k 个样本，按 k 并行。结果按下标写回，
    与并行调度无关。

    Returns:
        np.ndarray: (N, K) 投票矩阵
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 2 or images.shape[1] != model.input_dim:
        raise DimensionError("数据集维度与模型不一致", images.shape, (model.input_dim,))
    n_items = images.shape[0]
    votes = np.empty((n_items, samples), dtype=np.int64)
    logger.info(
        "开始采样: items=%d K=%d mode=%s kernel=%s workers=%d",
        n_items,
        samples,
        mask_mode,
        kernel,
        workers,
    )

    if mask_mode == "shared":

        def run_one(k: int) -> np.ndarray:
            mask = draw_sample(model, k, plan, item=0)
            return np.argmax(sampled_forward(model, mask, images, kernel), axis=1)

        tasks, total = range(samples), samples
    elif mask_mode == "per-input":

        def run_one(item: int) -> np.ndarray:
            return sample_votes(model, images[item], samples, plan, item, kernel)

        tasks, total = range(n_items), n_items
    else:
        raise ConfigError(f"未知的掩码模式: {mask_mode}")

    step = max(total // 10, 1)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for index, result in enumerate(executor.map(run_one, tasks)):
            if mask_mode == "shared":
                votes[:, index] = result
            else:
                votes[index] = result
            if (index + 1) % step == 0:
                logger.info("采样进度: %d/%d", index + 1, total)
    return votes


def mask_statistics(mask: SampledMask) -> List[Dict[str, int]]:
    """统计每层样本中实际导通的突触数（popcount）"""
    stats = []
    for index, layer in enumerate(mask.layers):
        positive = int(popcount(layer.pos_bits).sum())
        negative = int(popcount(layer.neg_bits).sum())
        stats.append(
            {
                "layer": index,
                "positive": positive,
                "negative": negative,
                "active": positive + negative,
                "synapses": layer.rows * layer.cols,
            }
        )
    return stats


def expected_cost(model: BernoulliWeightModel) -> List[Dict[str, float]]:
    """每层稠密乘加次数与每个样本期望的加法次数（概率之和）"""
    costs = []
    for index, layer in enumerate(model.layers):
        dense = layer.fan_out * layer.fan_in
        additions = float(layer.pos_prob.sum() + layer.neg_prob.sum())
        costs.append(
            {
                "layer": index,
                "dense_macs": dense,
                "expected_additions": additions,
                "active_fraction": additions / dense if dense else 0.0,
            }
        )
    return costs

