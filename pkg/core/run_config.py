#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
运行配置
合并默认值、JSON 配置文件与命令行参数，并派生各阶段的随机种子
"""

import json
import logging
import zlib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import config
from .errors import ConfigError, DataPathError
from .linalg import ActivationKind
from .sampler import SamplingConfig
from .trainer import TrainConfig

logger = logging.getLogger(__name__)

Subcommand = Literal["train", "sample", "holdout", "report"]

# 命令行中嵌套配置的扁平键
TRAIN_KEYS = set(TrainConfig.model_fields)
SAMPLING_KEYS = set(SamplingConfig.model_fields)

# 只对 sample / holdout 有意义的采样键
_SAMPLING_ONLY = {"precision", "precision_mode", "mask_mode", "kernel", "checkpoints"}


def derive_seed(master_seed: int, stream_name: str) -> int:
    """由主种子和流名称派生独立的子种子（train / sampler / holdout / data）"""
    sequence = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(zlib.crc32(stream_name.encode("utf-8")),)
    )
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def holdout_tag(fraction: float) -> str:
    """留出比例在输出文件名中的标签"""
    return f"{fraction:g}"


class RunConfig(BaseModel):
    """一次 CLI / 服务调用的完整配置"""

    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    subcommand: Subcommand
    seed: int = Field(default_factory=lambda: config.DEFAULT_SEED, ge=0)
    dataset: Literal["idx", "synthetic"] = "idx"
    data_dir: str = Field(default_factory=lambda: config.DATA_DIR)
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    dataset_tag: str = "mnist"
    n_classes: int = Field(10, ge=2)
    synthetic_dim: int = Field(16, ge=1)
    synthetic_per_class: int = Field(60, ge=1)
    synthetic_separation: float = Field(1.0, gt=0)
    arch: List[int] = Field(default_factory=lambda: [784, 400, 10])
    hidden_activation: ActivationKind = ActivationKind.RELU
    model_path: Optional[str] = None
    votes_path: Optional[str] = None
    output_dir: str = Field(default_factory=lambda: config.OUTPUT_DIR)
    holdout_class: Optional[int] = Field(None, ge=0)
    holdout_fractions: List[float] = Field(default_factory=lambda: [0.0, 0.9])
    train: TrainConfig = Field(default_factory=TrainConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.subcommand in ("train", "holdout"):
            if len(self.arch) < 2:
                raise ValueError(f"网络结构至少需要两个维度: {self.arch}")
            if self.arch[-1] != self.n_classes:
                raise ValueError(f"输出维度 {self.arch[-1]} 与类别数 {self.n_classes} 不一致")
        if self.subcommand == "sample" and not self.model_path:
            raise ValueError("sample 需要 model_path")
        if self.subcommand == "report" and not self.votes_path:
            raise ValueError("report 需要 votes_path")
        if self.subcommand == "holdout":
            if self.holdout_class is None:
                raise ValueError("holdout 需要 holdout_class")
            if self.holdout_class >= self.n_classes:
                raise ValueError(f"留出类别越界: {self.holdout_class}")
            if not self.holdout_fractions or any(
                not 0.0 <= f <= 1.0 for f in self.holdout_fractions
            ):
                raise ValueError(f"留出比例必须位于 [0, 1]: {self.holdout_fractions}")
            tags = [holdout_tag(f) for f in self.holdout_fractions]
            if len(set(tags)) != len(tags):
                raise ValueError(f"留出比例重复，输出文件会互相覆盖: {self.holdout_fractions}")
        return self

    def seeds(self) -> Dict[str, int]:
        """主种子及各阶段派生种子"""
        return {
            "master": self.seed,
            "train": derive_seed(self.seed, "train"),
            "sampler": derive_seed(self.seed, "sampler"),
            "holdout": derive_seed(self.seed, "holdout"),
            "data": derive_seed(self.seed, "data"),
        }

    def train_config(self) -> TrainConfig:
        """带派生种子的训练配置"""
        return self.train.model_copy(update={"seed": self.seeds()["train"]})

    def sampling_config(self) -> SamplingConfig:
        """带派生种子的采样配置"""
        return self.sampling.model_copy(update={"seed": self.seeds()["sampler"]})

    def echo(self) -> Dict[str, Any]:
        """写入清单的配置回显"""
        return json.loads(self.model_dump_json())


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """读取 JSON 配置文件（键与命令行参数一致）"""
    if not path:
        return {}
    if not Path(path).is_file():
        raise DataPathError(f"配置文件不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {path}: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"配置文件顶层必须是对象: {path}")
    return values


def build_run_config(
    subcommand: str, file_values: Dict[str, Any], flag_values: Dict[str, Any]
) -> RunConfig:
    """
    按 默认值 < 配置文件 < 命令行 的优先级构造 RunConfig

    扁平的训练/采样键会被归入对应的嵌套配置。

    Raises:
        ConfigError: 校验失败
    """
    merged: Dict[str, Any] = {}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if value is not None:
                merged[key] = value

    if subcommand in ("train", "report"):
        stray = sorted(_SAMPLING_ONLY & set(flag_values))
        stray = [key for key in stray if flag_values[key] is not None]
        if stray:
            raise ConfigError(f"{subcommand} 不接受采样参数: {', '.join(stray)}")

    train_values = dict(merged.pop("train", {}) or {})
    sampling_values = dict(merged.pop("sampling", {}) or {})
    for key in list(merged):
        if key in TRAIN_KEYS and key != "seed":
            train_values[key] = merged.pop(key)
        elif key in SAMPLING_KEYS and key != "seed":
            sampling_values[key] = merged.pop(key)
    sampling_values.setdefault("samples", config.DEFAULT_SAMPLES)
    sampling_values.setdefault("workers", config.WORKERS)
    sampling_values.setdefault("checkpoints", config.checkpoint_list())

    try:
        run = RunConfig(
            subcommand=subcommand,
            train=TrainConfig(**train_values),
            sampling=SamplingConfig(**sampling_values),
            **merged,
        )
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {e}") from e
    except TypeError as e:
        raise ConfigError(f"配置校验失败: {e}") from e
    logger.debug("运行配置: %s", run.model_dump())
    return run
