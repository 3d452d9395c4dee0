#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
数据集模块
IDX 格式（MNIST / Fashion-MNIST）读写、类别留出过滤以及测试用合成数据
"""

import gzip
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import (
    ConfigError,
    DataPathError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
)

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# 标准文件名（.gz 可选）
IDX_FILENAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Dataset:
    """图像（像素位于 [0, 1]）与标签"""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    split: str = "train"
    tag: str = ""
    image_shape: Tuple[int, int] = (28, 28)

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 2:
            raise ConfigError(f"图像必须是 (N, D) 矩阵: {images.shape}")
        if images.shape[0] != labels.shape[0]:
            raise IdxCountMismatchError(images.shape[0], labels.shape[0])
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ConfigError(f"标签超出范围 [0, {self.n_classes}): {labels.max()}")
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ConfigError("像素必须位于 [0, 1]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.images.shape[1])

    def head(self, count: int) -> "Dataset":
        """前 count 个样本"""
        return Dataset(
            self.images[:count],
            self.labels[:count],
            self.n_classes,
            self.split,
            self.tag,
            self.image_shape,
        )


class HoldoutSpec(BaseModel):
    """类别留出设置"""

    model_config = ConfigDict(extra="forbid")

    class_index: int = Field(..., ge=0, description="被削减的类别")
    removal_fraction: float = Field(..., ge=0.0, le=1.0, description="移除比例")
    seed: int = Field(0, ge=0, description="留出抽样种子")


def _open_maybe_gzip(path: PathLike) -> BinaryIO:
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_header(f: BinaryIO, path: PathLike, expected_magic: int, dims: int):
    header = f.read(4 + 4 * dims)
    if len(header) < 4 + 4 * dims:
        raise IdxTruncatedError(f"IDX 文件头截断: {path} ({len(header)} 字节)")
    magic, *shape = struct.unpack(f">I{dims}I", header)
    if magic != expected_magic:
        raise IdxMagicError(
            f"IDX 魔数错误: {path} (0x{magic:08x}, 期望 0x{expected_magic:08x})"
        )
    return shape


def _read_body(f: BinaryIO, path: PathLike, size: int) -> np.ndarray:
    body = f.read(size)
    if len(body) < size:
        raise IdxTruncatedError(f"IDX 数据截断: {path} (需要 {size} 字节，实际 {len(body)})")
    return np.frombuffer(body, dtype=np.uint8)


def load_idx(
    images_path: PathLike,
    labels_path: PathLike,
    split: str = "train",
    n_classes: int = 10,
    tag: str = "",
) -> Dataset:
    """
    读取一对 IDX 文件（支持 .gz）

    Args:
        images_path: 图像文件路径（magic 0x00000803）
        labels_path: 标签文件路径（magic 0x00000801）
        split: train 或 test
        n_classes: 类别数

    Returns:
        Dataset: 像素除以 255 后的数据集
    """
    for path in (images_path, labels_path):
        if not os.path.isfile(path):
            raise DataPathError(f"数据文件不存在: {path}")

    with _open_maybe_gzip(images_path) as f:
        count, rows, cols = _read_header(f, images_path, IDX_IMAGES_MAGIC, 3)
        pixels = _read_body(f, images_path, count * rows * cols)
    with _open_maybe_gzip(labels_path) as f:
        (label_count,) = _read_header(f, labels_path, IDX_LABELS_MAGIC, 1)
        if label_count != count:
            raise IdxCountMismatchError(count, label_count)
        labels = _read_body(f, labels_path, label_count)

    images = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    dataset = Dataset(
        images, labels.astype(np.int64), n_classes, split, tag, (rows, cols)
    )
    logger.info(
        "已加载 IDX 数据: %s (%d 项, %dx%d)", images_path, count, rows, cols
    )
    return dataset


def write_idx(dataset: Dataset, images_path: PathLike, labels_path: PathLike) -> None:
    """将数据集写回 IDX 格式（像素 round(x * 255)），按后缀决定是否 gzip"""
    rows, cols = dataset.image_shape
    if rows * cols != dataset.dim:
        raise ConfigError(f"image_shape {dataset.image_shape} 与维度 {dataset.dim} 不一致")
    pixels = np.rint(dataset.images * 255.0).astype(np.uint8)
    images_blob = struct.pack(">IIII", IDX_IMAGES_MAGIC, len(dataset), rows, cols)
    labels_blob = struct.pack(">II", IDX_LABELS_MAGIC, len(dataset))
    for path, blob in (
        (images_path, images_blob + pixels.tobytes()),
        (labels_path, labels_blob + dataset.labels.astype(np.uint8).tobytes()),
    ):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as f:
            f.write(blob)


def resolve_idx_paths(data_dir: PathLike, split: str) -> Tuple[str, str]:
    """在数据目录中查找标准 IDX 文件名（优先未压缩）"""
    if split not in IDX_FILENAMES:
        raise ConfigError(f"未知的数据划分: {split}")
    found = []
    for name in IDX_FILENAMES[split]:
        candidates = [Path(data_dir) / name, Path(data_dir) / f"{name}.gz"]
        path = next((c for c in candidates if c.is_file()), None)
        if path is None:
            raise DataPathError(f"在 {data_dir} 中找不到 {name}[.gz]")
        found.append(str(path))
    return found[0], found[1]


def class_counts(dataset: Dataset) -> Dict[int, int]:
    """每个类别的样本数"""
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    return {index: int(count) for index, count in enumerate(counts)}


def apply_holdout(dataset: Dataset, spec: HoldoutSpec) -> Dataset:
    """
    随机移除目标类别 floor(fraction * count) 个训练样本

    其余类别不受影响，保留样本的原有顺序。
    """
    if dataset.split != "train":
        raise ConfigError(f"类别留出只能作用于训练集: split={dataset.split}")
    if spec.class_index >= dataset.n_classes:
        raise ConfigError(f"留出类别越界: {spec.class_index} (类别数 {dataset.n_classes})")

    members = np.nonzero(dataset.labels == spec.class_index)[0]
    removal = int(np.floor(spec.removal_fraction * members.size))
    rng = np.random.default_rng(spec.seed)
    removed = rng.choice(members, size=removal, replace=False) if removal else []
    keep = np.ones(len(dataset), dtype=bool)
    keep[removed] = False
    logger.info(
        "类别留出: class=%d fraction=%.3f 移除 %d/%d",
        spec.class_index,
        spec.removal_fraction,
        removal,
        members.size,
    )
    return Dataset(
        dataset.images[keep],
        dataset.labels[keep],
        dataset.n_classes,
        dataset.split,
        dataset.tag,
        dataset.image_shape,
    )


def synthetic_blobs(
    n_classes: int,
    dim: int,
    n_per_class: int,
    separation: float,
    seed: int,
    split: str = "train",
) -> Dataset:
    """
    生成高斯团簇数据集（裁剪到 [0, 1]），用于测试

    Args:
        n_classes: 类别数
        dim: 特征维度
        n_per_class: 每类样本数
        separation: 类中心间距，越大越容易分开
        seed: 随机种子
    """
    if min(n_classes, dim, n_per_class) < 1 or separation <= 0:
        raise ConfigError("合成数据参数必须为正")
    rng = np.random.default_rng(seed)
    centers = 0.5 + rng.uniform(-0.5, 0.5, size=(n_classes, dim)) * min(separation, 1.0)
    noise = 0.05 / separation
    labels = np.repeat(np.arange(n_classes), n_per_class)
    images = centers[labels] + rng.normal(0.0, noise, size=(labels.size, dim))
    order = rng.permutation(labels.size)
    side = int(np.sqrt(dim))
    shape = (side, side) if side * side == dim else (1, dim)
    return Dataset(
        np.clip(images[order], 0.0, 1.0),
        labels[order],
        n_classes,
        split,
        "synthetic",
        shape,
    )
