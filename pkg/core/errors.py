#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
scANN 异常层次
核心模块只负责抛出，CLI 和 MCP 服务负责转换为退出码或错误响应
"""

from typing import Any, List, Sequence, Tuple


class ScannError(Exception):
    """所有 scANN 错误的基类"""

    exit_code = 1


class ConfigError(ScannError):
    """用法或配置错误"""

    exit_code = 2


class DataPathError(ConfigError):
    """数据集、模型或投票文件路径不存在"""


class DimensionError(ScannError):
    """矩阵/向量维度不匹配"""

    exit_code = 2

    def __init__(self, message: str, left: Tuple[int, ...], right: Tuple[int, ...]):
        super().__init__(f"{message}: {tuple(left)} vs {tuple(right)}")
        self.left = tuple(left)
        self.right = tuple(right)


class WeightRangeError(ScannError):
    """权重超出 [-1, 1]，无法解释为伯努利概率"""

    exit_code = 2

    def __init__(self, violations: Sequence[Any]):
        self.violations: List[Any] = list(violations)
        shown = ", ".join(
            f"layer={v.layer} row={v.row} col={v.col} value={v.value!r}"
            for v in self.violations[:5]
        )
        more = len(self.violations) - 5
        suffix = f" (+{more} more)" if more > 0 else ""
        super().__init__(f"权重超出 [-1, 1]: {shown}{suffix}")


class ModelFormatError(ScannError):
    """模型文件格式错误"""

    exit_code = 2


class ModelParseError(ModelFormatError):
    """模型文件无法解析（魔数错误、数据块截断等）"""


class ModelVersionError(ModelFormatError):
    """模型文件版本不受支持"""


class ModelValidationError(ModelFormatError):
    """模型结构不一致（相邻层维度无法衔接等）"""


class IdxFormatError(ScannError):
    """IDX 数据文件格式错误"""

    exit_code = 2


class IdxMagicError(IdxFormatError):
    """IDX 魔数错误"""


class IdxTruncatedError(IdxFormatError):
    """IDX 文件被截断或为空"""


class IdxCountMismatchError(IdxFormatError):
    """图像与标签数量不一致"""

    def __init__(self, image_count: int, label_count: int):
        super().__init__(
            f"图像数量与标签数量不一致: images={image_count} labels={label_count}"
        )
        self.image_count = image_count
        self.label_count = label_count


class VotesParseError(ScannError):
    """投票 CSV 解析失败"""

    exit_code = 2

    def __init__(self, line: int, message: str):
        super().__init__(f"第 {line} 行: {message}")
        self.line = line


class AnalysisError(ScannError):
    """统计分析的输入不满足前置条件"""

    exit_code = 2
