#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
二值矩阵按位打包工具
沿 fan-in 维度打包为 64 位字，填充位恒为 0
"""

import numpy as np

LANE_BITS = 64

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def lanes_for(cols: int) -> int:
    """cols 个比特需要的 64 位字数"""
    return (int(cols) + LANE_BITS - 1) // LANE_BITS


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """
    按行打包布尔矩阵

    Args:
        bits: (rows, cols) 布尔矩阵

    Returns:
        np.ndarray: (rows, lanes) uint64，第 a 列位于字 a // 64 的第 a % 64 位
    """
    bits = np.asarray(bits, dtype=bool)
    rows, cols = bits.shape
    padded = np.zeros((rows, lanes_for(cols) * LANE_BITS), dtype=bool)
    padded[:, :cols] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").astype(np.uint64, copy=False)


def unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    """pack_rows 的逆运算，丢弃填充位"""
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :cols].astype(bool)


def padding_is_clear(words: np.ndarray, cols: int) -> bool:
    """检查填充位是否全部为 0"""
    lanes = words.shape[1]
    spare = lanes * LANE_BITS - int(cols)
    if spare == 0:
        return True
    keep = np.uint64((1 << (LANE_BITS - spare)) - 1)
    return bool(np.all((words[:, -1] & ~keep) == 0))


def popcount(words: np.ndarray) -> np.ndarray:
    """逐字计算置位数（SWAR 算法）"""
    arr = np.array(words, dtype=np.uint64)
    arr -= (arr >> np.uint64(1)) & _M1
    arr = (arr & _M2) + ((arr >> np.uint64(2)) & _M2)
    arr = (arr + (arr >> np.uint64(4))) & _M4
    arr *= _H01
    arr >>= np.uint64(56)
    return arr
