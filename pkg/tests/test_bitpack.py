#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from core.bitpack import lanes_for, pack_rows, padding_is_clear, popcount, unpack_rows


@pytest.mark.parametrize("cols,lanes", [(1, 1), (64, 1), (65, 2), (128, 2), (784, 13)])
def test_lanes_for(cols, lanes):
    assert lanes_for(cols) == lanes


def test_column_maps_to_word_and_bit():
    bits = np.zeros((1, 130), dtype=bool)
    bits[0, 0] = bits[0, 63] = bits[0, 64] = bits[0, 129] = True
    words = pack_rows(bits)
    assert words.shape == (1, 3)
    assert words.dtype == np.uint64
    assert int(words[0, 0]) == (1 << 0) | (1 << 63)
    assert int(words[0, 1]) == 1
    assert int(words[0, 2]) == 1 << 1


def test_unpack_inverts_pack(rng):
    bits = rng.random((9, 200)) < 0.3
    assert np.array_equal(unpack_rows(pack_rows(bits), 200), bits)


def test_padding_clear_after_pack(rng):
    words = pack_rows(rng.random((4, 70)) < 0.5)
    assert padding_is_clear(words, 70)
    words[0, -1] |= np.uint64(1) << np.uint64(63)
    assert not padding_is_clear(words, 70)


def test_popcount_matches_bit_count(rng):
    words = rng.integers(0, 2**63, size=50, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    expected = [bin(int(w)).count("1") for w in words]
    assert popcount(words).tolist() == expected
    assert int(popcount(np.array([np.iinfo(np.uint64).max], dtype=np.uint64))[0]) == 64
