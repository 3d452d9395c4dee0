#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from core.errors import DimensionError, ScannError
from core.linalg import (
    ActivationKind,
    activation_derivative,
    apply_activation,
    as_matrix,
    cross_entropy,
    matvec,
)


def scalar_matvec(w, x):
    out = []
    for row in w:
        acc = 0.0
        for a, value in enumerate(row):
            acc += value * x[a]
        out.append(acc)
    return np.array(out)


class TestMatvec:
    def test_matches_scalar_loop_bit_exactly(self, rng):
        for _ in range(20):
            rows, cols = rng.integers(1, 40, size=2)
            w = rng.uniform(-1, 1, size=(rows, cols))
            x = rng.uniform(0, 1, size=cols)
            assert np.array_equal(matvec(w, x), scalar_matvec(w, x))

    def test_batch_rows_match_single_vectors(self, rng):
        w = rng.normal(size=(7, 11))
        xs = rng.normal(size=(5, 11))
        batch = matvec(w, xs)
        for i in range(5):
            assert np.array_equal(batch[i], matvec(w, xs[i]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            matvec(np.zeros((2, 3)), np.zeros(4))

    def test_zero_weights_give_zero(self):
        assert np.array_equal(matvec(np.zeros((3, 2)), np.array([5.0, -1.0])), np.zeros(3))


class TestActivations:
    def test_relu_kink(self):
        out = apply_activation(ActivationKind.RELU, np.array([-2.0, 0.0, 3.0]))
        assert out.tolist() == [0.0, 0.0, 3.0]

    def test_sigmoid_is_stable_at_extremes(self):
        out = apply_activation(ActivationKind.SIGMOID, np.array([-1000.0, 0.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(0.0)
        assert out[1] == pytest.approx(0.5)
        assert out[2] == pytest.approx(1.0)

    def test_softmax_sums_to_one_and_is_shift_invariant(self):
        z = np.array([[1.0, 2.0, 3.0], [1000.0, 1001.0, 1002.0]])
        out = apply_activation(ActivationKind.SOFTMAX, z)
        assert np.allclose(out.sum(axis=1), 1.0)
        assert np.allclose(out[0], out[1])

    def test_identity_copies(self):
        z = np.array([1.0, -1.0])
        out = apply_activation(ActivationKind.IDENTITY, z)
        assert out is not z
        assert np.array_equal(out, z)

    def test_derivative_of_softmax_rejected(self):
        with pytest.raises(ScannError):
            activation_derivative(ActivationKind.SOFTMAX, np.zeros(2), np.zeros(2))

    def test_tags_round_trip(self):
        for kind in ActivationKind:
            assert ActivationKind.from_tag(kind.tag) is kind
        with pytest.raises(ValueError):
            ActivationKind.from_tag(99)


class TestCrossEntropy:
    def test_confident_correct_is_zero(self):
        assert cross_entropy(np.array([0.0, 1.0]), 1) == 0.0

    def test_uniform_is_log_n(self):
        assert cross_entropy(np.full(4, 0.25), 2) == pytest.approx(np.log(4))

    def test_zero_probability_is_clamped(self):
        assert np.isfinite(cross_entropy(np.array([1.0, 0.0]), 1))

    def test_invalid_inputs(self):
        with pytest.raises(ScannError):
            cross_entropy(np.array([0.5, 0.5]), 2)
        with pytest.raises(ScannError):
            cross_entropy(np.array([0.5, 0.6]), 0)


def test_as_matrix_rejects_nan():
    with pytest.raises(ScannError):
        as_matrix([[1.0, float("nan")]])
