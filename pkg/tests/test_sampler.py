#!/usr/bin/env python
# -*- coding: utf-8 -*-

import time

import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import DimensionError, WeightRangeError
from core.linalg import ActivationKind, matvec
from core.model import LayerParams, NetworkSpec, deterministic_forward
from core.sampler import (
    SamplerSeedPlan,
    SamplingConfig,
    draw_sample,
    expected_cost,
    mask_statistics,
    packed_matvec,
    dense_sampled_matmul,
    prepare_model,
    quantize_probabilities,
    run_sampling,
    sample_dataset,
    sampled_forward,
    sampled_preactivation,
    split_weights,
)

from .helpers import random_network


def single_layer(weights, bias=None, activation=ActivationKind.IDENTITY):
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.zeros(weights.shape[0]) if bias is None else bias
    return NetworkSpec([LayerParams(weights, bias, activation)], weights.shape[1])


def column_order_sum(signed, x):
    """逐列升序累加的参照实现"""
    acc = np.zeros(signed.shape[0])
    for a in range(signed.shape[1]):
        acc += signed[:, a] * x[a]
    return acc


def assert_packed_matches_oracle(rng, rows, cols, trial):
    net = single_layer(rng.uniform(-1, 1, size=(rows, cols)))
    packed = draw_sample(split_weights(net), trial, SamplerSeedPlan(trial)).layers[0]
    x = rng.normal(size=cols)
    expected = column_order_sum(packed.signed_matrix(), x)
    assert np.array_equal(packed_matvec(packed, x), expected)
    assert np.array_equal(packed_matvec(packed, x), matvec(packed.signed_matrix(), x))


class TestSamplingConfig:
    def test_precision_parsing(self):
        assert SamplingConfig(precision="4").precision_bits == 4
        assert SamplingConfig().precision_bits is None
        with pytest.raises(ValidationError):
            SamplingConfig(precision=17)
        with pytest.raises(ValidationError):
            SamplingConfig(precision="high")

    def test_effective_checkpoints(self):
        cfg = SamplingConfig(samples=50)
        assert cfg.effective_checkpoints() == [1, 3, 10, 30, 50]
        assert SamplingConfig(samples=1000).effective_checkpoints()[-1] == 1000

    def test_checkpoints_must_increase(self):
        with pytest.raises(ValidationError):
            SamplingConfig(checkpoints=[10, 3])


class TestSplitWeights:
    def test_disjoint_and_reconstructs(self, tiny_net):
        model = split_weights(tiny_net)
        for layer, params in zip(model.layers, tiny_net.layers):
            assert np.all(layer.pos_prob * layer.neg_prob == 0.0)
            assert np.all((layer.pos_prob >= 0) & (layer.pos_prob <= 1))
            assert np.array_equal(layer.weights(), params.weights)

    def test_out_of_range_rejected(self):
        with pytest.raises(WeightRangeError) as exc:
            split_weights(single_layer([[0.5, 1.2]]))
        assert len(exc.value.violations) == 1

    def test_quantization_grid(self):
        net = single_layer([[1.0, -1.0, 0.3, 0.5 / 256, -0.49 / 256]])
        model = quantize_probabilities(split_weights(net), 8)
        layer = model.layers[0]
        assert np.all(layer.pos_prob * 256 == np.round(layer.pos_prob * 256))
        assert layer.pos_prob[0, 0] == 1.0
        assert layer.neg_prob[0, 1] == 1.0
        # 平局向上舍入，低于半格舍为 0
        assert layer.pos_prob[0, 3] == 1.0 / 256
        assert layer.neg_prob[0, 4] == 0.0
        assert model.precision_bits == 8


class TestDrawSample:
    def test_masks_are_disjoint_and_padded(self):
        net = random_network([70, 65, 4], seed=2)
        model = split_weights(net)
        mask = draw_sample(model, 5, SamplerSeedPlan(1))
        for packed in mask.layers:
            assert packed.overlap_free()
            assert packed.padding_clear()

    def test_reproducible(self, tiny_net):
        model = split_weights(tiny_net)
        a = draw_sample(model, 3, SamplerSeedPlan(42), item=7)
        b = draw_sample(model, 3, SamplerSeedPlan(42), item=7)
        for x, y in zip(a.layers, b.layers):
            assert np.array_equal(x.pos_bits, y.pos_bits)
            assert np.array_equal(x.neg_bits, y.neg_bits)

    def test_streams_differ_by_index(self):
        plan = SamplerSeedPlan(0)
        first = plan.generator(0, 0, 0).random(8)
        assert not np.array_equal(first, plan.generator(1, 0, 0).random(8))
        assert not np.array_equal(first, plan.generator(0, 1, 0).random(8))
        assert not np.array_equal(first, plan.generator(0, 0, 1).random(8))

    def test_extreme_probabilities(self):
        net = single_layer([[1.0, -1.0, 0.0]])
        mask = draw_sample(split_weights(net), 0, SamplerSeedPlan(0))
        assert mask.layers[0].signed_matrix().tolist() == [[1.0, -1.0, 0.0]]

    def test_coarse_uniform_one_bit(self):
        # 1 比特均匀数只取 0 或 0.5，p=0.3 的导通概率变为 0.5
        net = single_layer(np.full((40, 50), 0.3))
        model = prepare_model(net, 1, "coarse-uniform")
        plan = SamplerSeedPlan(3)
        rates = [
            draw_sample(model, k, plan).layers[0].signed_matrix().mean() for k in range(20)
        ]
        assert np.mean(rates) == pytest.approx(0.5, abs=0.02)


class TestKernels:
    def test_packed_matches_column_order_oracle(self, rng):
        for trial in range(25):
            rows, cols = rng.integers(1, 200, size=2)
            assert_packed_matches_oracle(rng, rows, cols, trial)

    def test_packed_matches_oracle_64x64(self, rng):
        assert_packed_matches_oracle(rng, 64, 64, 0)

    @pytest.mark.slow
    def test_packed_matches_oracle_up_to_512(self):
        rng = np.random.default_rng(512)
        for trial in range(1000):
            rows, cols = rng.integers(1, 513, size=2)
            assert_packed_matches_oracle(rng, rows, cols, trial)

    def test_batch_matches_single_items(self, rng):
        net = single_layer(rng.uniform(-1, 1, size=(40, 70)))
        packed = draw_sample(split_weights(net), 0, SamplerSeedPlan(5)).layers[0]
        x = rng.normal(size=(6, 70))
        batch = packed_matvec(packed, x)
        for i in range(6):
            assert np.array_equal(batch[i], packed_matvec(packed, x[i]))

    def test_zero_planes_give_zero_vector(self, rng):
        net = single_layer(np.zeros((5, 9)))
        packed = draw_sample(split_weights(net), 0, SamplerSeedPlan(0)).layers[0]
        assert np.array_equal(packed_matvec(packed, rng.normal(size=9)), np.zeros(5))

    def test_identity_plane_copies_input(self, rng):
        net = single_layer(np.eye(70))
        packed = draw_sample(split_weights(net), 0, SamplerSeedPlan(0)).layers[0]
        x = rng.normal(size=70)
        assert np.array_equal(packed_matvec(packed, x), x)

    def test_dense_kernel_close_to_packed(self, rng):
        net = single_layer(rng.uniform(-1, 1, size=(30, 90)))
        packed = draw_sample(split_weights(net), 0, SamplerSeedPlan(0)).layers[0]
        x = rng.uniform(size=(4, 90))
        assert np.allclose(dense_sampled_matmul(packed, x), packed_matvec(packed, x))

    def test_dimension_mismatch(self, tiny_net):
        model = split_weights(tiny_net)
        mask = draw_sample(model, 0, SamplerSeedPlan(0))
        with pytest.raises(DimensionError):
            packed_matvec(mask.layers[0], np.zeros(5))
        with pytest.raises(DimensionError):
            sampled_forward(model, mask, np.zeros(5))

    def test_deterministic_limit(self, rng):
        """权重全为 -1/0/1 时采样网络与确定性网络逐位一致"""
        weights = [rng.integers(-1, 2, size=(8, 10)), rng.integers(-1, 2, size=(3, 8))]
        net = NetworkSpec(
            [
                LayerParams(weights[0], rng.normal(size=8), ActivationKind.RELU),
                LayerParams(weights[1], rng.normal(size=3), ActivationKind.SOFTMAX),
            ],
            10,
        )
        model = split_weights(net)
        x = rng.uniform(size=10)
        for k in range(5):
            mask = draw_sample(model, k, SamplerSeedPlan(k))
            assert np.array_equal(sampled_forward(model, mask, x), deterministic_forward(net, x))

    def test_relu_clamps_negative_sampled_preactivation(self):
        net = NetworkSpec(
            [
                LayerParams(-np.ones((2, 3)), np.zeros(2), ActivationKind.RELU),
                LayerParams(np.ones((2, 2)), np.zeros(2), ActivationKind.SOFTMAX),
            ],
            3,
        )
        model = split_weights(net)
        mask = draw_sample(model, 0, SamplerSeedPlan(0))
        x = np.ones(3)
        assert np.all(sampled_preactivation(model, mask, x, layer=0) == -3.0)
        assert np.all(sampled_preactivation(model, mask, x, layer=1) == 0.0)


class TestSampledStatistics:
    def test_preactivation_is_unbiased(self):
        rng = np.random.default_rng(8)
        weights = rng.uniform(-1, 1, size=(400, 30))
        bias = rng.normal(size=400)
        model = split_weights(single_layer(weights, bias))
        plan = SamplerSeedPlan(17)
        x = rng.uniform(size=30)
        draws = np.array(
            [
                sampled_preactivation(model, draw_sample(model, k, plan), x)
                for k in range(10_000)
            ]
        )
        expected = weights @ x + bias
        stderr = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
        within = np.abs(draws.mean(axis=0) - expected) <= 3 * stderr
        assert within.mean() >= 0.99

    def test_mean_activation_differs_at_relu_kink(self):
        # 预激活期望恰为 0：确定性输出为 0，采样输出的均值严格为正
        net = single_layer(np.full((1, 20), 0.5), np.array([-10.0]), ActivationKind.RELU)
        model = split_weights(net)
        plan = SamplerSeedPlan(23)
        x = np.ones(20)
        outputs = np.array(
            [sampled_forward(model, draw_sample(model, k, plan), x)[0] for k in range(2000)]
        )
        deterministic = deterministic_forward(net, x)[0]
        assert deterministic == 0.0
        stderr = outputs.std(ddof=1) / np.sqrt(outputs.size)
        assert outputs.mean() - deterministic > 5 * stderr

    def test_set_bit_frequency_at_quarter(self):
        net = single_layer(np.full((100, 1000), 0.25))
        mask = draw_sample(split_weights(net), 0, SamplerSeedPlan(31))
        n = 100 * 1000
        ones = mask_statistics(mask)[0]["positive"]
        sigma = np.sqrt(n * 0.25 * 0.75)
        assert abs(ones - 0.25 * n) <= 3 * sigma
        assert mask_statistics(mask)[0]["negative"] == 0


class TestQuantization:
    def test_nearest_sixteenth(self):
        model = quantize_probabilities(split_weights(single_layer([[0.37, -0.37]])), 4)
        assert model.layers[0].pos_prob[0, 0] == 0.375
        assert model.layers[0].neg_prob[0, 1] == 0.375

    def test_endpoints_fixed(self):
        net = single_layer([[0.0, 1.0, -1.0]])
        for bits in range(1, 17):
            layer = quantize_probabilities(split_weights(net), bits).layers[0]
            assert np.array_equal(layer.weights(), net.layers[0].weights)

    def test_eight_bit_error_bound(self):
        p = np.linspace(0.0, 1.0, 100_001)
        layer = quantize_probabilities(split_weights(single_layer(p[None, :])), 8).layers[0]
        assert np.max(np.abs(layer.pos_prob[0] - p)) <= 2.0**-9

    def test_requantizing_grid_values(self, rng):
        grid = rng.integers(-65536, 65537, size=(30, 40)) / 65536.0
        model = split_weights(single_layer(grid))
        direct = quantize_probabilities(model, 4)
        twice = quantize_probabilities(quantize_probabilities(model, 16), 4)
        assert np.array_equal(twice.layers[0].pos_prob, direct.layers[0].pos_prob)
        assert np.array_equal(twice.layers[0].neg_prob, direct.layers[0].neg_prob)


@pytest.mark.slow
def test_packed_forward_throughput():
    net = random_network([784, 400, 10], seed=3)
    model = split_weights(net)
    mask = draw_sample(model, 0, SamplerSeedPlan(0))
    x = np.random.default_rng(0).uniform(size=784)
    sampled_forward(model, mask, x)
    start = time.perf_counter()
    for _ in range(20):
        sampled_forward(model, mask, x)
    per_call = (time.perf_counter() - start) / 20
    assert per_call < 0.01


class TestRunSampling:
    def test_vote_distribution(self, tiny_net, rng):
        votes = run_sampling(tiny_net, rng.uniform(size=6), 50, SamplerSeedPlan(1))
        assert votes.total == 50
        assert votes.n_classes == 3

    def test_quantized_network_input(self, tiny_net, rng):
        x = rng.uniform(size=6)
        a = run_sampling(tiny_net, x, 30, SamplerSeedPlan(2), bits=4)
        b = run_sampling(split_weights(tiny_net), x, 30, SamplerSeedPlan(2), bits=4)
        assert np.array_equal(a.counts, b.counts)


class TestSampleDataset:
    @pytest.mark.parametrize("mask_mode", ["per-input", "shared"])
    def test_independent_of_worker_count(self, tiny_net, rng, mask_mode):
        model = split_weights(tiny_net)
        images = rng.uniform(size=(12, 6))
        one = sample_dataset(model, images, 20, SamplerSeedPlan(4), mask_mode, workers=1)
        many = sample_dataset(model, images, 20, SamplerSeedPlan(4), mask_mode, workers=4)
        assert one.shape == (12, 20)
        assert np.array_equal(one, many)

    def test_shared_mode_reuses_mask(self, tiny_net, rng):
        model = split_weights(tiny_net)
        images = rng.uniform(size=(5, 6))
        plan = SamplerSeedPlan(6)
        streams = sample_dataset(model, images, 4, plan, "shared")
        for k in range(4):
            mask = draw_sample(model, k, plan)
            for item in range(5):
                out = sampled_forward(model, mask, images[item])
                assert streams[item, k] == int(np.argmax(out))

    def test_per_input_matches_single_item_votes(self, tiny_net, rng):
        model = split_weights(tiny_net)
        images = rng.uniform(size=(3, 6))
        plan = SamplerSeedPlan(9)
        streams = sample_dataset(model, images, 10, plan, "per-input")
        votes = run_sampling(model, images[2], 10, plan, item=2)
        assert np.array_equal(np.bincount(streams[2], minlength=3), votes.counts)

    def test_wrong_dimension(self, tiny_net):
        with pytest.raises(DimensionError):
            sample_dataset(split_weights(tiny_net), np.zeros((2, 4)), 3, SamplerSeedPlan(0))


class TestCost:
    def test_mask_statistics_for_saturated_weights(self):
        net = single_layer([[1.0, -1.0, 1.0], [0.0, 1.0, -1.0]])
        stats = mask_statistics(draw_sample(split_weights(net), 0, SamplerSeedPlan(0)))
        assert stats == [
            {"layer": 0, "positive": 3, "negative": 2, "active": 5, "synapses": 6}
        ]

    def test_expected_cost_sums_probabilities(self):
        net = single_layer([[0.5, -0.25], [0.0, 1.0]])
        cost = expected_cost(split_weights(net))
        assert cost[0]["dense_macs"] == 4
        assert cost[0]["expected_additions"] == pytest.approx(1.75)
        assert cost[0]["active_fraction"] == pytest.approx(1.75 / 4)
