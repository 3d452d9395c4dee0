#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
测试公共夹具
"""

import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from core.data import synthetic_blobs  # noqa: E402
from core.trainer import TrainConfig, train  # noqa: E402

from .helpers import random_network  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 耗时较长的测试")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_net():
    return random_network([6, 5, 3], seed=7)


@pytest.fixture
def blobs():
    """易分的三类合成数据"""
    return synthetic_blobs(3, 4, 40, 1.0, seed=3)


@pytest.fixture
def trained_tiny(blobs):
    cfg = TrainConfig(
        epochs=30, batch_size=10, learning_rate=0.01, dropout_rate=0.0, seed=5
    )
    net, log = train(blobs, [4, 8, 3], cfg)
    return net, log
