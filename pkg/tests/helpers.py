#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""测试用网络构造"""

import numpy as np

from core.linalg import ActivationKind
from core.model import LayerParams, NetworkSpec


def random_network(arch, seed=0, hidden=ActivationKind.RELU, scale=1.0):
    """权重均匀分布于 [-scale, scale] 的随机网络，输出层为 Softmax"""
    rng = np.random.default_rng(seed)
    layers = []
    for index, (fan_in, fan_out) in enumerate(zip(arch[:-1], arch[1:])):
        last = index == len(arch) - 2
        layers.append(
            LayerParams(
                rng.uniform(-scale, scale, size=(fan_out, fan_in)),
                rng.uniform(-0.1, 0.1, size=fan_out),
                ActivationKind.SOFTMAX if last else hidden,
            )
        )
    return NetworkSpec(layers, arch[0], {"seed": seed})
