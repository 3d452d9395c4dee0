#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
实验清单
记录配置回显、种子、模型与输出文件校验和、各阶段耗时以及主机信息，
运行结束时原子写入 manifest_<subcommand>.json
"""

import hashlib
import json
import logging
import os
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Union

import psutil

logger = logging.getLogger(__name__)

MANIFEST_TEMPLATE = "manifest_{}.json"
MANIFEST_SCHEMA = 1


def file_sha256(path: Union[str, Path]) -> str:
    """分块计算文件 sha256"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def host_info() -> Dict[str, Any]:
    """主机描述（CPU 核数与内存总量）"""
    try:
        memory = psutil.virtual_memory()
        return {
            "platform": platform.platform(),
            "python": platform.python_version(),
            "cpu_count_logical": psutil.cpu_count(logical=True),
            "cpu_count_physical": psutil.cpu_count(logical=False),
            "memory_total_gb": round(memory.total / (1024**3), 2),
        }
    except Exception as e:
        logger.warning("获取主机信息失败: %s", e)
        return {"platform": platform.platform(), "error": str(e)}


@dataclass
class ExperimentManifest:
    """一次运行的可复现记录"""

    subcommand: str
    config: Dict[str, Any]
    seeds: Dict[str, int]
    model_sha256: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    host: Dict[str, Any] = field(default_factory=host_info)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """计时一个阶段（秒，墙钟时间）"""
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[name] = round(self.timings.get(name, 0.0) + elapsed, 4)
            logger.info("阶段 %s 完成，用时 %.2fs", name, elapsed)

    def record_output(self, path: Union[str, Path], root: Union[str, Path]) -> str:
        """登记输出文件并返回其校验和"""
        digest = file_sha256(path)
        self.outputs[os.path.relpath(path, root)] = digest
        return digest

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": MANIFEST_SCHEMA,
            "subcommand": self.subcommand,
            "config": self.config,
            "seeds": self.seeds,
            "model_sha256": self.model_sha256,
            "outputs": dict(sorted(self.outputs.items())),
            "timings": self.timings,
            "host": self.host,
        }

    def write(self, output_dir: Union[str, Path]) -> Path:
        """写入 output_dir/manifest_<subcommand>.json（临时文件 + os.replace）"""
        path = Path(output_dir) / MANIFEST_TEMPLATE.format(self.subcommand)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = path.with_name(path.name + ".tmp")
        with open(tmp_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        os.replace(tmp_path, path)
        logger.info("清单已写入: %s (%d 个输出文件)", path, len(self.outputs))
        return path
