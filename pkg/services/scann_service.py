#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
scANN MCP service
"""

from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

from pydantic import Field

from core.errors import DataPathError
from core.manifest import file_sha256
from core.model import load_model, validate_unit_interval
from core.pipeline import run_command
from core.reports import to_jsonable
from core.run_config import build_run_config
from core.sampler import expected_cost, split_weights

from .base_service import BaseService


class ScannService(BaseService):
    """Train, sample and analyse Bernoulli weight-sampling networks"""

    def __init__(self, name: str = "scann_service"):
        super().__init__(name=name, service_type="scann", version="1.0.0")

        # Register all tools
        self._register_tools()

        self.logger.info("scANN service initialized: %s", name)

    async def run_subcommand(
        self, subcommand: str, flags: Dict[str, Any]
    ) -> Dict[str, Any]:
        """Build a RunConfig from flat flags and run one pipeline stage"""
        try:
            run = build_run_config(subcommand, {}, flags)
            result = await self._run_sync(run_command, run)
        except Exception as e:
            return self._handle_error(subcommand, e)
        return self._success_response(
            {
                "output_dir": str(result.output_dir),
                "outputs": result.outputs,
                "manifest": str(result.manifest_path),
                "summary": to_jsonable(result.summary),
            },
            f"{subcommand} finished",
        )

    def describe_model(self, model_path: str) -> Dict[str, Any]:
        """Architecture, metadata and sampling cost of a saved model"""
        if not Path(model_path).is_file():
            raise DataPathError(f"模型文件不存在: {model_path}")
        net = load_model(model_path)
        violations = validate_unit_interval(net)
        info = {
            "arch": net.arch,
            "activations": [layer.activation.value for layer in net.layers],
            "metadata": net.metadata,
            "sha256": file_sha256(model_path),
            "weight_violations": len(violations),
        }
        if not violations:
            info["expected_cost"] = expected_cost(split_weights(net))
        return info

    def _register_tools(self):
        """Register pipeline tools"""

        @self.tool()
        async def train(
            output_dir: Annotated[str, Field(description="输出目录")],
            dataset: Annotated[
                str, Field(description="数据来源: idx 或 synthetic")
            ] = "idx",
            data_dir: Annotated[
                Optional[str], Field(description="IDX 文件目录，默认 SCANN_DATA_DIR")
            ] = None,
            arch: Annotated[
                Optional[List[int]], Field(description="网络结构，如 [784, 400, 10]")
            ] = None,
            epochs: Annotated[Optional[int], Field(description="训练轮数")] = None,
            seed: Annotated[Optional[int], Field(description="主随机种子")] = None,
            options: Annotated[
                Optional[Dict[str, Any]],
                Field(description="其他与命令行同名的参数，如 batch_size、n_classes"),
            ] = None,
        ) -> Dict[str, Any]:
            """训练受约束网络（权重裁剪到 [-1, 1]）并保存模型"""
            flags = dict(options or {})
            flags.update(
                output_dir=output_dir,
                dataset=dataset,
                data_dir=data_dir,
                arch=arch,
                epochs=epochs,
                seed=seed,
            )
            return await self.run_subcommand("train", flags)

        @self.tool()
        async def sample(
            model_path: Annotated[str, Field(description="训练好的模型文件")],
            output_dir: Annotated[str, Field(description="输出目录")],
            samples: Annotated[Optional[int], Field(description="采样次数 K")] = None,
            precision: Annotated[
                Optional[str], Field(description="概率精度: full 或 1..16 比特")
            ] = None,
            mask_mode: Annotated[
                Optional[str], Field(description="per-input 或 shared")
            ] = None,
            seed: Annotated[Optional[int], Field(description="主随机种子")] = None,
            options: Annotated[
                Optional[Dict[str, Any]],
                Field(description="其他参数，如 kernel、workers、max_items、dataset"),
            ] = None,
        ) -> Dict[str, Any]:
            """对测试集进行 K 次伯努利权重采样推理，输出投票表与摘要"""
            flags = dict(options or {})
            flags.update(
                model_path=model_path,
                output_dir=output_dir,
                samples=samples,
                precision=precision,
                mask_mode=mask_mode,
                seed=seed,
            )
            return await self.run_subcommand("sample", flags)

        @self.tool()
        async def holdout(
            holdout_class: Annotated[int, Field(description="被削减的类别")],
            output_dir: Annotated[str, Field(description="输出目录")],
            fractions: Annotated[
                Optional[List[float]], Field(description="移除比例列表，默认 [0, 0.9]")
            ] = None,
            seed: Annotated[Optional[int], Field(description="主随机种子")] = None,
            options: Annotated[
                Optional[Dict[str, Any]],
                Field(description="其他训练与采样参数"),
            ] = None,
        ) -> Dict[str, Any]:
            """类别留出实验：比较留出类与其他类的平均熵"""
            flags = dict(options or {})
            flags.update(
                holdout_class=holdout_class,
                output_dir=output_dir,
                holdout_fractions=fractions,
                seed=seed,
            )
            return await self.run_subcommand("holdout", flags)

        @self.tool()
        async def report(
            votes_path: Annotated[str, Field(description="sample 输出的 votes.csv")],
            output_dir: Annotated[str, Field(description="输出目录")],
        ) -> Dict[str, Any]:
            """由投票表生成混淆矩阵、熵直方图与准确率曲线"""
            return await self.run_subcommand(
                "report", {"votes_path": votes_path, "output_dir": output_dir}
            )

        @self.tool()
        async def model_info(
            model_path: Annotated[str, Field(description="模型文件路径")],
        ) -> Dict[str, Any]:
            """查看模型结构、元数据与采样成本"""
            try:
                info = await self._run_sync(self.describe_model, model_path)
            except Exception as e:
                return self._handle_error("model_info", e)
            return self._success_response(to_jsonable(info))
