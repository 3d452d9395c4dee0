#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
scANN 命令行入口
子命令 train / sample / holdout / report；退出码 0 成功，1 内部错误，2 用法或配置错误
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from core.errors import ScannError
from core.pipeline import run_command
from core.run_config import build_run_config, load_config_file

logger = logging.getLogger("scann.cli")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的整数: {text}") from None


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的小数: {text}") from None


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("通用选项")
    group.add_argument("--config", help="JSON 配置文件（键与参数同名，参数优先）")
    group.add_argument("--seed", type=int, help="主随机种子（默认 SCANN_SEED）")
    group.add_argument("--output-dir", help="输出目录（默认 SCANN_OUTPUT_DIR）")
    return parent


def _data_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("数据集")
    group.add_argument("--dataset", choices=["idx", "synthetic"], help="数据来源")
    group.add_argument("--data-dir", help="IDX 文件目录（默认 SCANN_DATA_DIR）")
    group.add_argument("--train-images", help="训练图像 IDX 文件")
    group.add_argument("--train-labels", help="训练标签 IDX 文件")
    group.add_argument("--test-images", help="测试图像 IDX 文件")
    group.add_argument("--test-labels", help="测试标签 IDX 文件")
    group.add_argument("--dataset-tag", help="数据集标签，写入模型元数据")
    group.add_argument("--n-classes", type=int, help="类别数")
    group.add_argument("--synthetic-dim", type=int, help="合成数据维度")
    group.add_argument("--synthetic-per-class", type=int, help="合成数据每类样本数")
    group.add_argument("--synthetic-separation", type=float, help="合成数据类间距")
    return parent


def _train_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("训练")
    group.add_argument("--arch", type=_int_list, help="网络结构，如 784,400,10")
    group.add_argument(
        "--hidden-activation", choices=["relu", "sigmoid"], help="隐藏层激活函数"
    )
    group.add_argument("--epochs", type=int, help="训练轮数")
    group.add_argument("--batch-size", type=int, help="批大小")
    group.add_argument("--learning-rate", type=float, help="RMSProp 学习率")
    group.add_argument("--dropout-rate", type=float, help="隐藏层 Dropout 比例")
    return parent


def _sampling_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("采样")
    group.add_argument("--samples", type=int, help="每个输入的采样次数 K")
    group.add_argument("--precision", help="概率精度：full 或 1..16 比特")
    group.add_argument(
        "--precision-mode", choices=["round", "coarse-uniform"], help="低精度实现方式"
    )
    group.add_argument("--mask-mode", choices=["per-input", "shared"], help="掩码模式")
    group.add_argument("--kernel", choices=["packed", "dense"], help="采样矩阵乘实现")
    group.add_argument("--workers", type=int, help="采样线程数")
    group.add_argument("--checkpoints", type=_int_list, help="准确率曲线检查点")
    group.add_argument("--max-items", type=int, help="只采样前 N 个测试样本")
    return parent


def build_parser() -> argparse.ArgumentParser:
    """构建参数解析器"""
    common, data = _common_options(), _data_options()
    training, sampling = _train_options(), _sampling_options()

    parser = argparse.ArgumentParser(
        prog="scann", description="伯努利权重采样神经网络实验流水线"
    )
    commands = parser.add_subparsers(dest="subcommand", required=True)

    train_cmd = commands.add_parser(
        "train", parents=[common, data, training], help="训练受约束网络"
    )
    train_cmd.add_argument("--model-path", help="模型输出路径（默认 <output-dir>/model.scann）")

    sample_cmd = commands.add_parser(
        "sample", parents=[common, data, sampling], help="对测试集采样推理"
    )
    sample_cmd.add_argument("--model-path", help="训练好的模型文件")

    holdout_cmd = commands.add_parser(
        "holdout", parents=[common, data, training, sampling], help="类别留出实验"
    )
    holdout_cmd.add_argument("--holdout-class", type=int, help="被削减的类别")
    holdout_cmd.add_argument(
        "--holdout-fractions", type=_float_list, help="移除比例列表，如 0,0.9"
    )

    report_cmd = commands.add_parser("report", parents=[common], help="由投票表生成报告")
    report_cmd.add_argument("--votes-path", help="sample 输出的 votes.csv")
    return parser


def _flag_values(args: argparse.Namespace) -> Dict[str, Any]:
    values = vars(args).copy()
    values.pop("subcommand", None)
    values.pop("config", None)
    return values


def main(argv: Optional[List[str]] = None) -> int:
    """命令行主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    try:
        run = build_run_config(
            args.subcommand, load_config_file(args.config), _flag_values(args)
        )
        result = run_command(run)
    except ScannError as e:
        logger.error("%s 失败: %s", args.subcommand, e)
        print(f"错误: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("%s 出现未预期的错误: %s", args.subcommand, e)
        print(f"内部错误: {e}", file=sys.stderr)
        return 1

    print(
        json.dumps(
            {
                "subcommand": result.subcommand,
                "output_dir": str(result.output_dir),
                "outputs": result.outputs,
                "manifest": str(result.manifest_path),
            },
            indent=2,
            ensure_ascii=False,
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
