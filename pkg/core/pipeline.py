#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
实验流水线
train / sample / holdout / report 四个子命令的实现，CLI 与 MCP 服务共用。
所有输入在创建任何输出之前完成校验。
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .analytics import (
    EntropyReport,
    accuracy_vs_samples,
    bootstrap_mean_difference,
    build_confusion,
    build_entropy_report,
    choices,
    entropy_histogram,
    holdout_entropy_report,
    misclassified_examples,
    per_sample_accuracy,
    vote_counts,
)
from .data import (
    Dataset,
    HoldoutSpec,
    apply_holdout,
    class_counts,
    load_idx,
    resolve_idx_paths,
    synthetic_blobs,
)
from .errors import ConfigError, DataPathError, DimensionError, WeightRangeError
from .manifest import ExperimentManifest, file_sha256
from .model import NetworkSpec, load_model, predict_classes, save_model, validate_unit_interval
from .reports import (
    read_votes_csv,
    write_confusion_csv,
    write_curve_csv,
    write_json,
    write_rows,
    write_training_log,
    write_votes_csv,
)
from .run_config import RunConfig, holdout_tag
from .sampler import (
    DEFAULT_CHECKPOINTS,
    SamplerSeedPlan,
    SamplingConfig,
    draw_sample,
    expected_cost,
    mask_statistics,
    prepare_model,
    sample_dataset,
)
from .trainer import TrainingLog, evaluate_accuracy, train

logger = logging.getLogger(__name__)

MODEL_NAME = "model.scann"

HOLDOUT_COLUMNS = [
    "fraction",
    "removed",
    "det_acc",
    "scann_acc",
    "h_in",
    "h_out",
    "i_in",
    "i_out",
    "gap",
    "ci_low",
    "ci_high",
]


@dataclass
class RunResult:
    """一次子命令运行的产物"""

    subcommand: str
    output_dir: Path
    outputs: Dict[str, str] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    manifest_path: Optional[Path] = None


def load_datasets(run: RunConfig) -> Tuple[Dataset, Dataset]:
    """
    按配置加载训练集与测试集

    合成数据从同一组类中心生成，前一半作为训练集，后一半作为测试集。
    """
    if run.dataset == "synthetic":
        blobs = synthetic_blobs(
            run.n_classes,
            run.synthetic_dim,
            2 * run.synthetic_per_class,
            run.synthetic_separation,
            run.seeds()["data"],
        )
        half = len(blobs) // 2
        train_set = Dataset(
            blobs.images[:half], blobs.labels[:half], run.n_classes, "train",
            "synthetic", blobs.image_shape,
        )
        test_set = Dataset(
            blobs.images[half:], blobs.labels[half:], run.n_classes, "test",
            "synthetic", blobs.image_shape,
        )
        return train_set, test_set

    loaded = {}
    for split, images, labels in (
        ("train", run.train_images, run.train_labels),
        ("test", run.test_images, run.test_labels),
    ):
        if not (images and labels):
            images, labels = resolve_idx_paths(run.data_dir, split)
        loaded[split] = load_idx(images, labels, split, run.n_classes, run.dataset_tag)
    return loaded["train"], loaded["test"]


def _check_input_dim(run: RunConfig, dataset: Dataset) -> None:
    if run.arch[0] != dataset.dim:
        raise ConfigError(f"网络输入维度 {run.arch[0]} 与数据维度 {dataset.dim} 不一致")


def _load_model_checked(path: Optional[str], dataset: Dataset) -> NetworkSpec:
    if not path or not Path(path).is_file():
        raise DataPathError(f"模型文件不存在: {path}")
    net = load_model(path)
    if net.input_dim != dataset.dim:
        raise DimensionError("模型输入维度与数据不一致", (net.input_dim,), (dataset.dim,))
    if net.n_classes != dataset.n_classes:
        raise DimensionError(
            "模型输出维度与类别数不一致", (net.n_classes,), (dataset.n_classes,)
        )
    return net


def _train_and_save(
    run: RunConfig, train_set: Dataset, test_set: Dataset, model_path: Path
) -> Tuple[NetworkSpec, TrainingLog, str]:
    net, log = train(
        train_set, run.arch, run.train_config(), test_set, run.hidden_activation
    )
    violations = validate_unit_interval(net)
    if violations:
        raise WeightRangeError(violations)
    digest = save_model(net, model_path)
    return net, log, digest


def _sampling_for(run: RunConfig, test_set: Dataset) -> Tuple[SamplingConfig, Dataset]:
    cfg = run.sampling_config()
    if cfg.max_items is not None:
        test_set = test_set.head(cfg.max_items)
    if len(test_set) == 0:
        raise ConfigError("测试集为空")
    return cfg, test_set


def votes_seed(votes_path: str) -> int:
    """由投票表内容派生的 bootstrap 种子（sha256 前 64 位）"""
    return int(file_sha256(votes_path)[:16], 16)


def _entropy_gap(report: EntropyReport, seed: int) -> Optional[Dict[str, float]]:
    if report.correct.all() or not report.correct.any():
        return None
    diff, low, high = bootstrap_mean_difference(
        report.entropy[~report.correct], report.entropy[report.correct], seed=seed
    )
    return {"diff": diff, "ci_low": low, "ci_high": high}


def run_sampling_phase(
    net: NetworkSpec, test_set: Dataset, cfg: SamplingConfig
) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    对测试集采样并汇总

    Returns:
        Tuple[np.ndarray, Dict[str, Any]]: (N, K) 投票矩阵与摘要
    """
    model = prepare_model(net, cfg.precision_bits, cfg.precision_mode)
    plan = SamplerSeedPlan(cfg.seed)
    streams = sample_dataset(
        model, test_set.images, cfg.samples, plan, cfg.mask_mode, cfg.kernel, cfg.workers
    )

    n_classes = test_set.n_classes
    counts = vote_counts(streams, n_classes)
    first, second = choices(counts)
    report = build_entropy_report(counts, test_set.labels, n_classes)
    det_pred = predict_classes(net, test_set.images)
    det_confusion = build_confusion("first", det_pred, test_set.labels, n_classes)
    single = per_sample_accuracy(streams, test_set.labels)
    curve = accuracy_vs_samples(
        streams, test_set.labels, cfg.effective_checkpoints(), n_classes
    )

    summary = {
        "items": len(test_set),
        "samples": cfg.samples,
        "n_classes": n_classes,
        "precision": cfg.precision,
        "precision_mode": cfg.precision_mode,
        "mask_mode": cfg.mask_mode,
        "kernel": cfg.kernel,
        "deterministic_accuracy": det_confusion.accuracy(),
        "deterministic_confusion": det_confusion.counts,
        "scann_accuracy": float(np.mean(first == test_set.labels)),
        "top2_accuracy": float(
            np.mean((first == test_set.labels) | (second == test_set.labels))
        ),
        "entropy": report.summary(),
        "entropy_gap": _entropy_gap(report, cfg.seed),
        "accuracy_vs_samples": [{"k": k, "accuracy": acc} for k, acc in curve],
        "per_sample_accuracy": {
            "min": float(single.min()),
            "median": float(np.median(single)),
            "max": float(single.max()),
        },
        "expected_cost": expected_cost(model),
        "mask_statistics": mask_statistics(draw_sample(model, 0, plan)),
    }
    logger.info(
        "采样完成: det_acc=%.4f scann_acc=%.4f H_correct=%.4f H_incorrect=%.4f",
        summary["deterministic_accuracy"],
        summary["scann_accuracy"],
        report.mean_entropy_correct,
        report.mean_entropy_incorrect,
    )
    return streams, summary


def _finish(result: RunResult, manifest: ExperimentManifest) -> RunResult:
    for path in sorted(result.outputs.values()):
        manifest.record_output(path, result.output_dir)
    result.manifest_path = manifest.write(result.output_dir)
    return result


def _new_manifest(run: RunConfig) -> ExperimentManifest:
    return ExperimentManifest(run.subcommand, run.echo(), run.seeds())


def cmd_train(run: RunConfig) -> RunResult:
    """训练确定性网络，写入模型文件、训练日志与摘要"""
    train_set, test_set = load_datasets(run)
    _check_input_dim(run, train_set)

    output_dir = Path(run.output_dir)
    model_path = Path(run.model_path) if run.model_path else output_dir / MODEL_NAME
    result = RunResult("train", output_dir)
    manifest = _new_manifest(run)

    with manifest.phase("train"):
        net, log, digest = _train_and_save(run, train_set, test_set, model_path)
    manifest.model_sha256 = digest

    last = log.records[-1] if log.records else None
    result.summary = {
        "arch": net.arch,
        "epochs": len(log.records),
        "final_loss": last.loss if last else None,
        "train_accuracy": evaluate_accuracy(net, train_set),
        "test_accuracy": evaluate_accuracy(net, test_set),
        "class_counts": class_counts(train_set),
        "model_sha256": digest,
    }
    result.outputs["model"] = str(model_path)
    result.outputs["training_log"] = str(
        write_training_log(output_dir / "training_log.csv", log)
    )
    result.outputs["summary"] = str(
        write_json(output_dir / "train_summary.json", result.summary)
    )
    return _finish(result, manifest)


def cmd_sample(run: RunConfig) -> RunResult:
    """对测试集做 K 次采样推理，写入投票表与摘要"""
    _, test_set = load_datasets(run)
    net = _load_model_checked(run.model_path, test_set)
    cfg, test_set = _sampling_for(run, test_set)

    output_dir = Path(run.output_dir)
    result = RunResult("sample", output_dir)
    manifest = _new_manifest(run)
    manifest.model_sha256 = file_sha256(run.model_path)

    with manifest.phase("sample"):
        streams, result.summary = run_sampling_phase(net, test_set, cfg)
    result.outputs["votes"] = str(
        write_votes_csv(output_dir / "votes.csv", test_set.labels, streams, test_set.n_classes)
    )
    result.outputs["summary"] = str(
        write_json(output_dir / "sample_summary.json", result.summary)
    )
    return _finish(result, manifest)


def cmd_holdout(run: RunConfig) -> RunResult:
    """
    类别留出实验：对每个移除比例训练、采样并比较留出类与其余类的熵

    每个比例输出一个模型与投票表，汇总为 holdout_report.csv。
    """
    train_set, test_set = load_datasets(run)
    _check_input_dim(run, train_set)
    cfg, test_set = _sampling_for(run, test_set)

    output_dir = Path(run.output_dir)
    result = RunResult("holdout", output_dir)
    manifest = _new_manifest(run)
    seeds = run.seeds()
    before = class_counts(train_set)
    rows: List[Dict[str, Any]] = []

    for fraction in run.holdout_fractions:
        tag = holdout_tag(fraction)
        spec = HoldoutSpec(
            class_index=run.holdout_class, removal_fraction=fraction, seed=seeds["holdout"]
        )
        reduced = apply_holdout(train_set, spec)
        with manifest.phase(f"train_{tag}"):
            net, _, _ = _train_and_save(
                run, reduced, test_set, output_dir / f"model_holdout_{tag}.scann"
            )
        with manifest.phase(f"sample_{tag}"):
            streams, summary = run_sampling_phase(net, test_set, cfg)

        counts = vote_counts(streams, test_set.n_classes)
        report = build_entropy_report(counts, test_set.labels, test_set.n_classes)
        comparison = holdout_entropy_report(report, run.holdout_class)
        out = test_set.labels == run.holdout_class
        gap, low, high = bootstrap_mean_difference(
            report.entropy[out], report.entropy[~out], seed=seeds["holdout"]
        )
        rows.append(
            {
                "fraction": fraction,
                "removed": before[run.holdout_class] - class_counts(reduced)[run.holdout_class],
                "det_acc": summary["deterministic_accuracy"],
                "scann_acc": summary["scann_accuracy"],
                "h_in": comparison.h_in,
                "h_out": comparison.h_out,
                "i_in": comparison.i_in,
                "i_out": comparison.i_out,
                "gap": gap,
                "ci_low": low,
                "ci_high": high,
            }
        )
        result.outputs[f"model_{tag}"] = str(output_dir / f"model_holdout_{tag}.scann")
        result.outputs[f"votes_{tag}"] = str(
            write_votes_csv(
                output_dir / f"votes_holdout_{tag}.csv",
                test_set.labels,
                streams,
                test_set.n_classes,
            )
        )
        logger.info(
            "留出比例 %s: H_in=%.4f H_out=%.4f gap=%.4f [%.4f, %.4f]",
            tag,
            comparison.h_in,
            comparison.h_out,
            gap,
            low,
            high,
        )

    result.summary = {
        "holdout_class": run.holdout_class,
        "class_counts": before,
        "rows": rows,
    }
    result.outputs["report"] = str(
        write_rows(output_dir / "holdout_report.csv", HOLDOUT_COLUMNS, rows)
    )
    result.outputs["summary"] = str(
        write_json(output_dir / "holdout_summary.json", result.summary)
    )
    return _finish(result, manifest)


def cmd_report(run: RunConfig) -> RunResult:
    """
    由投票表重算全部报告

    只读取 votes_path，输出是投票表的纯函数：检查点固定为默认值，
    bootstrap 种子取自投票表内容的 sha256，与 --seed 和环境变量无关。
    """
    table = read_votes_csv(run.votes_path)
    counts = table.counts()
    first, second = choices(counts)
    n_classes = table.n_classes
    checkpoints = SamplingConfig(
        samples=table.samples, checkpoints=list(DEFAULT_CHECKPOINTS)
    ).effective_checkpoints()
    bootstrap_seed = votes_seed(run.votes_path)

    output_dir = Path(run.output_dir)
    result = RunResult("report", output_dir)
    manifest = _new_manifest(run)

    with manifest.phase("report"):
        report = build_entropy_report(counts, table.labels, n_classes)
        first_cm = build_confusion("first", first, table.labels, n_classes)
        second_cm = build_confusion("second", second, table.labels, n_classes)
        curve = accuracy_vs_samples(table.streams, table.labels, checkpoints, n_classes)
        single = per_sample_accuracy(table.streams, table.labels)

    outputs = {
        "confusion_first": write_confusion_csv(
            output_dir / "confusion_first.csv", first_cm
        ),
        "confusion_second": write_confusion_csv(
            output_dir / "confusion_second.csv", second_cm
        ),
        "accuracy_curve": write_curve_csv(output_dir / "accuracy_curve.csv", curve),
        "entropy_items": write_rows(
            output_dir / "entropy_items.csv",
            ["item", "label", "first", "correct", "entropy", "information"],
            (
                {
                    "item": int(table.items[i]),
                    "label": int(report.labels[i]),
                    "first": int(report.first[i]),
                    "correct": int(report.correct[i]),
                    "entropy": report.entropy[i],
                    "information": report.information[i],
                }
                for i in range(report.entropy.size)
            ),
        ),
        "entropy_histogram": write_rows(
            output_dir / "entropy_histogram.csv",
            ["bin_low", "bin_high", "n_correct", "n_incorrect"],
            entropy_histogram(report),
        ),
        "per_sample_accuracy": write_rows(
            output_dir / "per_sample_accuracy.csv",
            ["sample", "accuracy"],
            ({"sample": k, "accuracy": acc} for k, acc in enumerate(single.tolist())),
        ),
        "misclassified": write_rows(
            output_dir / "misclassified.csv",
            [
                "item",
                "label",
                "first",
                "first_share",
                "second",
                "second_share",
                "label_share",
                "entropy",
            ],
            misclassified_examples(counts, table.labels),
        ),
    }
    result.summary = {
        "items": int(counts.shape[0]),
        "samples": table.samples,
        "n_classes": n_classes,
        "first_choice_accuracy": first_cm.accuracy(),
        "entropy": report.summary(),
        "entropy_gap": _entropy_gap(report, bootstrap_seed),
        "accuracy_vs_samples": [{"k": k, "accuracy": acc} for k, acc in curve],
    }
    outputs["summary"] = write_json(output_dir / "report_summary.json", result.summary)
    result.outputs = {name: str(path) for name, path in outputs.items()}
    return _finish(result, manifest)


COMMANDS = {
    "train": cmd_train,
    "sample": cmd_sample,
    "holdout": cmd_holdout,
    "report": cmd_report,
}


def run_command(run: RunConfig) -> RunResult:
    """按子命令分派"""
    logger.info("运行子命令 %s (seed=%d)", run.subcommand, run.seed)
    return COMMANDS[run.subcommand](run)
