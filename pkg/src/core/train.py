"""
训练脚本

完成一次完整的公平分类训练：
分层划分 → 增广 → 按配置运行算法 → 阈值选择 → 训练/测试指标 → 保存运行目录。
"""

import json
import logging
import os
from dataclasses import dataclass

from .dataset import AugmentationMode, AugmentedDataset, Dataset, augment, split
from .fairness_metrics import MetricReport, evaluate_predictions, noise_weight_ratio
from .model_utils import Checkpoint, save_checkpoint, write_trace
from .models import AdversarySpec, ModelParams, classify_soft
from .optimizers import (
    ConvergenceDiagnostics,
    OptimizerConfig,
    TrainingResult,
    diagnose_convergence,
    iterations_to_threshold,
    run,
)


logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
FINAL_CHECKPOINT = "checkpoint_final.txt"
THRESHOLD_CHECKPOINT = "checkpoint_threshold.txt"
METRICS_FILE = "metrics.json"


@dataclass
class RunOutcome:
    """
    一次训练的结果

    test_report 基于阈值选择后的参数；未设置 τ 时即最终参数。
    """
    result: TrainingResult
    augmentation: AugmentationMode
    train_report: MetricReport
    test_report: MetricReport
    final_test_report: MetricReport
    diagnostics: ConvergenceDiagnostics
    selected_params: ModelParams
    selected_iteration: int
    below_threshold: bool

    @property
    def noise_ratio(self) -> float:
        return noise_weight_ratio(self.selected_params.w)

    @property
    def iterations_to_threshold(self) -> int | None:
        tau = self.result.config.threshold
        if tau is None:
            return None
        return iterations_to_threshold(self.result.trace, tau)


def prepare_run_data(data: Dataset, test_fraction: float, augmentation: AugmentationMode,
                     seed: int) -> tuple[AugmentedDataset, AugmentedDataset]:
    """
    划分并增广数据集

    训练集与测试集的噪声列使用不同的派生种子独立采样。
    """
    train, test = split(data, test_fraction, seed)
    return augment(train, augmentation, seed), augment(test, augmentation, seed + 1)


def train_model(train: AugmentedDataset, test: AugmentedDataset, adversary: AdversarySpec,
                optimizer: OptimizerConfig) -> RunOutcome:
    """
    训练并评估

    参数:
        train: 增广训练集
        test: 增广测试集（增广方式与训练集一致）
        adversary: 对抗配置
        optimizer: 优化器配置

    返回:
        RunOutcome

    异常:
        DivergenceError: 由训练算法抛出，附带已完成的 trace
    """
    result = run(optimizer, adversary, train)
    selected, below = result.selected()
    selected_iteration = result.trace[-1].t if below or result.tracker.is_empty \
        else result.tracker.best_iteration
    if below:
        logger.warning("没有迭代满足阈值 τ=%s，退回最终迭代", optimizer.threshold)

    diagnostics = diagnose_convergence(
        result.trace, result.grads_history, result.param_history,
        smoothness=result.smoothness, alpha_mode=optimizer.alpha_mode,
        alpha_power=optimizer.alpha_power, algorithm=result.algorithm,
    )

    outcome = RunOutcome(
        result=result,
        augmentation=train.mode,
        train_report=evaluate_predictions(classify_soft(selected.classifier, train), train),
        test_report=evaluate_predictions(classify_soft(selected.classifier, test), test),
        final_test_report=evaluate_predictions(classify_soft(result.params.classifier, test), test),
        diagnostics=diagnostics,
        selected_params=selected,
        selected_iteration=selected_iteration,
        below_threshold=below,
    )
    metric = adversary.kind.fairness_metric
    logger.info("测试集: acc=%.4f, %s=%s（选中迭代 %d）", outcome.test_report.accuracy, metric,
                outcome.test_report.fairness(metric), selected_iteration)
    return outcome


def save_run(outcome: RunOutcome, run_dir: str, config_echo: dict | None = None) -> str:
    """
    把运行结果写入 run_dir

    写出 trace.csv、checkpoint_final.txt、checkpoint_threshold.txt 与 metrics.json。

    返回:
        run_dir 的绝对路径
    """
    run_dir = os.path.abspath(run_dir)
    os.makedirs(run_dir, exist_ok=True)
    result = outcome.result

    write_trace(result.trace, os.path.join(run_dir, TRACE_FILE))
    save_checkpoint(Checkpoint(result.params, result.adversary, outcome.augmentation,
                               iteration=result.trace[-1].t),
                    os.path.join(run_dir, FINAL_CHECKPOINT))
    save_checkpoint(Checkpoint(outcome.selected_params, result.adversary, outcome.augmentation,
                               iteration=outcome.selected_iteration,
                               below_threshold=outcome.below_threshold),
                    os.path.join(run_dir, THRESHOLD_CHECKPOINT))

    metrics = {
        "algorithm": result.algorithm.value,
        "adversary": result.adversary.kind.value,
        "fairness_metric": result.adversary.kind.fairness_metric,
        "threshold": result.config.threshold,
        "selected_iteration": outcome.selected_iteration,
        "below_threshold": outcome.below_threshold,
        "iterations_to_threshold": outcome.iterations_to_threshold,
        "noise_weight_ratio": _json_float(outcome.noise_ratio),
        "train": outcome.train_report.to_dict(),
        "test": outcome.test_report.to_dict(),
        "test_final_iterate": outcome.final_test_report.to_dict(),
        "smoothness": None if result.smoothness is None else list(result.smoothness),
        "diagnostics": {k: _json_float(v) for k, v in outcome.diagnostics.summary().items()},
        "config": config_echo or {},
    }
    with open(os.path.join(run_dir, METRICS_FILE), "w", encoding="utf-8") as f:
        json.dump(metrics, f, ensure_ascii=False, indent=2)

    logger.info("运行结果已保存到: %s", run_dir)
    return run_dir


def _json_float(value):
    # JSON 不支持 inf
    if isinstance(value, float) and value in (float("inf"), float("-inf")):
        return "inf" if value > 0 else "-inf"
    return value
