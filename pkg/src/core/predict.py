"""
预测接口模块

加载已保存的检查点，在数据集上计算硬预测与完整指标报告。
"""

import logging

import numpy as np

from .dataset import Dataset, augment
from .fairness_metrics import MetricReport, evaluate_predictions, hard_predictions
from .model_utils import Checkpoint, load_checkpoint
from .models import classify_soft
from .errors import DimensionError


logger = logging.getLogger(__name__)


def predict(checkpoint: Checkpoint, data: Dataset, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """
    用检查点中的分类器预测

    参数:
        checkpoint: 检查点
        data: 原始（未增广）数据集，按检查点记录的方式增广
        seed: noise 增广的随机种子

    返回:
        (probabilities, predictions)
    """
    if data.n_features != checkpoint.n_features:
        raise DimensionError(f"数据集特征数 {data.n_features} 与检查点 n={checkpoint.n_features} 不一致")
    augmented = augment(data, checkpoint.augmentation, seed)
    probabilities = classify_soft(checkpoint.params.classifier, augmented)
    return probabilities, hard_predictions(probabilities)


def evaluate_checkpoint(checkpoint_path: str, data: Dataset, seed: int = 0) -> MetricReport:
    """
    在数据集上评估检查点

    参数:
        checkpoint_path: 检查点文件
        data: 原始数据集
        seed: noise 增广的随机种子

    返回:
        MetricReport
    """
    checkpoint = load_checkpoint(checkpoint_path)
    logger.info("加载检查点: %s（对抗 %s, 迭代 %d）", checkpoint_path,
                checkpoint.adversary.kind.value, checkpoint.iteration)
    probabilities, _ = predict(checkpoint, data, seed)
    report = evaluate_predictions(probabilities, data)
    logger.info("评估结果: acc=%.4f, SR=%.4f, FDR=%s", report.accuracy,
                report.statistical_rate, report.false_discovery_rate)
    return report
