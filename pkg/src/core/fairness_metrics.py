"""
公平性评估指标模块

提供准确率、statistical rate、false discovery rate 以及噪声权重比，
并汇总为 MetricReport。所有指标基于 0.5 阈值的硬预测。
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, MetricError


DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class MetricReport:
    """指标汇总"""
    accuracy: float
    statistical_rate: float
    false_discovery_rate: float | None        # None 表示无定义
    positive_rate_per_group: tuple[float, float]
    soft_mean_per_group: tuple[float, float]     # 每组 σ(wᵀx̂) 的均值

    def fairness(self, metric: str) -> float | None:
        """按名称取公平性指标（statistical_rate / false_discovery_rate）"""
        if metric == "false_discovery_rate":
            return self.false_discovery_rate
        return self.statistical_rate

    def to_dict(self) -> dict:
        return asdict(self)


def hard_predictions(probabilities, threshold: float = DECISION_THRESHOLD) -> np.ndarray:
    """概率 ≥ threshold 判为 1"""
    return (np.asarray(probabilities, dtype=np.float64) >= threshold).astype(np.int64)


def _check_lengths(pred: np.ndarray, data) -> np.ndarray:
    pred = np.asarray(pred).reshape(-1)
    if pred.shape[0] != data.labels.shape[0]:
        raise DimensionError(f"预测长度 {pred.shape[0]} 与数据集样本数 {data.labels.shape[0]} 不一致")
    return pred


def _rate_ratio(numerator: float, denominator: float) -> float:
    # 0/0 → 1，p/0 → 0
    if denominator == 0.0:
        return 1.0 if numerator == 0.0 else 0.0
    return numerator / denominator


def _min_ratio(a: float, b: float) -> float:
    return min(_rate_ratio(a, b), _rate_ratio(b, a))


def positive_rates(pred, data) -> tuple[float, float]:
    """每组正预测比例 (P[f=1|G_0], P[f=1|G_1])"""
    pred = _check_lengths(pred, data)
    group0, group1 = data.group_indices
    if group0.size == 0 or group1.size == 0:
        raise MetricError("敏感属性分组为空")
    return float(np.mean(pred[group0] == 1)), float(np.mean(pred[group1] == 1))


def statistical_rate(pred, data) -> float:
    """
    statistical rate τ = min(P[f=1|G_1]/P[f=1|G_0], P[f=1|G_0]/P[f=1|G_1])

    参数:
        pred: 长度 N 的 {0,1} 硬预测
        data: 提供 labels / sensitive / group_indices 的数据集

    返回:
        float: [0, 1] 区间的取值，两组正预测率都为 0 时为 1

    示例:
        pred=[1,0,1,1], z=[0,0,1,1] → min(1.0/0.5, 0.5/1.0) = 0.5
    """
    rate0, rate1 = positive_rates(pred, data)
    return _min_ratio(rate0, rate1)


def false_discovery_rate(pred, data) -> float | None:
    """
    false discovery rate τ：两组 P[y=0 | f=1, G_j] 的最小比值

    任一组没有正预测时条件概率无定义，返回 None。

    参数:
        pred: 长度 N 的 {0,1} 硬预测
        data: 数据集

    返回:
        float | None: [0, 1] 区间的取值或 None
    """
    pred = _check_lengths(pred, data)
    rates = []
    for group in data.group_indices:
        positives = group[pred[group] == 1]
        if positives.size == 0:
            return None
        rates.append(float(np.mean(data.labels[positives] == 0)))
    return _min_ratio(rates[0], rates[1])


def accuracy(pred, data) -> float:
    """预测与标签一致的比例"""
    pred = _check_lengths(pred, data)
    return float(np.mean(pred == data.labels))


def noise_weight_ratio(w) -> float:
    """
    噪声权重比 |w_{n+1}| / max_i |w_i|（i 取前 n 个坐标）

    前 n 个权重全为 0 时返回 math.inf。
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size < 2:
        raise DimensionError("权重向量至少需要 2 维")
    denominator = float(np.max(np.abs(w[:-1])))
    if denominator == 0.0:
        return math.inf
    return float(abs(w[-1]) / denominator)


def evaluate_predictions(probabilities, data) -> MetricReport:
    """
    由软预测概率计算完整指标报告

    参数:
        probabilities: 长度 N 的 σ(wᵀx̂)
        data: 数据集

    返回:
        MetricReport
    """
    probabilities = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    pred = hard_predictions(probabilities)
    group0, group1 = data.group_indices
    return MetricReport(
        accuracy=accuracy(pred, data),
        statistical_rate=statistical_rate(pred, data),
        false_discovery_rate=false_discovery_rate(pred, data),
        positive_rate_per_group=positive_rates(pred, data),
        soft_mean_per_group=(float(np.mean(probabilities[group0])),
                             float(np.mean(probabilities[group1]))),
    )
