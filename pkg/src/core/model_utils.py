"""
模型工具函数模块

提供模型参数检查点与训练 trace 的保存和加载。
检查点为 key=value 文本，浮点数用 repr 写出，可精确回读；
trace 为 CSV，列为 t, L_C, L_F, acc, fairness, identity_residual,
grad_norm_F, grad_norm_C, alpha，公平性无定义时写 "undefined"。
"""

import logging
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .dataset import AugmentationMode
from .errors import ConfigError, DataError
from .models import AdversaryKind, AdversarySpec, ModelParams, Normalization
from .optimizers import TRACE_COLUMNS, TraceRecord


logger = logging.getLogger(__name__)

UNDEFINED = "undefined"


@dataclass(frozen=True)
class Checkpoint:
    """
    参数检查点

    属性:
        params: (w, u)
        adversary: 对抗配置（决定 u 的含义）
        augmentation: 训练时使用的增广列类型
        iteration: 参数对应的迭代序号，0 表示初始点
        below_threshold: 阈值选择退回最终迭代时为 True
    """
    params: ModelParams
    adversary: AdversarySpec
    augmentation: AugmentationMode
    iteration: int = 0
    below_threshold: bool = False

    @property
    def n_features(self) -> int:
        """原始特征数 n（w 维度为 n+1）"""
        return self.params.w.size - 1


def _format_floats(values: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in values)


def _parse_floats(text: str, key: str, path: str) -> np.ndarray:
    if not text.strip():
        return np.zeros(0)
    try:
        return np.array([float(item) for item in text.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"检查点 {path} 中 {key} 无法解析: {exc}") from exc


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    """
    保存检查点

    参数:
        checkpoint: 检查点
        path: 输出文件路径，目录不存在时自动创建
    """
    spec = checkpoint.adversary
    lines = [
        f"n={checkpoint.n_features}",
        f"d={spec.degree}",
        f"adversary={spec.kind.value}",
        f"mu={spec.mu!r}",
        f"normalization={spec.normalization.value}",
        f"augmentation={AugmentationMode(checkpoint.augmentation).value}",
        f"iteration={checkpoint.iteration}",
        f"below_threshold={str(checkpoint.below_threshold).lower()}",
        f"w={_format_floats(checkpoint.params.w)}",
        f"u={_format_floats(checkpoint.params.u)}",
    ]
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug("检查点已保存到: %s", path)


def load_checkpoint(path: str) -> Checkpoint:
    """
    读取 save_checkpoint 写出的检查点

    异常:
        DataError: 文件缺失、字段缺失或维度与 n/d 不一致
    """
    if not os.path.exists(path):
        raise DataError(f"检查点不存在: {path}")

    fields: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"检查点 {path} 格式错误: {line!r}")
            fields[key.strip()] = value

    required = ("n", "d", "adversary", "mu", "normalization", "augmentation", "w", "u")
    missing = [key for key in required if key not in fields]
    if missing:
        raise DataError(f"检查点 {path} 缺少字段: {missing}")

    try:
        spec = AdversarySpec(kind=AdversaryKind(fields["adversary"]), degree=int(fields["d"]),
                             mu=float(fields["mu"]),
                             normalization=Normalization(fields["normalization"]))
        augmentation = AugmentationMode(fields["augmentation"])
        n = int(fields["n"])
        iteration = int(fields.get("iteration", "0"))
    except (ValueError, ConfigError) as exc:
        raise DataError(f"检查点 {path} 字段无效: {exc}") from exc

    w = _parse_floats(fields["w"], "w", path)
    u = _parse_floats(fields["u"], "u", path)
    if w.size != n + 1:
        raise DataError(f"检查点 {path}: w 维度 {w.size} 与 n+1={n + 1} 不一致")
    if u.size != spec.adversary_dim:
        raise DataError(f"检查点 {path}: u 维度 {u.size} 与对抗配置要求的 {spec.adversary_dim} 不一致")

    return Checkpoint(params=ModelParams(w, u), adversary=spec, augmentation=augmentation,
                      iteration=iteration,
                      below_threshold=fields.get("below_threshold", "false") == "true")


def _format_cell(value) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trace(trace: Sequence[TraceRecord], path: str) -> None:
    """
    把训练 trace 写成 CSV

    所有单元格预先格式化为字符串，相同输入得到逐字节相同的文件。
    """
    rows = [[_format_cell(v) for v in record.as_row()] for record in trace]
    frame = pd.DataFrame(rows, columns=list(TRACE_COLUMNS))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug("trace 已保存到: %s（%d 行）", path, len(rows))


def _parse_optional(text: str) -> float | None:
    return None if text == UNDEFINED else float(text)


def read_trace(path: str) -> list[TraceRecord]:
    """读取 write_trace 写出的 CSV"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as exc:
        raise DataError(f"trace 文件不存在: {path}") from exc
    if list(frame.columns) != list(TRACE_COLUMNS):
        raise DataError(f"trace 列不匹配: {list(frame.columns)}")

    return [
        TraceRecord(
            t=int(row["t"]),
            classification_loss=float(row["L_C"]),
            adversary_loss=float(row["L_F"]),
            accuracy=float(row["acc"]),
            fairness=_parse_optional(row["fairness"]),
            identity_residual=float(row["identity_residual"]),
            grad_norm_F=float(row["grad_norm_F"]),
            grad_norm_C=float(row["grad_norm_C"]),
            alpha=float(row["alpha"]),
        )
        for _, row in frame.iterrows()
    ]
