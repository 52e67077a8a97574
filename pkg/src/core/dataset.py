"""
数据集模块

提供数据集表示、CSV 读取、特征增广（噪声列/偏置列）、
分层划分，以及按目标相关系数构造合成数据集的功能。

数据集对象构造后不可变，可在线程间共享；
随机过程全部由显式 seed 驱动，保证可复现。
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import OneHotEncoder

from .core_math import pearson_correlation
from .errors import ConfigError, DataError, IngestionError, PreconditionError, SplitError


logger = logging.getLogger(__name__)

# 合成数据集相关系数允许误差
CORRELATION_TOLERANCE = 0.02
# 分层划分的最大重试次数
MAX_SPLIT_ATTEMPTS = 20


class ColumnRole(str, Enum):
    """CSV 列的角色"""
    FEATURE = "feature"
    LABEL = "label"
    SENSITIVE = "sensitive"
    DROP = "drop"


class AugmentationMode(str, Enum):
    """增广列类型：固定为 1 的偏置列，或 [0,1] 均匀噪声列"""
    BIAS = "bias"
    NOISE = "noise"


@dataclass(frozen=True)
class ColumnSchema:
    """
    列角色映射

    未在 roles 中出现的列默认作为特征列。
    label_positive / sensitive_positive 指定映射为 1 的取值；
    为 None 时该列取值必须本身就是 0/1。
    """
    roles: Mapping[str, ColumnRole]
    label_positive: str | None = None
    sensitive_positive: str | None = None

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str],
                     label_positive: str | None = None,
                     sensitive_positive: str | None = None) -> "ColumnSchema":
        try:
            roles = {name: ColumnRole(role) for name, role in mapping.items()}
        except ValueError as exc:
            raise ConfigError(f"未知的列角色: {exc}") from exc
        return cls(roles=roles,
                   label_positive=None if label_positive is None else str(label_positive),
                   sensitive_positive=None if sensitive_positive is None else str(sensitive_positive))

    def _single(self, role: ColumnRole) -> str:
        names = [name for name, r in self.roles.items() if r is role]
        if len(names) != 1:
            raise ConfigError(f"schema 中必须恰好有一个 {role.value} 列，实际为 {names}")
        return names[0]

    @property
    def label_column(self) -> str:
        return self._single(ColumnRole.LABEL)

    @property
    def sensitive_column(self) -> str:
        return self._single(ColumnRole.SENSITIVE)


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    数据集 S = (x_i, y_i, z_i), i ∈ [N]

    属性:
        features: N×n 特征矩阵
        labels: 长度 N 的 {0,1} 类别标签 y
        sensitive: 长度 N 的 {0,1} 敏感属性 z
        feature_names: 特征列名（可为空）
    """
    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    feature_names: tuple[str, ...] = ()
    _groups: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        labels = np.asarray(self.labels).reshape(-1)
        sensitive = np.asarray(self.sensitive).reshape(-1)

        n_samples = features.shape[0]
        if n_samples < 2:
            raise DataError(f"数据集至少需要 2 个样本，实际 {n_samples}")
        if labels.shape[0] != n_samples or sensitive.shape[0] != n_samples:
            raise DataError("features / labels / sensitive 样本数不一致")
        if not np.all(np.isfinite(features)):
            raise DataError("特征矩阵含有非有限数值")
        for name, values in (("labels", labels), ("sensitive", sensitive)):
            if not np.all(np.isin(values, (0, 1))):
                raise DataError(f"{name} 只能取 0 或 1")

        labels = labels.astype(np.int64)
        sensitive = sensitive.astype(np.int64)
        group0 = np.flatnonzero(sensitive == 0)
        group1 = np.flatnonzero(sensitive == 1)
        if group0.size == 0 or group1.size == 0:
            raise DataError("两个敏感属性分组都必须非空")

        if self.feature_names and len(self.feature_names) != features.shape[1]:
            raise DataError("feature_names 数量与特征列数不一致")

        object.__setattr__(self, "features", _readonly(features))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "sensitive", _readonly(sensitive))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "_groups", (_readonly(group0), _readonly(group1)))

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def group_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """(G_0, G_1)：敏感属性为 0 / 1 的样本下标"""
        return self._groups

    @property
    def group_probabilities(self) -> tuple[float, float]:
        """训练集中的经验频率 P[G_0], P[G_1]"""
        n = float(self.n_samples)
        return self._groups[0].size / n, self._groups[1].size / n

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.sensitive[idx], self.feature_names)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.features, labels, self.sensitive, self.feature_names)


@dataclass(frozen=True, eq=False)
class AugmentedDataset:
    """
    增广数据集，x̂ = [x η]

    η 为全 1 偏置列（bias 模式）或每个样本固定的 [0,1] 均匀噪声（noise 模式）。
    """
    base: Dataset
    mode: AugmentationMode
    features: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.shape != (self.base.n_samples, self.base.n_features + 1):
            raise DataError(f"增广特征矩阵形状错误: {features.shape}")
        extra = features[:, -1]
        if self.mode is AugmentationMode.BIAS and not np.all(extra == 1.0):
            raise DataError("bias 模式下最后一列必须全为 1")
        if self.mode is AugmentationMode.NOISE and not np.all((extra >= 0.0) & (extra <= 1.0)):
            raise DataError("noise 模式下最后一列必须位于 [0,1]")
        object.__setattr__(self, "features", _readonly(features))

    @property
    def labels(self) -> np.ndarray:
        return self.base.labels

    @property
    def sensitive(self) -> np.ndarray:
        return self.base.sensitive

    @property
    def group_indices(self) -> tuple[np.ndarray, np.ndarray]:
        return self.base.group_indices

    @property
    def group_probabilities(self) -> tuple[float, float]:
        return self.base.group_probabilities

    @property
    def n_samples(self) -> int:
        return self.base.n_samples

    @property
    def n_features(self) -> int:
        """增广后的特征维度 n+1"""
        return int(self.features.shape[1])

    @property
    def eta(self) -> np.ndarray:
        return self.features[:, -1]


# ==================== CSV 读取 ====================

def _try_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _binary_column(values: pd.Series, column: str, positive: str | None,
                   row_numbers: np.ndarray) -> np.ndarray:
    """把标签/敏感属性列映射为 {0,1}"""
    if positive is not None:
        distinct: list[str] = []
        for pos, value in enumerate(values):
            if value not in distinct:
                distinct.append(value)
                if len(distinct) > 2:
                    raise IngestionError(f"取值多于两种: '{value}'",
                                         row=int(row_numbers[pos]), column=column)
        return (values.to_numpy() == positive).astype(np.int64)

    out = np.empty(len(values), dtype=np.int64)
    for pos, value in enumerate(values):
        parsed = _try_float(value)
        if parsed not in (0.0, 1.0):
            raise IngestionError(f"非二值取值 '{value}'", row=int(row_numbers[pos]), column=column)
        out[pos] = int(parsed)
    return out


def _scale_min_max(values: np.ndarray) -> np.ndarray:
    low, high = float(np.min(values)), float(np.max(values))
    if high == low:
        return np.zeros_like(values)
    # (x-min)/(max-min) 使端点精确映射为 0 与 1
    return (values - low) / (high - low)


def load_csv(path: str, schema: ColumnSchema, scale: bool = True) -> Dataset:
    """
    读取 CSV 并构造数据集

    类别特征做 one-hot 编码；数值特征做 min-max 缩放到 [0,1]；
    标签列和敏感属性列按 schema 映射为 {0,1}。含空单元格的行被丢弃。

    参数:
        path: CSV 文件路径（必须有表头）
        schema: 列角色映射
        scale: 是否缩放数值特征（读取缓存文件时关闭）

    返回:
        Dataset: 读取后的数据集

    异常:
        IngestionError: 文件/列缺失、非二值标签、无法解析的单元格
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as exc:
        raise IngestionError(f"文件不存在: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise IngestionError(f"无法解析 CSV: {exc}") from exc

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [name for name in schema.roles if name not in frame.columns]
    if missing:
        raise IngestionError(f"CSV 缺少 schema 中的列: {missing}")

    label_col = schema.label_column
    sensitive_col = schema.sensitive_column
    feature_cols = [c for c in frame.columns
                    if schema.roles.get(c, ColumnRole.FEATURE) is ColumnRole.FEATURE]
    used = feature_cols + [label_col, sensitive_col]

    frame = frame[used].apply(lambda col: col.str.strip())
    # 文件行号（表头为第 1 行）
    row_numbers = np.arange(len(frame)) + 2
    empty_rows = (frame == "").any(axis=1).to_numpy()
    if empty_rows.any():
        logger.warning("丢弃 %d 行含空值的记录", int(empty_rows.sum()))
        frame = frame.loc[~empty_rows]
        row_numbers = row_numbers[~empty_rows]

    labels = _binary_column(frame[label_col], label_col, schema.label_positive, row_numbers)
    sensitive = _binary_column(frame[sensitive_col], sensitive_col, schema.sensitive_positive, row_numbers)

    blocks: list[np.ndarray] = []
    names: list[str] = []
    for column in feature_cols:
        raw = frame[column].tolist()
        parsed = [_try_float(v) for v in raw]
        failures = [pos for pos, v in enumerate(parsed) if v is None]

        if not failures:
            values = np.asarray(parsed, dtype=np.float64)
            blocks.append((_scale_min_max(values) if scale else values).reshape(-1, 1))
            names.append(column)
        elif len(failures) * 2 < len(parsed):
            pos = failures[0]
            raise IngestionError(f"无法解析的数值 '{raw[pos]}'", row=int(row_numbers[pos]), column=column)
        else:
            encoder = OneHotEncoder(sparse_output=False, dtype=np.float64)
            encoded = encoder.fit_transform(np.asarray(raw, dtype=object).reshape(-1, 1))
            blocks.append(encoded)
            names.extend(str(n) for n in encoder.get_feature_names_out([column]))

    if not blocks:
        raise IngestionError("没有任何特征列")

    try:
        data = Dataset(np.hstack(blocks), labels, sensitive, tuple(names))
    except DataError as exc:
        raise IngestionError(str(exc)) from exc

    logger.info("已读取 %s: N=%d, n=%d, |G_0|=%d, |G_1|=%d", path, data.n_samples,
                data.n_features, data.group_indices[0].size, data.group_indices[1].size)
    return data


def identity_schema(n_features: int) -> ColumnSchema:
    """缓存文件格式 x_1..x_n, y, z 对应的 schema"""
    roles: dict[str, ColumnRole] = {f"x_{i}": ColumnRole.FEATURE for i in range(1, n_features + 1)}
    roles["y"] = ColumnRole.LABEL
    roles["z"] = ColumnRole.SENSITIVE
    return ColumnSchema(roles=roles)


def save_dataset_cache(data: Dataset, path: str) -> None:
    """把数据集写成缓存 CSV（x_1..x_n, y, z），浮点数可精确回读"""
    columns = {f"x_{i + 1}": data.features[:, i] for i in range(data.n_features)}
    frame = pd.DataFrame(columns)
    frame["y"] = data.labels
    frame["z"] = data.sensitive
    frame.to_csv(path, index=False, float_format="%.17g")


def load_dataset_cache(path: str) -> Dataset:
    """读取 save_dataset_cache 写出的缓存文件"""
    try:
        header = pd.read_csv(path, nrows=0).columns
    except FileNotFoundError as exc:
        raise IngestionError(f"文件不存在: {path}") from exc
    n_features = sum(1 for c in header if str(c).startswith("x_"))
    return load_csv(path, identity_schema(n_features), scale=False)


# ==================== 增广 / 合成 / 划分 ====================

def augment(data: Dataset, mode: AugmentationMode | str = AugmentationMode.NOISE,
            seed: int = 0) -> AugmentedDataset:
    """
    在特征末尾追加 η 列

    noise 模式从 seed 生成的随机数发生器中独立均匀采样 [0,1)，
    每个数据集只采样一次，训练过程中不再重采样。

    参数:
        data: 原始数据集
        mode: bias 或 noise
        seed: 随机种子

    返回:
        AugmentedDataset: N×(n+1) 的增广数据集
    """
    mode = AugmentationMode(mode)
    if mode is AugmentationMode.BIAS:
        extra = np.ones(data.n_samples)
    else:
        extra = np.random.default_rng(seed).uniform(0.0, 1.0, size=data.n_samples)
    features = np.hstack([data.features, extra.reshape(-1, 1)])
    return AugmentedDataset(base=data, mode=mode, features=features)


def _binary_correlation(n: int, sum_y: int, sum_z: int, n11: int) -> float:
    """两个 0/1 向量的 Pearson 相关系数（由计数直接计算）"""
    denom = math.sqrt(float(sum_y) * (n - sum_y) * float(sum_z) * (n - sum_z))
    if denom == 0.0:
        return 0.0
    return (n * n11 - sum_y * sum_z) / denom


def make_synthetic(base: Dataset, target_corr: float, seed: int,
                   tolerance: float = CORRELATION_TOLERANCE) -> Dataset:
    """
    修改类别标签，使 y 与 z 的 Pearson 相关系数达到目标值

    随机打乱 y_i ≠ z_i 的下标，逐个令 y_i ← z_i，每次翻转后重新计算相关系数，
    直到与目标相差不超过 tolerance。特征与 z 保持不变。target_corr = 1 时 y' = z。

    参数:
        base: 原始数据集
        target_corr: 目标相关系数，(0, 1]
        seed: 随机种子
        tolerance: 允许误差

    返回:
        Dataset: 只有标签改变的新数据集

    异常:
        PreconditionError: 目标超出范围，或原数据相关系数已高于目标
    """
    if not 0.0 < target_corr <= 1.0:
        raise PreconditionError(f"目标相关系数必须位于 (0,1]: {target_corr}")

    labels = base.labels.astype(np.int64).copy()
    z = base.sensitive
    n = base.n_samples
    sum_y = int(labels.sum())
    sum_z = int(z.sum())
    n11 = int(np.sum(labels * z))

    current = _binary_correlation(n, sum_y, sum_z, n11)
    if current > target_corr + tolerance:
        raise PreconditionError(
            f"原数据相关系数 {current:.4f} 已高于目标 {target_corr:.4f}，只能提高相关系数")

    if target_corr >= 1.0:
        logger.info("目标相关系数为 1，令 y = z（翻转 %d 个标签）", int(np.sum(labels != z)))
        return base.with_labels(np.array(z, copy=True))

    if abs(current - target_corr) <= tolerance:
        return base.with_labels(labels)

    rng = np.random.default_rng(seed)
    candidates = rng.permutation(np.flatnonzero(labels != z))
    flips = 0
    reached = False
    for i in candidates:
        if z[i] == 1:
            sum_y += 1
            n11 += 1
        else:
            sum_y -= 1
        labels[i] = z[i]
        flips += 1
        current = _binary_correlation(n, sum_y, sum_z, n11)
        if abs(current - target_corr) <= tolerance:
            reached = True
            break

    result = base.with_labels(labels)
    measured = pearson_correlation(result.labels, result.sensitive)
    if not reached or abs(measured - target_corr) > tolerance:
        raise PreconditionError(f"无法达到目标相关系数 {target_corr:.4f}（实际 {measured:.4f}）")

    logger.info("合成数据集: 目标 %.3f, 实测 %.4f, 翻转 %d 个标签", target_corr, measured, flips)
    return result


def split(data: Dataset, test_fraction: float, seed: int,
          max_attempts: int = MAX_SPLIT_ATTEMPTS) -> tuple[Dataset, Dataset]:
    """
    按 (y, z) 单元格分层划分训练集/测试集

    使用 sklearn 的 train_test_split，以 2y + z 作为分层标签，
    各单元格测试样本数与 count·fraction 相差不超过 1。两部分都必须包含两个敏感属性分组，
    不满足时换一个 random_state（seed + attempt）重新划分，超过 max_attempts 次后报错。

    参数:
        data: 数据集
        test_fraction: 测试集比例，(0, 1)
        seed: 随机种子
        max_attempts: 最大重试次数

    返回:
        (train, test): 不相交的两个数据集

    异常:
        SplitError: 比例非法、样本过少或重试耗尽
    """
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction 必须位于 (0,1): {test_fraction}")

    group0, group1 = data.group_indices
    if group0.size < 2 or group1.size < 2:
        raise SplitError("每个敏感属性分组至少需要 2 个样本才能分层划分")

    cells = data.labels * 2 + data.sensitive
    indices = np.arange(data.n_samples)
    for attempt in range(max_attempts):
        try:
            train_idx, test_idx = train_test_split(
                indices, test_size=test_fraction, shuffle=True,
                random_state=seed + attempt, stratify=cells)
        except ValueError as exc:
            raise SplitError(f"无法按 (y, z) 分层划分: {exc}") from exc

        train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)
        if all(np.unique(data.sensitive[part]).size == 2 for part in (train_idx, test_idx)):
            logger.debug("分层划分成功（第 %d 次尝试）: train=%d, test=%d",
                         attempt + 1, train_idx.size, test_idx.size)
            return data.subset(train_idx), data.subset(test_idx)

    raise SplitError(f"{max_attempts} 次尝试后仍无法保证两部分都含两个分组")
