"""
测试共享夹具

生成类似 Adult 的小规模数据：
- age:   [0,1] 连续特征，与原始标签正相关
- proxy: 与敏感属性强相关的 [0,1] 特征
- z:     约一半为 1
- y:     约 70% 为正类，与 z 基本无关
"""

import os
import sys

import numpy as np
import pandas as pd
import pytest

# 添加项目根目录到路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.dataset import Dataset, augment  # noqa: E402


def make_base_dataset(n_samples: int = 600, seed: int = 7) -> Dataset:
    rng = np.random.default_rng(seed)
    z = (rng.random(n_samples) < 0.5).astype(np.int64)
    age = rng.uniform(0.0, 1.0, n_samples)
    y = (rng.random(n_samples) < 0.45 + 0.5 * age).astype(np.int64)
    proxy = 0.6 * z + 0.4 * rng.random(n_samples)
    return Dataset(np.column_stack([age, proxy]), y, z, ("age", "proxy"))


def make_skewed_dataset() -> Dataset:
    """
    单特征 x = z，y 与 z 高度一致：
    z=1 的 100 个样本中 10 个 y=0，z=0 的 100 个样本中 12 个 y=1。
    """
    z = np.array([1] * 100 + [0] * 100)
    y = z.copy()
    y[:10] = 0
    y[100:112] = 1
    return Dataset(z.reshape(-1, 1).astype(np.float64), y, z, ("x",))


def make_cell_dataset(n_samples: int = 8000, label_rate: float = 0.5,
                      proxy_agreement: float = 0.75) -> Dataset:
    """
    按 (z, p, s) 单元格精确构造的数据集，特征为两对 one-hot 列 (s, 1-s, p, 1-p)

    前 round(label_rate·N) 行 z=1；每组中 proxy_agreement 比例的行 p = z；
    每个 (z, p) 单元格中 label_rate 比例的行 s = 1，标签 y = s。
    因此 s 与 z、p 都独立，corr(y, z) = 0，p 只通过 z 与标签相关。
    """
    n1 = round(label_rate * n_samples)
    z = np.r_[np.ones(n1), np.zeros(n_samples - n1)].astype(np.int64)
    p = np.zeros(n_samples, dtype=np.int64)
    s = np.zeros(n_samples, dtype=np.int64)
    for group, start, size in ((1, 0, n1), (0, n1, n_samples - n1)):
        agree = round(proxy_agreement * size)
        p[start:start + agree] = group
        p[start + agree:start + size] = 1 - group
        for lo, hi in ((start, start + agree), (start + agree, start + size)):
            s[lo:lo + round(label_rate * (hi - lo))] = 1
    features = np.column_stack([s, 1 - s, p, 1 - p]).astype(np.float64)
    return Dataset(features, s, z, ("skill", "skill_low", "proxy", "proxy_low"))


@pytest.fixture
def base_dataset() -> Dataset:
    return make_base_dataset()


@pytest.fixture
def skewed_dataset() -> Dataset:
    return make_skewed_dataset()


@pytest.fixture
def small_augmented():
    """N=40 的 bias 增广数据集"""
    rng = np.random.default_rng(3)
    n = 40
    z = np.array([0, 1] * (n // 2))
    y = (rng.random(n) < 0.6).astype(np.int64)
    x = rng.uniform(0.0, 1.0, size=(n, 3))
    return augment(Dataset(x, y, z), "bias")


@pytest.fixture
def adult_csv(tmp_path) -> str:
    """带表头的原始 CSV：数值列、类别列、字符串标签与敏感属性"""
    data = make_base_dataset(n_samples=400, seed=11)
    rng = np.random.default_rng(11)
    workclass = np.where(rng.random(data.n_samples) < 0.5, "Private", "Self-emp")
    frame = pd.DataFrame({
        "age": np.round(17 + 60 * data.features[:, 0], 3),
        "proxy": np.round(data.features[:, 1], 6),
        "workclass": workclass,
        "fnlwgt": rng.integers(10000, 20000, data.n_samples),
        "income": np.where(data.labels == 1, ">50K", "<=50K"),
        "sex": np.where(data.sensitive == 1, "Male", "Female"),
    })
    path = tmp_path / "adult.csv"
    frame.to_csv(path, index=False)
    return str(path)


@pytest.fixture
def adult_columns() -> dict:
    return {"income": "label", "sex": "sensitive", "fnlwgt": "drop"}
