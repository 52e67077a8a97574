"""
基础数学模块

提供各模块共用的标量/向量原语：sigmoid、log-loss、向量投影、
Pearson 相关系数，以及用于校验解析梯度的中心差分梯度。
所有函数均为纯函数，可在多线程中并发调用。
"""

from typing import Callable

import numpy as np

from .errors import DegenerateVarianceError, DimensionError, NumericalError


# 取对数前的概率截断
EPS_CLIP = 1e-12
# 投影方向的范数下限，低于此值视为零向量
EPS_PROJ = 1e-12

ArrayLike = float | np.ndarray


def _as_vector(values, name: str) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        vec = vec.reshape(-1)
    if not np.all(np.isfinite(vec)):
        raise NumericalError(f"{name} 含有非有限数值")
    return vec


def _check_same_length(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what}维度不一致: {a.shape} vs {b.shape}")


def sigmoid(z: ArrayLike) -> ArrayLike:
    """
    数值稳定的 sigmoid 函数 σ(z) = 1 / (1 + e^{-z})

    按符号拆分计算：只对 -|z| 取指数，|z| 达到 500 也不会溢出。

    参数:
        z: 标量或 numpy 数组，必须为有限值

    返回:
        与输入形状相同的 (0, 1] 区间取值

    示例:
        >>> sigmoid(0.0)
        0.5
    """
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("sigmoid 输入含有非有限数值")

    e = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    if out.ndim == 0:
        return float(out)
    return out


def log_loss(predictions, labels) -> float:
    """
    平均负对数似然 log-loss_S(f) = -(1/|S|) Σ [y log p + (1-y) log(1-p)]

    参数:
        predictions: 预测概率向量，取对数前截断到 [EPS_CLIP, 1-EPS_CLIP]
        labels: {0,1} 标签向量，长度与 predictions 相同

    返回:
        float: 非负的平均损失
    """
    p = _as_vector(predictions, "predictions")
    y = _as_vector(labels, "labels")
    _check_same_length(p, y, "log_loss 输入")
    if p.size == 0:
        raise DimensionError("log_loss 至少需要一个样本")

    p = np.clip(p, EPS_CLIP, 1.0 - EPS_CLIP)
    terms = y * np.log(p) + (1.0 - y) * np.log(1.0 - p)
    return float(-np.sum(terms) / p.size)


def project(u, v) -> np.ndarray:
    """
    计算 u 在 v 方向上的投影 Π_v u = <u,v>/<v,v> · v

    当 ‖v‖ < EPS_PROJ 时返回零向量。

    参数:
        u: 被投影向量
        v: 投影方向

    返回:
        np.ndarray: 投影向量
    """
    u_vec = _as_vector(u, "u")
    v_vec = _as_vector(v, "v")
    _check_same_length(u_vec, v_vec, "project 输入")

    if np.linalg.norm(v_vec) < EPS_PROJ:
        return np.zeros_like(u_vec)
    return (np.dot(u_vec, v_vec) / np.dot(v_vec, v_vec)) * v_vec


def pearson_correlation(u, v) -> float:
    """
    Pearson 相关系数（中心化后的归一化内积）

    参数:
        u, v: 长度相同且 ≥ 2 的非常数向量

    返回:
        float: [-1, 1] 区间内的相关系数

    异常:
        DegenerateVarianceError: 任一向量为常数
    """
    a = _as_vector(u, "u")
    b = _as_vector(v, "v")
    _check_same_length(a, b, "pearson_correlation 输入")
    if a.size < 2:
        raise DimensionError("pearson_correlation 至少需要两个样本")

    da = a - np.mean(a)
    db = b - np.mean(b)
    norm_a = np.sqrt(np.dot(da, da))
    norm_b = np.sqrt(np.dot(db, db))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVarianceError("常数向量的相关系数无定义")

    r = np.dot(da, db) / (norm_a * norm_b)
    return float(np.clip(r, -1.0, 1.0))


def finite_diff_gradient(f: Callable[[np.ndarray], float], at, step: float = 1e-5) -> np.ndarray:
    """
    中心差分梯度 (f(x+h·e_i) - f(x-h·e_i)) / (2h)

    仅用于校验手工推导的解析梯度。

    参数:
        f: 向量到标量的函数
        at: 求导点
        step: 差分步长 h，必须 > 0

    返回:
        np.ndarray: 与 at 同维的梯度近似
    """
    if step <= 0:
        raise ValueError(f"差分步长必须为正数: {step}")

    x0 = _as_vector(at, "at").copy()
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        x = x0.copy()
        x[i] = x0[i] + step
        f_plus = float(f(x))
        x[i] = x0[i] - step
        f_minus = float(f(x))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericalError(f"第 {i} 个坐标处函数值非有限")
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad
