"""
分类器与公平性对抗模型模块

分类器为带 ℓ2 正则的逻辑回归 f = σ(wᵀx̂)。对抗模型有三种：
- statistical_parity: g = σ(uᵀ f̂(x))，f̂ 为 wᵀx̂ 的 d 次多项式展开
- false_discovery:    g = σ(uᵀ [1, f(x), y])
- sigmoid_parity:     不含可学习参数的纯正则项，用于复现普通更新失效的反例

损失函数与梯度均为全批量计算，梯度为手工推导的解析形式，
由 core_math.finite_diff_gradient 校验。
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core_math import log_loss, sigmoid
from .errors import ConfigError, DimensionError


class AdversaryKind(str, Enum):
    """对抗模型类型"""
    STATISTICAL_PARITY = "statistical_parity"
    FALSE_DISCOVERY = "false_discovery"
    SIGMOID_PARITY = "sigmoid_parity"

    @property
    def fairness_metric(self) -> str:
        """该对抗模型对应的公平性指标名"""
        if self is AdversaryKind.FALSE_DISCOVERY:
            return "false_discovery_rate"
        return "statistical_rate"


class Normalization(str, Enum):
    """
    正则项中分组求和的尺度

    sum: 按公式直接求和；mean: 每个求和除以 N
    """
    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True)
class AdversarySpec:
    """对抗模型配置：类型、多项式次数 d、正则权重 μ、求和尺度"""
    kind: AdversaryKind = AdversaryKind.STATISTICAL_PARITY
    degree: int = 2
    mu: float = 1.0
    normalization: Normalization = Normalization.SUM

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", AdversaryKind(self.kind))
            object.__setattr__(self, "normalization", Normalization(self.normalization))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if int(self.degree) < 1:
            raise ConfigError(f"多项式次数 d 必须 ≥ 1: {self.degree}")
        if self.mu < 0:
            raise ConfigError(f"μ 不能为负: {self.mu}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def adversary_dim(self) -> int:
        """对抗参数 u 的维度"""
        if self.kind is AdversaryKind.STATISTICAL_PARITY:
            return self.degree + 1
        if self.kind is AdversaryKind.FALSE_DISCOVERY:
            return 3
        return 0


@dataclass(frozen=True)
class ClassifierParams:
    """分类器参数 w ∈ R^{n+1}"""
    w: np.ndarray


@dataclass(frozen=True)
class SPAdversaryParams:
    """statistical parity 对抗参数 u ∈ R^{d+1}"""
    u: np.ndarray
    degree: int = 2
    mu: float = 1.0

    def __post_init__(self):
        if np.asarray(self.u).reshape(-1).size != self.degree + 1:
            raise DimensionError(f"u 的维度必须为 d+1={self.degree + 1}")


@dataclass(frozen=True)
class FDRAdversaryParams:
    """false discovery 对抗参数 u ∈ R^3"""
    u: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        if np.asarray(self.u).reshape(-1).size != 3:
            raise DimensionError("FDR 对抗参数 u 的维度必须为 3")


@dataclass(frozen=True)
class ParityRegularizerParams:
    """纯正则对抗：无可学习参数"""
    mu: float = 1.0
    u: np.ndarray = field(default_factory=lambda: np.zeros(0))


AdversaryParams = SPAdversaryParams | FDRAdversaryParams | ParityRegularizerParams


@dataclass(frozen=True)
class ModelParams:
    """训练过程中的完整参数 (w, u)"""
    w: np.ndarray
    u: np.ndarray

    @property
    def classifier(self) -> ClassifierParams:
        return ClassifierParams(self.w)

    def adversary(self, spec: AdversarySpec) -> AdversaryParams:
        """按对抗配置构造带类型的对抗参数"""
        if spec.kind is AdversaryKind.STATISTICAL_PARITY:
            return SPAdversaryParams(self.u, spec.degree, spec.mu)
        if spec.kind is AdversaryKind.FALSE_DISCOVERY:
            return FDRAdversaryParams(self.u, spec.mu)
        return ParityRegularizerParams(spec.mu, self.u)

    def flat(self) -> np.ndarray:
        """拼接为单个向量 [w, u]"""
        return np.concatenate([self.w, self.u])

    def copy(self) -> "ModelParams":
        return ModelParams(np.array(self.w, copy=True), np.array(self.u, copy=True))


@dataclass(frozen=True)
class LossGradients:
    """三个梯度 ∇_w L_C, ∇_w L_F, ∇_u L_F"""
    grad_w_LC: np.ndarray
    grad_w_LF: np.ndarray
    grad_u_LF: np.ndarray


def init_params(spec: AdversarySpec, n_features: int, seed: int = 0, scale: float = 0.0) -> ModelParams:
    """
    初始化参数

    参数:
        spec: 对抗配置
        n_features: 增广后的特征维度 n+1
        seed: 随机种子
        scale: 正态初始化的标准差，0 表示全零初始化

    返回:
        ModelParams
    """
    if scale == 0.0:
        return ModelParams(np.zeros(n_features), np.zeros(spec.adversary_dim))
    rng = np.random.default_rng(seed)
    return ModelParams(rng.normal(0.0, scale, size=n_features),
                       rng.normal(0.0, scale, size=spec.adversary_dim))


# ==================== 内部工具 ====================

def _vector(values, expected: int, name: str) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if vec.size != expected:
        raise DimensionError(f"{name} 维度为 {vec.size}，应为 {expected}")
    return vec


def scores(params: ClassifierParams, data) -> np.ndarray:
    """每个样本的得分 wᵀx̂_i"""
    w = _vector(params.w, data.n_features, "w")
    return data.features @ w


def _sum_scale(data, normalization: Normalization) -> float:
    if Normalization(normalization) is Normalization.MEAN:
        return 1.0 / data.n_samples
    return 1.0


def _parity_coefficients(data, normalization: Normalization) -> np.ndarray:
    """D = Σ_{G_0} s_i/P[G_0] - Σ_{G_1} s_i/P[G_1] 写成 coefᵀs 的系数"""
    p0, p1 = data.group_probabilities
    c = _sum_scale(data, normalization)
    z = data.sensitive
    return np.where(z == 0, c / p0, -c / p1)


def _fdr_masks(data):
    y, z = data.labels, data.sensitive
    return (((y == 0) & (z == 1)).astype(np.float64),   # A: y=0, z=1
            (z == 0).astype(np.float64),                # B: z=0
            ((y == 0) & (z == 0)).astype(np.float64),   # C: y=0, z=0
            (z == 1).astype(np.float64))                # E: z=1


# ==================== 分类器 ====================

def classify_soft(params: ClassifierParams, data) -> np.ndarray:
    """
    分类器软输出 σ(wᵀx̂_i)

    参数:
        params: 分类器参数
        data: 增广数据集

    返回:
        np.ndarray: 长度 N 的概率向量
    """
    return sigmoid(scores(params, data))


def classification_loss(params: ClassifierParams, data) -> float:
    """
    分类损失 L_C(w) = log-loss_S(f) + ½‖w‖²

    参数:
        params: 分类器参数
        data: 增广数据集

    返回:
        float
    """
    w = _vector(params.w, data.n_features, "w")
    return log_loss(classify_soft(params, data), data.labels) + 0.5 * float(np.dot(w, w))


# ==================== 对抗损失 ====================

def sp_adversary_loss(adv: SPAdversaryParams, cls: ClassifierParams, data,
                      normalization: Normalization = Normalization.SUM) -> float:
    """
    statistical parity 对抗损失

    L_F(u,w) = -log-loss_S(g) - (μ/2)(Σ_{z_i=0} wᵀx̂_i/P[G_0] - Σ_{z_i=1} wᵀx̂_i/P[G_1])²
    其中 g = σ(uᵀ f̂(x))，f̂(x) = [1, wᵀx̂, ..., (wᵀx̂)^d]。

    参数:
        adv: 对抗参数
        cls: 分类器参数
        data: 增广数据集（P[G_j] 取该数据集上的经验频率）
        normalization: sum 为公式原样求和，mean 为各求和除以 N

    返回:
        float
    """
    u = _vector(adv.u, adv.degree + 1, "u")
    s = scores(cls, data)
    expansion = np.vander(s, adv.degree + 1, increasing=True)
    g = sigmoid(expansion @ u)
    gap = float(np.dot(_parity_coefficients(data, normalization), s))
    return -log_loss(g, data.sensitive) - 0.5 * adv.mu * gap ** 2


def fdr_adversary_loss(adv: FDRAdversaryParams, cls: ClassifierParams, data,
                       normalization: Normalization = Normalization.SUM) -> float:
    """
    false discovery 对抗损失

    L_F(u,w) = -log-loss_S(g) - (μ/2)(A·B - C·E)²，
    A = Σ_{y=0,z=1} wᵀx̂_i，B = Σ_{z=0} wᵀx̂_i，C = Σ_{y=0,z=0} wᵀx̂_i，E = Σ_{z=1} wᵀx̂_i，
    g = σ(uᵀ[1, σ(wᵀx̂_i), y_i])。

    参数:
        adv: 对抗参数
        cls: 分类器参数
        data: 增广数据集
        normalization: 求和尺度

    返回:
        float
    """
    u = _vector(adv.u, 3, "u")
    s = scores(cls, data)
    f = sigmoid(s)
    inputs = np.column_stack([np.ones_like(s), f, data.labels.astype(np.float64)])
    g = sigmoid(inputs @ u)

    c = _sum_scale(data, normalization)
    m_a, m_b, m_c, m_e = _fdr_masks(data)
    gap = (c * np.dot(m_a, s)) * (c * np.dot(m_b, s)) - (c * np.dot(m_c, s)) * (c * np.dot(m_e, s))
    return -log_loss(g, data.sensitive) - 0.5 * adv.mu * float(gap) ** 2


def sigmoid_parity_loss(adv: ParityRegularizerParams, cls: ClassifierParams, data,
                        normalization: Normalization = Normalization.SUM) -> float:
    """
    纯正则对抗损失 -(μ/2)(Σ_{z_i=0} σ(wᵀx̂_i)/P[G_0] - Σ_{z_i=1} σ(wᵀx̂_i)/P[G_1])²

    没有可学习的对抗参数，∇_u L_F 为空向量。
    """
    f = classify_soft(cls, data)
    gap = float(np.dot(_parity_coefficients(data, normalization), f))
    return -0.5 * adv.mu * gap ** 2


def adversary_loss(spec: AdversarySpec, adv: AdversaryParams, cls: ClassifierParams, data) -> float:
    """按对抗类型分派 L_F"""
    if spec.kind is AdversaryKind.STATISTICAL_PARITY:
        return sp_adversary_loss(adv, cls, data, spec.normalization)
    if spec.kind is AdversaryKind.FALSE_DISCOVERY:
        return fdr_adversary_loss(adv, cls, data, spec.normalization)
    return sigmoid_parity_loss(adv, cls, data, spec.normalization)


# ==================== 解析梯度 ====================

def _classification_gradient(w: np.ndarray, data) -> np.ndarray:
    p = sigmoid(data.features @ w)
    return data.features.T @ (p - data.labels) / data.n_samples + w


def _sp_gradients(adv: SPAdversaryParams, w: np.ndarray, data,
                  normalization: Normalization) -> tuple[np.ndarray, np.ndarray]:
    u = _vector(adv.u, adv.degree + 1, "u")
    x = data.features
    n = data.n_samples
    s = x @ w
    expansion = np.vander(s, adv.degree + 1, increasing=True)
    residual = data.sensitive - sigmoid(expansion @ u)

    # d(uᵀf̂)/ds = Σ_{k≥1} k u_k s^{k-1}
    powers = np.arange(1, adv.degree + 1, dtype=np.float64)
    d_score = expansion[:, :-1] @ (powers * u[1:])

    coef = _parity_coefficients(data, normalization)
    gap = float(np.dot(coef, s))

    grad_u = expansion.T @ residual / n
    grad_w = x.T @ (residual * d_score) / n - adv.mu * gap * (x.T @ coef)
    return grad_w, grad_u


def _fdr_gradients(adv: FDRAdversaryParams, w: np.ndarray, data,
                   normalization: Normalization) -> tuple[np.ndarray, np.ndarray]:
    u = _vector(adv.u, 3, "u")
    x = data.features
    n = data.n_samples
    s = x @ w
    f = sigmoid(s)
    inputs = np.column_stack([np.ones_like(s), f, data.labels.astype(np.float64)])
    residual = data.sensitive - sigmoid(inputs @ u)

    c = _sum_scale(data, normalization)
    m_a, m_b, m_c, m_e = _fdr_masks(data)
    a, b = c * np.dot(m_a, s), c * np.dot(m_b, s)
    cc, e = c * np.dot(m_c, s), c * np.dot(m_e, s)
    gap = a * b - cc * e
    # ∇(AB - CE) = B∇A + A∇B - E∇C - C∇E，其中 ∇A = c·X̂ᵀm_A
    d_gap = c * (x.T @ (b * m_a + a * m_b - e * m_c - cc * m_e))

    grad_u = inputs.T @ residual / n
    grad_w = x.T @ (residual * u[1] * f * (1.0 - f)) / n - adv.mu * gap * d_gap
    return grad_w, grad_u


def _sigmoid_parity_gradients(adv: ParityRegularizerParams, w: np.ndarray, data,
                              normalization: Normalization) -> tuple[np.ndarray, np.ndarray]:
    x = data.features
    f = sigmoid(x @ w)
    coef = _parity_coefficients(data, normalization)
    gap = float(np.dot(coef, f))
    grad_w = -adv.mu * gap * (x.T @ (coef * f * (1.0 - f)))
    return grad_w, np.zeros(0)


def gradients(spec: AdversarySpec, adv: AdversaryParams, cls: ClassifierParams, data) -> LossGradients:
    """
    计算 ∇_w L_C、∇_w L_F、∇_u L_F 的解析梯度

    ∇_w L_F 包含经过 f̂ 对 w 依赖的链式项（每个 (wᵀx̂)^k 贡献 k(wᵀx̂)^{k-1}x̂）。

    参数:
        spec: 对抗配置
        adv: 对抗参数
        cls: 分类器参数
        data: 增广数据集

    返回:
        LossGradients
    """
    w = _vector(cls.w, data.n_features, "w")
    if spec.kind is AdversaryKind.STATISTICAL_PARITY:
        grad_w_f, grad_u_f = _sp_gradients(adv, w, data, spec.normalization)
    elif spec.kind is AdversaryKind.FALSE_DISCOVERY:
        grad_w_f, grad_u_f = _fdr_gradients(adv, w, data, spec.normalization)
    else:
        grad_w_f, grad_u_f = _sigmoid_parity_gradients(adv, w, data, spec.normalization)
    return LossGradients(
        grad_w_LC=_classification_gradient(w, data),
        grad_w_LF=grad_w_f,
        grad_u_LF=grad_u_f,
    )
