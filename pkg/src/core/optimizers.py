"""
训练算法模块

实现交替梯度下降-上升的几种更新方式：
- normal_gda:    w ← w - η₂(∇_w L_C - α∇_w L_F)
- ngd_modified:  w ← w - η₂ g，g 为去掉 ∇_w L_F 方向投影后的修正梯度
- agd_modified:  基于噪声梯度加速方法的 p_t / w_t / q_t 三序列更新
- accuracy_only / fairness_only: 只优化准确率或只优化公平性的基线

对抗参数 u 在所有算法中都做普通梯度上升 u ← u + η₁∇_u L_F。
同时提供阈值选择（ThresholdTracker）、光滑常数估计与收敛诊断。
每次训练是一个顺序循环；不同训练之间没有共享的可变状态。
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .core_math import EPS_PROJ, finite_diff_gradient, project
from .errors import ConfigError, DivergenceError, NumericalError
from .fairness_metrics import evaluate_predictions
from .models import (
    AdversarySpec,
    ClassifierParams,
    LossGradients,
    ModelParams,
    adversary_loss,
    classification_loss,
    classify_soft,
    gradients,
    init_params,
)


logger = logging.getLogger(__name__)

# 损失绝对值超过该上限视为发散
DIVERGENCE_LIMIT = 1e12
# 光滑常数估计的安全系数与下限
SMOOTHNESS_SAFETY = 1.5
SMOOTHNESS_FLOOR = 1e-12

TRACE_COLUMNS = ("t", "L_C", "L_F", "acc", "fairness", "identity_residual",
                 "grad_norm_F", "grad_norm_C", "alpha")


class Algorithm(str, Enum):
    """训练算法"""
    NORMAL_GDA = "normal_gda"
    NGD_MODIFIED = "ngd_modified"
    AGD_MODIFIED = "agd_modified"
    ACCURACY_ONLY = "accuracy_only"
    FAIRNESS_ONLY = "fairness_only"


class AlphaMode(str, Enum):
    """α 取值方式：按 α₀·t^{-p} 衰减，或取常数 max{1/L₁, 1/L₂}（仅 AGD）"""
    DECAY = "decay"
    CONSTANT = "constant"


@dataclass(frozen=True)
class OptimizerConfig:
    """
    优化器配置

    属性:
        algorithm: 训练算法
        eta1: u 的上升步长（AGD 中即 η）
        eta2: w 的下降步长（AGD 中由 a_t 代替）
        alpha0, alpha_power: α_t = alpha0 · t^{-alpha_power}
        iterations: 迭代次数 T
        threshold: 阈值 τ，None 表示不启用
        seed: 随机种子（初始化、光滑常数采样）
        alpha_mode: decay 或 constant
        init_scale: 参数初始化标准差，0 为全零初始化
        smoothness: 预先给定的 (L₁, L₂)；None 时 AGD 自动估计
        smoothness_samples: 光滑常数估计的采样点数
        smoothness_radius: 采样点相对初始点的范围
    """
    algorithm: Algorithm = Algorithm.NGD_MODIFIED
    eta1: float = 0.1
    eta2: float = 0.1
    alpha0: float = 0.1
    alpha_power: float = 0.5
    iterations: int = 100
    threshold: float | None = None
    seed: int = 0
    alpha_mode: AlphaMode = AlphaMode.DECAY
    init_scale: float = 0.0
    smoothness: tuple[float, float] | None = None
    smoothness_samples: int = 10
    smoothness_radius: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
            object.__setattr__(self, "alpha_mode", AlphaMode(self.alpha_mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.eta1 < 0 or self.eta2 < 0 or self.alpha0 < 0:
            raise ConfigError("步长与 α₀ 不能为负")
        if not 0.0 <= self.alpha_power <= 1.0:
            raise ConfigError(f"alpha_power 必须位于 [0,1]: {self.alpha_power}")
        if int(self.iterations) < 1:
            raise ConfigError(f"迭代次数必须 ≥ 1: {self.iterations}")
        if self.threshold is not None and not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"阈值 τ 必须位于 (0,1]: {self.threshold}")
        if self.smoothness is not None:
            l1, l2 = self.smoothness
            if l1 <= 0 or l2 <= 0:
                raise ConfigError("光滑常数必须为正")
            object.__setattr__(self, "smoothness", (float(l1), float(l2)))
        if int(self.smoothness_samples) < 2:
            raise ConfigError("smoothness_samples 必须 ≥ 2")
        object.__setattr__(self, "iterations", int(self.iterations))

    def alpha(self, t: int) -> float:
        """第 t 次迭代（t ≥ 1）的 α_t"""
        return self.alpha0 * float(t) ** (-self.alpha_power)


@dataclass(frozen=True)
class TraceRecord:
    """单次迭代记录（对应 trace CSV 的一行）"""
    t: int
    classification_loss: float
    adversary_loss: float
    accuracy: float
    fairness: float | None
    identity_residual: float
    grad_norm_F: float
    grad_norm_C: float
    alpha: float

    def as_row(self) -> tuple:
        return (self.t, self.classification_loss, self.adversary_loss, self.accuracy, self.fairness,
                self.identity_residual, self.grad_norm_F, self.grad_norm_C, self.alpha)


@dataclass
class ThresholdTracker:
    """
    阈值选择：记录训练公平性 ≥ τ 且训练准确率最高的参数

    τ 为 None 时始终跟随最新的迭代。
    """
    tau: float | None
    best_accuracy: float = -math.inf
    best_fairness: float | None = None
    best_params: ModelParams | None = None
    best_iteration: int = -1

    @property
    def is_empty(self) -> bool:
        return self.best_params is None

    def record(self, t: int, params: ModelParams, accuracy: float, fairness: float | None) -> bool:
        """尝试用第 t 次迭代更新记录，返回是否替换"""
        if self.tau is not None:
            if fairness is None or fairness < self.tau or accuracy <= self.best_accuracy:
                return False
        self.best_accuracy = accuracy
        self.best_fairness = fairness
        self.best_params = params.copy()
        self.best_iteration = t
        return True

    def selection(self, final_params: ModelParams) -> tuple[ModelParams, bool]:
        """
        返回 (选中的参数, 是否低于阈值)

        没有迭代满足阈值时退回最终迭代，并标记 below_threshold。
        """
        if self.best_params is None:
            return final_params, self.tau is not None
        return self.best_params, False


@dataclass
class AGDState:
    """加速算法的状态：w_t, p_t, q_t, u_t 以及 a_t, A_t"""
    w: np.ndarray
    p: np.ndarray
    q: np.ndarray
    u: np.ndarray
    L1: float
    L2: float
    a: float = 0.0
    A: float = 0.0
    t: int = 0

    def snapshot(self) -> "AGDState":
        return AGDState(self.w.copy(), self.p.copy(), self.q.copy(), self.u.copy(),
                        self.L1, self.L2, self.a, self.A, self.t)


@dataclass(frozen=True)
class ConvergenceDiagnostics:
    """
    收敛诊断（均为观测量，不作为定理成立与否的判定）

    属性:
        g_estimate: 梯度比上界 G 的估计
        l1, l2: 光滑常数估计（未估计时为 None）
        d_estimate: 参数空间直径代理，max_t ‖θ_t - θ_T‖
        reference: (L_F 参考值, L_C 参考值)，R 曲线以此为基准
        r_f, r_c: R_F(t) = ref_F - L_F(t)，R_C(t) = L_C(t) - ref_C
        epsilon, delta: (ε, δ)-solution 的观测值
        lambda_norms: ‖g_t - ∇_w L_C‖，g_t 为该算法实际使用的更新方向
        divergence: 𝒟(w_0, w_T) = ½‖w_0‖² + ½‖w_T‖² - 2⟨w_0, w_T⟩
        fairness_converged: R_F(T) ≤ ε_request（未请求时为 None）
    """
    g_estimate: float
    skipped_iterations: int
    l1: float | None
    l2: float | None
    d_estimate: float | None
    reference: tuple[float, float]
    r_f: tuple[float, ...]
    r_c: tuple[float, ...]
    epsilon: float
    delta: float
    lambda_norms: tuple[float, ...]
    divergence: float | None
    alpha_mode: str
    alpha_power: float
    fairness_converged: bool | None = None

    def summary(self) -> dict:
        return {
            "g_estimate": self.g_estimate,
            "skipped_iterations": self.skipped_iterations,
            "l1": self.l1,
            "l2": self.l2,
            "d_estimate": self.d_estimate,
            "reference": list(self.reference),
            "epsilon": self.epsilon,
            "delta": self.delta,
            "final_R_F": self.r_f[-1] if self.r_f else None,
            "final_R_C": self.r_c[-1] if self.r_c else None,
            "max_lambda_norm": max(self.lambda_norms) if self.lambda_norms else None,
            "divergence": self.divergence,
            "alpha_mode": self.alpha_mode,
            "alpha_power": self.alpha_power,
            "fairness_converged": self.fairness_converged,
        }


@dataclass
class TrainingResult:
    """一次训练的全部产物"""
    algorithm: Algorithm
    adversary: AdversarySpec
    config: OptimizerConfig
    params: ModelParams                       # 报告的最终参数（AGD 为 (u_T, q_T)）
    trace: list[TraceRecord]
    tracker: ThresholdTracker
    grads_history: list[LossGradients] = field(default_factory=list)
    param_history: list[ModelParams] = field(default_factory=list)
    smoothness: tuple[float, float] | None = None
    agd_history: list[AGDState] = field(default_factory=list)   # 仅 AGD：每次迭代后的状态

    def selected(self) -> tuple[ModelParams, bool]:
        return self.tracker.selection(self.params)


# ==================== 更新方向 ====================

def modified_gradient(grads: LossGradients, alpha: float) -> np.ndarray:
    """
    修正梯度 g = ∇_w L_C - α∇_w L_F - Π_{∇_w L_F} ∇_w L_C

    满足 ⟨∇_w L_F, g⟩ = -α‖∇_w L_F‖²。‖∇_w L_F‖ < EPS_PROJ 时 g = ∇_w L_C。

    参数:
        grads: 当前点的梯度
        alpha: α ≥ 0

    返回:
        np.ndarray
    """
    if alpha < 0:
        raise ValueError(f"α 不能为负: {alpha}")
    grad_c = np.asarray(grads.grad_w_LC, dtype=np.float64)
    grad_f = np.asarray(grads.grad_w_LF, dtype=np.float64)
    if np.linalg.norm(grad_f) < EPS_PROJ:
        return grad_c.copy()
    return grad_c - alpha * grad_f - project(grad_c, grad_f)


def _normal_direction(grads: LossGradients, alpha: float) -> np.ndarray:
    return grads.grad_w_LC - alpha * grads.grad_w_LF


def _accuracy_direction(grads: LossGradients, alpha: float) -> np.ndarray:
    return np.array(grads.grad_w_LC, copy=True)


def _fairness_direction(grads: LossGradients, alpha: float) -> np.ndarray:
    return -alpha * grads.grad_w_LF


_DIRECTIONS = {
    Algorithm.NORMAL_GDA: _normal_direction,
    Algorithm.NGD_MODIFIED: modified_gradient,
    Algorithm.AGD_MODIFIED: modified_gradient,
    Algorithm.ACCURACY_ONLY: _accuracy_direction,
    Algorithm.FAIRNESS_ONLY: _fairness_direction,
}


def update_direction(algorithm: Algorithm) -> Callable[[LossGradients, float], np.ndarray]:
    """算法对 w 实际使用的更新方向（AGD 与修正 NGD 共用修正梯度）"""
    return _DIRECTIONS[Algorithm(algorithm)]


def identity_residual(grads: LossGradients, direction: np.ndarray, alpha: float) -> float:
    """|⟨∇_w L_F, g⟩ + α‖∇_w L_F‖²|，修正更新时应为 0"""
    grad_f = grads.grad_w_LF
    return float(abs(np.dot(grad_f, direction) + alpha * np.dot(grad_f, grad_f)))


# ==================== 公共工具 ====================

def _evaluate(t: int, params: ModelParams, spec: AdversarySpec, data, grads: LossGradients,
              direction: np.ndarray, alpha: float) -> TraceRecord:
    cls = params.classifier
    report = evaluate_predictions(classify_soft(cls, data), data)
    return TraceRecord(
        t=t,
        classification_loss=classification_loss(cls, data),
        adversary_loss=adversary_loss(spec, params.adversary(spec), cls, data),
        accuracy=report.accuracy,
        fairness=report.fairness(spec.kind.fairness_metric),
        identity_residual=identity_residual(grads, direction, alpha),
        grad_norm_F=float(np.linalg.norm(grads.grad_w_LF)),
        grad_norm_C=float(np.linalg.norm(grads.grad_w_LC)),
        alpha=alpha,
    )


def _check_divergence(record: TraceRecord, params: ModelParams, trace: list[TraceRecord]) -> None:
    losses = (record.classification_loss, record.adversary_loss)
    if not all(math.isfinite(v) and abs(v) <= DIVERGENCE_LIMIT for v in losses):
        raise DivergenceError(f"损失发散: L_C={losses[0]}, L_F={losses[1]}", record.t, trace)
    if not np.all(np.isfinite(params.flat())):
        raise DivergenceError("参数出现非有限数值", record.t, trace)


def _start(cfg: OptimizerConfig, spec: AdversarySpec, data,
           params: ModelParams | None) -> ModelParams:
    if params is None:
        return init_params(spec, data.n_features, seed=cfg.seed, scale=cfg.init_scale)
    return params.copy()


def track_threshold(tracker: ThresholdTracker, t: int, params: ModelParams,
                    train_metrics: tuple[float, float | None]) -> ThresholdTracker:
    """
    按阈值规则更新 tracker

    仅当公平性 ≥ τ 且准确率严格高于已有记录时替换（平局保留较早的迭代）。

    参数:
        tracker: 阈值记录器
        t: 迭代序号
        params: 该迭代的参数
        train_metrics: (训练准确率, 训练公平性)

    返回:
        更新后的 tracker
    """
    accuracy, fairness = train_metrics
    tracker.record(t, params, accuracy, fairness)
    return tracker


# ==================== 一阶交替算法 ====================

def _run_first_order(cfg: OptimizerConfig, spec: AdversarySpec, data,
                     params: ModelParams | None, direction_fn: Callable) -> TrainingResult:
    current = _start(cfg, spec, data, params)
    trace: list[TraceRecord] = []
    tracker = ThresholdTracker(cfg.threshold)
    grads_history: list[LossGradients] = []
    param_history: list[ModelParams] = [current.copy()]

    logger.info("开始训练: %s, T=%d, η₁=%g, η₂=%g, α₀=%g, p=%g", cfg.algorithm.value,
                cfg.iterations, cfg.eta1, cfg.eta2, cfg.alpha0, cfg.alpha_power)

    for t in range(1, cfg.iterations + 1):
        alpha = cfg.alpha(t)
        try:
            grads = gradients(spec, current.adversary(spec), current.classifier, data)
            direction = direction_fn(grads, alpha)
            current = ModelParams(current.w - cfg.eta2 * direction,
                                  current.u + cfg.eta1 * grads.grad_u_LF)
            record = _evaluate(t, current, spec, data, grads, direction, alpha)
        except NumericalError as exc:
            raise DivergenceError(f"数值异常: {exc}", t, trace) from exc

        _check_divergence(record, current, trace)
        trace.append(record)
        grads_history.append(grads)
        param_history.append(current.copy())
        track_threshold(tracker, t, current, (record.accuracy, record.fairness))
        logger.debug("t=%d L_C=%.6f L_F=%.6f acc=%.4f fair=%s", t, record.classification_loss,
                     record.adversary_loss, record.accuracy, record.fairness)

    logger.info("训练结束: acc=%.4f, fairness=%s", trace[-1].accuracy, trace[-1].fairness)
    return TrainingResult(cfg.algorithm, spec, cfg, current, trace, tracker,
                          grads_history, param_history)


def run_normal_gda(cfg: OptimizerConfig, spec: AdversarySpec, data,
                   params: ModelParams | None = None) -> TrainingResult:
    """
    普通梯度下降-上升

        u_{t+1} = u_t + η₁∇_u L_F
        w_{t+1} = w_t - η₂(∇_w L_C - α∇_w L_F)

    参数:
        cfg: 优化器配置
        spec: 对抗配置
        data: 增广训练集
        params: 初始参数，None 时按 cfg 初始化

    返回:
        TrainingResult

    异常:
        DivergenceError: 损失非有限或超过上限，附带迭代序号与已有 trace
    """
    return _run_first_order(cfg, spec, data, params, _normal_direction)


def run_ngd_modified(cfg: OptimizerConfig, spec: AdversarySpec, data,
                     params: ModelParams | None = None) -> TrainingResult:
    """
    修正更新的梯度下降-上升（Algorithm 1）

        u_{t+1} = u_t + η₁∇_u L_F
        w_{t+1} = w_t - η₂(∇_w L_C - α_t∇_w L_F - Π_{∇_w L_F}∇_w L_C)

    每次迭代后按阈值规则更新 tracker。
    """
    return _run_first_order(cfg, spec, data, params, modified_gradient)


# ==================== 加速算法 ====================

def agd_step_size(t: int, alpha: float, l1: float, l2: float) -> float:
    """a_t = 1 / (α L₁ L₂ √t)"""
    return 1.0 / (alpha * l1 * l2 * math.sqrt(t))


def estimate_smoothness(loss: Callable[[np.ndarray], float], center, sample_points: int = 10,
                        seed: int = 0, radius: float = 1.0,
                        gradient: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """
    经验估计光滑常数 L

    在 center 附近均匀采样 sample_points 个点，取所有点对上
    ‖∇f(u) - ∇f(v)‖ / ‖u - v‖ 的最大值再乘以安全系数 1.5。

    参数:
        loss: 标量函数
        center: 采样中心
        sample_points: 采样点数，≥ 2
        seed: 随机种子
        radius: 每个坐标的采样范围 [-radius, radius]
        gradient: 解析梯度；为 None 时使用中心差分

    返回:
        float: 正的 L 估计值（下限为 SMOOTHNESS_FLOOR）
    """
    if sample_points < 2:
        raise ValueError(f"sample_points 必须 ≥ 2: {sample_points}")
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    rng = np.random.default_rng(seed)
    points = center + rng.uniform(-radius, radius, size=(sample_points, center.size))

    grad_fn = gradient if gradient is not None else (lambda x: finite_diff_gradient(loss, x))
    grads = [np.asarray(grad_fn(x), dtype=np.float64) for x in points]

    best = 0.0
    for i, j in combinations(range(sample_points), 2):
        distance = np.linalg.norm(points[i] - points[j])
        if distance > 0:
            best = max(best, float(np.linalg.norm(grads[i] - grads[j]) / distance))
    return max(best * SMOOTHNESS_SAFETY, SMOOTHNESS_FLOOR)


def _estimate_agd_smoothness(cfg: OptimizerConfig, spec: AdversarySpec, data,
                             start: ModelParams) -> tuple[float, float]:
    n_w = start.w.size

    def lc(w):
        return classification_loss(ClassifierParams(w), data)

    def lc_grad(w):
        return gradients(spec, start.adversary(spec), ClassifierParams(w), data).grad_w_LC

    def split_flat(theta):
        return ModelParams(theta[:n_w], theta[n_w:])

    def lf(theta):
        params = split_flat(theta)
        return adversary_loss(spec, params.adversary(spec), params.classifier, data)

    def lf_grad(theta):
        params = split_flat(theta)
        grads = gradients(spec, params.adversary(spec), params.classifier, data)
        return np.concatenate([grads.grad_w_LF, grads.grad_u_LF])

    l1 = estimate_smoothness(lc, start.w, cfg.smoothness_samples, cfg.seed,
                             cfg.smoothness_radius, lc_grad)
    l2 = estimate_smoothness(lf, start.flat(), cfg.smoothness_samples, cfg.seed + 1,
                             cfg.smoothness_radius, lf_grad)
    return l1, l2


def run_agd_modified(cfg: OptimizerConfig, spec: AdversarySpec, data,
                     params: ModelParams | None = None) -> TrainingResult:
    """
    修正更新的加速梯度算法（Algorithm 2）

        u_t = u_{t-1} + η∇_u L_F
        g(w) = ∇_w L_C - α∇_w L_F - Π_{∇_w L_F}∇_w L_C
        p_t = (A_{t-1}/A_t) q_{t-1} + (a_t/A_t) ∇ψ(w_{t-1})
        w_t = w_{t-1} - a_t g(w_{t-1})
        q_t = (A_{t-1}/A_t) q_{t-1} + (a_t/A_t) ∇ψ(w_t)

    ψ(w) = ½‖w‖²，∇ψ(w) = w。a_t 中的 α 取 max{1/L₁, 1/L₂}，保证 a_t ≤ 1/(L₁√t)；
    g 中的 α 按配置衰减（decay）或同样取该常数（constant）。
    u 的步长 η 取 cfg.eta1。报告的分类器参数为 q_T，tracker 按 q_t 评估。

    参数:
        cfg: 优化器配置（smoothness 为 None 时自动估计 L₁, L₂）
        spec: 对抗配置
        data: 增广训练集
        params: 初始参数

    返回:
        TrainingResult
    """
    start = _start(cfg, spec, data, params)
    if cfg.smoothness is not None:
        l1, l2 = cfg.smoothness
    else:
        l1, l2 = _estimate_agd_smoothness(cfg, spec, data, start)
    alpha_step = max(1.0 / l1, 1.0 / l2)
    logger.info("AGD: L₁=%.4g, L₂=%.4g, a_t 中 α=%.4g, T=%d", l1, l2, alpha_step, cfg.iterations)

    state = AGDState(w=start.w.copy(), p=start.w.copy(), q=start.w.copy(), u=start.u.copy(), L1=l1, L2=l2)
    trace: list[TraceRecord] = []
    tracker = ThresholdTracker(cfg.threshold)
    grads_history: list[LossGradients] = []
    param_history: list[ModelParams] = [ModelParams(state.q.copy(), state.u.copy())]
    agd_history: list[AGDState] = []

    for t in range(1, cfg.iterations + 1):
        alpha = cfg.alpha(t) if cfg.alpha_mode is AlphaMode.DECAY else alpha_step
        try:
            current = ModelParams(state.w, state.u)
            grads = gradients(spec, current.adversary(spec), current.classifier, data)
            direction = modified_gradient(grads, alpha)

            a_t = agd_step_size(t, alpha_step, l1, l2)
            previous_total = state.A
            state.A = previous_total + a_t
            state.a = a_t
            keep, mix = previous_total / state.A, a_t / state.A

            state.u = state.u + cfg.eta1 * grads.grad_u_LF
            state.p = keep * state.q + mix * state.w
            state.w = state.w - a_t * direction
            state.q = keep * state.q + mix * state.w
            state.t = t

            reported = ModelParams(state.q.copy(), state.u.copy())
            record = _evaluate(t, reported, spec, data, grads, direction, alpha)
        except NumericalError as exc:
            raise DivergenceError(f"数值异常: {exc}", t, trace) from exc

        _check_divergence(record, reported, trace)
        trace.append(record)
        grads_history.append(grads)
        param_history.append(reported)
        agd_history.append(state.snapshot())
        track_threshold(tracker, t, reported, (record.accuracy, record.fairness))
        logger.debug("t=%d a_t=%.4g A_t=%.4g L_C=%.6f L_F=%.6f", t, a_t, state.A,
                     record.classification_loss, record.adversary_loss)

    logger.info("训练结束: acc=%.4f, fairness=%s", trace[-1].accuracy, trace[-1].fairness)
    return TrainingResult(cfg.algorithm, spec, cfg, ModelParams(state.q.copy(), state.u.copy()),
                          trace, tracker, grads_history, param_history, (l1, l2), agd_history)


def run_accuracy_only(cfg: OptimizerConfig, spec: AdversarySpec, data,
                      params: ModelParams | None = None) -> TrainingResult:
    """基线：w 只沿 ∇_w L_C 下降（对抗仍上升，仅用于记录 L_F）"""
    return _run_first_order(cfg, spec, data, params, _accuracy_direction)


def run_fairness_only(cfg: OptimizerConfig, spec: AdversarySpec, data,
                      params: ModelParams | None = None) -> TrainingResult:
    """基线：w 只沿 ∇_w L_F 上升，步长 η₂·α_t，不考虑 L_C

    全零初始点上 ∇_w L_F 通常为 0，w 不会移动，此时记录一条警告。
    """
    start = _start(cfg, spec, data, params)
    if not np.any(start.flat()):
        logger.warning("fairness_only 从全零参数出发，∇_w L_F 可能恒为 0；可设置 init_scale 使用随机初始化")
    return _run_first_order(cfg, spec, data, start, _fairness_direction)


_RUNNERS = {
    Algorithm.NORMAL_GDA: run_normal_gda,
    Algorithm.NGD_MODIFIED: run_ngd_modified,
    Algorithm.AGD_MODIFIED: run_agd_modified,
    Algorithm.ACCURACY_ONLY: run_accuracy_only,
    Algorithm.FAIRNESS_ONLY: run_fairness_only,
}


def run(cfg: OptimizerConfig, spec: AdversarySpec, data,
        params: ModelParams | None = None) -> TrainingResult:
    """按 cfg.algorithm 分派训练算法"""
    return _RUNNERS[cfg.algorithm](cfg, spec, data, params)


# ==================== 诊断 ====================

def iterations_to_threshold(trace: Sequence[TraceRecord], tau: float,
                            accuracy_tolerance: float | None = None) -> int | None:
    """
    首个训练公平性 ≥ τ 的迭代序号

    给定 accuracy_tolerance 时还要求准确率不低于最终准确率减去该容差。
    从未达到时返回 None。
    """
    if not trace:
        return None
    final_accuracy = trace[-1].accuracy
    for record in trace:
        if record.fairness is None or record.fairness < tau:
            continue
        if accuracy_tolerance is not None and record.accuracy < final_accuracy - accuracy_tolerance:
            continue
        return record.t
    return None


def bregman_divergence(w1, w2) -> float:
    """𝒟(w₁, w₂) = ½‖w₁‖² + ½‖w₂‖² - 2⟨w₁, w₂⟩"""
    a = np.asarray(w1, dtype=np.float64)
    b = np.asarray(w2, dtype=np.float64)
    return float(0.5 * np.dot(a, a) + 0.5 * np.dot(b, b) - 2.0 * np.dot(a, b))


def diagnose_convergence(trace: Sequence[TraceRecord], grads_history: Sequence[LossGradients],
                         param_history: Sequence[ModelParams] | None = None,
                         reference: tuple[float, float] | None = None,
                         epsilon: float | None = None,
                         smoothness: tuple[float, float] | None = None,
                         alpha_mode: AlphaMode = AlphaMode.DECAY,
                         alpha_power: float = 0.5,
                         algorithm: Algorithm = Algorithm.NGD_MODIFIED) -> ConvergenceDiagnostics:
    """
    从完成的 trace 中提取收敛诊断量

    G 估计为各迭代 max(‖∇_w L_C‖/‖∇_w L_F‖, ‖∇_w L_F‖/‖∇_w L_C‖) 的最大值，
    任一梯度范数低于 EPS_PROJ 的迭代跳过并计数。
    reference 为 None 时以 trace 中观测到的最大 L_F 与最小 L_C 为基准（真实最优点未知，仅为代理）。

    参数:
        trace: 训练记录
        grads_history: 与 trace 对应的梯度
        param_history: 参数序列（首项为初始点）
        reference: (L_F 参考值, L_C 参考值)
        epsilon: 若给定，报告 R_F(T) ≤ epsilon 是否成立
        smoothness: (L₁, L₂)
        alpha_mode, alpha_power: 记录所用 α 设定
        algorithm: 产生 trace 的算法，决定 λ_t 所用的更新方向

    返回:
        ConvergenceDiagnostics
    """
    if not trace:
        raise ValueError("trace 为空，无法诊断")

    ratios = []
    skipped = 0
    for record in trace:
        if record.grad_norm_F < EPS_PROJ or record.grad_norm_C < EPS_PROJ:
            skipped += 1
            continue
        ratios.append(max(record.grad_norm_C / record.grad_norm_F,
                          record.grad_norm_F / record.grad_norm_C))
    g_estimate = max(ratios) if ratios else math.inf

    lf = np.array([r.adversary_loss for r in trace])
    lc = np.array([r.classification_loss for r in trace])
    if reference is None:
        reference = (float(np.max(lf)), float(np.min(lc)))
    r_f = tuple(float(v) for v in reference[0] - lf)
    r_c = tuple(float(v) for v in lc - reference[1])

    direction = update_direction(algorithm)
    lambda_norms = tuple(
        float(np.linalg.norm(direction(grads, record.alpha) - grads.grad_w_LC))
        for grads, record in zip(grads_history, trace)
    )

    d_estimate = None
    divergence = None
    if param_history:
        final = param_history[-1].flat()
        d_estimate = max(float(np.linalg.norm(p.flat() - final)) for p in param_history)
        divergence = bregman_divergence(param_history[0].w, param_history[-1].w)

    return ConvergenceDiagnostics(
        g_estimate=float(g_estimate),
        skipped_iterations=skipped,
        l1=None if smoothness is None else smoothness[0],
        l2=None if smoothness is None else smoothness[1],
        d_estimate=d_estimate,
        reference=(float(reference[0]), float(reference[1])),
        r_f=r_f,
        r_c=r_c,
        epsilon=float(np.max(lf) - lf[-1]),
        delta=float(lc[-1] - np.min(lc)),
        lambda_norms=lambda_norms,
        divergence=divergence,
        alpha_mode=AlphaMode(alpha_mode).value,
        alpha_power=float(alpha_power),
        fairness_converged=None if epsilon is None else bool(r_f[-1] <= epsilon),
    )
