"""
模型与损失函数单元测试

解析梯度与中心差分（h = 1e-5）在随机实例上逐一比较。
"""

import math
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

# 添加项目根目录到路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.core_math import finite_diff_gradient  # noqa: E402
from src.core.dataset import Dataset, augment  # noqa: E402
from src.core.errors import ConfigError, DimensionError  # noqa: E402
from src.core.models import (  # noqa: E402
    AdversaryKind,
    AdversarySpec,
    ClassifierParams,
    FDRAdversaryParams,
    ModelParams,
    Normalization,
    SPAdversaryParams,
    adversary_loss,
    classification_loss,
    classify_soft,
    fdr_adversary_loss,
    gradients,
    init_params,
    sp_adversary_loss,
)


def _random_instance(rng):
    n = int(rng.integers(1, 11))
    size = int(rng.integers(4, 51))
    z = rng.integers(0, 2, size=size)
    z[0], z[1] = 0, 1
    y = rng.integers(0, 2, size=size)
    x = rng.uniform(0.0, 1.0, size=(size, n))
    mode = "bias" if rng.random() < 0.5 else "noise"
    return augment(Dataset(x, y, z), mode, seed=int(rng.integers(0, 1000)))


def _relative_error(analytic, numeric) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1.0)
    return float(np.linalg.norm(analytic - numeric) / scale)


def _check_gradients(spec: AdversarySpec, data, params: ModelParams) -> None:
    grads = gradients(spec, params.adversary(spec), params.classifier, data)
    w, u = params.w, params.u

    numeric_lc = finite_diff_gradient(lambda v: classification_loss(ClassifierParams(v), data), w)
    numeric_w = finite_diff_gradient(
        lambda v: adversary_loss(spec, ModelParams(v, u).adversary(spec), ClassifierParams(v), data), w)
    assert _relative_error(grads.grad_w_LC, numeric_lc) <= 1e-5
    assert _relative_error(grads.grad_w_LF, numeric_w) <= 1e-5

    if u.size:
        numeric_u = finite_diff_gradient(
            lambda v: adversary_loss(spec, ModelParams(w, v).adversary(spec), ClassifierParams(w), data), u)
        assert _relative_error(grads.grad_u_LF, numeric_u) <= 1e-5
    else:
        assert grads.grad_u_LF.size == 0


@pytest.mark.parametrize("kind", list(AdversaryKind))
def test_gradients_match_finite_differences(kind):
    """每种对抗 ≥ 100 个随机实例"""
    rng = np.random.default_rng(list(AdversaryKind).index(kind))
    for i in range(110):
        data = _random_instance(rng)
        normalization = Normalization.MEAN if i % 2 else Normalization.SUM
        spec = AdversarySpec(kind=kind, degree=int(rng.integers(1, 4)), mu=float(rng.uniform(0.1, 2.0)),
                             normalization=normalization)
        params = ModelParams(rng.normal(0.0, 0.3, size=data.n_features),
                             rng.normal(0.0, 0.5, size=spec.adversary_dim))
        _check_gradients(spec, data, params)


def test_zero_weights_give_half_probabilities(small_augmented):
    cls = ClassifierParams(np.zeros(small_augmented.n_features))
    assert_array_equal(classify_soft(cls, small_augmented), np.full(small_augmented.n_samples, 0.5))
    assert classification_loss(cls, small_augmented) == pytest.approx(math.log(2.0))


def test_classification_loss_includes_l2_penalty(small_augmented):
    w = np.zeros(small_augmented.n_features)
    w[0] = 2.0
    with_penalty = classification_loss(ClassifierParams(w), small_augmented)
    probabilities = classify_soft(ClassifierParams(w), small_augmented)
    y = small_augmented.labels
    log_loss = -np.mean(y * np.log(probabilities) + (1 - y) * np.log(1 - probabilities))
    assert with_penalty == pytest.approx(log_loss + 2.0)


def test_sp_adversary_loss_at_zero(small_augmented):
    """w = 0, u = 0：regularizer 为 0，L_F = -ln 2"""
    spec = AdversarySpec()
    params = init_params(spec, small_augmented.n_features)
    value = adversary_loss(spec, params.adversary(spec), params.classifier, small_augmented)
    assert value == pytest.approx(-math.log(2.0))


def test_sp_regularizer_vanishes_for_identical_groups():
    """两组得分分布相同时 regularizer 为 0"""
    x = np.array([[0.1], [0.9], [0.1], [0.9]])
    data = augment(Dataset(x, [0, 1, 0, 1], [0, 0, 1, 1]), "bias")
    spec = AdversarySpec(mu=5.0)
    params = ModelParams(np.array([1.3, -0.2]), np.zeros(3))
    value = adversary_loss(spec, params.adversary(spec), params.classifier, data)
    assert value == pytest.approx(-math.log(2.0))


def test_mean_normalization_scales_regularizer(small_augmented):
    """SP regularizer 在 mean 模式下为 sum 模式的 1/N²"""
    w = np.linspace(-0.5, 0.5, small_augmented.n_features)
    u = np.zeros(3)
    base = -math.log(2.0)
    values = {}
    for normalization in Normalization:
        spec = AdversarySpec(mu=1.0, normalization=normalization)
        values[normalization] = adversary_loss(spec, ModelParams(w, u).adversary(spec),
                                               ClassifierParams(w), small_augmented) - base
    n = small_augmented.n_samples
    assert values[Normalization.MEAN] == pytest.approx(values[Normalization.SUM] / n ** 2, rel=1e-10)


# 四个样本的手算例子：得分 s = xw = [0.5, -1, -0.5, 1]
TOY_FEATURES = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
TOY_W = np.array([0.5, -1.0])
TOY_SCORES = (0.5, -1.0, -0.5, 1.0)
TOY_Z = (0, 0, 1, 1)


def _sig(t: float) -> float:
    return 1.0 / (1.0 + math.exp(-t))


def _hand_log_loss(logits, targets) -> float:
    terms = [t * math.log(_sig(a)) + (1 - t) * math.log(1.0 - _sig(a)) for a, t in zip(logits, targets)]
    return -sum(terms) / len(terms)


@pytest.mark.parametrize("normalization, gap", [("sum", -2.0), ("mean", -0.5)])
def test_sp_adversary_loss_hand_value(normalization, gap):
    """D = (0.5 - 1)/0.5 - (-0.5 + 1)/0.5 = -2，mean 模式再除以 N = 4"""
    data = Dataset(TOY_FEATURES, [1, 0, 1, 0], TOY_Z)
    u = (0.1, 0.2, -0.3)
    adv = SPAdversaryParams(np.array(u), degree=2, mu=1.0)
    logits = [u[0] + u[1] * s + u[2] * s * s for s in TOY_SCORES]
    expected = -_hand_log_loss(logits, TOY_Z) - 0.5 * gap ** 2
    value = sp_adversary_loss(adv, ClassifierParams(TOY_W), data, normalization)
    assert value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("normalization, gap", [("sum", 0.25), ("mean", 0.25 / 16)])
def test_fdr_adversary_loss_hand_value(normalization, gap):
    """y = [1,0,0,0]：A = 0.5, B = -0.5, C = -1, E = 0.5，A·B - C·E = 0.25"""
    y = (1, 0, 0, 0)
    data = Dataset(TOY_FEATURES, y, TOY_Z)
    u = (0.2, -0.5, 1.0)
    adv = FDRAdversaryParams(np.array(u), mu=2.0)
    logits = [u[0] + u[1] * _sig(s) + u[2] * label for s, label in zip(TOY_SCORES, y)]
    expected = -_hand_log_loss(logits, TOY_Z) - 0.5 * 2.0 * gap ** 2
    value = fdr_adversary_loss(adv, ClassifierParams(TOY_W), data, normalization)
    assert value == pytest.approx(expected, rel=1e-12)


def test_classification_loss_is_convex_along_segments():
    """L_C((w1 + w2)/2) ≤ (L_C(w1) + L_C(w2))/2"""
    rng = np.random.default_rng(5)
    for _ in range(30):
        data = _random_instance(rng)
        w1, w2 = rng.normal(0.0, 2.0, size=(2, data.n_features))
        mid = classification_loss(ClassifierParams((w1 + w2) / 2), data)
        ends = classification_loss(ClassifierParams(w1), data) + classification_loss(ClassifierParams(w2), data)
        assert mid <= ends / 2 + 1e-10


def test_sigmoid_parity_has_no_adversary_parameters(small_augmented):
    spec = AdversarySpec(kind="sigmoid_parity")
    params = init_params(spec, small_augmented.n_features, seed=1, scale=0.5)
    assert params.u.size == 0
    grads = gradients(spec, params.adversary(spec), params.classifier, small_augmented)
    assert grads.grad_u_LF.size == 0


def test_dimension_errors(small_augmented):
    with pytest.raises(DimensionError):
        classify_soft(ClassifierParams(np.zeros(2)), small_augmented)
    with pytest.raises(DimensionError):
        SPAdversaryParams(np.zeros(2), degree=2)


def test_adversary_spec_validation():
    assert AdversarySpec(kind="false_discovery").adversary_dim == 3
    assert AdversarySpec(degree=4).adversary_dim == 5
    with pytest.raises(ConfigError):
        AdversarySpec(kind="equal_opportunity")
    with pytest.raises(ConfigError):
        AdversarySpec(degree=0)


def test_init_params_seeded():
    spec = AdversarySpec()
    a = init_params(spec, 4, seed=3, scale=0.1)
    b = init_params(spec, 4, seed=3, scale=0.1)
    assert_allclose(a.flat(), b.flat())
    assert_array_equal(init_params(spec, 4).flat(), np.zeros(7))
