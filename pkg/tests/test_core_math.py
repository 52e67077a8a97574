"""
基础数学模块单元测试
"""

import math
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

# 添加项目根目录到路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.core_math import (  # noqa: E402
    EPS_CLIP,
    finite_diff_gradient,
    log_loss,
    pearson_correlation,
    project,
    sigmoid,
)
from src.core.errors import DegenerateVarianceError, DimensionError, NumericalError  # noqa: E402


def test_sigmoid_values():
    """测试 sigmoid 的取值与对称性"""
    assert sigmoid(0.0) == 0.5
    z = np.linspace(-30, 30, 61)
    assert_allclose(sigmoid(z) + sigmoid(-z), np.ones_like(z), atol=1e-15)


def test_sigmoid_extreme_inputs_stay_finite():
    """|z| 很大时不溢出"""
    out = sigmoid(np.array([-500.0, 500.0]))
    assert np.all(np.isfinite(out))
    assert 0.0 < out[0] < 1e-200
    assert out[1] == 1.0


def test_sigmoid_rejects_nan():
    with pytest.raises(NumericalError):
        sigmoid(np.array([0.0, np.nan]))


def test_log_loss_examples():
    assert log_loss([0.5], [1]) == pytest.approx(math.log(2.0))
    assert log_loss([0.5, 0.5], [0, 1]) == pytest.approx(math.log(2.0))
    # 预测为 0 且标签为 1 时截断到 EPS_CLIP
    assert log_loss([0.0], [1]) == pytest.approx(-math.log(EPS_CLIP))


def test_log_loss_length_mismatch():
    with pytest.raises(DimensionError):
        log_loss([0.5, 0.5], [1])


def test_project_examples():
    assert_array_equal(project([1.0, 1.0], [1.0, 0.0]), [1.0, 0.0])
    assert_array_equal(project([1.0, 1.0], [0.0, 0.0]), [0.0, 0.0])
    assert_allclose(project([3.0, 4.0], [2.0, 2.0]), [3.5, 3.5])


def test_project_residual_is_orthogonal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        u, v = rng.normal(size=6), rng.normal(size=6)
        residual = u - project(u, v)
        assert abs(np.dot(residual, v)) <= 1e-12 * (1.0 + np.dot(u, u) + np.dot(v, v))


def test_pearson_examples():
    assert pearson_correlation([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson_correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    r = pearson_correlation(np.random.default_rng(1).normal(size=20), np.arange(20))
    assert -1.0 <= r <= 1.0


def test_pearson_constant_vector():
    with pytest.raises(DegenerateVarianceError):
        pearson_correlation([1, 1, 1], [1, 2, 3])


def test_pearson_length_mismatch():
    with pytest.raises(DimensionError):
        pearson_correlation([1, 2, 3], [1, 2])


def test_finite_diff_gradient_quadratic():
    """f(x) = xᵀx 的梯度为 2x"""
    x = np.array([0.3, -1.2, 2.0])
    assert_allclose(finite_diff_gradient(lambda v: float(np.dot(v, v)), x), 2 * x, rtol=1e-8)


def test_finite_diff_gradient_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_gradient(lambda v: 0.0, [1.0], step=0.0)


def test_log_loss_hand_value():
    expected = -(math.log(0.9) + math.log(0.8)) / 2
    assert log_loss([0.9, 0.2], [1, 0]) == pytest.approx(expected, rel=1e-12)


def test_project_is_idempotent():
    rng = np.random.default_rng(3)
    for _ in range(50):
        u, v = rng.normal(size=5), rng.normal(size=5)
        once = project(u, v)
        assert_allclose(project(once, v), once, rtol=1e-12, atol=1e-12)


def test_pearson_is_invariant_under_positive_affine_maps():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x, y = rng.normal(size=30), rng.normal(size=30)
        a, b = rng.uniform(0.1, 10.0), rng.normal()
        assert pearson_correlation(a * x + b, y) == pytest.approx(pearson_correlation(x, y), abs=1e-12)
        assert pearson_correlation(-a * x + b, y) == pytest.approx(-pearson_correlation(x, y), abs=1e-12)
