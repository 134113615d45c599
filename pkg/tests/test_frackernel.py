import time
import warnings

import numpy as np
import pytest

from fracheat.exceptions import InputError
from fracheat.frackernel import (DiscreteMeasure, FracHeatOperator, FracHeatSemigroup,
                                 adjoint_apply, frac_derivative_kernel, frac_kernel,
                                 poisson_kernel, semigroup_apply, time_derivative_kernel)
from fracheat.space import (HeatKernelModel, build_grid, euclidean, heisenberg_h1,
                            weighted_euclidean)
from oracles import fourier_1d


@pytest.fixture(scope="module")
def op1():
    sp = euclidean(1)
    return FracHeatOperator(0.5, sp, grid=build_grid(sp, 64.0, 1 / 32))


def test_kernel_examples(op1):
    assert frac_kernel(op1, 1.0, 0.0, 0.0) == pytest.approx(1 / np.pi, rel=1e-12)
    assert frac_kernel(op1, 2.0, 0.0, 1.0) == pytest.approx(0.4 / np.pi, rel=1e-12)
    assert 0.4 / np.pi == pytest.approx(0.127324, abs=1e-6)


@pytest.mark.parametrize("n", [1, 3])
def test_poisson_oracle(n):
    op = FracHeatOperator(0.5, euclidean(n))
    rng = np.random.default_rng(n)
    t = rng.uniform(0.1, 10, 200)
    d = rng.uniform(0, 10, 200)
    for fast in (False, True):
        K = op.kernel_radial(t, d, fast=fast)
        assert np.max(np.abs(K / poisson_kernel(n, t, d) - 1)) <= 1e-6


def test_kernel_mass_on_grid(op1):
    g = op1.grid
    K = op1.kernel(1.0, [[0.0]], g.nodes)
    tail = 1 - 2 / np.pi * np.arctan(64.0)
    assert K @ g.weights == pytest.approx(1 - tail, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 0.9])
def test_fourier_oracle_kernel(alpha):
    op = FracHeatOperator(alpha, euclidean(1))
    for t, d in [(0.5, 0.0), (1.0, 0.7), (2.0, 3.0)]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = fourier_1d(alpha, 0.0, t, d)
        assert op.kernel(t, 0.0, d)[()] == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("alpha,theta", [(0.7, 0.6), (0.3, 0.3), (0.7, 1.4), (0.9, 0.9), (0.5, 0.5)])
def test_fourier_oracle_frac_derivative(alpha, theta):
    op = FracHeatOperator(alpha, euclidean(1))
    pts = [(0.5, 0.0), (1.0, 0.4), (1.0, 1.5), (2.0, 0.0), (2.0, 2.5),
           (0.7, 0.9), (1.5, 4.0), (3.0, 1.0), (1.0, 0.0)]
    for t, d in pts:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = fourier_1d(alpha, theta, t, d)
        val = frac_derivative_kernel(op, theta, t, 0.0, d)
        assert abs(val - ref) <= 1e-4 * max(abs(ref), 1e-3)


def test_frac_derivative_poisson(op1):
    # L^{1/2} K = -d/dt K: at t=1, d=0 this is +1/pi
    assert frac_derivative_kernel(op1, 1.0, 1.0, 0.0, 0.0) == pytest.approx(1 / np.pi, rel=1e-8)
    assert frac_derivative_kernel(op1, 0.6, 1.0, 0.0, 0.0) == pytest.approx(
        fourier_1d(0.5, 0.6, 1.0, 0.0), rel=1e-8)


def test_frac_derivative_scaling_envelope():
    op = FracHeatOperator(0.5, euclidean(1))
    theta = 0.6
    base = op.frac_derivative_kernel(theta, 1.0, 0.0, 0.5)
    for lam in (0.5, 2.0, 4.0):
        v = op.frac_derivative_kernel(theta, lam, 0.0, 0.5 * lam)
        assert v * lam ** (1 + theta) == pytest.approx(base, rel=1e-8)


def test_frac_derivative_range():
    op = FracHeatOperator(0.5, euclidean(1))
    with pytest.raises(InputError):
        op.frac_derivative_kernel(1.2, 1.0, 0.0, 0.0)
    with pytest.raises(InputError):
        op.frac_derivative_kernel(0.0, 1.0, 0.0, 0.0)


def test_time_derivative(op1):
    assert time_derivative_kernel(op1, 1.0, 0.0, 0.0) == pytest.approx(-1 / np.pi, rel=1e-8)
    assert abs(time_derivative_kernel(op1, 1.0, 0.0, 1.0)) <= 1e-10
    t = np.geomspace(0.05, 20, 15)
    v, err = op1.time_derivative_kernel(t, 0.0, 0.0, return_error=True)
    assert np.all(v < 0)
    np.testing.assert_allclose(v, -1 / (np.pi * t ** 2), rtol=1e-8)
    assert np.all(err < 1e-6 * np.abs(v))


def test_symmetry_and_panel_refinement():
    sp = weighted_euclidean(1, 0.5)
    m = HeatKernelModel("model_gauss_gauge")
    op = FracHeatOperator(0.6, sp, m)
    a = op.kernel(0.8, [[0.3]], [[1.7]])
    b = op.kernel(0.8, [[1.7]], [[0.3]])
    assert a == pytest.approx(b, rel=1e-13)
    e = FracHeatOperator(0.7, euclidean(1))
    f = FracHeatOperator(0.7, euclidean(1), panel_width=e.panel_width / 2)
    d = np.linspace(0, 6, 13)
    np.testing.assert_allclose(e.kernel_radial(1.0, d), f.kernel_radial(1.0, d), rtol=1e-9)


def test_semigroup_apply_examples(op1):
    x = op1.grid.nodes[:, 0]
    i0 = np.argmin(np.abs(x))
    one = semigroup_apply(op1, 1.0, np.ones_like(x))
    tail = 1 - 2 / np.pi * np.arctan(64.0)
    assert one[i0] == pytest.approx(1 - tail, abs=1e-8)
    f = (np.abs(x) <= 1).astype(float)
    f[np.isclose(np.abs(x), 1)] = 0.5
    for mode in ("nodal", "cell"):
        assert semigroup_apply(op1, 1.0, f, mode)[i0] == pytest.approx(0.5, abs=1e-3)
    rng = np.random.default_rng(0)
    f, g = rng.random((2, len(x)))
    lhs = op1.semigroup_apply(0.7, 2 * f - 3 * g)
    rhs = 2 * op1.semigroup_apply(0.7, f) - 3 * op1.semigroup_apply(0.7, g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12
    assert np.all(op1.semigroup_apply(0.7, f) >= 0)


def test_semigroup_property(op1):
    x = op1.grid.nodes[:, 0]
    phi = np.exp(-x ** 2)
    a = op1.semigroup_apply(0.5, op1.semigroup_apply(0.7, phi, "cell"), "cell")
    b = op1.semigroup_apply(1.2, phi, "cell")
    m = np.abs(x) < 8
    assert np.max(np.abs(a - b)[m]) / np.max(b) <= 1e-4


def test_toeplitz_matches_dense(op1):
    sp = euclidean(1)
    op = FracHeatOperator(0.5, sp, grid=build_grid(sp, 4.0, 0.25))
    f = np.cos(op.grid.nodes[:, 0])
    dense = op.kernel_matrix(0.6) @ f
    np.testing.assert_allclose(op.semigroup_apply(0.6, f), dense, rtol=1e-9, atol=1e-12)
    cell = op.kernel_matrix(0.6, mode="cell") @ f
    np.testing.assert_allclose(op.semigroup_apply(0.6, f, "cell"), cell, rtol=1e-9, atol=1e-12)


def test_cell_mode_identity_limit(op1):
    x = op1.grid.nodes[:, 0]
    phi = np.exp(-x ** 2)
    assert np.max(np.abs(op1.semigroup_apply(1e-6, phi, "cell") - phi)) <= 1e-5


def test_shape_mismatch(op1):
    with pytest.raises(InputError):
        op1.semigroup_apply(1.0, np.ones(7))


def test_adjoint_examples(op1):
    nu = DiscreteMeasure([1.0], [0.0], [1.0])
    assert adjoint_apply(op1, nu, points=[[0.0]])[0] == pytest.approx(1 / np.pi, rel=1e-8)
    assert np.all(adjoint_apply(op1, DiscreteMeasure.empty(1)) == 0)
    a = DiscreteMeasure([0.5], [0.3], [2.0])
    two = DiscreteMeasure([0.5, 0.5], [0.3, 0.3], [2.0, 2.0])
    np.testing.assert_allclose(adjoint_apply(op1, two), 2 * adjoint_apply(op1, a), rtol=1e-14)
    with pytest.raises(InputError):
        DiscreteMeasure([0.0], [0.0], [1.0])


def test_h1_kernel_unit_mass():
    from scipy.integrate import quad
    op = FracHeatOperator(0.5, heisenberg_h1(), HeatKernelModel("model_gauss_gauge"))
    val = quad(lambda r: op.kernel_radial(0.3, r) * 2 * np.pi ** 2 * r ** 3, 0, np.inf, limit=200)[0]
    assert val == pytest.approx(1.0, abs=1e-8)


def test_runtime_200_pairs():
    op = FracHeatOperator(0.5, euclidean(3))
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    op.kernel_radial(rng.uniform(0.1, 10, 200), rng.uniform(0, 10, 200))
    assert time.perf_counter() - t0 <= 10


def test_estimator_wrapper():
    est = FracHeatSemigroup(alpha=0.5, t=1.0, radius=8.0, spacing=0.125)
    est.fit()
    X = np.vstack([np.ones(len(est.nodes_)), np.exp(-est.nodes_[:, 0] ** 2)])
    Y = est.transform(X)
    assert Y.shape == X.shape
    direct = est.operator_.semigroup_apply(1.0, X[1])
    np.testing.assert_allclose(Y[1], direct)
    with pytest.raises(InputError):
        est.transform(np.ones((1, 3)))
    from sklearn.base import clone
    assert clone(est).get_params()["spacing"] == 0.125
