import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from fracheat.estimates import (verify_frac_derivative_bound, verify_lower_envelope,
                                verify_smoothing, verify_time_derivative_bound,
                                verify_upper_envelope, verify_young)
from fracheat.exceptions import InputError, PreconditionError
from fracheat.frackernel import FracHeatOperator
from fracheat.space import HeatKernelModel, build_grid, euclidean, heisenberg_h1


@pytest.fixture(scope="module")
def op():
    return FracHeatOperator(0.5, euclidean(1))


@pytest.fixture(scope="module")
def gop():
    sp = euclidean(1)
    return FracHeatOperator(0.5, sp, grid=build_grid(sp, 64.0, 1 / 64))


def test_upper_envelope(op):
    r = verify_upper_envelope(op)
    assert r.sup == pytest.approx(2 / np.pi, abs=1e-3)
    assert r.refine_delta <= 1e-3
    t, d = r.argmax
    assert d / t == pytest.approx(1.0, rel=1e-3)
    assert r.sup >= r.inf > 0


def test_upper_envelope_d0_line(op):
    t = np.geomspace(0.01, 100, 9)
    from fracheat.estimates import _ratio_fn
    np.testing.assert_allclose(_ratio_fn(op, "upper")(t, 0.0), 1 / np.pi, rtol=1e-10)


def test_lower_envelope(op):
    r = verify_lower_envelope(op)
    assert r.inf == pytest.approx(1 / np.pi, abs=1e-3)
    assert r.refine_delta <= 1e-3
    assert r.sup / r.inf >= 1


def test_lower_envelope_needs_a4():
    op = FracHeatOperator(0.5, euclidean(1), HeatKernelModel(A4=False))
    with pytest.raises(PreconditionError):
        verify_lower_envelope(op)


def test_lower_envelope_h1():
    op = FracHeatOperator(0.5, heisenberg_h1(), HeatKernelModel("model_gauss_gauge"))
    r = verify_lower_envelope(op, t_range=(0.1, 10), d_range=(1e-2, 1e2), per_decade=4)
    assert r.inf > 0 and np.isfinite(r.sup)
    assert r.refine_delta < 0.1


def test_time_derivative_bound(op):
    r = verify_time_derivative_bound(op)
    # independent 1-D maximization of |r^2-1|(1+r)^2 / (pi (1+r^2)^2), r = d/t
    g = lambda x: -abs(x * x - 1) * (1 + x) ** 2 / (np.pi * (1 + x * x) ** 2)
    oracle = -minimize_scalar(g, bounds=(1.5, 10), method="bounded",
                              options={"xatol": 1e-12}).fun
    assert r.sup == pytest.approx(oracle, rel=1e-6)
    assert oracle == pytest.approx(0.413, abs=1e-3)
    t, d = r.argmax
    assert 3 < d / t < 5
    assert r.refine_delta < 0.1
    from fracheat.estimates import _ratio_fn
    R = _ratio_fn(op, "time")
    assert R(1e-4, 1.0) == pytest.approx(1 / np.pi, rel=1e-3)
    assert R(1.0, 1.0) <= 1e-9


def test_time_derivative_needs_a2():
    op = FracHeatOperator(0.5, euclidean(1), HeatKernelModel(A2=False))
    with pytest.raises(PreconditionError):
        verify_time_derivative_bound(op)


def test_frac_derivative_bound(op):
    from fracheat.estimates import _ratio_fn
    R = _ratio_fn(op, "frac", theta=1.0)
    for t in (0.1, 1.0, 10.0):
        assert R(t, 0.0) == pytest.approx(1 / np.pi, rel=1e-8)
    r = verify_frac_derivative_bound(op, 0.6)
    assert np.isfinite(r.sup) and np.isfinite(r.q999) and r.q999 <= r.sup
    assert r.refine_delta < 0.1
    with pytest.raises(InputError):
        verify_frac_derivative_bound(op, 1.5)


def test_frac_derivative_small_theta_limit(op):
    from fracheat.estimates import _evaluator
    K = _evaluator(op, "K")
    t = np.array([0.5, 1.0, 2.0])
    d = np.array([0.0, 0.7, 3.0])
    prev = None
    for theta in (0.1, 0.03, 0.01):
        F = _evaluator(op, "frac", theta=theta)
        err = np.max(np.abs(F(t, d) - K(t, d)) / K(t, d))
        if prev is not None:
            assert err < prev
        prev = err
    assert prev < 0.05


def test_young_identity():
    w = np.full(20, 0.5)
    K = np.diag(1 / w)
    rep = verify_young(K, 1, 2, 2, weights=w)
    assert rep.max_ratio == pytest.approx(1.0)
    assert rep.bound == pytest.approx(1.0)


def test_young_gaussian():
    x = np.linspace(-10, 10, 201)
    w = np.full_like(x, x[1] - x[0])
    K = np.exp(-(x[:, None] - x[None, :]) ** 2) / np.sqrt(np.pi)
    rep = verify_young(K, 1, 2, 2, weights=w)
    assert rep.holds
    assert rep.row_norm == pytest.approx(np.max(K @ w))
    a = verify_young(K, 1, 2, 2, weights=w, seed=1).max_ratio
    b = verify_young(K, 1, 2, 2, weights=w, seed=2).max_ratio
    assert abs(a - b) / max(a, b) <= 0.1
    with pytest.raises(InputError):
        verify_young(K, 1, 2, 3, weights=w)


def test_smoothing_slopes(gop):
    r = verify_smoothing(gop, 1, np.inf)
    assert abs(r.slope + 1) <= 0.03
    r = verify_smoothing(gop, 1, np.inf, theta=1.0)
    assert abs(r.slope + 2) <= 0.1
    for rr, pp in [(1, 2), (2, 4), (2, np.inf)]:
        rep = verify_smoothing(gop, rr, pp)
        assert rep.rel_error <= 0.05


def test_smoothing_contraction(gop):
    assert abs(verify_smoothing(gop, 2, 2).slope) <= 1e-3
    # point mass in L^1: only the mass escaping the window |x| <= 64 shows
    assert abs(verify_smoothing(gop, 1, 1).slope) <= 0.02


def test_smoothing_bad_phi(gop):
    with pytest.raises(InputError):
        verify_smoothing(gop, 1, 2, phi=np.zeros(len(gop.grid)))
    with pytest.raises(InputError):
        verify_smoothing(gop, 2, 1)
