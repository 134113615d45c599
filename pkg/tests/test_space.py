import numpy as np
import pytest

from fracheat.exceptions import InputError
from fracheat.space import (H1_BALL_VOLUME, HeatKernelModel, ball_measure, build_grid,
                            density_exponents_estimate, distance, euclidean,
                            heat_kernel_eval, heisenberg_h1, validate_axioms,
                            weighted_euclidean)


def test_distance_examples():
    assert distance(euclidean(2), [0, 0], [3, 4]) == pytest.approx(5.0)
    h = heisenberg_h1()
    assert distance(h, [0, 0, 0], [1, 0, 0]) == pytest.approx(1.0)
    for sp in (euclidean(1), euclidean(3), heisenberg_h1(), weighted_euclidean(2, 0.5)):
        x = np.full(sp.dim, 0.7)
        assert distance(sp, x, x) == 0.0


def test_distance_dimension_mismatch():
    with pytest.raises(InputError):
        distance(euclidean(2), [0, 0, 0], [1, 1, 1])


@pytest.mark.parametrize("sp", [euclidean(2), heisenberg_h1()])
def test_metric_properties(sp):
    rng = np.random.default_rng(3)
    X, Y, Z = (rng.normal(size=(400, sp.dim)) for _ in range(3))
    dxy, dyx = sp.distance(X, Y), sp.distance(Y, X)
    np.testing.assert_allclose(dxy, dyx, rtol=1e-13)
    assert np.all(dxy > 0)
    # Koranyi gauge is a genuine metric on H^1
    assert np.all(sp.distance(X, Z) <= dxy + sp.distance(Y, Z) + 1e-12)


def test_heisenberg_left_invariance_and_dilation():
    h = heisenberg_h1()
    rng = np.random.default_rng(0)
    x, y, g = rng.normal(size=(3, 50, 3))
    np.testing.assert_allclose(h.distance(h.group_mul(g, x), h.group_mul(g, y)),
                               h.distance(x, y), rtol=1e-12)
    np.testing.assert_allclose(h.distance(h.dilate(x, 2.0), h.dilate(y, 2.0)),
                               2 * h.distance(x, y), rtol=1e-12)


def test_ball_measure_examples():
    assert ball_measure(euclidean(1), 0.0, 2.0) == pytest.approx(4.0)
    assert ball_measure(euclidean(2), [0, 0], 1.0) == pytest.approx(np.pi)
    with pytest.raises(InputError):
        ball_measure(euclidean(1), 0.0, 0.0)


def test_weighted_ball_against_fine_grid():
    sp = weighted_euclidean(1, 0.5)
    # midpoint rule on 1e6 cells of (-1, 1) for |x|^{1/2}
    n = 10 ** 6
    x = -1 + (np.arange(n) + 0.5) * (2.0 / n)
    oracle = np.sum(np.abs(x) ** 0.5) * (2.0 / n)
    assert ball_measure(sp, 0.0, 1.0) == pytest.approx(oracle, rel=1e-5)
    off = ball_measure(sp, 3.0, 0.5)
    x = 2.5 + (np.arange(n) + 0.5) * (1.0 / n)
    assert off == pytest.approx(np.sum(np.abs(x) ** 0.5) / n, rel=1e-9)


def test_weighted_ball_2d_against_grid():
    sp = weighted_euclidean(2, 0.5)
    c = np.array([0.4, -0.2])
    h = 2e-3
    g = np.arange(-1 + h / 2, 1, h)
    X, Y = np.meshgrid(g + c[0], g + c[1], indexing="ij")
    inside = (X - c[0]) ** 2 + (Y - c[1]) ** 2 < 1
    oracle = np.sum(np.hypot(X, Y)[inside] ** 0.5) * h * h
    assert ball_measure(sp, c, 1.0) == pytest.approx(oracle, rel=2e-3)


def test_h1_ball_volume_grid_oracle():
    h = heisenberg_h1()
    # midpoint grid over [-1,1]^2 x [-1,1] counting gauge-ball cells
    m = 160
    g = -1 + (np.arange(m) + 0.5) * (2.0 / m)
    A, B, C = np.meshgrid(g, g, g, indexing="ij")
    inside = (A * A + B * B) ** 2 + C * C < 1
    vol = inside.sum() * (2.0 / m) ** 3
    assert vol == pytest.approx(H1_BALL_VOLUME, rel=5e-3)
    assert ball_measure(h, [0.3, 0.1, -2.0], 2.0) == pytest.approx(16 * H1_BALL_VOLUME)


def test_grid_mass_and_refinement():
    sp = euclidean(2)
    g1 = build_grid(sp, 4.0, 0.125)
    g2 = build_grid(sp, 4.0, 0.0625)
    exact = np.pi * 16
    assert abs(g1.total_mass - exact) / exact <= g1.tolerance
    assert abs(g2.total_mass - g1.total_mass) / exact <= g1.tolerance
    assert np.all(g1.weights > 0)
    g = build_grid(euclidean(1), 8.0, 0.25)
    assert g.total_mass == pytest.approx(16.0, rel=1e-12)


def test_density_exponents():
    b = density_exponents_estimate(euclidean(1), build_grid(euclidean(1), 50.0, 0.5), (0.01, 10))
    assert b.beta_star == pytest.approx(1, abs=0.05) and b.beta == pytest.approx(1, abs=0.05)
    h = heisenberg_h1()
    b = density_exponents_estimate(h, build_grid(h, 2.0, 0.25), (0.01, 10))
    assert b.beta_star == pytest.approx(4, abs=0.1) and b.beta == pytest.approx(4, abs=0.1)
    sp = weighted_euclidean(1, 0.5)
    bs, bb, *_ = density_exponents_estimate(sp, build_grid(sp, 50.0, 0.5), (0.01, 10))
    assert bb > bs
    with pytest.raises(InputError):
        density_exponents_estimate(sp, build_grid(sp, 8.0, 0.5), (1.0, 10.0))


def test_heat_kernel_values_and_mass():
    sp = euclidean(1)
    m = HeatKernelModel()
    assert heat_kernel_eval(m, sp, 1.0, 0.0, 0.0) == pytest.approx(0.282095, abs=1e-6)
    g = build_grid(sp, 16.0, 1 / 16)
    assert heat_kernel_eval(m, sp, 1.0, 0.3, g.nodes) @ g.weights == pytest.approx(1, abs=1e-10)
    with pytest.raises(InputError):
        heat_kernel_eval(m, sp, 0.0, 0.0, 0.0)


def test_chapman_kolmogorov():
    sp = euclidean(1)
    m = HeatKernelModel()
    g = build_grid(sp, 16.0, 1 / 16)
    lhs = (heat_kernel_eval(m, sp, 0.3, 0.2, g.nodes)
           * heat_kernel_eval(m, sp, 0.7, g.nodes, -0.5)) @ g.weights
    rhs = heat_kernel_eval(m, sp, 1.0, 0.2, -0.5)
    assert abs(lhs - rhs) / rhs <= 1e-4


@pytest.mark.parametrize("sp", [heisenberg_h1(), weighted_euclidean(1, 0.5),
                                weighted_euclidean(2, -0.5)])
def test_model_kernel_symmetric(sp):
    m = HeatKernelModel("model_gauss_gauge")
    g = build_grid(sp, 3.0, 0.25) if sp.n > 1 or sp.kind == "heisenberg_h1" else None
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(2, 20, sp.dim))
    a = heat_kernel_eval(m, sp, 0.7, x, y, g)
    b = heat_kernel_eval(m, sp, 0.7, y, x, g)
    np.testing.assert_allclose(a, b, rtol=1e-15)


def test_model_unit_mass_weighted_1d():
    sp = weighted_euclidean(1, 0.5)
    m = HeatKernelModel("model_gauss_gauge")
    g = build_grid(sp, 40.0, 1 / 64)
    # x = y normalizer: row mass of exp(-C d^2/s)/Z(s,x) is one
    x = 1.3
    from scipy.integrate import quad
    Z = m.normalizer(sp, 0.5, x)
    val = quad(lambda y: np.exp(-0.25 * (y - x) ** 2 / 0.5) * abs(y) ** 0.5, -40, 40,
               points=[0.0, x], limit=200)[0]
    assert float(Z) == pytest.approx(val, rel=1e-10)
    assert g.total_mass > 0


def test_validate_axioms_exact():
    sp = euclidean(1)
    rep = validate_axioms(HeatKernelModel(), sp, build_grid(sp, 16.0, 1 / 32))
    assert all(rep.passed.values()) and not rep.skipped
    for k in ("A1", "A2", "A3", "A4"):
        hi, lo = rep.envelopes[k]
        assert np.isfinite(hi) and hi >= lo >= 0
    assert rep.envelopes["A4"][1] > 0


def test_validate_axioms_h1_model():
    h = heisenberg_h1()
    rep = validate_axioms(HeatKernelModel("model_gauss_gauge"), h, build_grid(h, 3.0, 0.25))
    assert "semigroup" in rep.skipped
    assert rep.ok("nonnegativity") and rep.ok("approximate_identity")
    assert rep.envelopes["A1"][0] < np.inf and rep.envelopes["A4"][1] > 0


def test_validate_axioms_detects_negative_kernel():
    sp = euclidean(1)
    m = HeatKernelModel()
    fake = lambda s, x, y: heat_kernel_eval(m, sp, s, x, y) - 0.01
    rep = validate_axioms(m, sp, build_grid(sp, 16.0, 1 / 32), kernel=fake)
    assert not rep.passed["nonnegativity"]
