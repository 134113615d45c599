import numpy as np
import pytest

from fracheat.exceptions import AccuracyError, InputError
from fracheat.subordinator import (SubordinatorDensity, contour_inversion, eta,
                                   laplace_check, moment_check, pollard_series)


def test_closed_form_half():
    d = SubordinatorDensity(0.5)
    assert d.resolved_method == "closed_form_half"
    assert eta(d, 1.0, 1.0) == pytest.approx(np.exp(-0.25) / (2 * np.sqrt(np.pi)), rel=1e-14)
    assert eta(d, 1.0, 1.0) == pytest.approx(0.219696, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_scaling_identity(alpha):
    d = SubordinatorDensity(alpha)
    s = np.geomspace(1e-2, 1e2, 17)
    c = 2.0 ** (-1 / alpha)
    np.testing.assert_allclose(d.eta(2.0, s), c * d.eta1(s * c), rtol=1e-15)


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.8])
def test_series_matches_contour(alpha):
    u = np.geomspace(0.5, 50, 9)
    v, lost, ok = pollard_series(u, alpha)
    c, err = contour_inversion(u, alpha)
    good = ok & (lost < 4)
    assert good.any()
    np.testing.assert_allclose(v[good], c[good], rtol=1e-9)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.7, 0.9])
def test_nonnegative_on_log_grid(alpha):
    d = SubordinatorDensity(alpha)
    v = d.eta1(np.geomspace(1e-6, 1e6, 121))
    assert np.all(v >= 0) and np.all(np.isfinite(v))


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_tail_constant(alpha):
    d = SubordinatorDensity(alpha)
    s = np.array([1e4, 1e12])
    r = s ** (1 + alpha) * d.eta1(s) / d.tail_constant
    assert abs(r[-1] - 1) < 1e-3
    assert abs(r[-1] - 1) <= abs(r[0] - 1)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_tail_envelope_band(alpha):
    d = SubordinatorDensity(alpha)
    vals = []
    for t in (0.5, 1.0, 2.0):
        s = np.geomspace(t ** (1 / alpha), 1e3 * t ** (1 / alpha), 30)
        vals.append(s ** (1 + alpha) * d.eta(t, s) / t)
    v = np.concatenate(vals)
    assert v.min() > 0 and v.max() / v.min() <= 10


def test_laplace_examples():
    assert laplace_check(SubordinatorDensity(0.5), 1.0, 0.0) <= 1e-8
    d = SubordinatorDensity(0.5)
    val, _ = d.laplace_transform(1.0, 1.0)
    assert val == pytest.approx(np.exp(-1), abs=1e-6)
    d3 = SubordinatorDensity(0.3)
    val, _ = d3.laplace_transform(2.0, 1.0)
    assert val == pytest.approx(np.exp(-2), abs=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_laplace_grid(alpha):
    d = SubordinatorDensity(alpha)
    for t in (0.5, 2.0):
        for lam in (0.5, 4.0):
            assert laplace_check(d, t, lam) <= 1e-6


def test_moments():
    d = SubordinatorDensity(0.5)
    assert moment_check(d, 0.0) == pytest.approx(1.0, abs=1e-9)
    # int u^{-1/2} eta_{1/2}(u) du = E[S^{-1/2}] = Gamma(1 + 1/(2*0.5)) / Gamma(1 + 1/2)
    from scipy.special import gamma
    assert moment_check(d, 0.5) == pytest.approx(gamma(2.0) / gamma(1.5), rel=1e-9)
    m1 = moment_check(SubordinatorDensity(0.7), 1.0)
    assert np.isfinite(m1) and m1 == pytest.approx(gamma(1 + 1 / 0.7) / gamma(2.0), rel=1e-8)
    assert moment_check(d, 0.25) < moment_check(d, 0.5) < moment_check(d, 1.0)


def test_divergent_moment():
    with pytest.raises(AccuracyError):
        moment_check(SubordinatorDensity(0.5), -0.6)


def test_input_errors():
    for a in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(InputError):
            SubordinatorDensity(a)
    with pytest.raises(InputError):
        SubordinatorDensity(0.3, method="closed_form_half")
    with pytest.raises(InputError):
        SubordinatorDensity(0.5).eta(1.0, -1.0)


def test_series_only_reports_digits():
    d = SubordinatorDensity(0.7, method="pollard_series")
    with pytest.raises(AccuracyError) as e:
        d.eta1(np.array([0.05]))
    assert e.value.achieved is not None
