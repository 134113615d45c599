"""Independent reference values used by the tests."""
import numpy as np
from scipy.integrate import quad

from fracheat._reference import in_parabolic_ball, maximal_rgrid, wolff_rgrid  # noqa: F401


def fourier_1d(alpha, theta, t, d, tol=1e-13):
    """(1/pi) int_0^inf xi^theta exp(-t xi^{2 alpha}) cos(xi d) d xi.

    Kernel of |D|^theta e^{-t |D|^{2 alpha}} on the line, integrated
    period by period up to where the Gaussian-type factor is below 1e-18.
    """
    top = (45.0 / t) ** (1 / (2 * alpha))
    f = lambda x: x ** theta * np.exp(-t * x ** (2 * alpha)) * np.cos(x * d)
    if d == 0:
        brk = np.array([0.0, top])
    else:
        n = int(np.ceil(top * d / np.pi))
        brk = np.arange(n + 1) * np.pi / d
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        total += quad(f, a, b, epsabs=0, epsrel=tol, limit=200)[0]
    return total / np.pi


def poisson(n, t, d):
    from math import gamma, pi
    c = gamma((n + 1) / 2) / pi ** ((n + 1) / 2)
    return c * t / (t * t + d * d) ** ((n + 1) / 2)

