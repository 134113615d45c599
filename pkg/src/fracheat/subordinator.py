"""One-sided stable subordinator densities.

The standard density eta_1 has Laplace transform exp(-lam**alpha); every
other time follows by the scaling eta_t(s) = t**(-1/alpha) eta_1(s t**(-1/alpha)).

Evaluation strategy: closed form at alpha = 1/2, Pollard's series
elsewhere, and a real contour integral (steepest-descent deformation of
the Bromwich inversion) wherever the series cancels badly.
"""
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from ._quad import adaptive_log_quad, gauss_panels
from .exceptions import AccuracyError, InputError

METHODS = ("auto", "closed_form_half", "pollard_series", "contour_inversion")

# phi/pi panel edges: geometric toward both ends, where the contour
# integrand concentrates for small and large arguments respectively
_G = 2.0 ** -np.arange(1, 41)
_PHI_EDGES = np.unique(np.concatenate([[0.0, 1.0], _G, 1.0 - _G[1:]]))


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


@lru_cache(maxsize=32)
def _pollard_coeffs(alpha, kmax):
    k = np.arange(1, kmax + 1, dtype=float)
    logc = gammaln(alpha * k + 1) - gammaln(k + 1) - np.log(np.pi)
    sgn = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(np.pi * k * alpha)
    return k, logc, sgn


def pollard_series(u, alpha, kmax=400):
    """Pollard's series for eta_1 with a cancellation monitor.

    Returns ``(value, lost_digits, converged)``. Summation is compensated
    (Neumaier) over k; ``lost_digits`` is log10(sum|t_k| / |sum t_k|).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    k, logc, sgn = _pollard_coeffs(alpha, kmax)
    logmag = logc[None, :] - (alpha * k[None, :] + 1.0) * np.log(u)[:, None]
    # drop the tail once every row is 40 e-folds below its peak term
    peak = logmag.max(axis=1, keepdims=True)
    past = np.maximum.accumulate(logmag == peak, axis=1)
    need = np.any(~past | (logmag > peak - 40.0), axis=0)
    kk = min(kmax, int(np.nonzero(need)[0].max()) + 2)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.exp(logmag[:, :kk]) * sgn[None, :kk]
    s = np.zeros(len(u))
    comp = np.zeros(len(u))
    with np.errstate(invalid="ignore"):
        for j in range(kk):
            tj = terms[:, j]
            tot = s + tj
            big = np.abs(s) >= np.abs(tj)
            comp += np.where(big, (s - tot) + tj, (tj - tot) + s)
            s = tot
    val = s + comp
    absum = np.abs(terms).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lost = np.log10(absum / np.abs(val))
        tail = np.exp(logmag[:, kk - 1]) / np.abs(val)
    finite = np.all(np.isfinite(terms), axis=1) & np.isfinite(val)
    converged = finite & (tail < 1e-17) & np.isfinite(lost)
    return val, lost, converged


def _contour_A(phi, alpha):
    a = alpha
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        A = (np.sin(a * phi) / np.sin(phi)) ** (1.0 / (1.0 - a)) \
            * np.sin((1.0 - a) * phi) / np.sin(a * phi)
    # removable singularity at phi = 0
    A = np.where(phi == 0, (1 - a) * a ** (a / (1 - a)), A)
    return A


@lru_cache(maxsize=32)
def _contour_rule(alpha, order):
    phi, w = gauss_panels(np.pi * _PHI_EDGES, order)
    A = _contour_A(phi, alpha)
    return A, w


def contour_inversion(u, alpha, order=24):
    """Real-contour representation of eta_1 (Zolotarev form).

    eta_1(u) = a/((1-a) pi) u^{-1/(1-a)} int_0^pi A(phi) exp(-u^{-a/(1-a)} A(phi)) dphi.
    Returns ``(value, error_estimate)`` from two Gauss orders.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    a = alpha
    X = u ** (-a / (1.0 - a))
    pref = a / ((1.0 - a) * np.pi) * u ** (-1.0 / (1.0 - a))
    out = []
    for n in (order, order + 8):
        A, w = _contour_rule(a, n)
        with np.errstate(over="ignore", invalid="ignore"):
            g = A[None, :] * np.exp(-X[:, None] * A[None, :])
        g = np.where(np.isfinite(g), g, 0.0)
        out.append(pref * (g @ w))
    return out[1], np.abs(out[1] - out[0])


class SubordinatorDensity:
    """eta^alpha_t with per-alpha method selection.

    Parameters
    ----------
    alpha : float in (0, 1)
    method : 'auto' picks the closed form at alpha = 1/2, otherwise the
        series with contour fallback.
    kmax : series cutoff.
    tol : relative accuracy target; contour fallback values whose error
        estimate exceeds it raise AccuracyError.
    max_lost_digits : switchover threshold of the cancellation monitor.
    """

    def __init__(self, alpha, method="auto", kmax=400, tol=1e-9,
                 max_lost_digits=6.0):
        self.alpha = _check_alpha(alpha)
        if method not in METHODS:
            raise InputError(f"unknown method {method!r}")
        if method == "closed_form_half" and self.alpha != 0.5:
            raise InputError("closed form only exists at alpha = 1/2")
        self.method = method
        self.kmax = int(kmax)
        self.tol = float(tol)
        self.max_lost_digits = float(max_lost_digits)

    def __repr__(self):
        return f"SubordinatorDensity(alpha={self.alpha}, method={self.method!r})"

    @property
    def resolved_method(self):
        if self.method == "auto":
            return "closed_form_half" if self.alpha == 0.5 else "pollard_series"
        return self.method

    @property
    def tail_constant(self):
        """lim s^{1+alpha} eta_1(s), from the leading series term."""
        a = self.alpha
        return np.exp(gammaln(1 + a)) * np.sin(np.pi * a) / np.pi

    def eta1(self, u):
        u = np.asarray(u, dtype=float)
        shape = u.shape
        u = u.ravel()
        if np.any(u <= 0):
            raise InputError("eta is defined for s > 0")
        m = self.resolved_method
        if m == "closed_form_half":
            out = np.exp(-0.25 / u - 1.5 * np.log(u)) / (2 * np.sqrt(np.pi))
        elif m == "contour_inversion":
            out, err = contour_inversion(u, self.alpha)
            self._check_contour(out, err)
        else:
            out, lost, ok = pollard_series(u, self.alpha, self.kmax)
            bad = (~ok) | (lost >= self.max_lost_digits)
            if bad.any():
                if self.method == "pollard_series":
                    worst = np.nanmax(np.where(bad, lost, 0.0))
                    raise AccuracyError(
                        f"series lost {worst:.1f} digits to cancellation",
                        achieved=max(0.0, 16.0 - worst))
                cv, err = contour_inversion(u[bad], self.alpha)
                self._check_contour(cv, err)
                out = out.copy()
                out[bad] = cv
        return np.maximum(out, 0.0).reshape(shape)

    def _check_contour(self, val, err):
        scale = np.maximum(np.abs(val), 1e-300)
        rel = err / scale
        # values far below double range are reported as zero anyway
        bad = (rel > self.tol) & (np.abs(val) > 1e-280)
        if np.any(bad):
            worst = float(rel[bad].max())
            raise AccuracyError(
                f"contour quadrature relative error {worst:.2e} above tol",
                achieved=-np.log10(worst))

    def eta(self, t, s):
        """eta^alpha_t(s), always computed through eta_1."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(t <= 0):
            raise InputError("t must be positive")
        c = t ** (-1.0 / self.alpha)
        return c * self.eta1(s * c)

    # -- certificates ---------------------------------------------------
    def _tail_sum(self, S, shift):
        """int_S^inf u^{-shift} eta_1(u) du from the series (S large)."""
        k, logc, sgn = _pollard_coeffs(self.alpha, 60)
        e = self.alpha * k + shift
        if np.any(e <= 0):
            raise AccuracyError("moment diverges at infinity", achieved=0.0)
        return float(np.sum(sgn * np.exp(logc - e * np.log(S)) / e))

    def laplace_transform(self, t, lam, lo=1e-8, hi=1e8):
        a = self.alpha
        L = float(lam) * float(t) ** (1.0 / a)
        if L < 0:
            raise InputError("lambda must be nonnegative")
        if L > 0:
            hi = max(hi, 60.0 / L)
        f = lambda u: np.exp(-L * u) * self.eta1(u)
        val, err = adaptive_log_quad(f, lo, hi, tol=1e-13)
        if L * hi < 60.0:
            # only reachable for L == 0
            val += self._tail_sum(hi, 0.0)
        return val, err

    def laplace_check(self, t, lam):
        """|int e^{-lam s} eta_t(s) ds - exp(-t lam^alpha)|."""
        if lam < 0 or t <= 0:
            raise InputError("need lam >= 0 and t > 0")
        val, _ = self.laplace_transform(t, lam)
        return abs(val - np.exp(-t * lam ** self.alpha))

    def moment_check(self, gamma):
        """int s^{-gamma} eta_1(s) ds; finite for gamma > -alpha."""
        gamma = float(gamma)
        if gamma <= -self.alpha:
            raise AccuracyError(
                f"tail s^(-gamma-1-alpha) not integrable for gamma={gamma}",
                achieved=0.0)
        f = lambda u: u ** (-gamma) * self.eta1(u)
        val, _ = adaptive_log_quad(f, 1e-8, 1e8, tol=1e-13)
        return val + self._tail_sum(1e8, gamma)


def eta(density, t, s):
    return density.eta(t, s)


def laplace_check(density, t, lam):
    return density.laplace_check(t, lam)


def moment_check(density, gamma):
    return density.moment_check(gamma)
