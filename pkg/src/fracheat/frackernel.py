"""Fractional heat kernels by subordination.

K_t(x, y) = int_0^inf eta^alpha_t(s) p_s(x, y) ds, evaluated with fixed
Gauss-Legendre panels in log(sigma), sigma = s t^{-1/alpha}. For radial
homogeneous heat kernels p_s(d) = N s^{-D/2} exp(-c d^2/s) the kernel is
self-similar,

    K_t(d) = t^{-D/(2 alpha)} Phi(d t^{-1/(2 alpha)}),

so one profile Phi serves every time; large batches go through a
log-log spline of Phi.
"""
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.special import erfc, gamma as gamma_fn, gammaln
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._quad import gauss_panels
from .exceptions import AccuracyError, InputError
from .space import HeatKernelModel, heat_kernel_eval
from .subordinator import SubordinatorDensity

_CHUNK = 2_000_000  # pairs x nodes per vectorized block


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite nonnegative measure sum_k m_k delta_(t_k, x_k) on M x (0, inf)."""
    times: np.ndarray
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        x = np.asarray(self.points, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if len(t) == len(x) else x[None, :]
        if len(x) == 0:
            x = x.reshape(0, max(1, x.shape[-1] if x.ndim > 1 else 1))
        if not (len(t) == len(m) == len(x)):
            raise InputError("times, points and masses must have equal length")
        if np.any(t <= 0):
            raise InputError("atoms need positive times")
        if np.any(m < 0):
            raise InputError("atom masses must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "points", x)

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return DiscreteMeasure(self.times[idx], self.points[idx], self.masses[idx])

    def scaled(self, c):
        return DiscreteMeasure(self.times, self.points, c * self.masses)

    @classmethod
    def empty(cls, dim=1):
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros(0))


@dataclass(frozen=True)
class SpaceTimeField:
    """Values on times x grid nodes; extra middle axes hold a batch of fields."""
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim < 2 or v.shape[0] != len(t):
            raise InputError("values must have shape (n_times, ..., n_nodes)")
        if np.any(np.diff(t) <= 0) or np.any(t < 0):
            raise InputError("times must be nonnegative and increasing")
        if not np.all(np.isfinite(v)):
            raise InputError("field has non-finite entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


class FracHeatOperator:
    """e^{-t L^alpha} on a metric measure space.

    Parameters
    ----------
    alpha : float in (0, 1)
    space : MetricMeasureSpace
    model : HeatKernelModel, default exact Gaussian on R^n
    grid : QuadratureGrid, needed for semigroup actions
    panel_width, order : log-sigma Gauss panels (width in e-folds;
        default 1, or 1/2 above alpha = 0.8)
    """

    def __init__(self, alpha, space, model=None, grid=None, panel_width=None,
                 order=8, subordinator=None):
        self.density = subordinator or SubordinatorDensity(alpha)
        self.alpha = self.density.alpha
        self.space = space
        self.model = model or HeatKernelModel()
        self.model.check_space(space)
        self.grid = grid
        if panel_width is None:
            panel_width = 1.0 if self.alpha <= 0.8 else 0.5
        self.panel_width = float(panel_width)
        self.order = int(order)
        self.radial = self.model.radial_form(space)
        a = self.alpha
        A0 = (1 - a) * a ** (a / (1 - a))
        k = a / (1 - a)
        # eta_1 < exp(-80) below u_lo; the left edge exp(-A0 sigma^-k)
        # steepens with k, so panels there shrink by 1/k up to u_mid
        u_lo = np.log(A0 / 80.0) / k
        u_mid = np.log(A0 / 0.05) / k
        w = self.panel_width
        wf = w / max(1.0, k)
        nf = max(1, int(np.ceil((u_mid - u_lo) / wf)))
        self._fine_edges = u_mid - wf * np.arange(nf, -1, -1)
        self._u_mid = u_mid
        self._nodes = {}
        self._table = None
        self._cdf_table = None
        self._frac_tables = {}

    def __repr__(self):
        return (f"FracHeatOperator(alpha={self.alpha}, space={self.space.kind}, "
                f"model={self.model.kind})")

    # -- sigma quadrature ---------------------------------------------------
    def _sigma_rule(self, u_hi):
        w = self.panel_width
        n_coarse = max(1, int(np.ceil((u_hi - self._u_mid) / w)))
        if n_coarse not in self._nodes:
            edges = np.concatenate([self._fine_edges,
                                    self._u_mid + w * np.arange(1, n_coarse + 1)])
            u, wt = gauss_panels(edges, self.order)
            sig = np.exp(u)
            self._nodes[n_coarse] = (sig, wt * sig * self.density.eta1(sig))
        return self._nodes[n_coarse]

    def _u_hi(self, z2max, decay):
        return np.log(max(1.0, z2max)) + 34.0 / decay

    # -- radial profile --------------------------------------------------------
    def profile(self, z):
        """Phi(z) = K_1(z) for radial models, by direct quadrature."""
        if self.radial is None:
            raise InputError("profile needs a radial heat kernel model")
        N, D, c = self.radial
        z = np.asarray(z, dtype=float)
        zu, inv = np.unique(z.ravel(), return_inverse=True)
        out = np.empty(len(zu))
        order = np.argsort(zu)
        # blocks of similar z share the sigma range
        for blk in np.array_split(order, max(1, len(zu) // 64)):
            zz = zu[blk]
            sig, W = self._sigma_rule(self._u_hi(c * zz.max() ** 2, self.alpha + D / 2))
            amp = W * N * sig ** (-D / 2)
            step = max(1, _CHUNK // len(sig))
            for j in range(0, len(zz), step):
                zj = zz[j:j + step, None]
                out[blk[j:j + step]] = np.exp(-c * zj * zj / sig) @ amp
        return out[inv].reshape(z.shape)

    def profile_dz(self, z):
        """Phi'(z), differentiating the Gaussian under the integral."""
        N, D, c = self.radial
        z = np.asarray(z, dtype=float)
        sig, W = self._sigma_rule(self._u_hi(c * float(np.max(z, initial=0)) ** 2,
                                             self.alpha + D / 2 + 1))
        amp = W * N * sig ** (-D / 2 - 1) * (-2 * c)
        zz = z.reshape(-1, 1)
        return (zz * np.exp(-c * zz * zz / sig) @ amp).reshape(z.shape)

    def _profile_table(self):
        if self._table is None:
            lz = np.linspace(np.log(1e-3), np.log(1e3), 1201)
            phi = self.profile(np.exp(lz))
            self._table = (lz, CubicSpline(lz, np.log(phi)), self.profile(0.0))
        return self._table

    def profile_fast(self, z):
        """Phi(z) through a log-log spline; direct evaluation off-table."""
        lz, spl, phi0 = self._profile_table()
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape)
        small = z < np.exp(lz[0])
        big = z > np.exp(lz[-1])
        mid = ~(small | big)
        with np.errstate(divide="ignore"):
            out[mid] = np.exp(spl(np.log(z[mid])))
        if small.any():
            # Phi is even and smooth in z: Phi(0) + (Phi(z0) - Phi(0)) (z/z0)^2
            z0 = np.exp(lz[0])
            out[small] = phi0 + (np.exp(spl(lz[0])) - phi0) * (z[small] / z0) ** 2
        if big.any():
            out[big] = self._far_series(z[big], 0)
        return out

    def _far_series(self, z, cdf):
        """Large-z expansion of Phi (cdf=0) or of its 1-D tail integral
        (cdf=1), from integrating the series of eta_1 against each Gaussian;
        falls back to quadrature where the terms have not died out.
        Phi(z) ~ z^{-D} sum_k c_k w^k with w = z^{-2 alpha}."""
        key = ("far", cdf)
        if key not in self._frac_tables:
            N, D, c = self.radial
            a = self.alpha
            k = np.arange(1, 41, dtype=float)
            e = a * k + D / 2
            logc = (gammaln(a * k + 1) - gammaln(k + 1) - np.log(np.pi) + gammaln(e)
                    - e * np.log(c) + np.log(N))
            if cdf:
                logc = logc - np.log(2 * a * k)
            sgn = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(np.pi * k * a)
            self._frac_tables[key] = (sgn * np.exp(logc), logc, D - cdf)
        coef, logc, lead = self._frac_tables[key]
        z = np.asarray(z, dtype=float)
        if z.size == 0:
            return np.zeros(z.shape)
        lw = -2 * self.alpha * np.log(z.min())
        k = np.arange(1, len(coef) + 1)
        # terms are relative to the first one, at the worst (smallest) z
        small = logc + k * lw < logc[0] + lw - 39.0
        if not small.any():
            return (self._tail_cdf if cdf else self.profile)(z)
        K = int(np.argmax(small)) + 1
        w = z ** (-2 * self.alpha)
        acc = np.zeros(z.shape)
        for cj in coef[:K][::-1]:
            acc = (acc + cj) * w
        return acc * z ** (-float(lead))

    def _tail_cdf(self, z):
        """int_z^inf Phi(y) dy for one-dimensional radial models."""
        N, D, c = self.radial
        if D != 1:
            raise InputError("cell integrals need a one-dimensional model")
        z = np.asarray(z, dtype=float)
        sig, W = self._sigma_rule(self._u_hi(c * float(np.max(z, initial=0)) ** 2,
                                             self.alpha))
        amp = W * N * np.sqrt(np.pi / c) / 2
        zz = z.reshape(-1, 1)
        return (erfc(zz * np.sqrt(c / sig)) @ amp).reshape(z.shape)

    def _tail_cdf_fast(self, z):
        if self._cdf_table is None:
            lz = np.linspace(np.log(1e-4), np.log(1e4), 1601)
            v = self._tail_cdf(np.exp(lz))
            self._cdf_table = (lz, CubicSpline(lz, np.log(v)))
        lz, spl = self._cdf_table
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape)
        small = z < np.exp(lz[0])
        big = z > np.exp(lz[-1])
        mid = ~(small | big)
        out[mid] = np.exp(spl(np.log(z[mid])))
        if small.any():
            out[small] = 0.5 - self.profile(0.0) * z[small]
        if big.any():
            out[big] = self._far_series(z[big], 1)
        return out

    # -- kernel ----------------------------------------------------------------
    def kernel_radial(self, t, d, fast=False):
        """K_t as a function of distance (radial models)."""
        if self.radial is None:
            raise InputError("kernel_radial needs a radial heat kernel model")
        t = np.asarray(t, dtype=float)
        d = np.asarray(d, dtype=float)
        if np.any(t <= 0):
            raise InputError("t must be positive")
        _, D, _ = self.radial
        scale = t ** (1.0 / (2 * self.alpha))
        z = d / scale
        phi = self.profile_fast(z) if fast else self.profile(z)
        return phi * t ** (-D / (2 * self.alpha))

    def kernel(self, t, x, y, fast=False):
        """K^L_{alpha,t}(x, y) with broadcasting."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise InputError("t must be positive")
        if self.radial is not None:
            return self.kernel_radial(t, self.space.distance(x, y), fast=fast)
        return self._kernel_direct(t, x, y)

    def _kernel_direct(self, t, x, y):
        x, y = self.space.as_points(x), self.space.as_points(y)
        shape = np.broadcast_shapes(t.shape, x.shape[:-1], y.shape[:-1])
        tb = np.broadcast_to(t, shape).ravel()
        xb = np.broadcast_to(x, shape + (self.space.dim,)).reshape(-1, self.space.dim)
        yb = np.broadcast_to(y, shape + (self.space.dim,)).reshape(-1, self.space.dim)
        C = self.model.C
        d = self.space.distance(xb, yb)
        z2 = C * d * d / tb ** (1 / self.alpha)
        sig, W = self._sigma_rule(self._u_hi(float(z2.max(initial=0)),
                                             self.alpha + self.space.beta_star / 2))
        out = np.empty(len(tb))
        step = max(1, _CHUNK // len(sig))
        for j in range(0, len(tb), step):
            sl = slice(j, j + step)
            s = tb[sl, None] ** (1 / self.alpha) * sig[None, :]
            p = heat_kernel_eval(self.model, self.space, s, xb[sl, None, :],
                                 yb[sl, None, :], self.grid)
            out[sl] = p @ W
        return out.reshape(shape)

    # -- derivatives -------------------------------------------------------------
    def time_derivative_kernel(self, t, x, y, rel_step=1e-3, return_error=False):
        """d/dt K_t(x, y) by central differences with two-level Richardson."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise InputError("t must be positive")
        h = rel_step * t

        def D(hh):
            return (self.kernel(t + hh, x, y) - self.kernel(t - hh, x, y)) / (2 * hh)

        d1, d2, d4 = D(h), D(h / 2), D(h / 4)
        r1 = (4 * d2 - d1) / 3
        r2 = (4 * d4 - d2) / 3
        val = (16 * r2 - r1) / 15
        if return_error:
            return val, np.abs(val - r2)
        return val

    def frac_derivative_kernel(self, theta, t, x, y, return_sigma=False):
        """L^{theta/2} K_t(x, y) for sigma = theta/(2 alpha) in (0, 1].

        For sigma < 1 this is Gamma(-sigma)^{-1} int_0^inf (K_{t+s} - K_t)
        s^{-1-sigma} ds with a first-order Taylor split at small s; at
        sigma = 1 the integral degenerates to -d/dt K_t, used directly.
        """
        theta = float(theta)
        sig = theta / (2 * self.alpha)
        if theta <= 0 or sig > 1 + 1e-12:
            raise InputError(
                f"theta/(2 alpha) = {sig:.4g} must lie in (0, 1] (theta too large for this alpha)")
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise InputError("t must be positive")
        x, y = self.space.as_points(x), self.space.as_points(y)
        shape = np.broadcast_shapes(t.shape, x.shape[:-1], y.shape[:-1])
        if abs(sig - 1) < 1e-12:
            out = -self.time_derivative_kernel(t, x, y)
            return (out, sig) if return_sigma else out
        tb = np.broadcast_to(t, shape).ravel()
        xb = np.broadcast_to(x, shape + (self.space.dim,)).reshape(-1, self.space.dim)
        yb = np.broadcast_to(y, shape + (self.space.dim,)).reshape(-1, self.space.dim)
        out = np.empty(len(tb))
        d = self.space.distance(xb, yb)
        # blocks of similar far-field reach share one far rule
        reach = np.maximum(tb, d ** (2 * self.alpha)) / tb
        order = np.argsort(reach)
        for blk in np.array_split(order, max(1, len(order) // 128)):
            out[blk] = self._frac_block(sig, tb[blk], xb[blk], yb[blk], reach[blk].max())
        out = out.reshape(shape)
        return (out, sig) if return_sigma else out

    def _frac_block(self, sig, t, x, y, reach):
        """Taylor-split fractional integral for a block of (t, x, y) triples."""
        t = t[:, None]
        x = x[:, None, :]
        y = y[:, None, :]
        K0 = self.kernel(t, x, y)[:, 0]
        K1 = self.time_derivative_kernel(t, x, y)[:, 0]
        s0 = t
        # near part: decades below s0, the first-order remainder is O(s^2)
        sn, wn = gauss_panels(np.arange(-8.0, 0.01, 0.5) * np.log(10), 8)
        sn_ = s0 * np.exp(sn)
        Kn = self.kernel(t + sn_, x, y)
        near = np.sum((Kn - K0[:, None] - sn_ * K1[:, None]) * sn_ ** (-sig) * wn, axis=1)
        near += K1 * s0[:, 0] ** (1 - sig) / (1 - sig)
        # far part: K_{t+s} decays like s^{-beta*/(2 alpha)}
        decay = self.space.beta_star / (2 * self.alpha) + sig
        top = reach * np.exp(34.0 / decay)
        sf, wf = gauss_panels(np.arange(0.0, np.log10(top) + 0.5, 0.5) * np.log(10), 8)
        sf_ = s0 * np.exp(sf)
        far = np.sum(self.kernel(t + sf_, x, y) * sf_ ** (-sig) * wf, axis=1)
        far -= K0 * s0[:, 0] ** (-sig) / sig
        return (near + far) / gamma_fn(-sig)

    def frac_profile(self, theta, z, fast=True):
        """Psi(z) = L^{theta/2} K_1 at distance z for radial models.

        L^{theta/2} K_t(d) = t^{-D/(2 alpha) - theta/(2 alpha)} Psi(d t^{-1/(2 alpha)}).
        ``fast`` interpolates a cached table of Psi (1+z)^(D+2 alpha).
        """
        if self.radial is None:
            raise InputError("frac_profile needs a radial heat kernel model")
        _, D, _ = self.radial
        z = np.asarray(z, dtype=float)
        o = self.space.origin()
        pt = lambda zz: np.concatenate([zz.reshape(-1, 1), np.zeros((zz.size, self.space.dim - 1))], 1)
        if not fast:
            return self.frac_derivative_kernel(theta, 1.0, o, pt(z)).reshape(z.shape)
        key = round(float(theta), 12)
        if key not in self._frac_tables:
            lz = np.linspace(np.log(1e-3), np.log(1e3), 481)
            zt = np.exp(lz)
            v = self.frac_derivative_kernel(theta, 1.0, o, pt(zt)) * (1 + zt) ** (D + 2 * self.alpha)
            v0 = float(self.frac_derivative_kernel(theta, 1.0, o, o))
            self._frac_tables[key] = (lz, CubicSpline(lz, v), v0)
        lz, spl, v0 = self._frac_tables[key]
        out = np.empty(z.shape)
        small = z < np.exp(lz[0])
        big = z > np.exp(lz[-1])
        mid = ~(small | big)
        out[mid] = spl(np.log(z[mid])) / (1 + z[mid]) ** (D + 2 * self.alpha)
        if small.any():
            z0 = np.exp(lz[0])
            p0 = spl(lz[0]) / (1 + z0) ** (D + 2 * self.alpha)
            out[small] = v0 + (p0 - v0) * (z[small] / z0) ** 2
        if big.any():
            out[big] = self.frac_derivative_kernel(theta, 1.0, o, pt(z[big]))
        return out

    def frac_kernel_radial(self, theta, t, d, fast=True):
        """L^{theta/2} K_t as a function of distance (radial models)."""
        _, D, _ = self.radial if self.radial is not None else (None, 0, None)
        t = np.asarray(t, dtype=float)
        z = np.asarray(d, dtype=float) / t ** (1 / (2 * self.alpha))
        return self.frac_profile(theta, z, fast) * t ** (-(D + theta) / (2 * self.alpha))

    # -- actions on grids ---------------------------------------------------------
    def _need_grid(self):
        if self.grid is None:
            raise InputError("operator has no quadrature grid")
        return self.grid

    def _toeplitz_ok(self):
        g = self.grid
        return (g is not None and g.uniform_1d and self.radial is not None
                and self.space.translation_invariant)

    def kernel_matrix(self, t, points=None, mode="nodal"):
        """A[i, j] = w_j K_t(points_i, x_j) (nodal) or the cell integral."""
        g = self._need_grid()
        pts = g.nodes if points is None else self.space.as_points(points)
        if mode == "cell":
            if not self._toeplitz_ok():
                raise InputError("cell integrals need a uniform 1-D radial grid")
            return self._cell_matrix(t, pts)
        K = self.kernel(t, pts[:, None, :], g.nodes[None, :, :], fast=True)
        return K * g.weights[None, :]

    def _cell_matrix(self, t, pts):
        g = self.grid
        h = g.spacing
        x = g.nodes[:, 0]
        lo = np.maximum(x - h / 2, -g.radius)
        hi = np.minimum(x + h / 2, g.radius)
        return self._interval_mass(t, pts[:, 0][:, None] - hi[None, :],
                                   pts[:, 0][:, None] - lo[None, :])

    def _interval_mass(self, t, a, b):
        """int_a^b K_t(y) dy for a < b, arrays broadcast."""
        t = float(t)
        scale = t ** (1.0 / (2 * self.alpha))
        a, b = np.broadcast_arrays(np.asarray(a, float) / scale, np.asarray(b, float) / scale)
        out = np.empty(a.shape)
        # same side of 0: difference of tails; straddling: 1 - two tails
        pos = a >= 0
        neg = b <= 0
        mid = ~(pos | neg)
        T = self._tail_cdf_fast
        out[pos] = T(a[pos]) - T(b[pos])
        out[neg] = T(-b[neg]) - T(-a[neg])
        out[mid] = 1.0 - T(-a[mid]) - T(b[mid])
        # far cells: tails nearly cancel, integrate the profile instead
        width = b - a
        near0 = np.minimum(np.abs(a), np.abs(b))
        far = (near0 > 8 * width) & ~mid
        if far.any():
            gx, gw = np.polynomial.legendre.leggauss(6)
            c = 0.5 * (a[far] + b[far])
            hw = 0.5 * width[far]
            zz = np.abs(c[:, None] + hw[:, None] * gx[None, :])
            out[far] = (self.profile_fast(zz) @ gw) * hw
        return out

    def semigroup_apply(self, t, f_values, mode="nodal"):
        """(e^{-t L^alpha} f)(x_i) on the grid; f may be (n_nodes,) or (m, n_nodes)."""
        g = self._need_grid()
        f = np.asarray(f_values, dtype=float)
        if f.shape[-1] != len(g):
            raise InputError(f"f has {f.shape[-1]} values, grid has {len(g)} nodes")
        if float(t) <= 0:
            raise InputError("t must be positive")
        if self._toeplitz_ok():
            return self._apply_toeplitz(float(t), f, mode)
        A = self.kernel_matrix(float(t), mode=mode)
        return f @ A.T

    def _apply_toeplitz(self, t, f, mode):
        g = self.grid
        n = len(g)
        h = g.spacing
        j = np.arange(-(n - 1), n)
        if mode == "nodal":
            kv = self.kernel_radial(t, np.abs(j) * h, fast=True)
            src = f * g.weights
            out = fftconvolve(np.atleast_2d(src), kv[None, :], axes=-1)[:, n - 1:2 * n - 1]
        elif mode == "cell":
            kv = self._interval_mass(t, (j - 0.5) * h, (j + 0.5) * h)
            out = fftconvolve(np.atleast_2d(f), kv[None, :], axes=-1)[:, n - 1:2 * n - 1]
            # end cells are half cells
            x = g.nodes[:, 0]
            for e, (a0, b0) in ((0, (-g.radius - h / 2, -g.radius)),
                                (n - 1, (g.radius, g.radius + h / 2))):
                extra = self._interval_mass(t, x - b0, x - a0)
                out -= np.atleast_2d(f)[:, e:e + 1] * extra[None, :]
        else:
            raise InputError(f"unknown mode {mode!r}")
        return out.reshape(f.shape)

    def adjoint_apply(self, nu, points=None):
        """((e^{-t L^alpha})^* nu)(x) = sum_k m_k K_{t_k}(y_k, x) at grid nodes or ``points``."""
        if points is None:
            points = self._need_grid().nodes
        pts = self.space.as_points(points)
        if len(nu) == 0:
            return np.zeros(len(pts))
        if np.any(nu.times <= 0):
            raise InputError("atoms need positive times")
        K = self.kernel(nu.times[:, None], self.space.as_points(nu.points)[:, None, :],
                        pts[None, :, :], fast=True)
        return nu.masses @ K


def frac_kernel(op, t, x, y):
    return op.kernel(t, x, y)


def semigroup_apply(op, t, f_values, mode="nodal"):
    return op.semigroup_apply(t, f_values, mode)


def adjoint_apply(op, nu, points=None):
    return op.adjoint_apply(nu, points)


def frac_derivative_kernel(op, theta, t, x, y):
    return op.frac_derivative_kernel(theta, t, x, y)


def time_derivative_kernel(op, t, x, y, return_error=False):
    return op.time_derivative_kernel(t, x, y, return_error=return_error)


def poisson_kernel(n, t, d):
    """Closed-form kernel of e^{-t (-Delta)^{1/2}} on R^n."""
    c = gamma_fn((n + 1) / 2) / np.pi ** ((n + 1) / 2)
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    return c * t / (t * t + d * d) ** ((n + 1) / 2)


class FracHeatSemigroup(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper: ``transform`` applies e^{-t L^alpha} row-wise.

    ``fit`` builds the operator on the grid described by ``radius`` and
    ``spacing``; ``X`` passed to ``fit`` is only checked for shape.
    """

    def __init__(self, alpha=0.5, t=1.0, space_kind="euclidean", n=1, gamma=0.0,
                 radius=16.0, spacing=0.0625, mode="nodal", heat_model="exact_gaussian",
                 C=0.25):
        self.alpha = alpha
        self.t = t
        self.space_kind = space_kind
        self.n = n
        self.gamma = gamma
        self.radius = radius
        self.spacing = spacing
        self.mode = mode
        self.heat_model = heat_model
        self.C = C

    def fit(self, X=None, y=None):
        from .space import MetricMeasureSpace, build_grid
        if self.t <= 0:
            raise InputError("t must be positive")
        sp = MetricMeasureSpace(self.space_kind, self.n, self.gamma)
        grid = build_grid(sp, self.radius, self.spacing)
        model = HeatKernelModel(self.heat_model, C=self.C)
        self.operator_ = FracHeatOperator(self.alpha, sp, model, grid)
        self.n_features_in_ = len(grid)
        if X is not None:
            X = check_array(X)
            if X.shape[1] != len(grid):
                raise InputError(f"X has {X.shape[1]} columns, grid has {len(grid)} nodes")
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return self.operator_.semigroup_apply(self.t, X, mode=self.mode)

    @property
    def nodes_(self):
        check_is_fitted(self, "operator_")
        return self.operator_.grid.nodes
