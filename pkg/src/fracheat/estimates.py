"""Empirical constants for the pointwise kernel envelopes, Young's
inequality and the L^r -> L^p smoothing rates.

An envelope inequality F(t, d) <~ E(t, d) is reported as the ratio
R = F/E scanned over a log grid in (t, d), with the extremum polished by
a local optimizer and a second scan on a grid twice as fine.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.signal import fftconvolve

from .exceptions import InputError, PreconditionError


@dataclass(frozen=True)
class EnvelopeReport:
    name: str
    grid: dict
    sup: float
    argmax: tuple
    inf: float
    argmin: tuple
    refine_delta: float
    q999: float = np.nan
    extra: dict = field(default_factory=dict)

    def row(self):
        return {"envelope_name": self.name, "sup": self.sup, "inf": self.inf,
                "argmax_t": self.argmax[0], "argmax_d": self.argmax[1],
                "refine_delta": self.refine_delta}


def _td_grid(alpha, t_range, d_range, per_decade):
    """t grid and d grid sharing the log step of t^(1/2 alpha), plus d = 0."""
    lt = np.log10(t_range)
    nt = int(round((lt[1] - lt[0]) * per_decade)) + 1
    t = np.logspace(lt[0], lt[1], nt)
    step = (lt[1] - lt[0]) / (nt - 1) / (2 * alpha)
    ld = np.log10(d_range)
    k0 = int(np.floor((ld[0] - lt[0] / (2 * alpha)) / step))
    k1 = int(np.ceil((ld[1] - lt[0] / (2 * alpha)) / step))
    d = 10 ** (lt[0] / (2 * alpha) + step * np.arange(k0, k1 + 1))
    return t, np.concatenate([[0.0], d])


def _evaluator(op, what, theta=None, x0=None):
    """(t, d) -> kernel quantity at distance d from x0 along the first axis."""
    sp = op.space
    x0 = sp.origin() if x0 is None else sp.as_points(x0).reshape(-1)

    def pts(d):
        y = np.zeros(d.shape + (sp.dim,))
        y[..., 0] = d
        return sp.group_mul(x0, y) if sp.kind == "heisenberg_h1" else x0 + y

    def f(t, d):
        t, d = np.broadcast_arrays(np.asarray(t, float), np.asarray(d, float))
        if what == "K":
            return op.kernel(t, x0, pts(d))
        if what == "dK":
            return op.time_derivative_kernel(t, x0, pts(d))
        if op.radial is not None and sp.kind != "heisenberg_h1":
            return op.frac_kernel_radial(theta, t, d)
        return op.frac_derivative_kernel(theta, t, x0, pts(d))
    return f


def _ratio_fn(op, kind, theta=None, x0=None):
    a = op.alpha
    bs, b = op.space.beta_star, op.space.beta
    if kind == "upper":
        F = _evaluator(op, "K", x0=x0)
        return lambda t, d: F(t, d) * (t ** (1 / (2 * a)) + d) ** (bs + 2 * a) / t
    if kind == "lower":
        F = _evaluator(op, "K", x0=x0)
        return lambda t, d: F(t, d) * (t ** (1 / (2 * a)) + d) ** (b + 2 * a) / t
    if kind == "time":
        F = _evaluator(op, "dK", x0=x0)
        return lambda t, d: np.abs(F(t, d)) * (t ** (1 / (2 * a)) + d) ** (bs + 2 * a)
    F = _evaluator(op, "frac", theta=theta, x0=x0)
    return lambda t, d: np.abs(F(t, d)) * (t ** (1 / (2 * a)) + d) ** (bs + theta)


def _polish(R, t, d, i, j, sign, t_box, d_box):
    """Local refinement of a grid extremum of sign * R inside the neighbouring cells."""
    t0, d0 = t[i], d[j]
    if d0 == 0:
        g = lambda lt: -sign * float(R(10 ** lt, 0.0))
        lo = np.log10(t[max(i - 1, 0)])
        hi = np.log10(t[min(i + 1, len(t) - 1)])
        if hi > lo:
            res = optimize.minimize_scalar(g, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-10})
            if -res.fun * sign > sign * R(t0, 0.0):
                return float(-sign * res.fun), (float(10 ** res.x), 0.0)
        return float(R(t0, 0.0)), (float(t0), 0.0)
    g = lambda v: -sign * float(R(10 ** v[0], 10 ** v[1]))
    lo = [np.log10(t[max(i - 1, 0)]), np.log10(d[max(j - 1, 1)])]
    hi = [np.log10(t[min(i + 1, len(t) - 1)]), np.log10(d[min(j + 1, len(d) - 1)])]
    res = optimize.minimize(g, [np.log10(t0), np.log10(d0)], method="Nelder-Mead",
                            bounds=list(zip(lo, hi)),
                            options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 400})
    best = float(R(t0, d0))
    if sign * (-sign * res.fun) > sign * best:
        return float(-sign * res.fun), (float(10 ** res.x[0]), float(10 ** res.x[1]))
    return best, (float(t0), float(d0))


def _scan(R, alpha, t_range, d_range, per_decade, polish):
    t, d = _td_grid(alpha, t_range, d_range, per_decade)
    V = R(t[:, None], d[None, :])
    V = np.where(np.isfinite(V), V, np.nan)
    i, j = np.unravel_index(np.nanargmax(V), V.shape)
    k, l = np.unravel_index(np.nanargmin(V), V.shape)
    sup, amax = float(V[i, j]), (float(t[i]), float(d[j]))
    inf, amin = float(V[k, l]), (float(t[k]), float(d[l]))
    if polish:
        sup, amax = _polish(R, t, d, i, j, 1, t_range, d_range)
        inf, amin = _polish(R, t, d, k, l, -1, t_range, d_range)
    return sup, amax, inf, amin, float(np.nanquantile(V, 0.999))


def _envelope(op, kind, name, theta=None, t_range=(1e-2, 1e2), d_range=(1e-3, 1e3),
              per_decade=8, polish=True, refine=True, x0=None):
    R = _ratio_fn(op, kind, theta, x0)
    sup, amax, inf, amin, q = _scan(R, op.alpha, t_range, d_range, per_decade, polish)
    delta = np.nan
    if refine:
        s2, _, i2, _, _ = _scan(R, op.alpha, t_range, d_range, 2 * per_decade, polish)
        delta = max(abs(s2 - sup) / abs(s2), abs(i2 - inf) / max(abs(i2), 1e-300)
                    if kind == "lower" else 0.0)
    grid = {"t_range": tuple(t_range), "d_range": tuple(d_range), "per_decade": per_decade}
    return EnvelopeReport(name, grid, sup, amax, inf, amin, float(delta), q)


def _require(op, *flags):
    missing = [f for f in flags if not getattr(op.model, f)]
    if missing:
        raise PreconditionError(f"heat model lacks assumption(s) {', '.join(missing)}")


def verify_upper_envelope(op, **kw):
    """sup and inf of K_t(d) (t^{1/2a} + d)^{beta*+2a} / t."""
    _require(op, "A1")
    return _envelope(op, "upper", "upper", **kw)


def verify_lower_envelope(op, **kw):
    """inf of K_t(d) (t^{1/2a} + d)^{beta+2a} / t; positive under A4."""
    _require(op, "A4")
    return _envelope(op, "lower", "lower", **kw)


def verify_time_derivative_bound(op, **kw):
    """sup of |d/dt K_t(d)| (t^{1/2a} + d)^{beta*+2a}."""
    _require(op, "A1", "A2")
    return _envelope(op, "time", "time_derivative", **kw)


def verify_frac_derivative_bound(op, theta, **kw):
    """sup of |L^{theta/2} K_t(d)| (t^{1/2a} + d)^{beta*+theta}."""
    sig = theta / (2 * op.alpha)
    if not (theta > 0 and 0 < sig <= 1 + 1e-12):
        raise InputError(f"theta/(2 alpha) = {sig:.4g} must lie in (0, 1]")
    _require(op, "A1", "A2")
    return _envelope(op, "frac", f"frac_derivative_theta={theta:g}", theta=theta, **kw)


# ---------------------------------------------------------------------------
# Young's inequality

@dataclass(frozen=True)
class YoungReport:
    max_ratio: float
    bound: float
    row_norm: float
    col_norm: float
    ratios: np.ndarray

    @property
    def holds(self):
        return self.max_ratio <= self.bound * (1 + 1e-12)


def _lp(v, w, p, axis=-1):
    if np.isinf(p):
        return np.max(np.abs(v), axis=axis)
    return np.sum(w * np.abs(v) ** p, axis=axis) ** (1 / p)


def verify_young(kernel_matrix, q, r, p, trials=50, weights=None, seed=0):
    """Empirical ||K f||_p / ||f||_r for random f >= 0 against the bound
    max(sup_x ||K(x, .)||_q, sup_y ||K(., y)||_q), valid when
    1/q + 1/r = 1/p + 1. ``kernel_matrix`` holds K(x_i, x_j); the measure
    of node j is ``weights[j]`` (default 1)."""
    inv = lambda e: 0.0 if np.isinf(e) else 1.0 / e
    if min(q, r, p) < 1:
        raise InputError("exponents must be >= 1")
    if abs(inv(q) + inv(r) - inv(p) - 1) > 1e-12:
        raise InputError(f"need 1/q + 1/r = 1/p + 1, got q={q}, r={r}, p={p}")
    K = np.asarray(kernel_matrix, dtype=float)
    n = K.shape[1]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    row = float(np.max(_lp(K, w[None, :], q, axis=1)))
    col = float(np.max(_lp(K, w[:, None], q, axis=0)))
    rng = np.random.default_rng(seed)
    F = rng.exponential(size=(trials, n)) * (rng.random((trials, n)) < rng.uniform(0.05, 1, (trials, 1)))
    F[F.sum(axis=1) == 0, 0] = 1.0
    KF = F @ (K * w[None, :]).T
    ratios = _lp(KF, w, p) / _lp(F, w, r)
    return YoungReport(float(ratios.max()), max(row, col), row, col, ratios)


# ---------------------------------------------------------------------------
# smoothing

@dataclass(frozen=True)
class SmoothingReport:
    slope: float
    expected: float
    times: np.ndarray
    norms: np.ndarray
    family: str

    @property
    def rel_error(self):
        if self.expected == 0:
            return abs(self.slope)
        return abs(self.slope - self.expected) / abs(self.expected)


def grid_norm(values, weights, p):
    """Discrete L^p(mu) norm on a quadrature grid (p may be inf)."""
    return float(_lp(np.asarray(values, float), np.asarray(weights, float), float(p)))


def frac_semigroup_apply(op, theta, t, f):
    """L^{theta/2} e^{-t L^alpha} f on the operator grid (nodal rule)."""
    g = op._need_grid()
    f = np.asarray(f, dtype=float)
    if op._toeplitz_ok():
        n = len(g)
        j = np.arange(-(n - 1), n)
        kv = op.frac_kernel_radial(theta, t, np.abs(j) * g.spacing)
        return fftconvolve(f * g.weights, kv)[n - 1:2 * n - 1]
    M = op.frac_derivative_kernel(theta, t, g.nodes[:, None, :], g.nodes[None, :, :])
    return M @ (f * g.weights)


def verify_smoothing(op, r, p, theta=0.0, phi=None, t_range=(0.1, 10.0), n_t=25):
    """Fitted exponent of t -> ||L^{theta/2} e^{-t L^alpha} phi||_p.

    With ``phi=None`` the family is chosen to saturate the estimate: for
    r = 1 a unit point mass at the grid node nearest the origin, for r > 1
    the L^r-normalized dilates phi_t(x) = t^{-beta*/(2 alpha r)} g(x t^{-1/(2 alpha)})
    of a Gaussian g (then the slope is that of the operator norm). A
    user-given ``phi`` is kept fixed.
    """
    if not (1 <= r <= p):
        raise InputError("need 1 <= r <= p <= inf")
    g = op._need_grid()
    a, bs = op.alpha, op.space.beta_star
    times = np.geomspace(t_range[0], t_range[1], n_t)
    expected = -bs * (1 / r - (0 if np.isinf(p) else 1 / p)) / (2 * a) - theta / (2 * a)
    w = g.weights
    norms = []
    if phi is not None:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (len(g),) or not np.any(phi) or not np.all(np.isfinite(phi)):
            raise InputError("phi must be a finite, nonzero function on the grid")
        family = "fixed"
    else:
        family = "point_mass" if r == 1 else "dilated"
    i0 = int(np.argmin(op.space.norm(g.nodes)))
    for t in times:
        if family == "fixed":
            f = phi
        elif family == "point_mass":
            f = np.zeros(len(g))
            f[i0] = 1.0 / w[i0]
        else:
            z = op.space.dilate(g.nodes, t ** (-1 / (2 * a)))
            f = t ** (-bs / (2 * a * r)) * np.exp(-op.space.norm(z) ** 2)
        if theta > 0:
            u = frac_semigroup_apply(op, theta, t, f)
        elif family == "point_mass":
            u = op.kernel(t, g.nodes[i0], g.nodes)
        else:
            u = op.semigroup_apply(t, f)
        norms.append(grid_norm(u, w, p) / grid_norm(f, w, r))
    norms = np.array(norms)
    slope = float(np.polyfit(np.log(times), np.log(norms), 1)[0])
    return SmoothingReport(slope, float(expected), times, norms, family)
