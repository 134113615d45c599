"""Cauchy problem u_t + L^alpha u = f, u(0) = phi, solved by Duhamel.

u(t) = e^{-t L^alpha} phi + G(f)(t),   G(f)(t) = int_0^t e^{-(t-tau) L^alpha} f(tau) dtau.

All fields live on the operator's quadrature grid. The Duhamel integral
uses Gauss panels on a mesh graded toward tau = t, where the kernel is
narrowest. Semigroup actions default to the cell rule, which stays
accurate as t - tau -> 0.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .estimates import _lp
from .exceptions import InputError
from .frackernel import SpaceTimeField

NORM_KINDS = ("Lq_Lp", "Cq_Lp", "Cq_dot_Lp")


def _inv(e):
    return 0.0 if np.isinf(e) else 1.0 / e


# ---------------------------------------------------------------------------
# admissible triplets

@dataclass(frozen=True)
class AdmissibleTriplet:
    q: float
    p: float
    r: float
    generalized: bool = False


def is_admissible(q, p, r, alpha, beta_star, generalized=False, rtol=1e-10):
    """Check the scaling identity 1/q = beta*(1/r - 1/p)/(2 alpha) and the
    range 1 < r <= p < p_max. Returns ``(ok, diagnostics)``; the
    diagnostics dict has one boolean per clause plus ``failed``, the names
    of the clauses that fail."""
    q, p, r = float(q), float(p), float(r)
    a, bs = float(alpha), float(beta_star)
    lhs = _inv(q)
    rhs = bs * (_inv(r) - _inv(p)) / (2 * a)
    diag = {"exponents": min(q, p, r) > 1}
    diag["scaling"] = abs(lhs - rhs) <= rtol * max(1.0, abs(rhs))
    if bs > 2 * r * a:
        den = bs - (2 * a * r if generalized else 2 * a)
        pmax = bs * r / den if den > 0 else np.inf
    else:
        pmax = np.inf
    diag["p_max"] = pmax
    diag["range"] = bool(1 < r <= p and (p < pmax or (np.isinf(pmax) and np.isfinite(p))))
    diag["failed"] = [k for k in ("exponents", "scaling", "range") if not diag[k]]
    return not diag["failed"], diag


def admissible_triplet(q, p, r, alpha, beta_star, generalized=False):
    ok, diag = is_admissible(q, p, r, alpha, beta_star, generalized)
    if not ok:
        raise InputError(f"(q, p, r) = ({q}, {p}, {r}) fails: {', '.join(diag['failed'])}")
    return AdmissibleTriplet(float(q), float(p), float(r), bool(generalized))


# ---------------------------------------------------------------------------
# quadrature in time

def _gl_panels(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    return ((a + b) / 2 + (b - a) / 2 * x).ravel(), ((b - a) / 2 * w).ravel()


def time_rule(T, n_panels=24, order=6, t_min=1e-4):
    """Gauss rule on (0, T): geometric panels down to ``t_min``, plus one
    panel on (0, t_min)."""
    if not T > t_min > 0:
        raise InputError("need 0 < t_min < T")
    edges = np.concatenate([[0.0], np.geomspace(t_min, T, n_panels + 1)])
    return _gl_panels(edges, order)


def duhamel_rule(t, n_panels=16, order=6):
    """Nodes tau and weights for int_0^t d tau, graded as
    tau_j = t (1 - (1 - j/N)^2) toward tau = t."""
    j = np.arange(n_panels + 1) / n_panels
    edges = t * (1.0 - (1.0 - j) ** 2)
    return _gl_panels(edges, order)


# ---------------------------------------------------------------------------
# solvers

def _check_times(times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise InputError("empty time grid")
    if np.any(times < 0) or np.any(np.diff(times) <= 0) or not np.all(np.isfinite(times)):
        raise InputError("times must be finite, nonnegative and increasing")
    return times


def _apply(op, s, f, mode):
    if s <= 0:
        return np.array(f, dtype=float)
    return op.semigroup_apply(s, f, mode=mode)


def homogeneous_solve(op, phi, times, mode="cell"):
    """e^{-t L^alpha} phi at each time (phi may carry leading batch axes)."""
    times = _check_times(times)
    phi = np.asarray(phi, dtype=float)
    vals = np.stack([_apply(op, t, phi, mode) for t in times])
    return SpaceTimeField(times, vals)


def _source(f, n):
    """Normalize a source to a callable tau -> array (..., n)."""
    if callable(f):
        return f
    if isinstance(f, SpaceTimeField):
        if f.values.shape[-1] != n:
            raise InputError("source does not match the grid")
        if len(f.times) >= 4:
            spl = CubicSpline(f.times, f.values, axis=0, extrapolate=True)
            return lambda tau: spl(tau)
        if len(f.times) == 1:
            return lambda tau: f.values[0]
        return lambda tau: np.stack([np.interp(tau, f.times, v) for v in
                                     f.values.reshape(len(f.times), -1).T], -1
                                    ).reshape(f.values.shape[1:])
    g = np.asarray(f, dtype=float)
    if g.shape[-1] != n:
        raise InputError("source does not match the grid")
    return lambda tau: g


def duhamel_solve(op, f, times, n_panels=16, order=6, mode="cell"):
    """G(f)(t) = int_0^t e^{-(t - tau) L^alpha} f(tau) dtau at each time.

    ``f`` is a callable tau -> values on the grid (leading batch axes are
    allowed), a SpaceTimeField (interpolated in tau), or a fixed array for
    a time-independent source.
    """
    times = _check_times(times)
    g = op._need_grid()
    src = _source(f, len(g))
    out = []
    for t in times:
        if t == 0:
            out.append(None)
            continue
        tau, w = duhamel_rule(t, n_panels, order)
        acc = 0.0
        for tj, wj in zip(tau, w):
            acc = acc + wj * _apply(op, t - tj, src(tj), mode)
        out.append(acc)
    shape = next((np.shape(v) for v in out if v is not None), None)
    if shape is None:
        shape = np.shape(src(0.0))
    vals = np.stack([np.zeros(shape) if v is None else np.broadcast_to(v, shape)
                     for v in out])
    return SpaceTimeField(times, vals)


def solve(op, phi, f, times, **kw):
    """Full solution u = e^{-t L^alpha} phi + G(f)."""
    h = homogeneous_solve(op, phi, times, mode=kw.get("mode", "cell"))
    d = duhamel_solve(op, f, times, **kw)
    return SpaceTimeField(h.times, h.values + d.values)


# ---------------------------------------------------------------------------
# norms

def spacetime_norm(field, q, p, weights, kind="Lq_Lp", time_weights=None,
                   vanish_tol=1e-2):
    """Mixed norm of a field on its time grid.

    Lq_Lp: (sum_k w_k ||u(t_k)||_p^q)^{1/q}, with ``time_weights`` w_k
    (trapezoid on the given times by default); q = inf gives the sup.
    Cq_Lp: sup_k t_k^{1/q} ||u(t_k)||_p.
    Cq_dot_Lp: as Cq_Lp, but infinite unless the weighted value at the
    smallest time is below ``vanish_tol`` times the sup (membership in the
    homogeneous space).
    Leading batch axes of the values give an array of norms.
    """
    if kind not in NORM_KINDS:
        raise InputError(f"unknown norm kind {kind!r}")
    q, p = float(q), float(p)
    if q < 1 or p < 1:
        raise InputError("exponents must be >= 1")
    v = np.asarray(field.values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InputError("field has non-finite values")
    t = np.asarray(field.times, dtype=float)
    sl = _lp(v, np.asarray(weights, dtype=float), p)           # (nt, ...)
    if kind == "Lq_Lp":
        if np.isinf(q):
            return np.max(sl, axis=0)
        if time_weights is None:
            if len(t) == 1:
                raise InputError("a single time slice needs explicit time weights")
            tw = np.zeros(len(t))
            dt = np.diff(t)
            tw[:-1] += dt / 2
            tw[1:] += dt / 2
        else:
            tw = np.asarray(time_weights, dtype=float)
        tw = tw.reshape((-1,) + (1,) * (sl.ndim - 1))
        return np.sum(tw * sl ** q, axis=0) ** (1 / q)
    wt = (t ** _inv(q)).reshape((-1,) + (1,) * (sl.ndim - 1)) * sl
    sup = np.max(wt, axis=0)
    if kind == "Cq_dot_Lp":
        sup = np.where(wt[0] <= vanish_tol * sup, sup, np.inf)
    return sup


# ---------------------------------------------------------------------------
# Fourier oracle and residual

def spectral_power(u, h, alpha, pad=8):
    """|D|^{2 alpha} u for samples u (last axis) on a uniform 1-D grid of
    step h, zero-extended to ``pad`` times the length before the FFT."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    m = pad * n
    xi = 2 * np.pi * np.fft.rfftfreq(m, h)
    U = np.fft.rfft(u, m, axis=-1)
    return np.fft.irfft(np.abs(xi) ** (2 * alpha) * U, m, axis=-1)[..., :n]


@dataclass(frozen=True)
class ResidualReport:
    max_rel: float
    times: np.ndarray
    per_time: np.ndarray
    interior: float


def duhamel_residual(op, phi, f, times, interior=0.25, rel_step=1e-2, **kw):
    """max over interior nodes and the given times of
    |u_t + L^alpha u - f| / max(|u_t|, |L^alpha u|, |f|)_sup,
    with u_t from a fourth-order difference in t and L^alpha u from the
    Fourier symbol |xi|^{2 alpha}. Exact 1-D Euclidean operators only."""
    g = op._need_grid()
    if not (op._toeplitz_ok() and op.space.kind == "euclidean" and op.model.kind == "exact_gaussian"):
        raise InputError("the Fourier oracle needs the exact model on a uniform 1-D grid")
    times = _check_times(times)
    if times[0] <= 0:
        raise InputError("residual times must be positive")
    src = _source(f, len(g))
    x = g.nodes[:, 0]
    mask = np.abs(x) <= interior * g.radius
    res = []
    for t in times:
        hs = rel_step * t
        tt = t + hs * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        u = solve(op, phi, src, tt, **kw).values
        ut = (u[0] - 8 * u[1] + 8 * u[3] - u[4]) / (12 * hs)
        Lu = spectral_power(u[2], g.spacing, op.alpha)
        ft = np.broadcast_to(src(t), u[2].shape)
        r = ut + Lu - ft
        scale = max(np.max(np.abs(ut[..., mask])), np.max(np.abs(Lu[..., mask])),
                    np.max(np.abs(ft[..., mask])))
        res.append(np.max(np.abs(r[..., mask])) / scale)
    res = np.array(res)
    return ResidualReport(float(res.max()), times, res, interior)


# ---------------------------------------------------------------------------
# random families

def random_bumps(nodes, rng, n_fields=1, max_bumps=5, center_range=None,
                 width_range=(0.25, 2.0), signed=True):
    """Sums of at most ``max_bumps`` Gaussian bumps with random centers,
    widths, amplitudes and signs; shape (n_fields, n_nodes)."""
    x = np.asarray(nodes, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    lo, hi = center_range or (x.min(axis=0) / 4, x.max(axis=0) / 4)
    out = np.zeros((n_fields, len(x)))
    for i in range(n_fields):
        k = rng.integers(1, max_bumps + 1)
        for _ in range(k):
            c = rng.uniform(lo, hi, size=x.shape[1])
            w = np.exp(rng.uniform(*np.log(width_range)))
            s = rng.choice([-1.0, 1.0]) if signed else 1.0
            out[i] += s * rng.uniform(0.5, 1.5) * np.exp(-np.sum((x - c) ** 2, axis=1) / (2 * w * w))
    return out


def _time_bump(tau, a, b):
    """Smooth bump supported on (a, b)."""
    tau = np.asarray(tau, dtype=float)
    s = (2 * tau - a - b) / (b - a)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(np.abs(s) < 1, np.exp(1 - 1 / np.maximum(1 - s * s, 1e-300)), 0.0)


# ---------------------------------------------------------------------------
# estimate checks

@dataclass(frozen=True)
class RatioReport:
    max_ratio: float
    ratios: np.ndarray
    extra: dict = field(default_factory=dict)


def verify_homogeneous_estimate(op, triplet, trials=20, seed=0, T=10.0, time_rule_kw=None,
                                mode="cell"):
    """max over random bump families phi of ||e^{-t L^alpha} phi||_{X(I; L^p)} / ||phi||_r
    on I = (0, T), with X = L^q (plain triplet) or C_q (generalized)."""
    g = op._need_grid()
    ok, diag = is_admissible(triplet.q, triplet.p, triplet.r, op.alpha, op.space.beta_star,
                             triplet.generalized)
    if not ok:
        raise InputError(f"triplet is not admissible: {', '.join(diag['failed'])}")
    rng = np.random.default_rng(seed)
    phi = random_bumps(g.nodes, rng, trials)
    tn, tw = time_rule(T, **(time_rule_kw or {}))
    fld = homogeneous_solve(op, phi, tn, mode=mode)
    kind = "Cq_Lp" if triplet.generalized else "Lq_Lp"
    num = spacetime_norm(fld, triplet.q, triplet.p, g.weights, kind, time_weights=tw)
    ratios = num / _lp(phi, g.weights, triplet.r)
    return RatioReport(float(ratios.max()), ratios, {"kind": kind, "T": T})


def dilated_source(profile, T, alpha):
    """f_T(t, x) = profile(t / T, x / T^{1/(2 alpha)}) for a callable
    profile(s, x) on points x of shape (n, dim)."""
    lam = T ** (-1.0 / (2 * alpha))
    return lambda t, x: profile(np.asarray(t) / T, np.asarray(x) * lam)


def _default_profile(s, x):
    return _time_bump(s, 0.0, 1.0)[..., None] * np.exp(-np.sum((x - 0.3) ** 2, axis=-1))


@dataclass(frozen=True)
class InhomogeneousReport:
    slope: float
    expected: float
    T: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    case: str

    @property
    def rel_error(self):
        if self.expected == 0:
            return abs(self.slope)
        return abs(self.slope - self.expected) / abs(self.expected)


def verify_inhomogeneous_estimate(op, triplet, b, T_list, profile=None, n_out=12,
                                  n_time=16, n_panels=12, order=6, mode="cell"):
    """Fitted exponent of T -> ||G(f_T)||_{L^inf(I; L^r)} / RHS(f_T) on I = [0, T),
    with RHS = ||f||_{L^{q/(b+1)}(I; L^{p/(b+1)})} when p < r(b+1) and the
    interpolated product norm otherwise. The source family f_T is the
    parabolic dilate of a fixed profile (a smooth space-time bump by
    default), for which the ratio is an exact power of T; the expected
    slope is 1 - beta* b / (2 r alpha). A profile that vanishes gives zero
    norms and a nan slope."""
    g = op._need_grid()
    a, bs = op.alpha, op.space.beta_star
    q, p, r = triplet.q, triplet.p, triplet.r
    if b <= 0:
        raise InputError("b must be positive")
    r0 = bs * b / (2 * a)
    # r0 = 1 is admitted: the time integral in the bound still converges there
    if not (r >= r0 >= 1 and p > b + 1):
        raise InputError(f"need r >= r0 = {r0:g} >= 1 and p > b + 1")
    ok, diag = is_admissible(q, p, r, a, bs, triplet.generalized)
    if not ok:
        raise InputError(f"triplet is not admissible: {', '.join(diag['failed'])}")
    profile = profile or _default_profile
    expected = 1.0 - bs * b / (2 * r * a)
    case = "direct" if p < r * (b + 1) else "interpolated"
    w = g.weights
    lhs, rhs = [], []
    for T in T_list:
        fT = dilated_source(profile, float(T), a)
        src = lambda tau: fT(tau, g.nodes)
        out_t = T * np.linspace(0, 1, n_out + 1)[1:]
        G = duhamel_solve(op, src, out_t, n_panels=n_panels, order=order, mode=mode)
        lhs.append(float(np.max(_lp(G.values, w, r))))
        tn, tw = _gl_panels(np.linspace(0, T, n_time + 1), 4)
        F = np.stack([src(t) for t in tn])
        if case == "direct":
            sl = _lp(F, w, p / (b + 1))
            rhs.append(float(np.sum(tw * sl ** (q / (b + 1))) ** ((b + 1) / q)))
        else:
            th = (p - r * (b + 1)) / ((b + 1) * (p - r))
            A = np.abs(F) ** (1 / (b + 1))
            n1 = np.max(_lp(A, w, r))
            n2 = np.sum(tw * _lp(A, w, p) ** q) ** (1 / q)
            rhs.append(float(n1 ** (th * (b + 1)) * n2 ** ((1 - th) * (b + 1))))
    lhs, rhs = np.array(lhs), np.array(rhs)
    T_arr = np.asarray(T_list, dtype=float)
    if np.all(lhs == 0):
        return InhomogeneousReport(float("nan"), expected, T_arr, lhs, rhs, case)
    slope = float(np.polyfit(np.log(T_arr), np.log(lhs / rhs), 1)[0])
    return InhomogeneousReport(slope, expected, T_arr, lhs, rhs, case)


def strichartz_relation(q, p, qt, pt, alpha, beta_star):
    """(1/q - 1/qt) + beta*(1/p - 1/pt)/(2 alpha) - 1; zero when admissible."""
    return (_inv(q) - _inv(qt)) + beta_star * (_inv(p) - _inv(pt)) / (2 * alpha) - 1.0


def _check_strichartz(q, p, qt, pt, alpha, beta_star):
    if not (1 <= p < pt <= np.inf and 1 < q < qt < np.inf):
        raise InputError("need 1 <= p < p~ <= inf and 1 < q < q~ < inf")
    if abs(strichartz_relation(q, p, qt, pt, alpha, beta_star)) > 1e-10:
        raise InputError("exponents violate (1/q - 1/q~) + beta*(1/p - 1/p~)/(2 alpha) = 1")


def random_sources(nodes, rng, trials, T):
    """Random space-time sources F(t, x) = sum_k c_k(t) phi_k(x): bump
    families in space times smooth bumps in time inside (0, T)."""
    n_terms = 2
    phis = [random_bumps(nodes, rng, trials) for _ in range(n_terms)]
    spans = [np.sort(rng.uniform(0, T, size=(trials, 2)), axis=1) for _ in range(n_terms)]
    for s in spans:
        s[:, 1] = np.maximum(s[:, 1], s[:, 0] + 0.1 * T)
        s[:, 1] = np.minimum(s[:, 1], T)
        s[:, 0] = np.minimum(s[:, 0], s[:, 1] - 0.1 * T)

    def F(tau):
        out = 0.0
        for ph, s in zip(phis, spans):
            out = out + _time_bump(tau, s[:, 0], s[:, 1])[:, None] * ph
        return out
    return F


def verify_strichartz(op, q, p, qt, pt, trials=30, seed=0, T=4.0, F=None,
                      n_time=12, n_panels=10, order=6, mode="cell"):
    """max over random F of ||G(F)||_{L^{q~}(I; L^{p~})} / ||F||_{L^q(I; L^p)} on I = (0, T).

    ``F`` may be given as a callable tau -> (m, n) batch; the default draws
    ``trials`` random sources from ``seed``.
    """
    _check_strichartz(q, p, qt, pt, op.alpha, op.space.beta_star)
    g = op._need_grid()
    if F is None:
        F = random_sources(g.nodes, np.random.default_rng(seed), trials, T)
    tn, tw = _gl_panels(np.linspace(0, T, n_time + 1), 4)
    Fv = SpaceTimeField(tn, np.stack([np.atleast_2d(F(t)) for t in tn]))
    den = spacetime_norm(Fv, q, p, g.weights, time_weights=tw)
    G = duhamel_solve(op, lambda tau: np.atleast_2d(F(tau)), tn, n_panels=n_panels,
                      order=order, mode=mode)
    num = spacetime_norm(G, qt, pt, g.weights, time_weights=tw)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return RatioReport(float(ratios.max()), ratios, {"num": num, "den": den})


# ---------------------------------------------------------------------------
# exponential integrability and Hoelder continuity

@dataclass(frozen=True)
class ExpIntegrabilityReport:
    C: float
    average: float
    norm_F: float
    degenerate: bool
    target: float


def verify_exponential_integrability(op, F, p, q, t0, x0=None, target=10.0, rtol=1e-2,
                                     n_time=8, n_panels=10, order=6, n_norm=16,
                                     mode="cell"):
    """Smallest C (bisection in log C to ``rtol``) with

        avg over B exp((|G(F)| / (C ||F||_{L^q(0, 3 t0; L^p)}))^{q/(q-1)}) <= target,

    where B = {2 t0 < t < 3 t0, d(x, x0) < t0^{1/(2 alpha)}} is the parabolic
    ball of radius r0 = t0^{1/(2 alpha)} and the average uses dt x mu. The
    returned C does not change when F is multiplied by a constant.
    ``F`` is a callable tau -> values on the grid."""
    a, bs = op.alpha, op.space.beta_star
    if not (p >= 1 and q > 1):
        raise InputError("need p >= 1 and q > 1")
    if abs(bs / p + 2 * a / q - 2 * a) > 1e-10:
        raise InputError("need beta*/p + 2 alpha/q = 2 alpha")
    g = op._need_grid()
    x0 = op.space.origin() if x0 is None else op.space.as_points(x0)[0]
    r0 = t0 ** (1 / (2 * a))
    inside = op.space.distance(g.nodes, x0) < r0
    if not inside.any():
        raise InputError("parabolic ball contains no grid nodes")
    T = 3.0 * t0
    tn, tw = _gl_panels(np.linspace(0, T, n_norm + 1), 4)
    Fv = np.stack([np.broadcast_to(F(t), (len(g),)) for t in tn])
    nF = float(np.sum(tw * _lp(Fv, g.weights, p) ** q) ** (1 / q))
    if nF == 0:
        return ExpIntegrabilityReport(0.0, 1.0, 0.0, True, target)
    bt, bw = _gl_panels(np.linspace(2 * t0, 3 * t0, 3), 4)
    G = duhamel_solve(op, F, bt, n_panels=n_panels, order=order, mode=mode).values
    wx = g.weights * inside
    vol = np.sum(bw) * np.sum(wx)
    U = np.abs(G) / nF
    e = q / (q - 1)

    def avg(C):
        with np.errstate(over="ignore"):
            return float(np.sum(bw[:, None] * wx[None, :] * np.exp((U / C) ** e)) / vol)

    if np.max(U[:, inside]) == 0:
        return ExpIntegrabilityReport(0.0, 1.0, nF, True, target)
    hi = max(np.max(U[:, inside]), 1e-300)
    while avg(hi) > target:
        hi *= 2
    lo = hi / 2
    while avg(lo) <= target:
        lo /= 2
        if lo < 1e-300:
            break
    while hi / lo - 1 > rtol:
        mid = np.sqrt(lo * hi)
        if avg(mid) <= target:
            hi = mid
        else:
            lo = mid
    return ExpIntegrabilityReport(float(hi), avg(hi), nF, False, target)


@dataclass(frozen=True)
class HolderReport:
    space_exponent: float
    time_exponent: float
    claimed_space: float
    claimed_time: float
    degenerate: bool
    steps: dict

    def holds(self, slack=0.1):
        return self.degenerate or (self.space_exponent >= self.claimed_space - slack
                                   and self.time_exponent >= self.claimed_time - slack)


def holder_claims(alpha, beta_star, p, q):
    """Claimed (space, time) exponents; the time bound is min{h^a, h^b},
    which for h < 1 is h^{max(a, b)}."""
    a, bs = alpha, beta_star
    sp = 2 * a * (q - 1) / q - bs / p
    ta = 2 - 1 / (2 * a) - 1 / q - bs / (2 * a * p)
    tb = 1 - 1 / q - bs / (2 * a * p)
    return sp, max(ta, tb)


def smooth_source(center=0.3, width=1.0, t_support=(0.0, 2.0)):
    """Compactly supported smooth F(t, x) = bump(t) bump(x) on R^n."""
    def F(tau, x):
        s = np.sum((np.asarray(x) - center) ** 2, axis=-1) / width ** 2
        with np.errstate(divide="ignore"):
            bx = np.where(s < 1, np.exp(1 - 1 / np.maximum(1 - s, 1e-300)), 0.0)
        return _time_bump(tau, *t_support)[..., None] * bx
    return F


def estimate_holder_exponents(op, F, p, q, t0=1.0, x0_index=None, n_steps=6,
                              n_panels=16, order=6, mode="cell"):
    """Log-log secant fits of |G(F)(t0, x) - G(F)(t0, x0)| against d(x, x0)
    (grid steps h, 2h, ..., 2^{n-1} h) and of |G(F)(t, x0) - G(F)(t0, x0)|
    against |t - t0| (steps 2^{-k} t0 / 8). ``F`` is a callable tau -> grid
    values. Returns a HolderReport with the claimed exponents."""
    a, bs = op.alpha, op.space.beta_star
    if not bs / p + 2 * a / q < 2 * a:
        raise InputError("need beta*/p + 2 alpha/q < 2 alpha")
    g = op._need_grid()
    cs, ct = holder_claims(a, bs, p, q)
    if x0_index is None:
        x0_index = int(np.argmin(op.space.distance(g.nodes, op.space.origin())))
    ht = t0 / 8 * 2.0 ** -np.arange(n_steps)
    G = duhamel_solve(op, F, np.concatenate([[t0], t0 + ht[::-1]]),
                      n_panels=n_panels, order=order, mode=mode).values
    G0 = G[0]
    d = op.space.distance(g.nodes, g.nodes[x0_index])
    hs = g.spacing * 2.0 ** np.arange(n_steps)
    idx = [int(np.argmin(np.abs(d - h) + 1e9 * (d == 0))) for h in hs]
    dx = np.abs(G0[idx] - G0[x0_index])
    dt = np.abs(G[1:][::-1, x0_index] - G0[x0_index])
    if np.all(dx == 0) and np.all(dt == 0):
        return HolderReport(np.nan, np.nan, cs, ct, True, {})
    fit = lambda h, v: float(np.polyfit(np.log(h), np.log(np.maximum(v, 1e-300)), 1)[0])
    return HolderReport(fit(d[idx], dx), fit(ht, dt), cs, ct, False,
                        {"space": (d[idx], dx), "time": (ht, dt)})
