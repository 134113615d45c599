"""L^p capacities of compact subsets of M x (0, inf) as finite convex programs.

For constraint points (t_k, x_k) and grid weights w_i let
A[k, i] = w_i K_{t_k}(x_k, x_i) (or the cell integral of the kernel).
The discrete capacity is

    C = min { sum_i w_i f_i^p : f >= 0, A f >= 1 }.

Its Lagrangian dual, in multipliers m >= 0 attached to the constraints, is

    max_m  sum_k m_k - (1/p') sum_i w_i g_i^{p'},   g = (A / w)^T m,

the discrete adjoint potential g = (e^{-t L^alpha})^* nu of nu = sum m_k delta_k.
At the optimum f = g^{1/(p-1)} and sum m = int g^{p'} dmu = C, and any
m >= 0 gives the lower bound (sum m)^p / ||g||_{p'}^p.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator

from .exceptions import InfeasibleError, InputError, NonConvergenceError
from .frackernel import DiscreteMeasure

EXACT_KAPPA_ATOMS = 12


# ---------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class ParabolicBall:
    """{(t, x): r^{2 alpha} < t - t0 < 2 r^{2 alpha}, d(x, x0) < r}."""
    t0: float
    x0: np.ndarray
    r: float
    alpha: float

    def __post_init__(self):
        if self.r <= 0 or self.t0 < 0:
            raise InputError("need r > 0 and t0 >= 0")
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))

    @property
    def time_window(self):
        s = self.r ** (2 * self.alpha)
        return self.t0 + s, self.t0 + 2 * s

    def contains(self, t, x, space):
        lo, hi = self.time_window
        t = np.asarray(t, dtype=float)
        return (t > lo) & (t < hi) & (space.distance(x, self.x0) < self.r)

    def constraint_points(self, space, n_space=9, n_time=5):
        """Points of the closed ball: ``n_time`` equispaced times times a
        lattice of the unit ball, dilated by r and translated to x0 (so the
        sampling is the same at every scale)."""
        from .space import build_grid
        lo, hi = self.time_window
        ts = np.linspace(lo, hi, n_time)
        if space.dim == 1:
            u = np.linspace(-1.0, 1.0, n_space)[:, None]
        else:
            u = build_grid(space, 1.0, 2.0 / (n_space - 1)).nodes
            u = u[space.norm(u) <= 1.0 + 1e-12]
        x = space.group_mul(self.x0, space.dilate(u, self.r))
        T = np.repeat(ts, len(x))
        X = np.tile(x, (n_time, 1))
        return T, X


# ---------------------------------------------------------------------------
# instances and results

def _points(op, points, n):
    pts = op.space.as_points(points)
    return pts.reshape(n, op.space.dim) if pts.ndim == 1 else pts


def constraint_matrix(op, times, points, mode="auto"):
    """A[k, i] = w_i K_{t_k}(x_k, x_i); cell integrals on uniform 1-D grids."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    pts = _points(op, points, len(times))
    if len(times) != len(pts):
        raise InputError("times and points must pair up")
    if np.any(times <= 0):
        raise InputError("constraint times must be positive")
    g = op._need_grid()
    if mode == "auto":
        mode = "cell" if op._toeplitz_ok() else "nodal"
    A = np.empty((len(times), len(g)))
    for t in np.unique(times):
        k = np.nonzero(times == t)[0]
        A[k] = op.kernel_matrix(t, pts[k], mode=mode)
    return A


@dataclass
class CapacityInstance:
    """Discretized capacity problem. ``A`` is (constraints, nodes)."""
    A: np.ndarray
    weights: np.ndarray
    p: float
    times: np.ndarray = None
    points: np.ndarray = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float)) if np.size(self.A) else \
            np.zeros((0, len(np.atleast_1d(self.weights))))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.p = float(self.p)
        if not 1 < self.p < np.inf:
            raise InputError("p must lie in (1, inf)")
        if self.A.shape[1] != len(self.weights):
            raise InputError("A and weights disagree on the number of nodes")
        if np.any(self.weights <= 0):
            raise InputError("weights must be positive")
        if np.any(self.A < 0) or not np.all(np.isfinite(self.A)):
            raise InputError("constraint matrix must be finite and nonnegative")
        dead = np.nonzero(self.A.max(axis=1, initial=0.0) <= 0)[0]
        if len(dead):
            raise InfeasibleError(f"constraint rows {dead.tolist()} are identically zero")

    @classmethod
    def from_operator(cls, op, p, times, points, mode="auto"):
        A = constraint_matrix(op, times, points, mode)
        times = np.atleast_1d(np.asarray(times, float))
        return cls(A, op.grid.weights, p, times, _points(op, points, len(times)))

    @property
    def n_constraints(self):
        return self.A.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return CapacityInstance(self.A[idx], self.weights, self.p,
                                None if self.times is None else self.times[idx],
                                None if self.points is None else self.points[idx])


@dataclass
class CapacityResult:
    value: float
    f: np.ndarray
    masses: np.ndarray
    gap: float
    iterations: int
    lower: float
    upper: float
    flags: dict = field(default_factory=dict)
    measure: DiscreteMeasure = None

    def record(self):
        return {"value": float(self.value), "gap": float(self.gap),
                "iterations": int(self.iterations), "flags": dict(self.flags)}


def _pprime(p):
    return p / (p - 1.0)


def _bounds(A, w, p, m, f):
    """(lower, upper) capacity bounds from a dual m >= 0 and any f >= 0."""
    pp = _pprime(p)
    g = (m @ A) / w
    gn = np.sum(w * g ** pp) ** (1 / pp)
    lower = (m.sum() / gn) ** p if gn > 0 else 0.0
    Af = A @ f
    upper = np.inf
    if len(Af) and Af.min() > 0:
        upper = np.sum(w * (f / min(Af.min(), np.inf)) ** p)
    return lower, upper


def _result(inst, f, m, iters, flags):
    A, w, p = inst.A, inst.weights, inst.p
    if inst.n_constraints == 0:
        return CapacityResult(0.0, np.zeros(len(w)), np.zeros(0), 0.0, iters, 0.0, 0.0, flags,
                              _measure(inst, np.zeros(0)))
    lo, up = _bounds(A, w, p, m, f)
    gap = max(0.0, (up - lo) / up) if np.isfinite(up) and up > 0 else np.inf
    return CapacityResult(lo, f, m, gap, iters, lo, up, flags, _measure(inst, m))


def _measure(inst, m):
    if inst.times is None or inst.points is None:
        return None
    if len(m) == 0:
        return DiscreteMeasure.empty(inst.points.shape[1] if inst.points.ndim == 2 else 1)
    return DiscreteMeasure(inst.times, inst.points, m)


# ---------------------------------------------------------------------------
# dual: projected Newton in the multipliers

def _dual_active_set(A, w, p, tol=1e-10, max_iter=500, m0=None):
    """Active-set ascent on D(m) = sum m - (1/p') sum w g^{p'}, m >= 0.

    Constraints enter the support one at a time (largest violation first)
    and Newton iterations on the support keep it feasible, dropping
    coordinates that reach zero. Returns (m, iterations, converged).
    """
    pp = _pprime(p)
    B = A / w[None, :]
    k = A.shape[0]
    m = np.zeros(k) if m0 is None else np.maximum(np.asarray(m0, dtype=float), 0.0)
    P = m > 0

    def D(mv):
        g = mv @ B
        return mv.sum() - np.sum(w * g ** pp) / pp

    it = 0
    while it < max_iter:
        g = m @ B
        G = 1.0 - A @ g ** (pp - 1)
        cand = np.where(P, -np.inf, G)
        j = int(np.argmax(cand))
        inner_ok = not P.any() or np.max(np.abs(G[P])) <= tol
        if inner_ok:
            if cand[j] <= tol:
                return m, it, True
            P[j] = True
            if m.sum() == 0:
                # best multiple of the single atom
                m[j] = 1.0
                s2 = np.sum(w * (m @ B) ** pp)
                m *= (1.0 / s2) ** (1 / (pp - 1))
                continue
        it += 1
        idx = np.nonzero(P)[0]
        curv = g ** (pp - 2)
        H = (pp - 1) * (A[idx] * curv[None, :]) @ B[idx].T
        scale = max(np.trace(H) / len(idx), 1e-300)
        D0 = D(m)
        # Newton step, damped towards the gradient when the system is
        # too ill-conditioned to give an ascent direction
        for mu in (1e-14, 1e-10, 1e-6, 1e-3, 1.0, 1e3):
            Hm = H + mu * scale * np.eye(len(idx))
            try:
                d = linalg.solve(Hm, G[idx], assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                continue
            # largest step keeping the support nonnegative
            neg = d < 0
            smax = np.min(-m[idx][neg] / d[neg]) if neg.any() else np.inf
            if smax <= 0:
                mn, s, smax = m.copy(), 0.0, 0.0
                break
            slope = G[idx] @ d
            s = min(1.0, smax)
            while s > 1e-12:
                mn = m.copy()
                mn[idx] = np.maximum(m[idx] + s * d, 0.0)
                # below roundoff of D the sufficient-increase test is blind;
                # trust the Newton step there
                if D(mn) >= D0 + 1e-4 * s * slope or (mu < 1e-6 and slope < 1e-13 * (abs(D0) + 1)):
                    break
                s *= 0.5
            if s > 1e-12:
                break
        else:
            return m, it, False
        if s == smax:
            hit = idx[neg & (-m[idx] / np.where(neg, d, -1.0) <= smax)]
            mn[hit] = 0.0
            P[hit] = False
        m = mn
    return m, it, False


def capacity_dual(inst, tol=1e-10, max_iter=500, m0=None):
    """Dual (measure) formulation solved by an active-set Newton ascent.

    Only constraints in the support of the optimal measure enter the
    Newton systems, which keeps level-set and ball instances with many
    redundant points cheap. ``m0`` warm-starts from a feasible measure,
    e.g. the solution for a subset of the constraints.
    """
    A, w, p = inst.A, inst.weights, inst.p
    if inst.n_constraints == 0:
        return _result(inst, np.zeros(len(w)), np.zeros(0), 0, {"method": "dual"})
    pp = _pprime(p)
    m, it, ok = _dual_active_set(A, w, p, tol, max_iter, m0)
    f = ((m @ A) / w) ** (pp - 1)
    if not ok:
        raise NonConvergenceError("dual active-set ascent did not converge",
                                  best=_result(inst, f, m, it, {"method": "dual"}))
    return _result(inst, f, m, it, {"method": "dual", "support": int(np.count_nonzero(m))})


# ---------------------------------------------------------------------------
# primal: augmented Lagrangian with projected gradient, then KKT polish

def _pg_inner(phi_grad, f, tol, max_iter=5000):
    """Projected gradient with Barzilai-Borwein steps and Armijo backtracking on f >= 0."""
    val, grad = phi_grad(f)
    step = 1.0 / max(np.abs(grad).max(), 1e-300)
    prev = None
    for it in range(max_iter):
        pgn = np.max(np.abs(np.where(f > 0, grad, np.minimum(grad, 0.0))))
        if pgn <= tol:
            break
        if prev is not None:
            s, y = f - prev[0], grad - prev[1]
            sy = s @ y
            step = (s @ s) / sy if sy > 0 else step * 2
        while True:
            fn = np.maximum(f - step * grad, 0.0)
            vn, gn = phi_grad(fn)
            if vn <= val + 1e-4 * grad @ (fn - f) or step < 1e-30:
                break
            step *= 0.5
        prev = (f, grad)
        f, val, grad = fn, vn, gn
    return f, it


def _kkt_polish(A, w, p, lam, tol, max_iter=50):
    """Newton on the primal KKT system  w f^{p-1} = A_S^T lam_S,  A_S f = 1
    (f eliminated explicitly), then active-set corrections."""
    S = lam > 0
    for _ in range(10):
        if not S.any():
            return None
        AS = A[S]
        ls = np.maximum(lam[S], 1e-300)
        for _ in range(max_iter):
            h = (ls @ AS) / w
            f = h ** (1 / (p - 1))
            r = AS @ f - 1.0
            if np.max(np.abs(r)) <= tol:
                break
            with np.errstate(divide="ignore"):
                df = np.where(h > 0, f / ((p - 1) * h), 0.0)
            J = (AS * df[None, :]) @ (AS / w[None, :]).T
            J[np.diag_indices_from(J)] += 1e-14 * max(np.trace(J), 1e-300)
            d = np.linalg.lstsq(J, -r, rcond=None)[0]
            t = 1.0
            while np.any(ls + t * d <= 0) and t > 1e-12:
                t *= 0.5
            ls = ls + t * d
        lam = np.zeros(len(lam))
        lam[S] = ls
        f = ((lam @ A) / w) ** (1 / (p - 1))
        viol = 1.0 - A @ f
        bad_in = S & (lam <= 0)
        bad_out = (~S) & (viol > tol)
        if not bad_in.any() and not bad_out.any():
            return f, lam
        S = (S & ~bad_in) | bad_out
        lam = np.where(S, np.maximum(lam, np.max(ls) * 1e-3), 0.0)
    return None


def capacity_primal(inst, tol=1e-10, max_outer=200):
    """min sum w f^p s.t. A f >= 1, f >= 0.

    Augmented Lagrangian outer loop on the constraints, projected gradient
    (BB steps, Armijo backtracking) on f >= 0 inside, and a final Newton
    solve of the KKT system on the identified active set.
    """
    A, w, p = inst.A, inst.weights, inst.p
    k, n = A.shape
    if k == 0:
        return _result(inst, np.zeros(n), np.zeros(0), 0, {"method": "primal"})
    f = np.full(n, 1.0 / max((A @ np.ones(n)).min(), 1e-300))
    obj0 = np.sum(w * f ** p)
    gscale = np.max(w * f ** (p - 1))
    lam = np.zeros(k)
    rho = obj0
    total = 0
    last_viol = np.inf
    prev_obj = None
    # the outer loop only has to identify the active set; the KKT polish
    # below supplies the final accuracy
    for outer in range(max_outer):
        def phi_grad(ff, lam=lam, rho=rho):
            r = np.maximum(0.0, lam - rho * (A @ ff - 1.0))
            val = np.sum(w * ff ** p) / p + np.sum(r * r - lam * lam) / (2 * rho)
            grad = w * ff ** (p - 1) - A.T @ r
            return val, grad
        f, it = _pg_inner(phi_grad, f, tol=1e-6 * gscale, max_iter=500)
        total += it
        Af = A @ f
        lam = np.maximum(0.0, lam - rho * (Af - 1.0))
        viol = max(0.0, float(np.max(1.0 - Af)))
        obj = np.sum(w * f ** p)
        if prev_obj is not None and abs(obj - prev_obj) <= 1e-5 * obj and viol <= 1e-3:
            break
        if viol > 0.25 * last_viol:
            rho *= 4.0
        last_viol = viol
        prev_obj = obj
    else:
        raise NonConvergenceError("augmented Lagrangian hit the iteration cap",
                                  best=_result(inst, f, lam, total, {"method": "primal"}))
    polished = _kkt_polish(A, w, p, lam, tol)
    flags = {"method": "primal", "polished": polished is not None}
    if polished is not None:
        f, lam = polished
    res = _result(inst, f, lam, total, flags)
    # primal value: the scaled feasible f
    res.value = res.upper
    return res


def capacity(inst, tol=1e-10):
    """Capacity value from the dual solver (the default entry point)."""
    return capacity_dual(inst, tol=tol)


# ---------------------------------------------------------------------------
# certificates

@dataclass(frozen=True)
class DualityReport:
    primal: float
    dual: float
    gap: float
    extremal_residual: float
    identity_residual: float
    weak_duality: bool
    slackness: float

    @property
    def passed(self):
        return self.gap <= 1e-4 and self.extremal_residual <= 1e-3


def duality_check(inst, tol=1e-10):
    """Primal vs dual value, the extremal identity f_K = (A^* nu_K)^{1/(p-1)}
    (relative sup norm) and the three-way identity
    nu_K(K) = int (A^* nu_K)^{p'} = int e^{-t L^alpha}((A^* nu_K)^{p'-1}) d nu_K = C."""
    P = capacity_primal(inst, tol)
    Dl = capacity_dual(inst, tol)
    A, w, p = inst.A, inst.weights, inst.p
    pp = _pprime(p)
    m = Dl.masses
    g = (m @ A) / w
    fK = g ** (1 / (p - 1))
    ext = float(np.max(np.abs(P.f - fK)) / max(np.max(np.abs(P.f)), 1e-300))
    vals = np.array([m.sum(), np.sum(w * g ** pp), m @ (A @ g ** (pp - 1)), P.value])
    ident = float(np.max(np.abs(vals - P.value)) / max(P.value, 1e-300))
    gap = abs(P.value - Dl.value) / max(P.value, 1e-300)
    # share of nu_K carried by nearly tight constraints
    tight = A @ P.f <= 1 + 10 * max(tol, 1e-8)
    slack = float(m[tight].sum() / m.sum()) if m.sum() > 0 else 1.0
    return DualityReport(P.value, Dl.value, gap, ext, ident,
                         Dl.value <= P.value * (1 + 1e-9), slack)


def active_set_oracle(inst):
    """Exact p = 2 capacity by enumerating active constraint sets.

    For p = 2 the dual is the quadratic program max sum m - m^T M m / 2,
    m >= 0, with M = A W^{-1} A^T; each candidate set S solves
    M_SS m_S = 1 and is accepted when m_S >= 0 and (M m)_k >= 1 off S.
    """
    if inst.p != 2:
        raise InputError("the active-set oracle is for p = 2")
    A, w = inst.A, inst.weights
    k = A.shape[0]
    if k > 16:
        raise InputError("active-set enumeration is limited to 16 constraints")
    M = (A / w[None, :]) @ A.T
    best = None
    for size in range(1, k + 1):
        for S in combinations(range(k), size):
            S = list(S)
            try:
                mS = np.linalg.solve(M[np.ix_(S, S)], np.ones(size))
            except np.linalg.LinAlgError:
                continue
            if np.any(mS < -1e-12):
                continue
            m = np.zeros(k)
            m[S] = np.maximum(mS, 0.0)
            if np.all(M @ m >= 1 - 1e-10):
                val = m.sum()
                if best is None or val < best[0]:
                    best = (val, m)
    if best is None:
        raise InfeasibleError("no active set satisfies the KKT conditions")
    return best


# ---------------------------------------------------------------------------
# properties

@dataclass(frozen=True)
class PropertiesReport:
    empty: float
    monotone: bool
    subadditive: bool
    details: list

    @property
    def passed(self):
        return self.empty == 0 and self.monotone and self.subadditive


def capacity_properties_check(inst, subsets, tol=1e-6):
    """C(empty) = 0, monotonicity along each chain of nested index sets in
    ``subsets`` (a list of lists, each nested in the next) and
    subadditivity C(union) <= sum C(parts) for the first and last entries
    of the list treated as the parts of their union."""
    c = lambda idx: capacity(inst.subset(idx)).value if len(idx) else 0.0
    empty = c([])
    vals = [c(s) for s in subsets]
    nested = all(set(a) <= set(b) for a, b in zip(subsets, subsets[1:]))
    mono = (not nested) or all(v0 <= v1 * (1 + tol) + tol for v0, v1 in zip(vals, vals[1:]))
    details = [{"set": list(map(int, s)), "capacity": v} for s, v in zip(subsets, vals)]
    a, b = subsets[0], subsets[-1]
    u = sorted(set(a) | set(b))
    cu = c(u)
    sub = cu <= (c(a) + c(b)) * (1 + tol) + tol
    details.append({"union": u, "capacity": cu})
    return PropertiesReport(empty, mono, sub, details)


# ---------------------------------------------------------------------------
# spherical capacity

@dataclass(frozen=True)
class SphericalReport:
    r: np.ndarray
    t0: np.ndarray
    capacity: np.ndarray
    slope: float
    lower_ratio: np.ndarray
    upper_ratio: np.ndarray

    @property
    def lower_constant(self):
        return float(self.lower_ratio.min())

    @property
    def upper_constant(self):
        return float(self.upper_ratio.max())


def spherical_capacity_scan(op, p, r_list, t0_rule=None, x0=None, n_space=9, n_time=5,
                            tol=1e-9):
    """Capacities of discretized parabolic balls B_r(t0, x0) with t0 = t0_rule(r)
    (default r^{2 alpha}), their log-log slope in r, and the ratios
    C / r^{beta*} and C / (t0^{1/(2 alpha)} + r)^{beta}."""
    a = op.alpha
    t0_rule = t0_rule or (lambda r: r ** (2 * a))
    x0 = op.space.origin() if x0 is None else x0
    r_list = np.asarray(r_list, dtype=float)
    caps, t0s = [], []
    for r in r_list:
        t0 = float(t0_rule(r))
        ball = ParabolicBall(t0, x0, r, a)
        T, X = ball.constraint_points(op.space, n_space, n_time)
        inst = CapacityInstance.from_operator(op, p, T, X)
        caps.append(capacity(inst, tol).value)
        t0s.append(t0)
    caps, t0s = np.array(caps), np.array(t0s)
    slope = float(np.polyfit(np.log(r_list), np.log(caps), 1)[0]) if len(r_list) > 1 else np.nan
    lower = caps / r_list ** op.space.beta_star
    upper = caps / (t0s ** (1 / (2 * a)) + r_list) ** op.space.beta
    return SphericalReport(r_list, t0s, caps, slope, lower, upper)


# ---------------------------------------------------------------------------
# capacitary strong type

@dataclass(frozen=True)
class StrongTypeReport:
    max_ratio: float
    max_weak_ratio: float
    ratios: np.ndarray
    weak_ratios: np.ndarray


class LevelSetLattice:
    """Space-time sample points {(t_j, x_i)} for level sets: ``times``
    and every ``stride``-th grid node. The constraint matrix of the whole
    lattice is built once; level sets select rows."""

    def __init__(self, op, times, stride=4, mode="auto"):
        g = op._need_grid()
        self.op = op
        self.times = np.asarray(times, dtype=float)
        self.node_idx = np.arange(0, len(g), int(stride))
        pts = g.nodes[self.node_idx]
        self.T = np.repeat(self.times, len(pts))
        self.X = np.tile(pts, (len(self.times), 1))
        self.A = constraint_matrix(op, self.T, self.X, mode)
        self.mode = "cell" if (mode == "auto" and op._toeplitz_ok()) else (
            "nodal" if mode == "auto" else mode)

    def capacity(self, p):
        """Capacity of the whole lattice (cached per p)."""
        cache = self.__dict__.setdefault("_cap", {})
        if p not in cache:
            inst = CapacityInstance(self.A, self.op.grid.weights, p)
            cache[p] = capacity_dual(inst, tol=1e-8).value
        return cache[p]

    def field(self, f):
        """e^{-t L^alpha} f on the lattice, row order matching A."""
        return self.A @ np.asarray(f, dtype=float)


def strong_type_check(op, p, f_samples, lattice=None, times=None, stride=4, tol=1e-8,
                      rtol=1e-6):
    """For each f >= 0: S = sum_j 2^{jp} C(E_{2^j}) over the dyadic levels
    below the largest field value (truncated once the remaining levels
    can add at most ``rtol`` S), with
    E_lambda = lattice points where e^{-t L^alpha} f >= lambda; reports
    S / ||f||_p^p and the weak-type sup_j 2^{jp} C(E_{2^j}) / ||f||_p^p."""
    if lattice is None:
        times = np.geomspace(0.05, 5.0, 6) if times is None else times
        lattice = LevelSetLattice(op, times, stride)
    w = op.grid.weights
    F = np.atleast_2d(np.asarray(f_samples, dtype=float))
    if np.any(F < 0):
        raise InputError("strong type check needs f >= 0")
    strong, weak = [], []
    for f in F:
        nf = np.sum(w * f ** p)
        u = lattice.field(f)
        if nf == 0 or not np.any(u > 0):
            strong.append(0.0)
            weak.append(0.0)
            continue
        lo = int(np.floor(np.log2(u[u > 0].min())))
        hi = int(np.ceil(np.log2(u.max())))
        S, Wk = 0.0, 0.0
        m = np.zeros(len(u))
        # descend through the nested level sets, warm-starting each from
        # the measure of the previous (smaller) set; the levels left below
        # j add at most 2^{jp} C(lattice) / (2^p - 1)
        for j in range(hi, lo - 1, -1):
            idx = np.nonzero(u >= 2.0 ** j)[0]
            if len(idx) == 0:
                continue
            inst = CapacityInstance(lattice.A[idx], w, p)
            res = capacity_dual(inst, tol=tol, m0=m[idx])
            m = np.zeros(len(u))
            m[idx] = res.masses
            S += 2.0 ** (j * p) * res.value
            Wk = max(Wk, 2.0 ** (j * p) * res.value)
            if 2.0 ** (j * p) * lattice.capacity(p) / (2.0 ** p - 1) <= rtol * S:
                break
        strong.append(S / nf)
        weak.append(Wk / nf)
    strong, weak = np.array(strong), np.array(weak)
    return StrongTypeReport(float(strong.max()), float(weak.max()), strong, weak)


# ---------------------------------------------------------------------------
# kappa and trace inequalities

@dataclass
class KappaTable:
    """Capacities of atom subsets of a discrete measure, and
    kappa(nu; lambda) = min{C(S): nu(S) >= lambda}."""
    masses: np.ndarray          # mass of each candidate set
    capacities: np.ndarray
    total: float
    heuristic: bool
    sets: list

    def __call__(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        out = np.full(lam.shape, np.inf)
        order = np.argsort(self.masses)
        ms, cs = self.masses[order], self.capacities[order]
        # suffix minima: smallest capacity among sets with mass >= ms[i]
        suf = np.minimum.accumulate(cs[::-1])[::-1]
        pos = np.searchsorted(ms, lam * (1 - 1e-12), side="left")
        ok = pos < len(ms)
        out[ok] = suf[pos[ok]]
        out[lam <= 0] = suf[0] if len(suf) else 0.0
        return out

    def plateaus(self):
        """Breakpoints lambda_j and kappa on (lambda_{j-1}, lambda_j]."""
        lam = np.unique(self.masses[self.masses > 0])
        return lam, self(lam)


def _atom_matrix(op, nu):
    return constraint_matrix(op, nu.times, nu.points)


def kappa_table(nu, op, p, tol=1e-10, exact_limit=EXACT_KAPPA_ATOMS):
    """Exact enumeration of all atom subsets up to ``exact_limit`` atoms,
    greedy chain (add the atom with the smallest capacity increase) beyond."""
    n = len(nu)
    if n == 0:
        return KappaTable(np.zeros(0), np.zeros(0), 0.0, False, [])
    A = _atom_matrix(op, nu)
    w = op.grid.weights
    cap = lambda idx: capacity_dual(CapacityInstance(A[list(idx)], w, p), tol=tol).value
    if n <= exact_limit:
        sets, ms, cs = [], [], []
        sol = {}
        for size in range(1, n + 1):
            for S in combinations(range(n), size):
                # warm start from the measure of S minus its last atom
                m0 = np.append(sol[S[:-1]], 0.0) if size > 1 else None
                res = capacity_dual(CapacityInstance(A[list(S)], w, p), tol=tol, m0=m0)
                sol[S] = res.masses
                sets.append(S)
                ms.append(nu.masses[list(S)].sum())
                cs.append(res.value)
        return KappaTable(np.array(ms), np.array(cs), nu.total_mass, False, sets)
    chain, sets, ms, cs = [], [], [], []
    rest = list(range(n))
    while rest:
        trial = [(cap(chain + [j]), j) for j in rest]
        c, j = min(trial)
        chain.append(j)
        rest.remove(j)
        sets.append(tuple(chain))
        ms.append(nu.masses[chain].sum())
        cs.append(c)
    return KappaTable(np.array(ms), np.array(cs), nu.total_mass, True, sets)


def kappa(nu, lam, op, p, table=None):
    """kappa(nu; lambda); lambda above the total mass raises InputError
    (the infimum over an empty family)."""
    if lam > nu.total_mass * (1 + 1e-12):
        raise InputError("lambda exceeds the total mass of nu (kappa = +inf)")
    table = table or kappa_table(nu, op, p)
    return float(table(lam)[0])


def _embedding_ratios(op, nu, p, q, trials, seed):
    """||e^{-t L^alpha} f||_{L^q(nu)} / ||f||_p over random bump families f >= 0."""
    from .evolution import random_bumps
    g = op._need_grid()
    if len(nu) == 0:
        return np.zeros(trials)
    A = _atom_matrix(op, nu)
    rng = np.random.default_rng(seed)
    F = random_bumps(g.nodes, rng, trials, signed=False, width_range=(0.05, 2.0))
    num = (np.abs(F @ A.T) ** q @ nu.masses) ** (1 / q)
    den = np.sum(g.weights * F ** p, axis=1) ** (1 / p)
    return num / den


@dataclass(frozen=True)
class LowerSectorReport:
    kappa_sup: float
    ball_sup: float
    embedding: float
    consistent: bool
    heuristic: bool


def ball_condition_scan(op, nu, exponent, r_list=None, t0_factors=(0.0, 0.25, 0.5, 1.0)):
    """sup of nu(B_r(t0, x0)) / r^exponent over r in r_list, t0 = c r^{2 alpha}
    and x0 at the atom positions."""
    a = op.alpha
    if len(nu) == 0:
        return 0.0
    r_list = np.geomspace(1e-2, 1e2, 41) if r_list is None else np.asarray(r_list, dtype=float)
    s = r_list ** (2 * a)
    c = np.asarray(t0_factors, dtype=float)
    lo = ((1 + c)[:, None] * s[None, :]).ravel()      # (factor, r) flattened
    hi = ((2 + c)[:, None] * s[None, :]).ravel()
    rr = np.tile(r_list, len(c))
    in_time = (nu.times[None, :] > lo[:, None]) & (nu.times[None, :] < hi[:, None])
    best = 0.0
    for x0 in np.unique(nu.points, axis=0):
        near = op.space.distance(nu.points, x0)[None, :] < rr[:, None]
        mass = (in_time & near) @ nu.masses
        best = max(best, float(np.max(mass / rr ** exponent)))
    return best


def trace_lower_sector(op, p, q, nu, trials=30, seed=0, table=None):
    """Lower sector 1 < p <= q: (a) sup_lambda lambda^{p/q} / kappa(nu; lambda),
    exact over the plateau endpoints of kappa; (b) the ball scan
    sup nu(B_r) / r^{q beta / p}; (c) a Monte-Carlo lower bound of the
    embedding norm. ``consistent`` records (c)^q <= 100 (a)^{q/p} whenever
    (a) <= 10 (a sanity bound, not a theorem constant)."""
    if not 1 < p <= q < np.inf:
        raise InputError("lower sector needs 1 < p <= q < inf")
    table = table or kappa_table(nu, op, p)
    if len(nu) == 0:
        return LowerSectorReport(0.0, 0.0, 0.0, True, False)
    lam, kap = table.plateaus()
    a_val = float(np.max(lam ** (p / q) / kap))
    b_val = ball_condition_scan(op, nu, q * op.space.beta / p)
    c_val = float(np.max(_embedding_ratios(op, nu, p, q, trials, seed)))
    consistent = (a_val > 10) or (c_val ** q <= 100 * a_val ** (q / p))
    return LowerSectorReport(a_val, b_val, c_val, bool(consistent), table.heuristic)


@dataclass(frozen=True)
class UpperSectorReport:
    integral: float
    finite: bool
    embedding: float
    heuristic: bool


def upper_sector_integral(table, p, q):
    """int_0^inf (lambda^{p/q} / kappa(lambda))^{q/(p-q)} dlambda / lambda,
    integrated exactly over the plateaus of kappa (zero beyond the total mass)."""
    lam, kap = table.plateaus()
    if len(lam) == 0:
        return 0.0
    e = p / (p - q)
    s = q / (p - q)
    edges = np.concatenate([[0.0], lam])
    return float(np.sum(kap ** (-s) * (edges[1:] ** e - edges[:-1] ** e) / e))


def trace_upper_sector(op, p, q, nu, trials=30, seed=0, table=None):
    """Upper sector 1 < q < p: the kappa integral I_{p,q}(nu) and a
    Monte-Carlo lower bound of the embedding norm."""
    if not 1 < q < p < np.inf:
        raise InputError("upper sector needs 1 < q < p < inf")
    if len(nu) == 0:
        return UpperSectorReport(0.0, True, 0.0, False)
    table = table or kappa_table(nu, op, p)
    I = upper_sector_integral(table, p, q)
    emb = float(np.max(_embedding_ratios(op, nu, p, q, trials, seed)))
    return UpperSectorReport(I, bool(np.isfinite(I)), emb, table.heuristic)


# ---------------------------------------------------------------------------

class LpCapacity(BaseEstimator):
    """Estimator wrapper: ``fit(A, weights)`` solves the capacity program.

    Attributes after fit: ``value_``, ``f_``, ``masses_``, ``gap_``.
    """

    def __init__(self, p=2.0, tol=1e-10, solver="dual"):
        self.p = p
        self.tol = tol
        self.solver = solver

    def fit(self, A, weights, y=None):
        inst = CapacityInstance(A, weights, self.p)
        if self.solver == "dual":
            res = capacity_dual(inst, self.tol)
        elif self.solver == "primal":
            res = capacity_primal(inst, self.tol)
        else:
            raise InputError(f"unknown solver {self.solver!r}")
        self.value_, self.f_, self.masses_, self.gap_ = res.value, res.f, res.masses, res.gap
        return self
