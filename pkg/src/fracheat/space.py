"""Metric measure spaces, quadrature grids and heat-kernel models.

Three spaces are supported:

* ``euclidean(n)``: Lebesgue measure, beta = beta* = n;
* ``weighted_euclidean(n, gamma)``: d mu = |x|^gamma dx with -n < gamma < n;
* ``heisenberg_h1()``: the first Heisenberg group with Koranyi gauge
  distance and Haar (Lebesgue) measure, homogeneous dimension Q = 4.

Points are float arrays with a trailing coordinate axis. In dimension one
a bare array of scalars is accepted as a list of points.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import betainc, gamma as gamma_fn, hyp1f1

from .exceptions import InputError

# volume of the unit Koranyi ball {(a^2+b^2)^2 + c^2 < 1}:
# 4 pi int_0^1 rho sqrt(1 - rho^4) d rho = pi^2 / 2
H1_BALL_VOLUME = np.pi ** 2 / 2


@dataclass(frozen=True)
class MetricMeasureSpace:
    kind: str
    n: int = 1
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("euclidean", "weighted_euclidean", "heisenberg_h1"):
            raise InputError(f"unknown space kind {self.kind!r}")
        if self.kind == "heisenberg_h1" and self.n != 3:
            object.__setattr__(self, "n", 3)
        if self.n < 1:
            raise InputError("dimension must be positive")
        if self.kind == "weighted_euclidean" and not -self.n < self.gamma < self.n:
            raise InputError("weight exponent must satisfy -n < gamma < n")

    # exponents -----------------------------------------------------------
    @property
    def dim(self):
        """Number of coordinates of a point."""
        return self.n

    @property
    def beta(self):
        if self.kind == "heisenberg_h1":
            return 4.0
        if self.kind == "weighted_euclidean":
            return float(max(self.n, self.n + self.gamma))
        return float(self.n)

    @property
    def beta_star(self):
        if self.kind == "heisenberg_h1":
            return 4.0
        if self.kind == "weighted_euclidean":
            return float(min(self.n, self.n + self.gamma))
        return float(self.n)

    @property
    def Q(self):
        """Homogeneous dimension (group case), else the density exponent."""
        return 4.0 if self.kind == "heisenberg_h1" else self.beta

    @property
    def translation_invariant(self):
        return self.kind != "weighted_euclidean"

    # points ----------------------------------------------------------------
    def as_points(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise InputError(
                f"points need {self.dim} coordinates, got shape {x.shape}")
        return x

    def origin(self):
        return np.zeros(self.dim)

    # Heisenberg group law (a,b,c)(a',b',c') = (a+a', b+b', c+c'+2(ba'-ab'))
    def group_mul(self, x, y):
        """Group law: translation on R^n, Heisenberg product on H^1."""
        x, y = self.as_points(x), self.as_points(y)
        if self.kind != "heisenberg_h1":
            return x + y
        a, b, c = x[..., 0], x[..., 1], x[..., 2]
        a2, b2, c2 = y[..., 0], y[..., 1], y[..., 2]
        return np.stack([a + a2, b + b2, c + c2 + 2 * (b * a2 - a * b2)], -1)

    def dilate(self, x, lam):
        x = self.as_points(x)
        if self.kind == "heisenberg_h1":
            return x * np.array([lam, lam, lam ** 2])
        return x * lam

    def distance(self, x, y):
        """d(x, y) with broadcasting over leading axes."""
        x, y = self.as_points(x), self.as_points(y)
        diff = y - x
        if self.kind == "heisenberg_h1":
            a, b = diff[..., 0], diff[..., 1]
            c = diff[..., 2] + 2 * (x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])
            return ((a * a + b * b) ** 2 + c * c) ** 0.25
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def pairwise(self, X, Y):
        X, Y = self.as_points(X), self.as_points(Y)
        return self.distance(X[:, None, :], Y[None, :, :])

    def norm(self, x):
        return self.distance(self.origin(), x)

    # measure -----------------------------------------------------------------
    def density(self, x):
        """Density of mu with respect to Lebesgue measure."""
        x = self.as_points(x)
        if self.kind != "weighted_euclidean":
            return np.ones(x.shape[:-1])
        r = np.sqrt(np.sum(x * x, axis=-1))
        with np.errstate(divide="ignore"):
            return r ** self.gamma

    def ball_measure(self, x, r):
        """mu(B(x, r))."""
        r = float(r)
        if r <= 0:
            raise InputError("radius must be positive")
        if self.kind == "euclidean":
            n = self.n
            return float(np.pi ** (n / 2) / gamma_fn(n / 2 + 1) * r ** n)
        if self.kind == "heisenberg_h1":
            return float(H1_BALL_VOLUME * r ** 4)
        x = self.as_points(x).reshape(-1)
        return _weighted_ball(self.n, self.gamma, float(np.linalg.norm(x)), r)


def _weighted_ball(n, g, xi, r):
    """int over B(x, r) of |y|^g dy, |x| = xi, by one-dimensional quadrature."""
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    if n == 1:
        f = lambda y: abs(y) ** g
        lo, hi = xi - r, xi + r
        pts = [0.0] if lo < 0 < hi else None
        return integrate.quad(f, lo, hi, points=pts, **opts)[0]
    sphere = 2 * np.pi ** (n / 2) / gamma_fn(n / 2)
    if xi == 0:
        return sphere * r ** (n + g) / (n + g)

    def cap(rho):
        c = (rho * rho + xi * xi - r * r) / (2 * rho * xi)
        if c >= 1:
            return 0.0
        if c <= -1:
            return 1.0
        half = 0.5 * betainc((n - 1) / 2, 0.5, 1 - c * c)
        return half if c >= 0 else 1 - half

    f = lambda rho: rho ** (g + n - 1) * cap(rho)
    lo, hi = max(0.0, xi - r), xi + r
    pts = [p for p in (abs(r - xi), np.sqrt(abs(xi * xi - r * r))) if lo < p < hi]
    return sphere * integrate.quad(f, lo, hi, points=pts or None, **opts)[0]


def euclidean(n=1):
    return MetricMeasureSpace("euclidean", int(n))


def weighted_euclidean(n=1, gamma=0.5):
    return MetricMeasureSpace("weighted_euclidean", int(n), float(gamma))


def heisenberg_h1():
    return MetricMeasureSpace("heisenberg_h1", 3)


def distance(space, x, y):
    return space.distance(x, y)


def ball_measure(space, x, r):
    return space.ball_measure(x, r)


# ---------------------------------------------------------------------------
# quadrature grids

@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and positive weights discretizing mu on the ball B(0, R)."""
    nodes: np.ndarray
    weights: np.ndarray
    radius: float
    spacing: float
    tolerance: float
    uniform_1d: bool = False

    def __len__(self):
        return len(self.weights)

    @property
    def total_mass(self):
        return float(self.weights.sum())


def build_grid(space, radius, spacing):
    """Uniform lattice of step ``spacing`` restricted to the closed ball B(0, R).

    In dimension one the lattice is aligned with +-R and carries exact
    cell weights (trapezoid for Lebesgue measure), so the total weight is
    mu([-R, R]) up to rounding. Elsewhere each node carries h^n times the
    density, and the declared tolerance covers the boundary layer.
    """
    R, h = float(radius), float(spacing)
    if R <= 0 or h <= 0 or h > R:
        raise InputError("need 0 < spacing <= radius")
    if space.dim == 1:
        m = int(round(R / h))
        if not np.isclose(m * h, R, rtol=1e-12):
            raise InputError("radius must be an integer multiple of spacing in 1-D")
        x = np.linspace(-R, R, 2 * m + 1)
        lo = np.maximum(x - h / 2, -R)
        hi = np.minimum(x + h / 2, R)
        if space.kind == "weighted_euclidean":
            g = space.gamma
            F = lambda z: np.sign(z) * np.abs(z) ** (g + 1) / (g + 1)
            w = F(hi) - F(lo)
        else:
            w = hi - lo
        return QuadratureGrid(x[:, None], w, R, h, 1e-12, uniform_1d=True)
    axes = []
    for j in range(space.dim):
        ext = R ** 2 if (space.kind == "heisenberg_h1" and j == 2) else R
        m = int(np.floor(ext / h + 1e-9))
        axes.append(np.arange(-m, m + 1) * h)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, space.dim)
    keep = space.norm(mesh) <= R * (1 + 1e-12)
    nodes = mesh[keep]
    w = h ** space.dim * space.density(nodes)
    if space.kind == "weighted_euclidean":
        # the origin cell carries the exact integral over a ball of equal volume
        at0 = np.all(nodes == 0, axis=1)
        if at0.any():
            rr = h * (gamma_fn(space.n / 2 + 1)) ** (1 / space.n) / np.sqrt(np.pi)
            w[at0] = space.ball_measure(np.zeros(space.n), rr)
    # boundary layer: surface/volume ratio times the step
    tol = 2.0 * space.Q * h / R
    return QuadratureGrid(nodes, w, R, h, tol)


# ---------------------------------------------------------------------------
# density exponents

@dataclass(frozen=True)
class DensityEstimate:
    beta_star: float
    beta: float
    argmin: tuple
    argmax: tuple
    slopes: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter((self.beta_star, self.beta))


def density_exponents_estimate(space, grid, r_range, n_centers=16, n_radii=13):
    """Secant slopes of log mu(B(x, r)) against log r.

    Centers are spread deterministically over the grid nodes (the node
    closest to the origin is always included); radii are log-spaced over
    ``r_range``, which must span at least two decades.
    """
    r0, r1 = map(float, r_range)
    if not (0 < r0 < r1) or np.log10(r1 / r0) < 2 - 1e-9:
        raise InputError("r_range must be increasing, positive and span >= 2 decades")
    if len(grid) == 0:
        raise InputError("empty grid")
    order = np.argsort(space.norm(grid.nodes), kind="stable")
    idx = np.unique(np.linspace(0, len(order) - 1, n_centers).round().astype(int))
    centers = grid.nodes[order[idx]]
    radii = np.logspace(np.log10(r0), np.log10(r1), n_radii)
    lr = np.log(radii)
    slopes = np.empty((len(centers), n_radii - 1))
    for i, c in enumerate(centers):
        lm = np.log([space.ball_measure(c, r) for r in radii])
        slopes[i] = np.diff(lm) / np.diff(lr)
    i0, j0 = np.unravel_index(np.argmin(slopes), slopes.shape)
    i1, j1 = np.unravel_index(np.argmax(slopes), slopes.shape)
    return DensityEstimate(
        float(slopes[i0, j0]), float(slopes[i1, j1]),
        (centers[i0].copy(), float(radii[j0])), (centers[i1].copy(), float(radii[j1])),
        slopes)


# ---------------------------------------------------------------------------
# heat kernel models

@dataclass(frozen=True)
class HeatKernelModel:
    """Heat kernel family on a space.

    ``exact_gaussian`` is (4 pi s)^{-n/2} exp(-d^2/4s) on R^n. The model
    kernel ``model_gauss_gauge`` is exp(-C d^2/s) normalized by
    Z(s) = int exp(-C d(x,y)^2/s) d mu(y); it has the two-sided Gaussian
    envelope by construction but is not a semigroup.
    """
    kind: str = "exact_gaussian"
    C: float = 0.25
    epsilon: float = 1.0
    A1: bool = True
    A2: bool = True
    A3: bool = True
    A4: bool = True

    def __post_init__(self):
        if self.kind not in ("exact_gaussian", "model_gauss_gauge"):
            raise InputError(f"unknown heat kernel {self.kind!r}")
        if self.C <= 0:
            raise InputError("decay constant must be positive")

    @property
    def semigroup(self):
        return self.kind == "exact_gaussian"

    def check_space(self, space):
        if self.kind == "exact_gaussian" and space.kind != "euclidean":
            raise InputError("exact_gaussian is only available on euclidean(n)")

    def radial_form(self, space):
        """(N, D, c) with p_s(d) = N s^{-D/2} exp(-c d^2/s), or None.

        Available whenever the kernel depends on d alone and is
        homogeneous under dilations.
        """
        self.check_space(space)
        if self.kind == "exact_gaussian":
            n = space.n
            return (4 * np.pi) ** (-n / 2), float(n), 0.25
        if space.kind == "euclidean":
            n = space.n
            return (self.C / np.pi) ** (n / 2), float(n), self.C
        if space.kind == "heisenberg_h1":
            # Z(s) = int exp(-C rho^2/s) 4 c_B rho^3 d rho = 2 c_B s^2 / C^2
            return self.C ** 2 / (2 * H1_BALL_VOLUME), 4.0, self.C
        return None

    def normalizer(self, space, s, x, grid=None):
        """Z(s, x) for the model kernel."""
        s = np.asarray(s, dtype=float)
        rf = self.radial_form(space)
        x = space.as_points(x)
        if rf is not None:
            N, D, _ = rf
            return np.broadcast_to(s ** (D / 2) / N,
                                   np.broadcast_shapes(s.shape, x.shape[:-1]))
        g, C = space.gamma, self.C
        if space.n == 1:
            # int exp(-a (y-x)^2) |y|^g dy = Gamma((g+1)/2) a^{-(g+1)/2} 1F1(-g/2; 1/2; -a x^2)
            a = C / s
            xx = x[..., 0]
            return gamma_fn((g + 1) / 2) * a ** (-(g + 1) / 2) * hyp1f1(-g / 2, 0.5, -a * xx * xx)
        if grid is None:
            raise InputError("weighted model in n > 1 needs a grid for Z(s)")
        d2 = space.pairwise(x.reshape(-1, space.n), grid.nodes) ** 2
        sv = np.broadcast_to(s, x.shape[:-1]).reshape(-1)
        Z = np.exp(-C * d2 / sv[:, None]) @ grid.weights
        return Z.reshape(x.shape[:-1])


def heat_kernel_eval(model, space, s, x, y, grid=None):
    """p_s(x, y) with broadcasting over s, x and y."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise InputError("heat kernel time must be positive")
    d = space.distance(x, y)
    rf = model.radial_form(space)
    if rf is not None:
        N, D, c = rf
        return N * s ** (-D / 2) * np.exp(-c * d * d / s)
    Zx = model.normalizer(space, s, x, grid)
    Zy = model.normalizer(space, s, y, grid)
    # the larger normalizer keeps the kernel symmetric and sub-probability
    return np.exp(-model.C * d * d / s) / np.maximum(Zx, Zy)


def heat_kernel_ds(model, space, s, x, y, grid=None, rel_step=1e-4):
    """d/ds p_s(x, y): closed form for radial models, central difference otherwise."""
    s = np.asarray(s, dtype=float)
    rf = model.radial_form(space)
    if rf is not None:
        _, D, c = rf
        d = space.distance(x, y)
        return heat_kernel_eval(model, space, s, x, y) * (c * d * d / s ** 2 - D / (2 * s))
    h = rel_step * s
    return (heat_kernel_eval(model, space, s + h, x, y, grid)
            - heat_kernel_eval(model, space, s - h, x, y, grid)) / (2 * h)


# ---------------------------------------------------------------------------
# axiom validation

@dataclass
class AxiomReport:
    violations: dict
    skipped: list
    envelopes: dict
    tol: float

    @property
    def passed(self):
        return {k: (v <= self.tol) for k, v in self.violations.items()}

    def ok(self, name):
        return name not in self.skipped and self.passed.get(name, False)


def _local_rule(space, x, s, C=0.25, m=49):
    """Quadrature rule adapted to scale sqrt(s) around x.

    Tensor trapezoid on R^n; gauge-polar Gauss rule on H^1, where the
    gauge kernel is smooth in the radius but has a kink across c = 0.
    """
    span = max(9.0, np.sqrt(40.0 / C))
    if space.kind == "heisenberg_h1":
        rho, wr = _gl(0.0, span * np.sqrt(s), 48)
        psi, wp = _gl(-np.pi / 2, np.pi / 2, 32)
        phi = np.arange(16) * (2 * np.pi / 16)
        R, P, F = np.meshgrid(rho, psi, phi, indexing="ij")
        cp = np.sqrt(np.cos(P))
        pts = np.stack([R * cp * np.cos(F), R * cp * np.sin(F), R * R * np.sin(P)], -1).reshape(-1, 3)
        w = np.broadcast_to((wr * rho ** 3)[:, None, None] * wp[None, :, None] * (2 * np.pi / 16),
                            R.shape).reshape(-1)
        return space.group_mul(x, pts), w
    z = np.linspace(-span, span, m)
    hz = z[1] - z[0]
    mesh = np.stack(np.meshgrid(*([z] * space.dim), indexing="ij"), -1).reshape(-1, space.dim)
    pts = mesh * np.sqrt(s) + x
    w = np.sqrt(s) ** space.dim * hz ** space.dim * space.density(pts)
    return pts, w


def _gl(a, b, n):
    gx, gw = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * gx + 0.5 * (a + b), 0.5 * (b - a) * gw


def validate_axioms(model, space, grid, tol=1e-4, s_values=(0.25, 0.5, 1.0),
                    n_points=6, kernel=None, seed=0):
    """Numerical report on the heat-kernel axioms and assumptions A1-A4.

    ``kernel`` may replace the model's evaluator (signature
    ``kernel(s, x, y)``) to audit a hand-made family. Violations are
    relative; envelope constants are sup and inf of the ratio against
    exp(-C d^2/s)/mu(B(x, sqrt s)) (A1, A4) or its derivative and
    Holder analogues with C halved (A2, A3), which absorbs the polynomial
    prefactors of exact Gaussians.
    """
    rng = np.random.default_rng(seed)
    p = kernel or (lambda s, x, y: heat_kernel_eval(model, space, s, x, y, grid))
    inner = grid.nodes[space.norm(grid.nodes) <= 0.3 * grid.radius]
    pick = inner[rng.choice(len(inner), size=min(n_points, len(inner)), replace=False)]
    viol, skipped, env = {}, [], {}

    # (i) nonnegativity and (iii) symmetry on all node pairs of the sample
    vals, sym = [], []
    for s in s_values:
        K = p(s, pick[:, None, :], grid.nodes[None, :, :])
        Kt = p(s, grid.nodes[None, :, :], pick[:, None, :])
        vals.append(K)
        sym.append(np.max(np.abs(K - Kt)) / np.max(np.abs(K)))
    vals = np.concatenate([v.ravel() for v in vals])
    viol["nonnegativity"] = float(max(0.0, -vals.min()) / np.abs(vals).max())
    viol["symmetry"] = float(max(sym))

    # (ii) sub-probability
    mass = []
    for s in s_values:
        K = p(s, pick[:, None, :], grid.nodes[None, :, :])
        mass.append(K @ grid.weights)
    viol["sub_probability"] = float(max(0.0, np.max(mass) - 1.0))

    # (iv) semigroup
    if model.semigroup and kernel is None:
        errs = []
        s, t = s_values[0], s_values[-1]
        y = pick[::-1]
        lhs = np.sum(p(s, pick[:, None, :], grid.nodes[None]) * p(t, grid.nodes[None], y[:, None, :])
                     * grid.weights, axis=1)
        rhs = p(s + t, pick, y)
        errs.append(np.max(np.abs(lhs - rhs) / rhs))
        viol["semigroup"] = float(max(errs))
    elif kernel is None:
        skipped.append("semigroup")
        viol["semigroup"] = 0.0
    else:
        s, t = s_values[0], s_values[-1]
        y = pick[::-1]
        lhs = np.sum(p(s, pick[:, None, :], grid.nodes[None]) * p(t, grid.nodes[None], y[:, None, :])
                     * grid.weights, axis=1)
        rhs = p(s + t, pick, y)
        viol["semigroup"] = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))

    # (v) approximate identity on a Gaussian test function
    f = lambda z: np.exp(-np.sum(np.asarray(z) ** 2, axis=-1))
    errs = []
    for x in pick[:2]:
        sm = 1e-6
        pts, w = _local_rule(space, x, sm, model.C)
        errs.append(abs(np.sum(p(sm, x[None, :], pts) * f(pts) * w) - f(x)))
    viol["approximate_identity"] = float(max(errs))

    # A1-A4 envelopes over node pairs
    ratios = {"A1": [], "A2": [], "A3": [], "A4": []}
    with np.errstate(divide="ignore", invalid="ignore"):
        for s in s_values:
            x = pick[:, None, :]
            y = grid.nodes[None, :, :]
            d = space.distance(x, y)
            mu = np.array([space.ball_measure(xi, np.sqrt(s)) for xi in pick])[:, None]
            keep = d <= 3 * np.sqrt(s)
            K = p(s, x, y)
            base = np.exp(-model.C * d * d / s) / mu
            half = np.exp(-0.5 * model.C * d * d / s) / mu
            ratios["A1"].append((K / base)[keep])
            ratios["A4"].append((K / base)[keep])
            if kernel is None:
                ds = heat_kernel_ds(model, space, s, x, y, grid)
                ratios["A2"].append((np.abs(ds) * s / half)[keep])
            x0 = pick + 0.1 * np.sqrt(s) * np.eye(space.dim)[0]
            dx = space.distance(pick, x0)[:, None]
            diffK = np.abs(K - p(s, x0[:, None, :], y))
            hol = half * (dx / np.sqrt(s)) ** model.epsilon
            ratios["A3"].append((diffK / hol)[keep])
    for k, v in ratios.items():
        if v:
            arr = np.concatenate(v)
            env[k] = (float(arr.max()), float(arr.min()))
    return AxiomReport(viol, skipped, env, tol)
