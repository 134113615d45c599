"""Christ dyadic cubes on point clouds, alpha-dyadic space-time cubes,
Hedberg-Wolff potentials and parabolic maximal functions.

Parabolic balls are B_r(t0, x0) = {(s, y): r^{2a} < s - t0 < 2 r^{2a},
d(y, x0) < r}. For a discrete measure every potential below is a step
function of r, so they are evaluated exactly by sweeping the finitely
many radii where an atom enters or leaves the ball.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError
from .frackernel import DiscreteMeasure
from .space import MetricMeasureSpace

_ROWS = 512  # rows per block of pairwise distances


def default_a0(delta):
    """Radius factor of the ball each cube must contain."""
    return (1.0 - delta) / 4.0


def _metric(metric):
    """Distances from each row of X to the single point y."""
    if isinstance(metric, MetricMeasureSpace):
        return lambda X, y: metric.distance(X, y)
    if callable(metric):
        return metric
    raise InputError("metric must be a MetricMeasureSpace or a callable d(X, y)")


def _pairwise_rows(d, X, rows, Y=None):
    Y = X if Y is None else Y
    return np.stack([d(Y, X[i]) for i in rows]) if len(rows) else np.zeros((0, len(Y)))


# ---------------------------------------------------------------------------
# Christ cubes

@dataclass(eq=False)
class DyadicTree:
    """Nested nets z^k (indices into ``points``) for k = k_min..k_max, parent
    links to scale k-1 and the cube label of every cloud point per scale.

    ``labels[j, i]`` is the index (into ``centers[j]``) of the scale
    k_min + j cube holding point i.
    """
    points: np.ndarray
    metric: object
    delta: float
    k_min: int
    k_max: int
    centers: list
    parents: list
    labels: np.ndarray
    a0: float
    slab: str = "scaled"
    _d: object = field(default=None, repr=False)

    @property
    def scales(self):
        return np.arange(self.k_min, self.k_max + 1)

    def level(self, k):
        if not self.k_min <= k <= self.k_max:
            raise InputError(f"scale {k} outside {self.k_min}..{self.k_max}")
        return k - self.k_min

    def n_cubes(self, k):
        return len(self.centers[self.level(k)])

    def center_points(self, k):
        return self.points[self.centers[self.level(k)]]

    def cube(self, k, g):
        """Indices of the cloud points in Q^k_g."""
        return np.nonzero(self.labels[self.level(k)] == g)[0]

    def locate(self, x):
        """Cube labels (n_scales, m) for arbitrary points: nearest finest-scale
        center, then up the parent links."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.points.shape[1] == 1 else x[None, :]
        return self._propagate(self._nearest_center(x))

    def _nearest_center(self, x):
        C = self.center_points(self.k_max)
        out = np.empty(len(x), dtype=int)
        for s in range(0, len(x), _ROWS):
            D = _pairwise_rows(self._d, x, range(s, min(s + _ROWS, len(x))), C)
            out[s:s + len(D)] = np.argmin(D, axis=1)   # lowest index on ties
        return out

    def _propagate(self, leaf):
        L = np.empty((len(self.centers), len(leaf)), dtype=int)
        L[-1] = leaf
        for j in range(len(self.centers) - 1, 0, -1):
            L[j - 1] = self.parents[j][L[j]]
        return L

    def slab_width(self, k, alpha):
        """Time-slab width of the alpha-dyadic cubes at scale k."""
        if self.slab == "literal":
            return self.delta ** (2 * alpha)
        return self.delta ** (2 * alpha * k)

    def to_dict(self):
        out = {"delta": self.delta, "k_min": self.k_min, "k_max": self.k_max,
               "a0": self.a0, "slab": self.slab, "scales": []}
        for j, k in enumerate(self.scales):
            out["scales"].append({
                "k": int(k),
                "centers": self.centers[j].tolist(),
                "center_points": self.points[self.centers[j]].tolist(),
                "parents": None if j == 0 else self.parents[j].tolist(),
            })
        return out


def _greedy_net(d, X, radius, seed):
    """Maximal radius-separated net, greedy in input order after ``seed``."""
    mind = np.full(len(X), np.inf)
    centers = []
    for i in seed:
        centers.append(int(i))
        mind = np.minimum(mind, d(X, X[i]))
    for i in range(len(X)):
        if mind[i] >= radius:
            centers.append(i)
            mind = np.minimum(mind, d(X, X[i]))
    return np.array(centers, dtype=int)


def build_christ_tree(points, metric, delta, k_min, k_max, a0=None, slab="scaled"):
    """Christ cubes on a finite cloud.

    At each scale the net is seeded with the coarser scale's centers, then
    filled greedily in input order, so nets are nested and every center
    sits in its own cube. Parents: the nearest coarser center (which is the
    one within delta^{k-1}/2 whenever such a center exists). Points go to
    their nearest finest-scale center and inherit its ancestors.
    """
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    if k_max < k_min:
        raise InputError("need k_min <= k_max")
    if slab not in ("scaled", "literal"):
        raise InputError("slab must be 'scaled' or 'literal'")
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) == 0:
        raise InputError("empty point cloud")
    d = _metric(metric)
    centers, parents = [], []
    seed = np.zeros(0, dtype=int)
    for k in range(k_min, k_max + 1):
        c = _greedy_net(d, X, delta ** k, seed)
        if centers:
            prev = X[centers[-1]]
            D = _pairwise_rows(d, X[c], range(len(c)), prev)
            parents.append(np.argmin(D, axis=1))
        else:
            parents.append(np.zeros(0, dtype=int))
        centers.append(c)
        seed = c
    tree = DyadicTree(X, metric, float(delta), int(k_min), int(k_max), centers, parents,
                      np.zeros((0, len(X)), dtype=int),
                      default_a0(delta) if a0 is None else float(a0), slab, d)
    tree.labels = tree._propagate(tree._nearest_center(X))
    return tree


@dataclass(frozen=True)
class ChristReport:
    partition: bool       # (a)
    nested: bool          # (b)
    unique_parent: bool   # (c)
    diameter: bool        # (d)
    contains_ball: bool   # (e)
    C1: float
    C1_bound: float
    parent_distance: bool
    eta: float            # (f): boundary fraction ~ C2 t^eta
    C2: float
    boundary_fraction: np.ndarray
    t_values: np.ndarray

    @property
    def passed(self):
        return (self.partition and self.nested and self.unique_parent and self.diameter
                and self.contains_ball and self.parent_distance)


def christ_properties(tree, t_values=None):
    """Check properties (a)-(e) exactly on the cloud and fit (f).

    (b) and (c) are checked as: every finer cube lies in exactly one cube
    of each coarser scale. (d) fits C1 = max diam(Q^k) / delta^k and
    compares with 4 / (1 - delta).
    """
    X, d, delta = tree.points, tree._d, tree.delta
    n = len(X)
    L = tree.labels
    ns = len(tree.centers)
    partition = all(np.all((L[j] >= 0) & (L[j] < len(tree.centers[j]))) for j in range(ns))
    # every cube nonempty: its center is in it
    partition &= all(np.array_equal(L[j][tree.centers[j]], np.arange(len(tree.centers[j])))
                     for j in range(ns))
    nested = True
    unique = True
    for j in range(1, ns):
        for i in range(j):
            # label at scale j must determine label at scale i
            pairs = np.unique(np.stack([L[j], L[i]], 1), axis=0)
            ok = len(pairs) == len(np.unique(L[j]))
            nested &= ok
            unique &= ok and len(np.unique(L[j])) == len(tree.centers[j])
    parent_ok = True
    for j in range(1, ns):
        k = tree.k_min + j
        c, pc = X[tree.centers[j]], X[tree.centers[j - 1]][tree.parents[j]]
        dist = np.array([d(c[i:i + 1], pc[i])[0] for i in range(len(c))])
        parent_ok &= bool(np.all(dist < delta ** (k - 1)))

    t_values = np.geomspace(0.02, 1.0, 8) if t_values is None else np.asarray(t_values)
    C1 = 0.0
    ball_ok = True
    near = np.zeros(len(t_values))
    total = 0
    for j in range(ns):
        k = tree.k_min + j
        lab = L[j]
        dcomp = np.full(n, np.inf)
        for s in range(0, n, _ROWS):
            rows = np.arange(s, min(s + _ROWS, n))
            D = _pairwise_rows(d, X, rows)
            same = lab[rows][:, None] == lab[None, :]
            dcomp[rows] = np.where(same, np.inf, D).min(axis=1)
            # diameters from the rows of each cube
            diam_rows = np.where(same, D, 0.0).max(axis=1)
            C1 = max(C1, float(diam_rows.max()) / delta ** k)
        # (e): cloud points within a0 delta^k of a center belong to its cube
        for g, ci in enumerate(tree.centers[j]):
            inside = d(X, X[ci]) < tree.a0 * delta ** k
            if np.any(lab[inside] != g):
                ball_ok = False
        has_comp = np.isfinite(dcomp)
        total += int(has_comp.sum())
        near += (dcomp[has_comp][None, :] <= t_values[:, None] * delta ** k).sum(axis=1)
    frac = near / max(total, 1)
    pos = frac > 0
    if pos.sum() >= 2:
        eta, logc = np.polyfit(np.log(t_values[pos]), np.log(frac[pos]), 1)
        C2 = float(np.max(frac[pos] / t_values[pos] ** eta))
    else:
        eta, C2 = np.nan, np.nan
    bound = 4.0 / (1.0 - delta)
    return ChristReport(bool(partition), bool(nested), bool(unique), C1 <= bound,
                        bool(ball_ok), C1, bound, bool(parent_ok), float(eta), C2, frac,
                        t_values)


# ---------------------------------------------------------------------------
# alpha-dyadic cubes

@dataclass(frozen=True)
class AlphaDyadicCube:
    """[slab * w, (slab + 1) * w) x Q^k_gamma with w the scale-k slab width."""
    k: int
    slab: int
    gamma: int
    width: float

    @property
    def time_window(self):
        return self.slab * self.width, (self.slab + 1) * self.width

    def contains(self, tree, t, x):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lab = tree.locate(x)[tree.level(self.k)]
        return (np.floor(t / self.width).astype(int) == self.slab) & (lab == self.gamma)


def alpha_cube_keys(tree, alpha, times, labels):
    """(n_scales, m, 2) integer keys (slab, gamma) of the cubes holding (t_i, x_i)."""
    times = np.asarray(times, dtype=float)
    keys = np.empty(labels.shape + (2,), dtype=np.int64)
    for j, k in enumerate(tree.scales):
        keys[j, :, 0] = np.floor(times / tree.slab_width(k, alpha)).astype(np.int64)
        keys[j, :, 1] = labels[j]
    return keys


def cube_containing(tree, alpha, k, t, x):
    lab = tree.locate(x)[tree.level(k), 0]
    w = tree.slab_width(k, alpha)
    return AlphaDyadicCube(int(k), int(np.floor(t / w)), int(lab), w)


def _cube_sums(keys_atoms, values, keys_query):
    """Sum of ``values`` over atoms sharing each query's key (one scale)."""
    allk = np.concatenate([keys_atoms, keys_query])
    _, inv = np.unique(allk, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    sums = np.bincount(inv[:len(keys_atoms)], weights=values, minlength=inv.max() + 1)
    return sums[inv[len(keys_atoms):]]


# ---------------------------------------------------------------------------
# step-function sweeps

def _sweep(lo, hi, m, valid):
    """Rows of open intervals (lo, hi) carrying mass m. Returns sorted
    breakpoints r (rows x 2n), the mass on (r_j, r_{j+1}) and whether that
    piece is nonempty and covered."""
    rows, n = lo.shape
    r = np.concatenate([np.where(valid, lo, np.inf), np.where(valid, hi, np.inf)], axis=1)
    w = np.concatenate([np.where(valid, m, 0.0), np.where(valid, -m, 0.0)], axis=1)
    cnt = np.concatenate([valid.astype(int), -valid.astype(int)], axis=1)
    order = np.argsort(r, axis=1, kind="stable")
    r = np.take_along_axis(r, order, 1)
    mass = np.cumsum(np.take_along_axis(w, order, 1), axis=1)
    open_ = np.cumsum(np.take_along_axis(cnt, order, 1), axis=1)
    nxt = np.concatenate([r[:, 1:], np.full((rows, 1), np.inf)], axis=1)
    live = (open_ > 0) & np.isfinite(r) & (nxt > r)
    return r, nxt, np.where(live, np.maximum(mass, 0.0), 0.0), live


def _as_queries(t, x, space):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = space.as_points(x)
    if x.ndim == 1:
        x = x[None, :]
    if len(t) == 1 and len(x) > 1:
        t = np.full(len(x), t[0])
    if len(x) == 1 and len(t) > 1:
        x = np.repeat(x, len(t), axis=0)
    if len(t) != len(x):
        raise InputError("times and points must have equal length")
    return t, x


def _ball_intervals(nu, alpha, t, x, space):
    """Radii r with atom k in B_r(t_i, x_i):
    max(d, ((s - t)/2)^{1/2a}) < r < (s - t)^{1/2a} when s > t."""
    ds = nu.times[None, :] - t[:, None]
    dist = space.distance(x[:, None, :], space.as_points(nu.points)[None, :, :])
    pos = ds > 0
    e = 1.0 / (2 * alpha)
    dsp = np.where(pos, ds, 1.0)
    lo = np.maximum(dist, (dsp / 2) ** e)
    hi = dsp ** e
    return lo, hi, pos & (lo < hi)


def _step_energy(lo, hi, valid, m, g, e):
    """Row sums of int (mass(r))^g r^{-e-1} dr for masses on (lo, hi)."""
    r, nxt, mass, live = _sweep(lo, hi, np.broadcast_to(m, lo.shape), valid)
    with np.errstate(divide="ignore", invalid="ignore"):
        piece = mass ** g * (r ** -e - nxt ** -e) / e
    return np.where(live, piece, 0.0).sum(axis=1)


def wolff_potential_continuous(nu, alpha, p, Q, t, x, space):
    """P(t, x) = int_0^inf (nu(B_r(t, x)) / r^Q)^{p'-1} dr / r, exactly.

    On each piece (r1, r2) of constant mass c the integrand is
    c^{p'-1} r^{-Q(p'-1)-1}.
    """
    if p <= 1:
        raise InputError("need p > 1")
    t, x = _as_queries(t, x, space)
    if len(nu) == 0:
        return np.zeros(len(t))
    g = 1.0 / (p - 1)   # p' - 1
    lo, hi, valid = _ball_intervals(nu, alpha, t, x, space)
    return _step_energy(lo, hi, valid, nu.masses, g, Q * g)


def wolff_potential_anchored(nu, alpha, p, Q, t, x, space):
    """int (nu(B_r(r^{2a}, x)) / r^Q)^{p'-1} dr / r over the radii whose
    ball B_r(r^{2a}, x) contains (t, x), i.e. r^{2a} in (t/3, t/2).

    Unlike the potential above, (t, x) lies in every ball it sees, so an
    atom counts itself and late-time blobs are seen at their natural
    radius t^{1/2a}.
    """
    if p <= 1:
        raise InputError("need p > 1")
    t, x = _as_queries(t, x, space)
    if len(nu) == 0:
        return np.zeros(len(t))
    g = 1.0 / (p - 1)
    e = 1.0 / (2 * alpha)
    dist = space.distance(x[:, None, :], space.as_points(nu.points)[None, :, :])
    lo = np.maximum(np.maximum(dist, (nu.times / 3)[None, :] ** e), (t / 3)[:, None] ** e)
    hi = np.minimum((nu.times / 2)[None, :] ** e, (t / 2)[:, None] ** e)
    return _step_energy(lo, hi, lo < hi, nu.masses, g, Q * g)


def parabolic_maximal(nu, alpha, Q, x, space):
    """M(x) = sup_r r^{-Q} nu(B_r(r^{2a}, x)).

    Atom (s, y) lies in B_r(r^{2a}, x) iff max(d, (s/3)^{1/2a}) < r < (s/2)^{1/2a};
    on each open piece r^{-Q} is largest at the left end.
    """
    x = space.as_points(x)
    if x.ndim == 1:
        x = x[None, :]
    if len(nu) == 0:
        return np.zeros(len(x))
    e = 1.0 / (2 * alpha)
    dist = space.distance(x[:, None, :], space.as_points(nu.points)[None, :, :])
    lo = np.maximum(dist, (nu.times / 3)[None, :] ** e)
    hi = np.broadcast_to((nu.times / 2) ** e, lo.shape)
    valid = lo < hi
    m = np.broadcast_to(nu.masses, lo.shape)
    r, nxt, mass, live = _sweep(lo, hi, m, valid)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(live, mass / r ** Q, 0.0)
    return val.max(axis=1)


def wolff_potential_dyadic(nu, tree, alpha, p, Q, t, x):
    """sum over scales of (nu(cube) / delta^{kQ})^{p'-1} for the alpha-dyadic
    cubes holding (t, x)."""
    if p <= 1:
        raise InputError("need p > 1")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    qlab = tree.locate(x)
    if len(t) == 1 and qlab.shape[1] > 1:
        t = np.full(qlab.shape[1], t[0])
    if len(nu) == 0:
        return np.zeros(len(t))
    g = 1.0 / (p - 1)
    ka = alpha_cube_keys(tree, alpha, nu.times, tree.locate(nu.points))
    kq = alpha_cube_keys(tree, alpha, t, qlab)
    out = np.zeros(len(t))
    for j, k in enumerate(tree.scales):
        mass = _cube_sums(ka[j], nu.masses, kq[j])
        out += (mass / tree.delta ** (k * Q)) ** g
    return out


def dyadic_maximal(nu, tree, alpha, h, times=None, points=None):
    """sup over alpha-dyadic cubes holding (t, x) of the nu-average of |h|;
    ``h`` holds values at the atoms. Evaluated at the atoms by default.
    Cubes of zero nu-mass are skipped (value 0 if all are)."""
    h = np.abs(np.asarray(h, dtype=float))
    if len(h) != len(nu):
        raise InputError("h needs one value per atom")
    ka = alpha_cube_keys(tree, alpha, nu.times, tree.locate(nu.points))
    if times is None:
        kq = ka
    else:
        kq = alpha_cube_keys(tree, alpha, np.atleast_1d(times), tree.locate(points))
    out = np.zeros(kq.shape[1])
    for j in range(len(tree.scales)):
        mass = _cube_sums(ka[j], nu.masses, kq[j])
        hm = _cube_sums(ka[j], nu.masses * h, kq[j])
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = np.where(mass > 0, hm / mass, 0.0)
        out = np.maximum(out, avg)
    return out


# ---------------------------------------------------------------------------
# equivalences on the group model

@dataclass(frozen=True)
class BandReport:
    ratios: np.ndarray
    lo: float
    hi: float

    @property
    def band(self):
        return self.hi / self.lo if self.lo > 0 else np.inf


def _band(r):
    r = np.asarray(r, dtype=float)
    return BandReport(r, float(r.min()), float(r.max()))


def verify_maximal_equivalence(op, nu_samples, p):
    """||(e^{-t L^a})^* nu||_p / ||M nu||_p over grid nodes, per sample."""
    g = op._need_grid()
    Q = op.space.Q
    out = []
    for nu in nu_samples:
        M = parabolic_maximal(nu, op.alpha, Q, g.nodes, op.space)
        A = op.adjoint_apply(nu)
        out.append((np.sum(g.weights * A ** p) / np.sum(g.weights * M ** p)) ** (1 / p))
    return _band(out)


_POTENTIALS = {"literal": wolff_potential_continuous, "anchored": wolff_potential_anchored}


def verify_wolff_equivalence(op, nu_samples, p, potential="literal"):
    """||(e^{-t L^a})^* nu||_{p'}^{p'} / int P nu dnu, per sample.

    ``potential`` is "literal" (balls B_r(t, x)), "anchored" (balls
    B_r(r^{2a}, x) through (t, x)) or a tuple of these, in which case a
    dict of reports is returned.
    """
    names = (potential,) if isinstance(potential, str) else tuple(potential)
    for n in names:
        if n not in _POTENTIALS:
            raise InputError(f"unknown potential {n!r}")
    g = op._need_grid()
    pp = p / (p - 1)
    out = {n: [] for n in names}
    for nu in nu_samples:
        lhs = np.sum(g.weights * op.adjoint_apply(nu) ** pp)
        for n in names:
            P = _POTENTIALS[n](nu, op.alpha, p, op.space.Q, nu.times, nu.points, op.space)
            rhs = np.sum(nu.masses * P)
            out[n].append(lhs / rhs if rhs > 0 else np.inf)
    if isinstance(potential, str):
        return _band(out[potential])
    return {n: _band(v) for n, v in out.items()}


@dataclass(frozen=True)
class WolffTraceReport:
    integral: float
    finite: bool
    embedding: float
    kappa_integral: float
    kappa_finite: bool
    heuristic: bool

    @property
    def agree(self):
        return self.finite == self.kappa_finite


def wolff_trace_integral(nu, alpha, p, q, Q, space):
    """int (P nu)^{q(p-1)/(p-q)} dnu as an atomic sum."""
    if not 1 < q < p:
        raise InputError("need 1 < q < p")
    if len(nu) == 0:
        return 0.0
    P = wolff_potential_continuous(nu, alpha, p, Q, nu.times, nu.points, space)
    return float(np.sum(nu.masses * P ** (q * (p - 1) / (p - q))))


def trace_condition_wolff(op, p, q, nu, trials=30, seed=0, table=None):
    """Wolff integral beside the embedding-norm estimate and the
    capacity-based integral of the same measure."""
    from .capacity import _embedding_ratios, kappa_table, upper_sector_integral
    I = wolff_trace_integral(nu, op.alpha, p, q, op.space.Q, op.space)
    if len(nu) == 0:
        return WolffTraceReport(0.0, True, 0.0, 0.0, True, False)
    emb = float(np.max(_embedding_ratios(op, nu, p, q, trials, seed)))
    table = table or kappa_table(nu, op, p)
    Ik = upper_sector_integral(table, p, q)
    return WolffTraceReport(I, bool(np.isfinite(I)), emb, Ik, bool(np.isfinite(Ik)),
                            table.heuristic)


def random_diffuse_measure(space, rng, n_blobs=2, alpha=0.5, t_range=(0.5, 2.0),
                           x_scale=1.0, spacing=(0.08, 0.16), n_x=(2, 4), n_t=(2, 5)):
    """Sum of blobs, each a parabolic lattice of equal-mass atoms: n_x points
    per space axis at spacing h and n_t times at spacing h^{2 alpha}, so the
    atoms sample a density on a space-time box."""
    T, X, M = [], [], []
    for _ in range(n_blobs):
        h = rng.uniform(*spacing)
        nx, nt = rng.integers(n_x[0], n_x[1] + 1), rng.integers(n_t[0], n_t[1] + 1)
        c = rng.uniform(-x_scale, x_scale, space.dim)
        t0 = rng.uniform(*t_range)
        ax = [h * (np.arange(nx) - (nx - 1) / 2)] * space.dim
        xs = np.stack(np.meshgrid(*ax, indexing="ij"), -1).reshape(-1, space.dim)
        ts = t0 + h ** (2 * alpha) * np.arange(nt)
        T.append(np.repeat(ts, len(xs)))
        X.append(np.tile(c + xs, (nt, 1)))
        rho = rng.uniform(0.5, 2.0)
        M.append(np.full(nt * len(xs), rho * h ** (2 * alpha) * h ** space.Q))
    return DiscreteMeasure(np.concatenate(T), np.concatenate(X), np.concatenate(M))
