import numpy as np
import pytest

from fracheat.capacity import (CapacityInstance, LevelSetLattice, LpCapacity, ParabolicBall,
                               active_set_oracle, ball_condition_scan, capacity_dual,
                               capacity_primal, capacity_properties_check, constraint_matrix,
                               duality_check, kappa, kappa_table, spherical_capacity_scan,
                               strong_type_check, trace_lower_sector, trace_upper_sector,
                               upper_sector_integral)
from fracheat.evolution import random_bumps
from fracheat.exceptions import InfeasibleError, InputError
from fracheat.frackernel import DiscreteMeasure, FracHeatOperator
from fracheat.space import build_grid, euclidean


def _op(R, h, alpha=0.5):
    sp = euclidean(1)
    return FracHeatOperator(alpha, sp, grid=build_grid(sp, R, h))


@pytest.fixture(scope="module")
def small():
    return _op(3.875, 0.125)


@pytest.fixture(scope="module")
def mid():
    return _op(16.0, 0.125)


def single_row_capacity(a, w, p):
    # Hoelder: the optimal f is proportional to (a/w)^{p'-1}
    pp = p / (p - 1)
    return np.sum(w * (a / w) ** pp) ** (1 - p)


# ---------------------------------------------------------------------------
# the convex program

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_single_constraint_closed_form(p):
    inst = CapacityInstance([[0.7]], [1.0], p)
    assert capacity_primal(inst).value == pytest.approx(0.7 ** -p, rel=1e-8)
    res = capacity_dual(inst)
    assert res.value == pytest.approx(0.7 ** -p, rel=1e-8)
    np.testing.assert_allclose(res.f, [1 / 0.7], rtol=1e-8)


def test_two_symmetric_nodes_grid_oracle():
    a = 0.6
    inst = CapacityInstance([[a, a]], [1.0, 1.0], 2.0)
    f1 = np.linspace(0, 1 / a, 1_000_001)
    f2 = np.maximum(0.0, (1 - a * f1) / a)
    brute = np.min(f1 ** 2 + f2 ** 2)
    assert capacity_primal(inst).value == pytest.approx(brute, abs=1e-6)
    assert capacity_dual(inst).value == pytest.approx(brute, abs=1e-6)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_scaling(small, p):
    rng = np.random.default_rng(3)
    T, X = rng.uniform(0.2, 2, 4), rng.uniform(-2, 2, 4)
    inst = CapacityInstance.from_operator(small, p, T, X)
    lam = 2.5
    scaled = CapacityInstance(lam * inst.A, inst.weights, p)
    assert capacity_dual(scaled).value == pytest.approx(lam ** -p * capacity_dual(inst).value,
                                                        rel=1e-8)


def test_zero_constraints(small):
    inst = CapacityInstance(np.zeros((0, len(small.grid))), small.grid.weights, 2.0)
    assert capacity_dual(inst).value == 0.0
    assert capacity_primal(inst).value == 0.0


def test_infeasible_row():
    with pytest.raises(InfeasibleError):
        CapacityInstance([[0.0, 0.0], [1.0, 0.5]], [1.0, 1.0], 2.0)


def test_single_row_matches_hoelder(small):
    A = constraint_matrix(small, [0.7], [[0.3]])
    w = small.grid.weights
    inst = CapacityInstance(A, w, 3.0)
    assert capacity_dual(inst).value == pytest.approx(single_row_capacity(A[0], w, 3.0),
                                                      rel=1e-9)


def test_random_duality(small):
    rng = np.random.default_rng(0)
    for i in range(20):
        p = [1.5, 2.0, 3.0][i % 3]
        k = int(rng.integers(1, 9))
        inst = CapacityInstance.from_operator(small, p, rng.uniform(0.1, 2, k),
                                              rng.uniform(-3, 3, k))
        assert len(inst.weights) <= 64
        r = duality_check(inst)
        assert r.weak_duality
        assert r.gap <= 1e-4
        assert r.extremal_residual <= 1e-3
        assert r.identity_residual <= 1e-3
        assert r.slackness >= 0.99
        if p == 2.0:
            v, _ = active_set_oracle(inst)
            assert r.dual == pytest.approx(v, rel=1e-8)


def test_feasibility_and_slackness(small):
    rng = np.random.default_rng(5)
    inst = CapacityInstance.from_operator(small, 2.5, rng.uniform(0.1, 2, 8),
                                          rng.uniform(-3, 3, 8))
    res = capacity_dual(inst, tol=1e-10)
    Af = inst.A @ res.f
    assert Af.min() >= 1 - 1e-8
    tight = Af <= 1 + 1e-9
    assert res.masses[tight].sum() >= 0.99 * res.masses.sum()
    assert np.all(res.f >= 0) and res.gap >= 0


def test_properties(small):
    rng = np.random.default_rng(2)
    inst = CapacityInstance.from_operator(small, 2.0, rng.uniform(0.2, 2, 6),
                                          rng.uniform(-3, 3, 6))
    r = capacity_properties_check(inst, [[0], [0, 1], [0, 1, 2, 3], list(range(6))])
    assert r.empty == 0.0 and r.monotone and r.subadditive
    r = capacity_properties_check(inst, [[1], [4]])
    assert r.subadditive and r.passed


def test_estimator(small):
    A = constraint_matrix(small, [0.5, 1.0], [[0.0], [1.0]])
    est = LpCapacity(p=2.0).fit(A, small.grid.weights)
    inst = CapacityInstance(A, small.grid.weights, 2.0)
    assert est.value_ == pytest.approx(capacity_primal(inst).value, rel=1e-8)
    assert est.gap_ <= 1e-8


# ---------------------------------------------------------------------------
# spherical capacity and strong type

R_LIST = 2.0 ** np.arange(-3, 3)


@pytest.fixture(scope="module")
def spherical():
    return [spherical_capacity_scan(_op(64.0, h), 2.0, R_LIST) for h in (1 / 16, 1 / 32)]


def test_spherical_slope(spherical):
    for rep in spherical:
        assert 0.85 <= rep.slope <= 1.15
        assert rep.lower_constant > 0
        assert np.isfinite(rep.upper_constant)


def test_spherical_sandwich_stable(spherical):
    a, b = spherical
    assert b.lower_constant == pytest.approx(a.lower_constant, rel=0.25)
    assert b.upper_constant == pytest.approx(a.upper_constant, rel=0.25)


def test_spherical_translation_invariant():
    op = _op(64.0, 1 / 16)
    c0 = spherical_capacity_scan(op, 2.0, [0.5, 2.0]).capacity
    c1 = spherical_capacity_scan(op, 2.0, [0.5, 2.0], x0=np.array([3.0])).capacity
    # the shift is a whole number of cells; what remains is the heavy kernel
    # tail cut off at the edge of the truncated line
    np.testing.assert_allclose(c1, c0, rtol=1e-4)


def test_ball_membership():
    b = ParabolicBall(1.0, np.array([0.0]), 0.25, 0.5)
    sp = euclidean(1)
    assert b.contains(1.3, np.array([0.1]), sp)
    assert not b.contains(1.25, np.array([0.1]), sp)
    assert not b.contains(1.3, np.array([0.3]), sp)


def test_strong_type_zero(mid):
    r = strong_type_check(mid, 2.0, np.zeros((1, len(mid.grid))))
    assert r.max_ratio == 0.0 and r.max_weak_ratio == 0.0


def test_strong_type_weak_below_strong(mid):
    x = mid.grid.nodes[:, 0]
    r = strong_type_check(mid, 2.0, np.exp(-x ** 2))
    assert 0 < r.max_weak_ratio <= r.max_ratio < np.inf


def test_strong_type_refinement():
    ratios = []
    for h in (1 / 8, 1 / 16):
        op = _op(32.0, h)
        F = random_bumps(op.grid.nodes, np.random.default_rng(0), 5, signed=False)
        lat = LevelSetLattice(op, np.geomspace(0.05, 5, 6), stride=round(0.5 / h))
        ratios.append(strong_type_check(op, 2.0, F, lattice=lat).max_ratio)
    assert np.isfinite(ratios).all()
    assert ratios[1] == pytest.approx(ratios[0], rel=0.25)


def test_strong_type_rejects_negative(mid):
    with pytest.raises(InputError):
        strong_type_check(mid, 2.0, -np.ones(len(mid.grid)))


# ---------------------------------------------------------------------------
# kappa and the trace inequalities

def _measure(rng, n):
    return DiscreteMeasure(rng.uniform(0.2, 2, n), rng.uniform(-4, 4, n), rng.uniform(0.1, 1, n))


def _recursive_kappa(op, nu, p, lam):
    # enumerate subsets by include/exclude recursion, capacities from the primal solver
    A = constraint_matrix(op, nu.times, nu.points)
    w = op.grid.weights
    best = [np.inf]

    def rec(i, chosen):
        if i == len(nu):
            if chosen and nu.masses[chosen].sum() >= lam:
                best[0] = min(best[0], capacity_primal(CapacityInstance(A[chosen], w, p)).value)
            return
        rec(i + 1, chosen + [i])
        rec(i + 1, chosen)

    rec(0, [])
    return best[0]


def test_kappa_single_atom(mid):
    nu = DiscreteMeasure([0.8], [[0.5]], [0.4])
    A = constraint_matrix(mid, nu.times, nu.points)
    c1 = single_row_capacity(A[0], mid.grid.weights, 2.0)
    for lam in (0.1, 0.4):
        assert kappa(nu, lam, mid, 2.0) == pytest.approx(c1, rel=1e-8)
    with pytest.raises(InputError):
        kappa(nu, 0.5, mid, 2.0)


def test_kappa_recursive_oracle(mid):
    nu = _measure(np.random.default_rng(4), 3)
    table = kappa_table(nu, mid, 2.0)
    assert not table.heuristic
    for lam in np.linspace(0.05, nu.total_mass, 7):
        assert kappa(nu, lam, mid, 2.0, table) == pytest.approx(
            _recursive_kappa(mid, nu, 2.0, lam), rel=1e-7)


def test_kappa_monotone_in_lambda(mid):
    nu = _measure(np.random.default_rng(6), 6)
    table = kappa_table(nu, mid, 2.0)
    vals = table(np.linspace(0, nu.total_mass, 200))
    assert np.all(np.diff(vals) >= -1e-12)


def test_kappa_nonincreasing_under_added_atoms(mid):
    big = _measure(np.random.default_rng(7), 6)
    small_nu = DiscreteMeasure(big.times[:4], big.points[:4], big.masses[:4])
    lam = np.linspace(0.01, small_nu.total_mass, 50)
    k_small = kappa_table(small_nu, mid, 2.0)(lam)
    k_big = kappa_table(big, mid, 2.0)(lam)
    assert np.all(k_big <= k_small * (1 + 1e-9))


def test_kappa_greedy_flagged(mid):
    nu = _measure(np.random.default_rng(8), 5)
    table = kappa_table(nu, mid, 2.0, exact_limit=3)
    assert table.heuristic
    exact = kappa_table(nu, mid, 2.0)
    lam = np.linspace(0.01, nu.total_mass, 30)
    # a greedy chain only offers some of the candidate sets
    assert np.all(table(lam) >= exact(lam) * (1 - 1e-9))


def test_lower_sector_single_atom(mid):
    nu = DiscreteMeasure([0.8], [[0.0]], [0.5])
    r = trace_lower_sector(mid, 2.0, 3.0, nu)
    assert np.isfinite(r.kappa_sup) and r.kappa_sup > 0
    assert r.consistent


def test_lower_sector_rejects_bad_exponents(mid):
    nu = DiscreteMeasure([0.8], [[0.0]], [0.5])
    with pytest.raises(InputError):
        trace_lower_sector(mid, 3.0, 2.0, nu)


def test_ball_condition_uniform_density():
    # nu spread with density rho over the parabolic ball B_R(0, 0); balls with
    # t0 <= r fully inside carry rho * 2r * r, so sup nu(B_r) / r^2 = 2 rho
    op = FracHeatOperator(0.5, euclidean(1))
    R, hs, rho = 2.0, 0.05, 3.0
    t = np.arange(R + hs / 2, 2 * R, hs)
    x = np.arange(-R + hs / 2, R, hs)
    T, X = np.meshgrid(t, x, indexing="ij")
    nu = DiscreteMeasure(T.ravel(), X.ravel(), np.full(T.size, rho * hs * hs))
    assert ball_condition_scan(op, nu, 2.0) / (2 * rho) == pytest.approx(1.0, abs=0.1)


def test_upper_sector_single_atom_closed_form(mid):
    p, q, m = 3.0, 2.0, 0.6
    nu = DiscreteMeasure([0.8], [[0.5]], [m])
    A = constraint_matrix(mid, nu.times, nu.points)
    c1 = single_row_capacity(A[0], mid.grid.weights, p)
    e, s = p / (p - q), q / (p - q)
    r = trace_upper_sector(mid, p, q, nu)
    assert r.finite
    assert r.integral == pytest.approx(c1 ** -s * m ** e / e, rel=1e-8)


def test_upper_sector_zero_measure(mid):
    r = trace_upper_sector(mid, 3.0, 2.0, DiscreteMeasure.empty(1))
    assert r.integral == 0.0 and r.finite


def test_upper_sector_mass_scaling(mid):
    p, q, c = 3.0, 1.5, 2.5
    nu = _measure(np.random.default_rng(9), 4)
    I1 = upper_sector_integral(kappa_table(nu, mid, p), p, q)
    I2 = upper_sector_integral(kappa_table(nu.scaled(c), mid, p), p, q)
    assert I2 == pytest.approx(c ** (p / (p - q)) * I1, rel=1e-8)
