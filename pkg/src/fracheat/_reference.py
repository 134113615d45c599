"""Brute-force references for the step-function potentials: ball
membership is tested straight from the definition on a radius grid."""
import numpy as np


def in_parabolic_ball(r, t0, x0, s, y, alpha, dist):
    """(s, y) in B_r(t0, x0) straight from the definition; r is an array."""
    a = r ** (2 * alpha)
    return (a < s - t0) & (s - t0 < 2 * a) & (dist(x0, y) < r)


def wolff_rgrid(atoms, alpha, p, Q, t, x, dist, n=100_000):
    """int_0^inf (nu(B_r(t, x)) / r^Q)^{p'-1} dr / r on a log r-grid.

    The grid (n points over the relevant range) is merged with every
    radius at which some membership condition can switch, so the counted
    mass is constant on each cell; the mass is read off at the cell
    midpoint by testing ball membership directly.
    """
    g = 1 / (p - 1)
    e = Q * g
    cands = []
    for s, y, m in atoms:
        if s > t:
            cands += [dist(x, y), ((s - t) / 2) ** (1 / (2 * alpha)),
                      (s - t) ** (1 / (2 * alpha))]
    cands = [c for c in cands if c > 0]
    if not cands:
        return 0.0
    lo, hi = min(cands) / 2, max(cands) * 2
    r = np.union1d(np.geomspace(lo, hi, n), cands)
    mid = np.sqrt(r[:-1] * r[1:])
    mass = np.zeros(len(mid))
    for s, y, m in atoms:
        mass += m * in_parabolic_ball(mid, t, x, s, y, alpha, dist)
    cell = (r[:-1] ** -e - r[1:] ** -e) / e
    return float(np.sum(mass ** g * cell))


def maximal_rgrid(atoms, alpha, Q, x, dist, n=10_000, r_range=(1e-3, 1e3)):
    """sup_r r^{-Q} nu(B_r(r^{2 alpha}, x)) scanned over a log r-grid."""
    r = np.geomspace(*r_range, n)
    mass = np.zeros(n)
    for s, y, m in atoms:
        mass += m * in_parabolic_ball(r, r ** (2 * alpha), x, s, y, alpha, dist)
    return float(np.max(mass / r ** Q))
