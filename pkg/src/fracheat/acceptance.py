"""Acceptance suite: each criterion runs at its stated tolerance and returns
a CriterionResult. ``run_acceptance`` collects them; the ``report`` CLI
subcommand and tests/test_acceptance.py both go through it."""
import time
from dataclasses import dataclass, field

import numpy as np

from .frackernel import DiscreteMeasure, FracHeatOperator, poisson_kernel
from .space import HeatKernelModel, build_grid, euclidean, heisenberg_h1

CHRIST_DELTA = 0.2   # (e) holds with a0 = (1 - delta)/4 on the test clouds


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2} {self.name}: {self.summary}"

    def record(self):
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "summary": self.summary, "details": _plain(self.details)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _op1(R, h, alpha=0.5):
    sp = euclidean(1)
    return FracHeatOperator(alpha, sp, grid=build_grid(sp, R, h))


def _scale(h, refine):
    return h / 2 if refine else h


# ---------------------------------------------------------------------------

def criterion_1(seed=0, refine=False):
    errs = {}
    t0 = time.perf_counter()
    for n in (1, 3):
        op = FracHeatOperator(0.5, euclidean(n))
        rng = np.random.default_rng(seed + n)
        t = rng.uniform(0.1, 10, 200)
        d = rng.uniform(0, 10, 200)
        errs[n] = float(np.max(np.abs(op.kernel_radial(t, d) / poisson_kernel(n, t, d) - 1)))
    sec = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-6 and sec <= 10
    return CriterionResult(1, "Poisson oracle", ok,
                           f"max rel err R1 {errs[1]:.2e}, R3 {errs[3]:.2e} (tol 1e-6), {sec:.1f}s (limit 10s)",
                           {"max_rel_error": errs, "seconds": sec})


def criterion_2(seed=0, refine=False):
    from .subordinator import SubordinatorDensity
    worst = 0.0
    for a in (0.3, 0.5, 0.7):
        d = SubordinatorDensity(a)
        for t in (0.5, 1.0, 2.0):
            for lam in (0.0, 0.5, 1.0, 4.0):
                worst = max(worst, float(d.laplace_check(t, lam)))
    return CriterionResult(2, "Subordinator Laplace identity", worst <= 1e-6,
                           f"max residual {worst:.2e} (tol 1e-6)", {"max_residual": worst})


def criterion_3(seed=0, refine=False):
    from .estimates import verify_lower_envelope, verify_upper_envelope
    op = FracHeatOperator(0.5, euclidean(1))
    pd = 16 if refine else 8
    up = verify_upper_envelope(op, per_decade=pd)
    lo = verify_lower_envelope(op, per_decade=pd)
    eu, el = abs(up.sup - 2 / np.pi), abs(lo.inf - 1 / np.pi)
    ok = eu <= 1e-3 and el <= 1e-3 and up.refine_delta <= 1e-3 and lo.refine_delta <= 1e-3
    return CriterionResult(3, "Envelope constants", ok,
                           f"sup {up.sup:.6f} (2/pi {2 / np.pi:.6f}), inf {lo.inf:.6f} "
                           f"(1/pi {1 / np.pi:.6f}), refine deltas {up.refine_delta:.1e}/{lo.refine_delta:.1e}",
                           {"sup": up.sup, "inf": lo.inf, "refine_delta_upper": up.refine_delta,
                            "refine_delta_lower": lo.refine_delta})


def criterion_4(seed=0, refine=False):
    from .estimates import verify_smoothing
    op = _op1(64.0, _scale(1 / 64, refine))
    s0 = verify_smoothing(op, 1, np.inf).slope
    s1 = verify_smoothing(op, 1, np.inf, theta=1.0).slope
    ok = abs(s0 + 1) <= 0.03 and abs(s1 + 2) <= 0.1
    return CriterionResult(4, "Smoothing slope", ok,
                           f"slope {s0:.4f} (-1 +-3%), theta=1 slope {s1:.4f} (-2 +-5%)",
                           {"slope": s0, "slope_theta1": s1})


def criterion_5(seed=0, refine=False):
    from .evolution import duhamel_residual
    op = _op1(64.0, _scale(1 / 32, refine))
    x = op.grid.nodes[:, 0]
    phi = np.exp(-x ** 2)
    r = duhamel_residual(op, phi, lambda t: np.exp(-t) * np.exp(-(x - 1) ** 2), [0.5, 1.0, 2.0])
    return CriterionResult(5, "Duhamel residual", r.max_rel <= 1e-3,
                           f"max interior relative residual {r.max_rel:.2e} (tol 1e-3)",
                           {"max_rel": r.max_rel, "per_time": r.per_time})


def criterion_6(seed=0, refine=False):
    from .capacity import CapacityInstance, active_set_oracle, duality_check
    op = _op1(3.875, 0.125)
    rng = np.random.default_rng(seed)
    gaps, ext, ident, orc = [], [], [], []
    for i in range(20):
        p = [1.5, 2.0, 3.0][i % 3]
        k = int(rng.integers(1, 9))
        inst = CapacityInstance.from_operator(op, p, rng.uniform(0.1, 2, k), rng.uniform(-3, 3, k))
        r = duality_check(inst)
        gaps.append(r.gap)
        ext.append(r.extremal_residual)
        ident.append(r.identity_residual)
        if p == 2.0:
            v, _ = active_set_oracle(inst)
            orc.append(abs(r.dual - v) / abs(v))
    ok = max(gaps) <= 1e-4 and max(ext) <= 1e-3 and max(orc) <= 1e-8
    return CriterionResult(6, "Capacity duality", ok,
                           f"max gap {max(gaps):.1e} (1e-4), extremal identity {max(ext):.1e} (1e-3), "
                           f"p=2 vs oracle {max(orc):.1e} (1e-8)",
                           {"gaps": gaps, "extremal": ext, "identity": ident, "oracle": orc, "nodes": len(op.grid)})


def criterion_7(seed=0, refine=False):
    from .capacity import spherical_capacity_scan
    r_list = 2.0 ** np.arange(-3, 3)
    hs = (1 / 16, 1 / 32) if not refine else (1 / 32, 1 / 64)
    reps = [spherical_capacity_scan(_op1(64.0, h), 2.0, r_list) for h in hs]
    slopes = [r.slope for r in reps]
    lc = [r.lower_constant for r in reps]
    uc = [r.upper_constant for r in reps]
    dl, du = abs(lc[1] / lc[0] - 1), abs(uc[1] / uc[0] - 1)
    ok = all(0.85 <= s <= 1.15 for s in slopes) and dl <= 0.25 and du <= 0.25
    return CriterionResult(7, "Spherical capacity", ok,
                           f"slopes {slopes[0]:.4f}/{slopes[1]:.4f} in [0.85,1.15], sandwich "
                           f"constants change {dl:.1e}/{du:.1e} (<=25%)",
                           {"slopes": slopes, "lower_constants": lc, "upper_constants": uc,
                            "spacings": hs})


def criterion_8(seed=0, refine=False):
    from .capacity import LevelSetLattice, strong_type_check
    from .evolution import random_bumps
    ratios = []
    hs = (1 / 8, 1 / 16) if not refine else (1 / 16, 1 / 32)
    for h in hs:
        op = _op1(32.0, h)
        F = random_bumps(op.grid.nodes, np.random.default_rng(seed), 50, signed=False)
        lat = LevelSetLattice(op, np.geomspace(0.05, 5, 6), stride=round(0.5 / h))
        ratios.append(strong_type_check(op, 2.0, F, lattice=lat).max_ratio)
    change = abs(ratios[1] / ratios[0] - 1)
    ok = bool(np.all(np.isfinite(ratios))) and change <= 0.25
    return CriterionResult(8, "Capacitary strong type", ok,
                           f"max ratio {ratios[0]:.4f} -> {ratios[1]:.4f} under refinement, "
                           f"change {change:.1%} (<=25%)", {"max_ratio": ratios, "spacings": hs})


def criterion_9(seed=0, refine=False):
    from .dyadic import build_christ_tree, christ_properties
    rows = {}
    ok = True
    for name, sp in (("R2", euclidean(2)), ("H1", heisenberg_h1())):
        for n in (500, 2000):
            X = np.random.default_rng(seed + n).uniform(-1, 1, (n, sp.dim))
            t0 = time.perf_counter()
            tr = build_christ_tree(X, sp, CHRIST_DELTA, -1, 3)
            sec = time.perf_counter() - t0
            r = christ_properties(tr)
            good = r.passed and (n < 2000 or sec <= 5.0)
            ok &= good
            rows[f"{name}_{n}"] = {"a": r.partition, "b": r.nested, "c": r.unique_parent,
                                   "d": r.diameter, "e": r.contains_ball, "C1": r.C1,
                                   "eta": r.eta, "C2": r.C2, "build_seconds": sec}
    worst = max(v["build_seconds"] for v in rows.values())
    return CriterionResult(9, "Christ tree", bool(ok),
                           f"(a)-(e) {'hold' if ok else 'FAIL'} on 4 clouds (delta={CHRIST_DELTA}), "
                           f"slowest build {worst:.2f}s (limit 5s)", rows)


def criterion_10(seed=0, refine=False):
    from ._reference import wolff_rgrid
    from .dyadic import (random_diffuse_measure, verify_wolff_equivalence,
                         wolff_potential_continuous)
    spaces = [euclidean(1), euclidean(2), heisenberg_h1()]
    errs = []
    for i in range(30):
        rng = np.random.default_rng(1000 * (seed + 1) + i)
        sp = spaces[i % 3]
        a = [0.3, 0.5, 0.7][(i // 3) % 3]
        p = [1.5, 2.0, 3.0][(i // 9) % 3]
        n = 1 if i < 10 else int(rng.integers(2, 7))
        nu = DiscreteMeasure(rng.uniform(0.5, 3.0, n), rng.uniform(-1, 1, (n, sp.dim)),
                             rng.uniform(0.1, 2.0, n))
        t, x = rng.uniform(0, 0.6), rng.uniform(-0.5, 0.5, sp.dim)
        v = wolff_potential_continuous(nu, a, p, sp.Q, t, x, sp)[0]
        ref = wolff_rgrid(list(zip(nu.times, nu.points, nu.masses)), a, p, sp.Q, t, x, sp.distance)
        errs.append(abs(v - ref) / abs(ref) if ref else abs(v))
    sp = heisenberg_h1()
    op = FracHeatOperator(0.5, sp, HeatKernelModel("model_gauss_gauge"),
                          grid=build_grid(sp, 3.0, _scale(0.3, refine)))
    bands = {"literal": [], "anchored": []}
    for s in (seed, seed + 1):
        rng = np.random.default_rng(s)
        nus = [random_diffuse_measure(sp, rng) for _ in range(30)]
        rep = verify_wolff_equivalence(op, nus, 2.0, ("literal", "anchored"))
        for k in bands:
            bands[k].append(rep[k].band)

    def good(b):
        return max(b) <= 50 and abs(b[1] / b[0] - 1) <= 0.25

    exact_ok = max(errs) <= 1e-8
    ok = exact_ok and good(bands["literal"])
    return CriterionResult(10, "Wolff exactness and equivalence", ok,
                           f"r-grid max rel err {max(errs):.1e} (1e-8); band c2/c1 literal "
                           f"{bands['literal'][0]:.3g}/{bands['literal'][1]:.3g}, anchored "
                           f"{bands['anchored'][0]:.3g}/{bands['anchored'][1]:.3g} (<=50, +-25%)",
                           {"rgrid_errors": errs, "bands": bands, "exact_ok": exact_ok,
                            "anchored_ok": good(bands["anchored"])})


def criterion_11(seed=0, refine=False):
    from .dyadic import trace_condition_wolff
    op = _op1(16.0, _scale(1 / 8, refine))
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(10):
        n = int(rng.integers(2, 13))
        nu = DiscreteMeasure(rng.uniform(0.2, 3, n), rng.uniform(-3, 3, (n, 1)),
                             rng.uniform(0.1, 2, n))
        r = trace_condition_wolff(op, 3.0, 2.0, nu, trials=8, seed=i)
        rows.append({"atoms": n, "wolff": r.integral, "kappa": r.kappa_integral,
                     "agree": r.agree, "heuristic": r.heuristic})
    ok = all(r["agree"] and not r["heuristic"] for r in rows)
    return CriterionResult(11, "Trace cross-validation (upper sector)", ok,
                           f"finiteness verdicts agree on {sum(r['agree'] for r in rows)}/10 "
                           f"fixtures (p=3, q=2, <=12 atoms)", {"fixtures": rows})


def criterion_12(seed=0, refine=False):
    import tempfile
    from .cli import determinism_check
    with tempfile.TemporaryDirectory() as tmp:
        res = determinism_check(tmp, seed=seed)
    ok = all(res.values())
    return CriterionResult(12, "Determinism", ok,
                           f"byte-identical outputs for {sum(res.values())}/{len(res)} subcommands",
                           {"subcommands": res})


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_acceptance(numbers=None, seed=0, refine=False, echo=None):
    out = []
    for n in (numbers or sorted(CRITERIA)):
        t0 = time.perf_counter()
        r = CRITERIA[int(n)](seed=seed, refine=refine)
        r.seconds = time.perf_counter() - t0
        if echo:
            echo(r.line())
        out.append(r)
    return out
