"""Batch driver: ``python -m fracheat <subcommand> --config run.yaml``.

Exit status: 0 success, 1 failed acceptance row, 2 config error,
3 numerical error (accuracy target missed, solver did not converge).
All output goes to the configured output directory; CSV and JSON are
written deterministically (sorted keys, repr floats, no timings).
"""
import argparse
import csv
import io
import json
import os
import sys

import numpy as np
import yaml

from .exceptions import (AccuracyError, InfeasibleError, InputError, NonConvergenceError,
                         PreconditionError)

SUBCOMMANDS = ("kernel", "bounds", "solve", "capacity", "trace", "dyadic", "report")

# leaf types: "int", "float", "str", "list", "bool"; dicts nest
SCHEMA = {
    "seed": "int",
    "space": {"kind": "str", "n": "int", "gamma": "float"},
    "grid": {"radius": "float", "spacing": "float"},
    "operator": {"alpha": "float", "model": "str", "C": "float"},
    "output": {"dir": "str"},
    "kernel": {"t": "list", "d": "list"},
    "bounds": {"envelopes": "list", "t_range": "list", "d_range": "list",
               "per_decade": "int"},
    "solve": {"triplet": {"q": "float", "p": "float", "r": "float"}, "times": "list",
              "source": {"kind": "str"}, "initial": {"kind": "str"}},
    "capacity": {"p": "float", "points": "str", "r_list": "list", "tol": "float"},
    "trace": {"p": "float", "q": "float", "measure": "str", "trials": "int"},
    "dyadic": {"points": "str", "cloud": {"n": "int"}, "delta": "float", "k_min": "int",
               "k_max": "int", "measure": "str", "p": "float", "slab": "str"},
    "report": {"criteria": "list"},
}

_COMMON = ("space.kind", "operator.alpha")
_GRID = ("grid.radius", "grid.spacing")
REQUIRED = {
    "kernel": _COMMON + ("kernel.t", "kernel.d"),
    "bounds": _COMMON,
    "solve": _COMMON + _GRID + ("solve.triplet.q", "solve.triplet.p", "solve.triplet.r",
                                "solve.times", "solve.source.kind"),
    "capacity": _COMMON + _GRID + ("capacity.p",),
    "trace": _COMMON + _GRID + ("trace.p", "trace.q", "trace.measure"),
    "dyadic": _COMMON + ("dyadic.delta", "dyadic.k_min", "dyadic.k_max"),
    "report": (),
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config

def _node_lines(node, prefix, out):
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _node_lines(v, key, out)


def load_config(path):
    """Parsed config plus the line of every key (for error messages)."""
    try:
        with open(path) as fh:
            text = fh.read()
        node = yaml.compose(text)
        data = yaml.safe_load(text) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    lines = {}
    _node_lines(node, "", lines)
    return data, lines


_TYPES = {"int": (int,), "float": (int, float), "str": (str,), "list": (list,), "bool": (bool,)}


def _check(data, schema, prefix, lines):
    for k, v in data.items():
        key = f"{prefix}.{k}" if prefix else str(k)
        where = f" (line {lines[key]})" if key in lines else ""
        if k not in schema:
            raise ConfigError(f"unknown key '{key}'{where}")
        sub = schema[k]
        if isinstance(sub, dict):
            if not isinstance(v, dict):
                raise ConfigError(f"key '{key}'{where} must be a section")
            _check(v, sub, key, lines)
        elif isinstance(v, bool) and sub != "bool" or not isinstance(v, _TYPES[sub]):
            raise ConfigError(f"key '{key}'{where} must be of type {sub}")


def _get(cfg, dotted, default=None):
    cur = cfg
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return default
        cur = cur[part]
    return cur


def validate(cfg, sub, lines=None):
    lines = lines or {}
    _check(cfg, SCHEMA, "", lines)
    for key in REQUIRED[sub]:
        if _get(cfg, key) is None:
            raise ConfigError(f"missing key '{key}' required by '{sub}'")
    if sub == "capacity" and _get(cfg, "capacity.points") is None and _get(cfg, "capacity.r_list") is None:
        raise ConfigError("missing key 'capacity.points' (or 'capacity.r_list') required by 'capacity'")
    if sub == "dyadic" and _get(cfg, "dyadic.points") is None and _get(cfg, "dyadic.cloud.n") is None:
        raise ConfigError("missing key 'dyadic.points' (or 'dyadic.cloud.n') required by 'dyadic'")


# ---------------------------------------------------------------------------
# builders and writers

def _space(cfg):
    from .space import euclidean, heisenberg_h1, weighted_euclidean
    kind = _get(cfg, "space.kind")
    n = _get(cfg, "space.n", 1)
    if kind == "euclidean":
        return euclidean(n)
    if kind == "weighted_euclidean":
        return weighted_euclidean(n, _get(cfg, "space.gamma", 0.5))
    if kind == "heisenberg_h1":
        return heisenberg_h1()
    raise ConfigError(f"unknown space.kind {kind!r}")


def _operator(cfg, refine, need_grid=True):
    from .frackernel import FracHeatOperator
    from .space import HeatKernelModel, build_grid
    sp = _space(cfg)
    default = "exact_gaussian" if sp.kind == "euclidean" else "model_gauss_gauge"
    model = HeatKernelModel(_get(cfg, "operator.model", default), C=_get(cfg, "operator.C", 0.25))
    grid = None
    if need_grid:
        h = float(_get(cfg, "grid.spacing"))
        grid = build_grid(sp, float(_get(cfg, "grid.radius")), h / 2 if refine else h)
    return FracHeatOperator(float(_get(cfg, "operator.alpha")), sp, model, grid=grid)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _jsonable(x):
    from .acceptance import _plain
    x = _plain(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_jsonable(v) for v in x]
    return x


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_measure(path, dim):
    """Discrete measure from CSV with columns t, coordinates..., mass."""
    from .frackernel import DiscreteMeasure
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise ConfigError(f"cannot read measure {path}: {e}")
    if not rows:
        raise ConfigError(f"measure file {path} is empty")
    head = [h.strip() for h in rows[0]]
    if head[0] != "t" or head[-1] != "mass" or len(head) != dim + 2:
        raise ConfigError(f"measure file {path} needs columns t, {dim} coordinate(s), mass")
    try:
        a = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, dim + 2)
    except ValueError as e:
        raise ConfigError(f"measure file {path}: {e}")
    return DiscreteMeasure(a[:, 0], a[:, 1:-1], a[:, -1])


def read_points(path, dim):
    """Point cloud from CSV: a header row, then dim coordinates per row
    (a leading t column, if present, is dropped)."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as e:
        raise ConfigError(f"cannot read points {path}: {e}")
    a = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if a.ndim != 2 or a.shape[1] not in (dim, dim + 1, dim + 2):
        raise ConfigError(f"points file {path} needs {dim} coordinate column(s)")
    return a


def _resolve(cfg_dir, p):
    return p if os.path.isabs(p) else os.path.join(cfg_dir, p)


# ---------------------------------------------------------------------------
# subcommands

def cmd_kernel(cfg, out, rng, refine, cfg_dir):
    from .estimates import _evaluator
    op = _operator(cfg, refine, need_grid=False)
    a, bs = op.alpha, op.space.beta_star
    K = _evaluator(op, "K")
    rows = []
    for t in map(float, _get(cfg, "kernel.t")):
        for d in map(float, _get(cfg, "kernel.d")):
            k = float(K(t, d))
            env = t / (t ** (1 / (2 * a)) + d) ** (bs + 2 * a)
            rows.append((a, t, d, k, env, k / env))
    write_csv(os.path.join(out, "kernel.csv"), ["alpha", "t", "d", "K", "envelope", "ratio"], rows)
    return 0


def cmd_bounds(cfg, out, rng, refine, cfg_dir):
    from .estimates import (verify_lower_envelope, verify_time_derivative_bound,
                            verify_upper_envelope)
    op = _operator(cfg, refine, need_grid=False)
    fns = {"upper": verify_upper_envelope, "lower": verify_lower_envelope,
           "time_derivative": verify_time_derivative_bound}
    names = _get(cfg, "bounds.envelopes", ["upper", "lower", "time_derivative"])
    kw = {"per_decade": _get(cfg, "bounds.per_decade", 8) * (2 if refine else 1)}
    if _get(cfg, "bounds.t_range"):
        kw["t_range"] = tuple(map(float, _get(cfg, "bounds.t_range")))
    if _get(cfg, "bounds.d_range"):
        kw["d_range"] = tuple(map(float, _get(cfg, "bounds.d_range")))
    rows = []
    for n in names:
        if n not in fns:
            raise ConfigError(f"unknown envelope {n!r} in 'bounds.envelopes'")
        r = fns[n](op, **kw).row()
        rows.append([r[c] for c in ("envelope_name", "sup", "inf", "argmax_t", "argmax_d",
                                    "refine_delta")])
    write_csv(os.path.join(out, "bounds.csv"),
              ["envelope_name", "sup", "inf", "argmax_t", "argmax_d", "refine_delta"], rows)
    return 0


def cmd_solve(cfg, out, rng, refine, cfg_dir):
    from .estimates import grid_norm
    from .evolution import admissible_triplet, solve, spacetime_norm
    op = _operator(cfg, refine)
    g = op.grid
    q, p, r = (float(_get(cfg, f"solve.triplet.{k}")) for k in "qpr")
    admissible_triplet(q, p, r, op.alpha, op.space.beta_star)
    times = np.asarray(_get(cfg, "solve.times"), dtype=float)
    x = g.nodes
    init = _get(cfg, "solve.initial.kind", "gaussian")
    if init == "gaussian":
        phi = np.exp(-op.space.norm(x) ** 2)
    elif init == "bumps":
        from .evolution import random_bumps
        phi = random_bumps(x, rng, 1, signed=False)[0]
    else:
        raise ConfigError(f"unknown solve.initial.kind {init!r}")
    kind = _get(cfg, "solve.source.kind")
    if kind == "none":
        f = np.zeros(len(g))
    elif kind == "gaussian":
        shifted = np.exp(-op.space.norm(x - np.eye(x.shape[1])[0]) ** 2)
        f = lambda tau: np.exp(-tau) * shifted
    else:
        raise ConfigError(f"unknown solve.source.kind {kind!r}")
    mode = "cell" if op._toeplitz_ok() else "nodal"
    u = solve(op, phi, f, times, mode=mode)
    rows = []
    for t, v in zip(u.times, u.values):
        for xi, vi in zip(x, v):
            rows.append((t, *xi, vi))
    write_csv(os.path.join(out, "slices.csv"),
              ["t"] + [f"x{i + 1}" for i in range(x.shape[1])] + ["u"], rows)
    norms = [("phi_Lr", grid_norm(phi, g.weights, r))]
    if len(times) > 1:
        norms.append(("u_Lq_Lp", float(spacetime_norm(u, q, p, g.weights))))
        norms.append(("ratio", norms[1][1] / norms[0][1]))
    for t, v in zip(u.times, u.values):
        norms.append((f"u_Lp_at_t={_fmt(float(t))}", grid_norm(v, g.weights, p)))
    write_csv(os.path.join(out, "norms.csv"), ["quantity", "value"], norms)
    return 0


def cmd_capacity(cfg, out, rng, refine, cfg_dir):
    from .capacity import CapacityInstance, capacity_dual, spherical_capacity_scan
    op = _operator(cfg, refine)
    p = float(_get(cfg, "capacity.p"))
    tol = float(_get(cfg, "capacity.tol", 1e-10))
    report = {}
    if _get(cfg, "capacity.points"):
        pts = read_measure(_resolve(cfg_dir, _get(cfg, "capacity.points")), op.space.dim)
        inst = CapacityInstance.from_operator(op, p, pts.times, pts.points)
        report["set"] = capacity_dual(inst, tol=tol).record()
    if _get(cfg, "capacity.r_list"):
        rep = spherical_capacity_scan(op, p, np.asarray(_get(cfg, "capacity.r_list"), float))
        report["spherical"] = {"r": rep.r, "capacity": rep.capacity, "slope": rep.slope,
                               "lower_constant": rep.lower_constant,
                               "upper_constant": rep.upper_constant}
    write_json(os.path.join(out, "capacity.json"), report)
    return 0


def cmd_trace(cfg, out, rng, refine, cfg_dir):
    from .capacity import kappa_table, trace_lower_sector, trace_upper_sector
    from .dyadic import trace_condition_wolff
    op = _operator(cfg, refine)
    p, q = float(_get(cfg, "trace.p")), float(_get(cfg, "trace.q"))
    nu = read_measure(_resolve(cfg_dir, _get(cfg, "trace.measure")), op.space.dim)
    trials = _get(cfg, "trace.trials", 30)
    seed = int(rng.integers(2 ** 31))
    table = kappa_table(nu, op, p)
    if q >= p:
        r = trace_lower_sector(op, p, q, nu, trials=trials, seed=seed, table=table)
        rep = {"sector": "lower", "kappa_sup": r.kappa_sup, "ball_sup": r.ball_sup,
               "embedding": r.embedding, "consistent": r.consistent, "heuristic": r.heuristic}
    else:
        r = trace_upper_sector(op, p, q, nu, trials=trials, seed=seed, table=table)
        w = trace_condition_wolff(op, p, q, nu, trials=trials, seed=seed, table=table)
        rep = {"sector": "upper", "kappa_integral": r.integral, "finite": r.finite,
               "embedding": r.embedding, "heuristic": r.heuristic, "wolff_integral": w.integral,
               "wolff_finite": w.finite, "agree": w.agree}
    rep["kappa"] = {"masses": table.masses, "capacities": table.capacities}
    write_json(os.path.join(out, "trace.json"), rep)
    return 0


def cmd_dyadic(cfg, out, rng, refine, cfg_dir):
    from .dyadic import (build_christ_tree, christ_properties, parabolic_maximal,
                         wolff_potential_anchored, wolff_potential_continuous,
                         wolff_potential_dyadic)
    sp = _space(cfg)
    alpha = float(_get(cfg, "operator.alpha"))
    if _get(cfg, "dyadic.points"):
        X = read_points(_resolve(cfg_dir, _get(cfg, "dyadic.points")), sp.dim)[:, -sp.dim:]
    else:
        X = rng.uniform(-1, 1, (int(_get(cfg, "dyadic.cloud.n")), sp.dim))
    k_max = int(_get(cfg, "dyadic.k_max")) + (1 if refine else 0)
    tr = build_christ_tree(X, sp, float(_get(cfg, "dyadic.delta")), int(_get(cfg, "dyadic.k_min")),
                           k_max, slab=_get(cfg, "dyadic.slab", "scaled"))
    write_json(os.path.join(out, "tree.json"), tr.to_dict())
    r = christ_properties(tr)
    write_json(os.path.join(out, "properties.json"),
               {"a": r.partition, "b": r.nested, "c": r.unique_parent, "d": r.diameter,
                "e": r.contains_ball, "parent_distance": r.parent_distance, "C1": r.C1,
                "C1_bound": r.C1_bound, "eta": r.eta, "C2": r.C2,
                "boundary_fraction": r.boundary_fraction, "t_values": r.t_values})
    if _get(cfg, "dyadic.measure"):
        nu = read_measure(_resolve(cfg_dir, _get(cfg, "dyadic.measure")), sp.dim)
        p = float(_get(cfg, "dyadic.p", 2.0))
        Q = sp.Q
        P = wolff_potential_continuous(nu, alpha, p, Q, nu.times, nu.points, sp)
        Pa = wolff_potential_anchored(nu, alpha, p, Q, nu.times, nu.points, sp)
        Pd = wolff_potential_dyadic(nu, tr, alpha, p, Q, nu.times, nu.points)
        M = parabolic_maximal(nu, alpha, Q, nu.points, sp)
        rows = [(t, *x, m, a, b, c, d) for t, x, m, a, b, c, d in
                zip(nu.times, nu.points, nu.masses, P, Pa, Pd, M)]
        write_csv(os.path.join(out, "potentials.csv"),
                  ["t"] + [f"x{i + 1}" for i in range(sp.dim)] +
                  ["mass", "wolff", "wolff_anchored", "wolff_dyadic", "maximal"], rows)
    return 0


def cmd_report(cfg, out, seed, refine, cfg_dir, echo=None):
    from .acceptance import run_acceptance
    res = run_acceptance(_get(cfg, "report.criteria"), seed=seed, refine=refine, echo=echo)
    write_json(os.path.join(out, "summary.json"),
               {"criteria": [r.record() for r in res], "passed": all(r.passed for r in res)})
    return 0 if all(r.passed for r in res) else 1


COMMANDS = {"kernel": cmd_kernel, "bounds": cmd_bounds, "solve": cmd_solve,
            "capacity": cmd_capacity, "trace": cmd_trace, "dyadic": cmd_dyadic,
            "report": cmd_report}


def run(sub, config_path, out=None, seed=None, refine=False, stderr=None):
    """Run one subcommand; returns the exit status."""
    stderr = stderr or sys.stderr
    try:
        cfg, lines = load_config(config_path)
        validate(cfg, sub, lines)
        if seed is not None:
            cfg["seed"] = int(seed)
        out = out or _get(cfg, "output.dir", "out")
        os.makedirs(out, exist_ok=True)
        cfg_dir = os.path.dirname(os.path.abspath(config_path))
        s = int(_get(cfg, "seed", 0))
        if sub == "report":
            return cmd_report(cfg, out, s, refine, cfg_dir,
                              echo=lambda m: print(m, file=stderr))
        return COMMANDS[sub](cfg, out, np.random.default_rng(s), refine, cfg_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=stderr)
        return 2
    except (InputError, InfeasibleError, PreconditionError) as e:
        print(f"input error: {e}", file=stderr)
        return 2
    except AccuracyError as e:
        print(f"accuracy error: {e} (achieved {e.achieved})", file=stderr)
        return 3
    except NonConvergenceError as e:
        print(f"no convergence: {e}", file=stderr)
        return 3


def main(argv=None):
    ap = argparse.ArgumentParser(prog="fracheat", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, metavar="PATH")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, metavar="N", help="overrides the config seed")
    ap.add_argument("--refine", action="store_true", help="halve all grid spacings")
    a = ap.parse_args(argv)
    return run(a.subcommand, a.config, a.out, a.seed, a.refine)


# ---------------------------------------------------------------------------
# determinism

def example_configs(root):
    """Small configs for every subcommand, written under ``root``."""
    os.makedirs(root, exist_ok=True)
    meas = os.path.join(root, "measure.csv")
    write_csv(meas, ["t", "x1", "mass"], [(0.5, 0.0, 1.0), (1.0, 0.3, 0.5), (1.6, -0.2, 0.8)])
    pts = os.path.join(root, "points.csv")
    write_csv(pts, ["x1", "x2"], np.random.default_rng(0).uniform(-1, 1, (60, 2)))
    meas2 = os.path.join(root, "measure2.csv")
    rng = np.random.default_rng(1)
    write_csv(meas2, ["t", "x1", "x2", "mass"],
              np.column_stack([rng.uniform(0.2, 2, 20), rng.uniform(-1, 1, (20, 2)),
                               rng.uniform(0.1, 1, 20)]))
    base = {"space": {"kind": "euclidean", "n": 1}, "operator": {"alpha": 0.5},
            "grid": {"radius": 8.0, "spacing": 0.25}}
    cfgs = {
        "kernel": {**base, "kernel": {"t": [0.5, 1.0, 2.0], "d": [0.0, 0.5, 1.0, 4.0]}},
        "bounds": {**base, "bounds": {"envelopes": ["upper", "lower"], "t_range": [0.1, 10],
                                      "d_range": [0.01, 100], "per_decade": 4}},
        "solve": {**base, "solve": {"triplet": {"q": 4, "p": 4, "r": 2}, "times": [0.5, 1.0, 2.0],
                                    "source": {"kind": "gaussian"}}},
        "capacity": {**base, "capacity": {"p": 2.0, "points": "measure.csv", "r_list": [0.5, 1.0]}},
        "trace": {**base, "trace": {"p": 3.0, "q": 2.0, "measure": "measure.csv", "trials": 4}},
        "dyadic": {"seed": 3, "space": {"kind": "euclidean", "n": 2}, "operator": {"alpha": 0.5},
                   "dyadic": {"points": "points.csv", "delta": 0.5, "k_min": -1, "k_max": 3,
                              "measure": "measure2.csv", "p": 2.0}},
        "report": {"report": {"criteria": [2]}},
    }
    paths = {}
    for sub, c in cfgs.items():
        paths[sub] = os.path.join(root, f"{sub}.yaml")
        with open(paths[sub], "w") as fh:
            yaml.safe_dump(c, fh, sort_keys=True)
    return paths


def _tree_bytes(d):
    out = {}
    for base, _, files in os.walk(d):
        for f in files:
            with open(os.path.join(base, f), "rb") as fh:
                out[os.path.relpath(os.path.join(base, f), d)] = fh.read()
    return out


def determinism_check(root, seed=0):
    """Run every subcommand twice on the example configs; True where the
    two output directories are byte-identical."""
    paths = example_configs(os.path.join(root, "configs"))
    res = {}
    devnull = io.StringIO()
    for sub, cfg in paths.items():
        outs = []
        for k in range(2):
            o = os.path.join(root, f"{sub}_{k}")
            code = run(sub, cfg, out=o, seed=seed, stderr=devnull)
            outs.append((code, _tree_bytes(o)))
        res[sub] = outs[0][0] == 0 and outs[0] == outs[1] and bool(outs[0][1])
    return res
