"""Command-line pipeline: plan -> solve -> compile -> evaluate, plus sweep.

Artifacts are JSON/CSV (UTF-8, LF, shortest round-trip floats) written
into the configured output directory, one per sweep entry.  Every
artifact records a hash of the configuration that produced it, and
later stages refuse inputs whose hash does not match.  Reruns are
byte-identical apart from the wall_ms timing column, and --parallel N
changes wall time only, never output bytes.

Exit codes: 0 success, 2 configuration or artifact mismatch, 3 numeric
failure during a run.
"""

import argparse
import hashlib
import json
import math
import multiprocessing
import sys
import time
from pathlib import Path

import numpy as np

from .errors import (
    error_decomposition,
    mc_l2_error,
    pointwise,
    rate_fit,
    weighted_sup_error,
)
from .fem import LognormalProblem, fem_solve, sine_family, solution_norm
from .indices import WeightModel, build_plan
from .lagrange import SparseInterpolant
from .network import (
    assemble_surrogate,
    bundle_from_dict,
    bundle_to_dict,
    compute_delta,
    fit_delta_K,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CSV_COLUMNS = ("xi", "n_solvers", "n_unique_points", "W", "L",
               "l2_error", "l2_stderr", "sup_error",
               "term1", "term2", "term3", "term4", "wall_ms")

_NUMERIC_ERRORS = (ArithmeticError, ValueError, RuntimeError,
                   np.linalg.LinAlgError)


class ConfigError(ValueError):
    """Invalid configuration or artifact; the message names the field."""


# ---------------------------------------------------------------------------
# configuration


def _expect(mapping, key, path, kinds, predicate=None, why=""):
    if key not in mapping:
        raise ConfigError(f"missing field {path}.{key}")
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"{path}.{key} has the wrong type")
    if predicate is not None and not predicate(value):
        raise ConfigError(f"{path}.{key} {why}")
    return value


def validate_config(raw):
    """Normalize a raw config dict, raising ConfigError with field paths."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = {}

    problem = _expect(raw, "problem", "", dict)
    mesh_n = _expect(problem, "mesh_n", "problem", int,
                     lambda v: v >= 3, "must be >= 3")
    f = problem.get("f", "one")
    if f != "one":
        raise ConfigError('problem.f only supports the preset "one"')
    psi = _expect(problem, "psi", "problem", dict)
    family = _expect(psi, "family", "problem.psi", str,
                     lambda v: v == "sine", 'must be "sine"')
    psi_c = _expect(psi, "c", "problem.psi", (int, float),
                    lambda v: v > 0, "must be positive")
    psi_alpha = _expect(psi, "alpha", "problem.psi", (int, float),
                        lambda v: v > 1, "must exceed 1")
    psi_dims = psi.get("dims")
    if psi_dims is not None and (isinstance(psi_dims, bool)
                                 or not isinstance(psi_dims, int)
                                 or psi_dims < 1):
        raise ConfigError("problem.psi.dims must be a positive integer")
    truth_factor = problem.get("truth_factor", 8)
    if isinstance(truth_factor, bool) or not isinstance(truth_factor, int) \
            or truth_factor < 2:
        raise ConfigError("problem.truth_factor must be an integer >= 2")
    cfg["problem"] = {"mesh_n": mesh_n, "f": "one",
                      "psi": {"family": family, "c": float(psi_c),
                              "alpha": float(psi_alpha), "dims": psi_dims},
                      "truth_factor": truth_factor}

    weights = _expect(raw, "weights", "", dict)
    q = _expect(weights, "q", "weights", (int, float),
                lambda v: 0 < v < 2, "must lie in (0, 2)")
    rho = weights.get("rho", [])
    if not isinstance(rho, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float))
            for v in rho):
        raise ConfigError("weights.rho must be a list of numbers")
    tail = weights.get("tail")
    if tail is not None:
        if (not isinstance(tail, list) or len(tail) != 2 or any(
                isinstance(v, bool) or not isinstance(v, (int, float))
                for v in tail)):
            raise ConfigError("weights.tail must be [c, r]")
        tail = [float(tail[0]), float(tail[1])]
    extra = {}
    for key in ("theta", "lam"):
        if weights.get(key) is not None:
            extra[key] = _expect(weights, key, "weights", (int, float),
                                 lambda v: v > 0, "must be positive")
    if weights.get("eta") is not None:
        extra["eta"] = _expect(weights, "eta", "weights", int,
                               lambda v: v >= 1, "must be >= 1")
    cfg["weights"] = {"q": float(q), "rho": [float(v) for v in rho],
                      "tail": tail, **extra}
    try:
        build_model(cfg)
    except ValueError as exc:
        raise ConfigError(f"weights: {exc}") from exc

    sweep = _expect(raw, "xi_sweep", "", list)
    if not sweep or any(isinstance(v, bool) or not isinstance(v, (int, float))
                        for v in sweep):
        raise ConfigError("xi_sweep must be a non-empty list of numbers")
    xis = [float(v) for v in sweep]
    if any(v <= 1.0 for v in xis):
        raise ConfigError("xi_sweep entries must all exceed 1")
    if any(b <= a for a, b in zip(xis, xis[1:])):
        raise ConfigError("xi_sweep must be strictly increasing")
    cfg["xi_sweep"] = xis

    for key, low in (("delta_mode", None), ("omega_mode", None)):
        mode = raw.get(key, "auto")
        if mode == "auto":
            cfg[key] = "auto"
        elif isinstance(mode, (int, float)) and not isinstance(mode, bool):
            cfg[key] = float(mode)
        else:
            raise ConfigError(f'{key} must be "auto" or a number')
    if cfg["delta_mode"] != "auto" and not 0 < cfg["delta_mode"] < 1:
        raise ConfigError("delta_mode must lie in (0, 1) when fixed")
    if cfg["omega_mode"] != "auto" and cfg["omega_mode"] < 1:
        raise ConfigError("omega_mode must be >= 1 when fixed")

    mc = _expect(raw, "mc", "", dict)
    n_samples = _expect(mc, "n_samples", "mc", int,
                        lambda v: v >= 16, "must be >= 16")
    seed = _expect(mc, "seed", "mc", int)
    tail_dims = mc.get("tail_dims", 8)
    if isinstance(tail_dims, bool) or not isinstance(tail_dims, int) \
            or tail_dims < 0:
        raise ConfigError("mc.tail_dims must be an integer >= 0")
    cfg["mc"] = {"n_samples": n_samples, "seed": seed,
                 "tail_dims": tail_dims}

    output = _expect(raw, "output", "", str, lambda v: bool(v),
                     "must be a non-empty path")
    cfg["output"] = output
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(raw)


def config_hash(cfg):
    """Hash of everything except the output location."""
    payload = {k: v for k, v in cfg.items() if k != "output"}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def build_model(cfg):
    w = cfg["weights"]
    extra = {k: w[k] for k in ("theta", "lam", "eta") if k in w}
    tail = tuple(w["tail"]) if w.get("tail") is not None else None
    return WeightModel(q=w["q"], rho=tuple(w["rho"]), tail=tail, **extra)


def build_problem(cfg, dims, factor=1):
    p = cfg["problem"]
    n_terms = p["psi"]["dims"] if p["psi"]["dims"] is not None else dims
    mesh_n = factor * (p["mesh_n"] + 1) - 1 if factor > 1 else p["mesh_n"]
    psi = sine_family(p["psi"]["c"], p["psi"]["alpha"], n_terms)
    return LognormalProblem(mesh_n, f="one", psi=psi)


# ---------------------------------------------------------------------------
# schedules


def make_schedules(cfg, model):
    """(omega_of_xi, delta_of(plan, omega)) per the configured modes.

    "auto" fits the free constants on the smallest sweep entries: the
    box grows linearly from omega = 2 at the first xi, and the accuracy
    exponent is calibrated from the node growth of the two smallest
    plans.
    """
    xis = cfg["xi_sweep"]
    if cfg["omega_mode"] == "auto":
        k_omega = 2.0 / xis[0]

        def omega_of(xi):
            return float(max(1, math.floor(k_omega * xi)))
    else:
        def omega_of(xi):
            return float(cfg["omega_mode"])

    if cfg["delta_mode"] == "auto":
        max_degree = max(build_plan(xi, model).m1 for xi in xis[:2])
        k_delta = fit_delta_K(max_degree)

        def delta_of(plan, omega):
            return compute_delta(plan, omega, K=k_delta)
    else:
        def delta_of(plan, omega):
            return float(cfg["delta_mode"])

    return omega_of, delta_of


# ---------------------------------------------------------------------------
# artifact I/O


def _out_dir(cfg, override):
    out = Path(override) if override else Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    path.write_text(
        json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8")


def _read_artifact(path, kind, cfg):
    try:
        art = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(
            f"missing artifact {path}; run the earlier stages first "
            f"({exc})") from exc
    if art.get("kind") != kind:
        raise ConfigError(f"{path} is not a {kind} artifact")
    have, want = art.get("config_hash"), config_hash(cfg)
    if have != want:
        raise ConfigError(
            f"{path} was produced by config hash {have}, but the current "
            f"config hashes to {want}; regenerate the artifact")
    return art


def _fmt_cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path, rows):
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row.get(c)) for c in CSV_COLUMNS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _plan_stats(plan):
    return {"n_indices": len(plan.indices), "n_triples": plan.n_triples,
            "n_points": plan.n_points, "m1": plan.m1,
            "m_active": plan.m_active}


# ---------------------------------------------------------------------------
# FEM solves (optionally parallel)

_WORKER_PROBLEM = None


def _solve_worker_init(mesh_n, c, alpha, n_terms):
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = LognormalProblem(
        mesh_n, f="one", psi=sine_family(c, alpha, n_terms))


def _solve_worker(row):
    return fem_solve(_WORKER_PROBLEM, row).values


def solve_at_points(problem, pts, parallel, cfg, dims):
    """Full nodal solution vectors at each row of pts, in row order."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if parallel > 1 and pts.shape[0] > 1:
        p = cfg["problem"]
        n_terms = p["psi"]["dims"] if p["psi"]["dims"] is not None else dims
        init_args = (problem.mesh_n, p["psi"]["c"], p["psi"]["alpha"],
                     n_terms)
        with multiprocessing.Pool(parallel, initializer=_solve_worker_init,
                                  initargs=init_args) as pool:
            rows = pool.map(_solve_worker, list(pts))
    else:
        rows = [fem_solve(problem, row).values for row in pts]
    return np.stack(rows)


class _SolutionCache:
    """Memoized point -> nodal-values map for a fixed problem."""

    def __init__(self, problem, restrict=1):
        self.problem = problem
        self.restrict = restrict
        self._store = {}

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        key = y.tobytes()
        got = self._store.get(key)
        if got is None:
            got = fem_solve(self.problem, y).values[::self.restrict]
            self._store[key] = got
        return got


# ---------------------------------------------------------------------------
# pipeline stages (pure compute; the cmd_* wrappers do file I/O)


def _evaluate_plan_row(cfg, plan, point_values, mode, omega, delta, seed,
                       dims_eval):
    """One report row (without wall_ms) for a solved plan."""
    problem = build_problem(cfg, dims_eval)
    factor = cfg["problem"]["truth_factor"]
    truth = _SolutionCache(build_problem(cfg, dims_eval, factor=factor),
                           restrict=factor)
    h = problem.h
    norm = lambda v: solution_norm(v, h)
    n = cfg["mc"]["n_samples"]

    row = {"xi": plan.xi, "n_solvers": plan.n_triples,
           "n_unique_points": plan.n_points}
    if mode == "network":
        bundle, net = assemble_surrogate(plan, point_values, delta, omega)
        coarse = _SolutionCache(problem)
        dec = error_decomposition(
            coarse, plan, omega, delta, dims_eval, n, seed,
            point_values=point_values, surrogate=(bundle, net), norm=norm)
        l2, l2se = mc_l2_error(pointwise(truth), net, dims_eval, n, seed,
                               norm=norm)
        sup = weighted_sup_error(pointwise(truth), net, dims_eval, n, seed,
                                 omega=omega, norm=norm)
        row.update({"W": bundle.W, "L": bundle.L, "l2_error": l2,
                    "l2_stderr": l2se, "sup_error": sup,
                    "term1": dec.term1, "term2": dec.term2,
                    "term3": dec.term3, "term4": dec.term4})
    else:
        interp = SparseInterpolant.from_point_values(plan, point_values)
        l2, l2se = mc_l2_error(pointwise(truth), interp, dims_eval, n, seed,
                               norm=norm)
        sup = weighted_sup_error(pointwise(truth), interp, dims_eval, n,
                                 seed, omega=omega, norm=norm)
        row.update({"W": None, "L": None, "l2_error": l2, "l2_stderr": l2se,
                    "sup_error": sup, "term1": None, "term2": None,
                    "term3": None, "term4": None})
    return row


def _eval_dims(cfg, model):
    """Active coordinates of the largest plan in the sweep + tail dims."""
    largest = build_plan(cfg["xi_sweep"][-1], model)
    return max(largest.m_active, 1) + cfg["mc"]["tail_dims"], largest


# ---------------------------------------------------------------------------
# subcommands


def cmd_plan(cfg, out_dir, args):
    model = build_model(cfg)
    h = config_hash(cfg)
    for i, xi in enumerate(cfg["xi_sweep"]):
        plan = build_plan(xi, model)
        stats = _plan_stats(plan)
        art = {"kind": "plan", "config_hash": h, "index": i,
               "xi": float(xi), "stats": stats}
        _write_json(out_dir / f"plan_{i:02d}.json", art)
        print(f"plan {i:02d}: xi={xi:g} |Lambda|={stats['n_indices']} "
              f"triples={stats['n_triples']} |G|={stats['n_points']} "
              f"m1={stats['m1']} m={stats['m_active']}")
    return EXIT_OK


def _load_plan(cfg, out_dir, index, model):
    art = _read_artifact(out_dir / f"plan_{index:02d}.json", "plan", cfg)
    xi = art["xi"]
    if index >= len(cfg["xi_sweep"]) or cfg["xi_sweep"][index] != xi:
        raise ConfigError(f"plan_{index:02d}.json has xi={xi}, which is not "
                          f"entry {index} of xi_sweep")
    plan = build_plan(xi, model)
    if _plan_stats(plan) != art["stats"]:
        raise ConfigError(f"plan_{index:02d}.json stats do not match the "
                          "rebuilt plan; regenerate the artifact")
    return plan


def cmd_solve(cfg, out_dir, args):
    model = build_model(cfg)
    h = config_hash(cfg)
    for i in range(len(cfg["xi_sweep"])):
        plan = _load_plan(cfg, out_dir, i, model)
        gdims = max(plan.m_active, 1)
        problem = build_problem(cfg, gdims)
        pts = plan.point_array(gdims)
        values = solve_at_points(problem, pts, args.parallel, cfg, gdims)
        art = {"kind": "samples", "config_hash": h, "index": i,
               "xi": float(plan.xi), "mesh_n": problem.mesh_n,
               "n_points": plan.n_points, "values": values.tolist()}
        _write_json(out_dir / f"samples_{i:02d}.json", art)
        if args.dump_solutions:
            header = "x," + ",".join(
                f"point_{j}" for j in range(values.shape[0]))
            cols = np.column_stack([problem.nodes, values.T])
            lines = [header] + [",".join(repr(float(v)) for v in r)
                                for r in cols]
            (out_dir / f"solutions_{i:02d}.csv").write_text(
                "\n".join(lines) + "\n", encoding="utf-8")
        print(f"solve {i:02d}: xi={plan.xi:g} solves={plan.n_points} "
              f"mesh_n={problem.mesh_n}")
    return EXIT_OK


def _load_samples(cfg, out_dir, index, plan):
    art = _read_artifact(out_dir / f"samples_{index:02d}.json", "samples",
                         cfg)
    values = np.asarray(art["values"], dtype=float)
    if values.shape[0] != plan.n_points:
        raise ConfigError(f"samples_{index:02d}.json holds "
                          f"{values.shape[0]} rows for {plan.n_points} "
                          "grid points; regenerate the artifact")
    return values


def cmd_compile(cfg, out_dir, args):
    model = build_model(cfg)
    h = config_hash(cfg)
    omega_of, delta_of = make_schedules(cfg, model)
    for i in range(len(cfg["xi_sweep"])):
        plan = _load_plan(cfg, out_dir, i, model)
        values = _load_samples(cfg, out_dir, i, plan)
        omega = omega_of(plan.xi)
        delta = delta_of(plan, omega)
        bundle, _ = assemble_surrogate(plan, values, delta, omega)
        art = {"kind": "bundle", "config_hash": h, "index": i,
               "xi": float(plan.xi), "omega": omega, "delta": delta,
               "input_dim": max(plan.m_active, 1),
               "signs": [float(t.sign) for t in plan.triples],
               "point_ref": [int(t.point_ref) for t in plan.triples],
               "samples": values.tolist(),
               "bundle": bundle_to_dict(bundle)}
        _write_json(out_dir / f"bundle_{i:02d}.json", art)
        print(f"compile {i:02d}: xi={plan.xi:g} W={bundle.W} L={bundle.L} "
              f"delta={delta:g} omega={omega:g}")
    return EXIT_OK


def cmd_evaluate(cfg, out_dir, args):
    model = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg["mc"]["seed"]
    dims_eval, _ = _eval_dims(cfg, model)
    i = args.index
    if not 0 <= i < len(cfg["xi_sweep"]):
        raise ConfigError(f"--index {i} is outside the xi_sweep")
    plan = _load_plan(cfg, out_dir, i, model)
    values = _load_samples(cfg, out_dir, i, plan)
    omega_of, delta_of = make_schedules(cfg, model)
    omega = omega_of(plan.xi)
    delta = delta_of(plan, omega)
    start = time.perf_counter()
    row = _evaluate_plan_row(cfg, plan, values, args.mode, omega, delta,
                             seed, dims_eval)
    row["wall_ms"] = int(round((time.perf_counter() - start) * 1000))
    path = out_dir / f"report_{i:02d}_{args.mode}.csv"
    _write_csv(path, [row])
    print(f"evaluate {i:02d} ({args.mode}): l2={row['l2_error']:.6g} "
          f"sup={row['sup_error']:.6g}")
    return EXIT_OK


def cmd_sweep(cfg, out_dir, args):
    model = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg["mc"]["seed"]
    h = config_hash(cfg)
    dims_eval, largest = _eval_dims(cfg, model)
    omega_of, delta_of = make_schedules(cfg, model)
    problem = build_problem(cfg, dims_eval)
    factor = cfg["problem"]["truth_factor"]
    truth = _SolutionCache(build_problem(cfg, dims_eval, factor=factor),
                           restrict=factor)
    coarse = _SolutionCache(problem)
    norm = lambda v: solution_norm(v, problem.h)
    n = cfg["mc"]["n_samples"]

    rows, failures = [], []
    for i, xi in enumerate(cfg["xi_sweep"]):
        start = time.perf_counter()
        row = {"xi": float(xi)}
        try:
            plan = build_plan(xi, model) if xi != largest.xi else largest
            row.update({"n_solvers": plan.n_triples,
                        "n_unique_points": plan.n_points})
            omega = omega_of(xi)
            delta = delta_of(plan, omega)
            gdims = max(plan.m_active, 1)
            gpts = plan.point_array(gdims)
            padded = np.zeros((gpts.shape[0], dims_eval))
            padded[:, :gdims] = gpts
            if args.parallel > 1:
                fresh = [r for r in padded
                         if r.tobytes() not in coarse._store]
                if fresh:
                    solved = solve_at_points(problem, np.stack(fresh),
                                             args.parallel, cfg, dims_eval)
                    for r, v in zip(fresh, solved):
                        coarse._store[r.tobytes()] = v
            point_values = np.stack([coarse(r) for r in padded])
            bundle, net = assemble_surrogate(plan, point_values, delta,
                                             omega)
            dec = error_decomposition(
                coarse, plan, omega, delta, dims_eval, n, seed,
                point_values=point_values, surrogate=(bundle, net),
                norm=norm)
            l2, l2se = mc_l2_error(pointwise(truth), net, dims_eval, n,
                                   seed, norm=norm)
            sup = weighted_sup_error(pointwise(truth), net, dims_eval, n,
                                     seed, omega=omega, norm=norm)
            row.update({"W": bundle.W, "L": bundle.L, "l2_error": l2,
                        "l2_stderr": l2se, "sup_error": sup,
                        "term1": dec.term1, "term2": dec.term2,
                        "term3": dec.term3, "term4": dec.term4})
            print(f"sweep {i:02d}: xi={xi:g} |G|={plan.n_points} "
                  f"W={bundle.W} l2={l2:.6g}")
        except _NUMERIC_ERRORS as exc:
            failures.append(f"xi={xi:g}: {exc}")
            print(f"sweep {i:02d}: xi={xi:g} FAILED: {exc}",
                  file=sys.stderr)
        row["wall_ms"] = int(round((time.perf_counter() - start) * 1000))
        rows.append(row)

    _write_csv(out_dir / "results.csv", rows)

    fits = {"config_hash": h}
    good = [r for r in rows if r.get("l2_error") is not None]
    for key, xcol in (("l2_vs_points", "n_unique_points"),
                      ("l2_vs_size", "W")):
        try:
            fit = rate_fit([(r[xcol], r["l2_error"]) for r in good])
            fits[key] = {"slope": fit.slope, "intercept": fit.intercept,
                         "r_squared": fit.r_squared,
                         "points": [list(p) for p in fit.points]}
        except ValueError as exc:
            fits[key] = {"error": str(exc)}
    if failures:
        fits["failures"] = failures
    _write_json(out_dir / "fits.json", fits)
    for key in ("l2_vs_points", "l2_vs_size"):
        if "slope" in fits[key]:
            print(f"{key}: slope={fits[key]['slope']:.4f} "
                  f"r2={fits[key]['r_squared']:.4f}")
        else:
            print(f"{key}: not fitted ({fits[key]['error']})")
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_net_eval(args):
    try:
        art = json.loads(Path(args.bundle).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read bundle {args.bundle}: {exc}") from exc
    if art.get("kind") != "bundle":
        raise ConfigError(f"{args.bundle} is not a bundle artifact")
    bundle = bundle_from_dict(art["bundle"])
    signs = np.asarray(art["signs"], dtype=float)
    samples = np.asarray(art["samples"], dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    samples = samples[np.asarray(art["point_ref"], dtype=int)]
    dim = int(art["input_dim"])

    pts = np.loadtxt(args.points, delimiter=",", ndmin=2, dtype=float)
    if pts.shape[1] < dim:
        raise ConfigError(f"points have {pts.shape[1]} coordinates; the "
                          f"bundle needs {dim}")
    pts = pts[:, :dim]
    out = np.zeros((pts.shape[0], samples.shape[1]))
    for t in range(len(bundle.networks)):
        phi = bundle.networks[t].eval_batch(pts)[:, 0]
        out += (signs[t] * phi)[:, None] * samples[t][None, :]
    lines = [",".join(repr(float(v)) for v in row) for row in out]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"net eval: {pts.shape[0]} points -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hermnet",
        description="Sparse-grid collocation surrogates: plan, solve, "
                    "compile, evaluate, sweep.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="config JSON path")
    common.add_argument("--out", default=None,
                        help="override the output directory")
    common.add_argument("--parallel", type=int, default=1, metavar="N",
                        help="parallel FEM solves (default 1)")
    common.add_argument("--seed", type=int, default=None,
                        help="override mc.seed")

    sub.add_parser("plan", parents=[common],
                   help="build index sets and grids for every xi")
    p_solve = sub.add_parser("solve", parents=[common],
                             help="run the FEM at every unique grid point")
    p_solve.add_argument("--dump-solutions", action="store_true",
                         help="also write per-point solution CSVs")
    sub.add_parser("compile", parents=[common],
                   help="compile sampled plans into network bundles")
    p_eval = sub.add_parser("evaluate", parents=[common],
                            help="measure errors for one sweep entry")
    p_eval.add_argument("--mode", choices=("interpolant", "network"),
                        required=True)
    p_eval.add_argument("--index", type=int, default=0,
                        help="xi_sweep entry to evaluate (default 0)")
    sub.add_parser("sweep", parents=[common],
                   help="full pipeline over xi_sweep, in memory")

    p_net = sub.add_parser("net", help="operations on compiled bundles")
    net_sub = p_net.add_subparsers(dest="net_command", required=True)
    p_ne = net_sub.add_parser("eval", help="evaluate a bundle at points")
    p_ne.add_argument("--bundle", required=True, help="bundle JSON path")
    p_ne.add_argument("--points", required=True,
                      help="CSV of evaluation points, one per line")
    p_ne.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "net":
            return cmd_net_eval(args)
        cfg = load_config(args.config)
        out_dir = _out_dir(cfg, args.out)
        handler = {"plan": cmd_plan, "solve": cmd_solve,
                   "compile": cmd_compile, "evaluate": cmd_evaluate,
                   "sweep": cmd_sweep}[args.command]
        return handler(cfg, out_dir, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
