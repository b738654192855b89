"""Command-line experiment runner.

Every subcommand reads its parameters from built-in defaults, then an
optional ``--config`` file of ``key=value`` lines, then command-line flags
(later sources win). Results go under ``--out`` together with
``manifest.json``, which records the fully resolved configuration.

Exit codes: 0 success, 2 invalid input, 3 a check failed under ``--assert``.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, _backend
from .capacity import CapacityTheory, kmax_search, noise_variance_check, scaling_fit, theory_stats
from .clustering import ClusterProblem, clam_train, gaussian_blobs, kmeans_objective, lloyd
from .core import PatternMatrix, corrupt_state, make_rng, parallel_map, sample_binary_patterns
from .dynamics import DescentConfig, basin_labels, descend, grid_2d, retrieve, voronoi_labels
from .energies import (EnergySpec, Power, chn_spec, lse_spec, lsr_spec, parse_key_values, parse_separation,
                       scaled_gaussian_spec)
from .errors import AmkitError
from .hamux import ETWeights, TokenGrid, attention_energy_grad, et_step
from .io import ensure_dir, load_patterns, read_csv, save_bundle, save_patterns, write_csv, write_json
from .kernels import DistributedEnergy, FeatureMap, build_distributed, kernel_table, rff_map
from .memgen import PhaseThresholds, circle_dataset, circle_energy_exact, critical_beta, empirical_circle_energy, \
    find_minima, landscape
from .suite import FAMILIES, run_family

EXIT_OK, EXIT_INVALID, EXIT_ASSERT = 0, 2, 3


def _derive(seed: int, *keys: int) -> int:
    return int(make_rng(seed, *keys).integers(0, 2**63))


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


@dataclass
class Context:
    out: Path
    seed: int
    threads: int
    checks: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})


# subcommands -----------------------------------------------------------------------------

def _separation(token: str):
    token = token.strip()
    return Power(int(token)) if token.isdigit() else parse_separation(token)


def cmd_retrieve(c: dict, ctx: Context) -> None:
    F = _separation(c["model"])
    D, K, flips = c["D"], c["K"], c["flips"]

    def trial(t):
        P = sample_binary_patterns(D, K, _derive(ctx.seed, t, 0))
        target = t % K
        clean = P.column(target)
        start = corrupt_state(clean, flips, _derive(ctx.seed, t, 1))
        res = retrieve(P.data, start, F, _derive(ctx.seed, t, 2), c["max_sweeps"])
        return [t, target, bool(np.array_equal(res.state, clean)), res.sweeps, res.converged,
                int(np.sum(res.state != clean))]

    rows = parallel_map(trial, range(c["trials"]), ctx.threads)
    rate = float(np.mean([r[2] for r in rows])) if rows else 0.0
    write_csv(ctx.path("retrieve.csv"), ["trial", "target", "success", "sweeps", "converged", "hamming"], rows)
    write_json(ctx.path("retrieve.json"), {"success_rate": rate, "trials": c["trials"], "D": D, "K": K,
                                           "flips": flips, "model": c["model"]})
    ctx.check("success_rate", rate >= c["min_success"], f"{rate:.4f} >= {c['min_success']}")


def cmd_capacity(c: dict, ctx: Context) -> None:
    n = c["n"] if c["n"] == "exp" else int(c["n"])
    rows, points = [], []
    for D in _ints(c["dims"]):
        res = kmax_search(n, D, c["target_rate"], c["trials"], ctx.seed, ctx.threads)
        bound = theory_stats(CapacityTheory(n, max(res.k, 1), D, c["alpha"])).k_max_bound if n != "exp" else math.nan
        est = res.estimate
        rows.append([c["n"], D, res.k, est.trials, est.rate, est.confidence_halfwidth, res.k / D,
                     est.pattern_error_rate, bound])
        points.append((D, max(res.k, 1)))
    write_csv(ctx.path("capacity.csv"), ["n", "D", "K", "trials", "flip_rate", "ci_halfwidth", "k_over_D",
                                         "pattern_error_rate", "theory_bound"], rows)
    fit = {"points": points}
    if len(points) >= 3:
        sf = scaling_fit(points)
        fit.update(slope=sf.slope, intercept=sf.intercept)
        if n != "exp":
            fit["expected_slope"] = n - 1
            ctx.check("slope", abs(sf.slope - (n - 1)) <= c["slope_tol"],
                      f"{sf.slope:.4f} within {n - 1} +- {c['slope_tol']}")
    if n == 2:
        ratios = [r[6] for r in rows]
        ctx.check("k_over_D", all(c["ratio_lo"] <= r <= c["ratio_hi"] for r in ratios),
                  f"{[round(r, 4) for r in ratios]} in [{c['ratio_lo']}, {c['ratio_hi']}]")
    write_json(ctx.path("fit.json"), fit)


def cmd_scaling(c: dict, ctx: Context) -> None:
    rows = []
    for n in _ints(c["ns"]):
        nv = noise_variance_check(n, c["D"], c["K"], c["samples"], ctx.seed)
        th = theory_stats(CapacityTheory(n, c["K"], c["D"]))
        dev_theory = nv.empirical / nv.theory - 1.0
        dev_exact = nv.empirical / nv.exact - 1.0
        rows.append([n, c["D"], c["K"], c["samples"], nv.empirical, nv.theory, nv.exact, dev_theory, dev_exact,
                     th.p_error, th.k_max_bound])
        ctx.check(f"variance_n{n}", abs(dev_theory) <= c["tol"],
                  f"empirical/theory - 1 = {dev_theory:+.4f} (finite-size exact: {dev_exact:+.4f})")
    write_csv(ctx.path("scaling.csv"), ["n", "D", "K", "samples", "empirical_variance", "theory_variance",
                                        "exact_variance", "rel_dev_theory", "rel_dev_exact", "p_error",
                                        "k_max_bound"], rows)


def cmd_et_demo(c: dict, ctx: Context) -> None:
    N, D = c["N"], c["D"]
    if c["weights"]:
        w = ETWeights.from_bundle(c["weights"])
        D = w.WK.shape[2]
    else:
        w = ETWeights.random(D, c["Y"], c["H"], c["M"], _derive(ctx.seed, 0), c["weight_scale"], beta=c["beta"])
    rng = make_rng(ctx.seed, 1)
    tokens = rng.standard_normal((N, D))
    mask = rng.random(N) < c["mask_frac"]
    position = 0.1 * rng.standard_normal((N, D))
    final, trace = et_step(TokenGrid(tokens, mask), w, c["dt"], c["steps"], True, position)
    steps = np.diff(trace)
    monotone = bool(np.all(steps <= 0.0))
    H = w.WK.shape[1]
    zero = np.zeros_like(w.WK)
    e_zero = attention_energy_grad(w.norm.activation(final.tokens), zero, zero, w.beta)[0]
    closed = -(H * N / w.beta) * math.log(N - 1)
    write_csv(ctx.path("et_trace.csv"), ["step", "energy"], [[i, e] for i, e in enumerate(trace)])
    write_csv(ctx.path("tokens_final.csv"), [f"d{j}" for j in range(D)], final.tokens.tolist())
    save_bundle(ctx.path("weights.amb"), w.bundle())
    write_json(ctx.path("et.json"), {"initial_energy": trace[0], "final_energy": trace[-1], "monotone": monotone,
                                     "max_increase": float(steps.max()) if len(steps) else 0.0,
                                     "zero_weight_energy": e_zero, "zero_weight_closed_form": closed,
                                     "masked_tokens": int(mask.sum())})
    ctx.check("monotone", monotone, f"largest step change {float(steps.max()) if len(steps) else 0.0:.3g}")
    ctx.check("zero_weight", abs(e_zero - closed) <= 1e-10 * max(1.0, abs(closed)), f"{e_zero!r} vs {closed!r}")


def _family_spec(family: str, P: np.ndarray, beta: float) -> EnergySpec:
    table = {"lse": lambda: lse_spec(P, beta), "lsr": lambda: lsr_spec(P, beta), "chn": lambda: chn_spec(P),
             "scaled-gaussian": lambda: scaled_gaussian_spec(P, beta)}
    if family not in table:
        raise AmkitError(f"unknown family {family!r}; choose from {sorted(table)}")
    return table[family]()


def cmd_landscape(c: dict, ctx: Context) -> None:
    if c["spec"]:
        spec = EnergySpec.from_text(Path(c["spec"]).read_text(), Path(c["spec"]).parent)
    else:
        if c["patterns"]:
            P = load_patterns(c["patterns"]).data
        else:
            P = make_rng(ctx.seed).uniform(c["lo"], c["hi"], size=(2, c["K"]))
        spec = _family_spec(c["family"], P, c["beta"])
    if spec.D != 2:
        raise AmkitError("landscape needs 2-D patterns")
    region = ((c["lo"], c["lo"]), (c["hi"], c["hi"]))
    write_csv(ctx.path("landscape.csv"), ["x", "y", "energy"], landscape(spec, region, c["n"]).tolist())
    write_csv(ctx.path("patterns.csv"), ["x", "y"], spec.rows.tolist())
    if c["basins"]:
        grid = grid_2d(*region, c["n"])
        cfg = DescentConfig(step=c["step"], steps=c["steps"])
        bl = basin_labels(spec, grid, cfg, spec.patterns)
        vor = voronoi_labels(grid, spec.patterns)
        agree = float(np.mean(bl.labels == vor))
        write_csv(ctx.path("basins.csv"), ["x", "y", "label", "voronoi"],
                  [[g[0], g[1], int(a), int(b)] for g, a, b in zip(grid, bl.labels, vor)])
        write_json(ctx.path("basins.json"), {"agreement": agree,
                                             "nonconverged_fraction": float(1.0 - np.mean(bl.converged))})
        ctx.check("voronoi_agreement", agree >= c["min_agreement"], f"{agree:.6f} >= {c['min_agreement']}")


def cmd_phases(c: dict, ctx: Context) -> None:
    if c["dataset"] == "pair":
        data = np.array([[c["a"], 0.0], [-c["a"], 0.0]])
    elif c["dataset"] == "circle":
        data = circle_dataset(c["K"], ctx.seed)
    else:
        raise AmkitError("dataset must be 'pair' or 'circle'")
    th = PhaseThresholds(eps_mem=c["eps_mem"], eps_gen=c["eps_gen"], arc_flatness=c["arc_flatness"])
    cfg = DescentConfig(step=c["step"], steps=c["steps"])
    region = ((c["lo"], c["lo"]), (c["hi"], c["hi"]))
    beta_c = critical_beta(c["a"])
    rows, reports = [], {}
    for beta in _floats(c["betas"]):
        spec = scaled_gaussian_spec(data.T, beta)
        rep = find_minima(spec, region, c["grid_n"], cfg, thresholds=th)
        radii = np.asarray(rep.radii)
        rows.append([beta, rep.phase, len(rep.minima), float(np.max(np.abs(radii - 1.0))) if len(radii) else math.nan,
                     float(np.max(rep.distances)) if rep.distances else math.nan, rep.nonconverged_fraction])
        reports[repr(beta)] = rep.to_dict()
        if c["dataset"] == "pair":
            if beta < beta_c:
                at_origin = any(np.hypot(*m) < 1e-3 for m in rep.minima)
                ctx.check(f"spurious_midpoint_beta{beta}", at_origin and rep.phase == "spurious",
                          f"phase {rep.phase}, minima {rep.minima}")
            elif beta >= 10 * beta_c:
                ctx.check(f"memorization_beta{beta}", len(rep.minima) == 2 and rep.phase == "memorization",
                          f"phase {rep.phase}, {len(rep.minima)} minima")
        else:
            ok = len(radii) > 0 and bool(np.all(np.abs(radii - 1.0) < c["eps_gen"]))
            ctx.check(f"minima_on_circle_beta{beta}", ok, f"max |R-1| = {rows[-1][3]:.4g}")
    write_csv(ctx.path("phases.csv"), ["beta", "phase", "minima", "max_abs_r_minus_1", "max_dist_to_data",
                                       "nonconverged_fraction"], rows)
    write_json(ctx.path("phases.json"), {"critical_beta": beta_c, "reports": reports})
    if c["dataset"] == "circle":
        curve = []
        for beta in _floats(c["betas"]):
            for R in np.linspace(0.0, 2.0, 41):
                curve.append([beta, R, circle_energy_exact(R, beta),
                              empirical_circle_energy(data, np.array([R, 0.0]), beta)])
        write_csv(ctx.path("circle_energy.csv"), ["beta", "R", "exact", "empirical"], curve)


def cmd_cluster(c: dict, ctx: Context) -> None:
    if c["data"]:
        _, rows = read_csv(c["data"])
        X = np.asarray(rows, dtype=np.float64)
    else:
        means = np.asarray(_floats(c["means"])).reshape(-1, 2)
        X = gaussian_blobs(means, c["per_blob"], c["spread"], ctx.seed)
    pb = ClusterProblem(X, c["k"], c["beta"], c["eta"], c["T"], ctx.seed, c["lr"], c["epochs"], c["decay"],
                        c["masked"], c["keep_prob"])
    model = clam_train(pb)
    ref = lloyd(X, c["k"], ctx.seed, c["restarts"])
    obj = kmeans_objective(X, model.centers)
    ratio = obj / ref.objective if ref.objective > 0 else math.inf
    d = X.shape[1]
    write_csv(ctx.path("centers.csv"), [f"x{j}" for j in range(d)], model.centers.T.tolist())
    write_csv(ctx.path("lloyd_centers.csv"), [f"x{j}" for j in range(d)], ref.centers.T.tolist())
    write_csv(ctx.path("history.csv"), ["epoch", "loss"], [[i, v] for i, v in enumerate(model.history)])
    write_json(ctx.path("cluster.json"), {"clam_objective": obj, "lloyd_objective": ref.objective, "ratio": ratio,
                                          "points": X.shape[0], "dimension": d})
    ctx.check("objective_ratio", ratio <= c["max_ratio"], f"{ratio:.6f} <= {c['max_ratio']}")


def cmd_distributed(c: dict, ctx: Context) -> None:
    D, K, Y, beta = c["D"], c["K"], c["Y"], c["beta"]
    cfg = DescentConfig(step=c["step"], steps=c["steps"], stop_tol=c["stop_tol"])

    def trial(t):
        rng = make_rng(ctx.seed, 0, t)
        P = rng.standard_normal((D, K))
        fm = FeatureMap.create(D, Y, _derive(ctx.seed, 1, t), c["variant"])
        dm = build_distributed(P, beta, fm)
        target = t % K
        q = P[:, target] + c["noise"] * rng.standard_normal(D)
        try:
            end = descend(DistributedEnergy(dm, fm), q, cfg).final
        except AmkitError:
            return [t, target, math.inf, False]
        dist = float(np.linalg.norm(end - P[:, target]))
        return [t, target, dist, dist < c["radius"]]

    rows = parallel_map(trial, range(c["trials"]), ctx.threads)
    rate = float(np.mean([r[3] for r in rows])) if rows else 0.0
    write_csv(ctx.path("distributed.csv"), ["trial", "target", "distance", "success"], rows)

    sketch_fm = FeatureMap.create(D, Y, _derive(ctx.seed, 1, 0), c["variant"])
    sketch = build_distributed(make_rng(ctx.seed, 0, 0).standard_normal((D, K)), beta, sketch_fm)
    save_patterns(ctx.path("sketch.amk"), PatternMatrix(sketch.sketch[:, None], "real"))

    ladder_rows, medians = [], []
    prng = make_rng(ctx.seed, 2)
    A = c["pair_scale"] * prng.standard_normal((c["pairs"], D))
    B = c["pair_scale"] * prng.standard_normal((c["pairs"], D))
    exact = np.exp(-0.5 * np.sum((A - B) ** 2, axis=1))
    for Yl in _ints(c["ladder"]):
        errs = []
        for s in range(c["ladder_seeds"]):
            fm = FeatureMap.create(D, Yl, _derive(ctx.seed, 3, Yl, s), c["variant"])
            approx = np.sum(rff_map(A, fm) * rff_map(B, fm), axis=1)
            err = float(np.max(np.abs(approx - exact)))
            errs.append(err)
            ladder_rows.append([Yl, s, err])
        medians.append(float(np.median(errs)))
    write_csv(ctx.path("ladder.csv"), ["Y", "seed", "max_kernel_error"], ladder_rows)
    monotone = all(b < a for a, b in zip(medians, medians[1:]))
    write_json(ctx.path("distributed.json"), {"success_rate": rate, "ladder_medians": medians,
                                              "ladder_monotone": monotone, "sketch_length": sketch.sketch.size})
    ctx.check("retrieval", rate >= c["min_success"], f"{rate:.4f} >= {c['min_success']}")
    ctx.check("ladder_monotone", monotone, f"medians {medians}")


def cmd_kernel_table(c: dict, ctx: Context) -> None:
    table = kernel_table(c["K"])
    write_csv(ctx.path("kernels.csv"), ["name", "scale", "regularity", "efficiency", "h_star", "mise_at_h_star"],
              [[s.name, s.scale, s.regularity, s.efficiency, s.optimal_bandwidth, s.mise_at_optimum] for s in table])
    by = {s.name: s for s in table}
    ep = by["epanechnikov"]
    ctx.check("epanechnikov_moments", abs(ep.scale - 0.2) < 1e-8 and abs(ep.regularity - 0.6) < 1e-8,
              f"scale {ep.scale!r}, regularity {ep.regularity!r}")
    for name, target in (("gaussian", 0.951), ("uniform", 0.929)):
        eff = by[name].efficiency
        ctx.check(f"{name}_efficiency", abs(eff - target) <= 0.003, f"{100 * eff:.2f}% vs {100 * target:.1f}%")


def cmd_gradcheck(c: dict, ctx: Context) -> None:
    names = sorted(FAMILIES) if c["family"] == "all" else [f.strip() for f in c["family"].split(",")]
    unknown = [n for n in names if n not in FAMILIES]
    if unknown:
        raise AmkitError(f"unknown families {unknown}; choose from {sorted(FAMILIES)} or 'all'")
    rows, worst = [], {}
    for name in names:
        res = run_family(name, c["trials"], ctx.seed)
        rows.extend([r.family, r.trial, r.relative_error] for r in res)
        worst[name] = max((r.relative_error for r in res), default=0.0)
        ctx.check(name, worst[name] < c["tol"], f"max relative error {worst[name]:.3g} < {c['tol']}")
    write_csv(ctx.path("gradcheck.csv"), ["family", "trial", "relative_error"], rows)
    write_json(ctx.path("gradcheck.json"), {"max_relative_error": worst, "trials": c["trials"]})


@dataclass(frozen=True)
class Command:
    run: Callable[[dict, Context], None]
    defaults: dict
    help: str


COMMANDS: dict[str, Command] = {
    "retrieve": Command(cmd_retrieve, dict(model="exp", D=24, K=2000, flips=2, trials=200, max_sweeps=50,
                                           min_success=0.99),
                        "retrieve corrupted binary memories by asynchronous updates"),
    "capacity": Command(cmd_capacity, dict(n="2", dims="100,200,400", target_rate=0.01, trials=200, alpha=2.576,
                                           slope_tol=0.2, ratio_lo=0.08, ratio_hi=0.30),
                        "Monte Carlo capacity search and log-log scaling fit"),
    "scaling": Command(cmd_scaling, dict(ns="2,3", D=64, K=32, samples=10000, tol=0.05),
                       "crosstalk noise variance against the closed-form law"),
    "et-demo": Command(cmd_et_demo, dict(N=8, D=8, Y=4, H=2, M=16, steps=50, dt=0.1, beta=1.0, weight_scale=0.5,
                                         mask_frac=0.25, weights=""),
                       "energy transformer token dynamics with random or bundled weights"),
    "landscape": Command(cmd_landscape, dict(family="scaled-gaussian", K=3, beta=4.0, lo=-2.0, hi=2.0, n=101, patterns="",
                                             spec="", basins=False, step=0.5, steps=10, min_agreement=0.99),
                         "energy over a 2-D grid, optionally with basin labels"),
    "phases": Command(cmd_phases, dict(dataset="pair", K=1000, a=1.0, betas="0.25,5", grid_n=21, lo=-2.0, hi=2.0,
                                       step=0.25, steps=5000, eps_mem=0.05, eps_gen=0.05, arc_flatness=0.05),
                      "memorization / generalization phases of the 2-D toy model"),
    "cluster": Command(cmd_cluster, dict(data="", means="0,0,4,0,2,3.5", per_blob=100, spread=0.5, k=3, beta=1.0,
                                         eta=0.25, T=10, lr=0.5, epochs=200, decay=0.99, masked=False,
                                         keep_prob=0.8, restarts=10, max_ratio=1.05),
                       "memory-based clustering against Lloyd's algorithm"),
    "distributed": Command(cmd_distributed, dict(D=16, K=10, Y=8192, beta=4.0, trials=100, noise=0.05,
                                                 variant="cos-sin", step=0.125, steps=300, stop_tol=1e-8,
                                                 radius=0.1, min_success=0.9, ladder="256,1024,4096",
                                                 ladder_seeds=3, pairs=100, pair_scale=0.25),
                           "random-feature distributed memory retrieval and approximation ladder"),
    "kernel-table": Command(cmd_kernel_table, dict(K=1000), "KDE kernel statistics table"),
    "gradcheck": Command(cmd_gradcheck, dict(family="all", trials=50, tol=1e-6),
                         "analytic gradients against finite differences"),
}


def _coerce(value, like, key: str):
    if isinstance(like, bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise AmkitError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise AmkitError(f"{key}: expected {type(like).__name__}, got {value!r}") from None
    return str(value)


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amkit", description="Associative memory experiments.")
    parser.add_argument("--version", action="version", version=f"amkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, cmd in COMMANDS.items():
        p = sub.add_parser(name, help=cmd.help, description=cmd.help)
        p.add_argument("--out", default=None, help="output directory (default runs/<command>)")
        p.add_argument("--config", default=None, help="key=value file; flags override it")
        p.add_argument("--seed", default=None, help="master seed (default 0)")
        p.add_argument("--threads", default=None, help="worker threads (default AMKIT_THREADS or 1)")
        p.add_argument("--assert", dest="assert_", action="store_true", help="exit 3 when a check fails")
        for key, like in cmd.defaults.items():
            p.add_argument(_flag(key), dest=key, default=None, metavar=type(like).__name__.upper(),
                           help=f"default {like!r}")
    return parser


def resolve(command: str, flags: dict, config_text: str | None) -> dict:
    """Merge defaults, config file and flags; unknown config keys are rejected."""
    cmd = COMMANDS[command]
    allowed = dict(cmd.defaults, seed=0, threads=0)
    resolved = dict(allowed)
    if config_text is not None:
        for raw_key, value in parse_key_values(config_text).items():
            key = raw_key.replace("-", "_")
            if key not in allowed:
                raise AmkitError(f"unknown config key {raw_key!r} for {command}")
            resolved[key] = _coerce(value, allowed[key], key)
    for key, value in flags.items():
        if value is not None:
            resolved[key] = _coerce(value, allowed[key], key)
    return resolved


def _threads(value: int) -> int:
    if value and value > 0:
        return value
    env = os.environ.get("AMKIT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise AmkitError(f"AMKIT_THREADS must be an integer, got {env!r}") from None
    return 1


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INVALID
    command = ns.command
    cmd = COMMANDS[command]
    flags = {k: getattr(ns, k) for k in cmd.defaults}
    flags.update(seed=ns.seed, threads=ns.threads)
    try:
        text = Path(ns.config).read_text() if ns.config else None
        cfg = resolve(command, flags, text)
        out = ensure_dir(ns.out or Path("runs") / command)
        ctx = Context(out, cfg["seed"], _threads(cfg["threads"]))
        params = {k: cfg[k] for k in cmd.defaults}
        cmd.run(params, ctx)
    except (AmkitError, ValueError, OSError) as exc:
        print(f"amkit {command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rerun = ["amkit", command, "--seed", str(ctx.seed)]
    for k, v in params.items():
        rerun += [_flag(k), str(int(v)) if isinstance(v, bool) else repr(v) if isinstance(v, float) else str(v)]
    write_json(out / "manifest.json", {"command": command, "config": params, "seed": ctx.seed,
                                       "threads": ctx.threads, "backend": _backend.NAME, "version": __version__,
                                       "outputs": sorted(ctx.outputs), "checks": ctx.checks, "rerun": rerun})
    failed = [ch for ch in ctx.checks if not ch["passed"]]
    for ch in ctx.checks:
        print(f"{'PASS' if ch['passed'] else 'FAIL'} {command}.{ch['name']}: {ch['detail']}")
    print(f"wrote {len(ctx.outputs) + 1} files to {out}")
    if ns.assert_ and failed:
        return EXIT_ASSERT
    return EXIT_OK


def main() -> None:
    sys.exit(run())
