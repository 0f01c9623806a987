"""Command-line runner: one subcommand per experiment, CSV results plus a manifest.

Exit status: 0 all gates passed, 1 a gate failed, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import (
    WindowError,
    blowup_report,
    bubble_pointwise_sup,
    pointwise_bound,
    rescale,
    vanishing_A_check,
)
from .bubble import (
    GridTooCoarse,
    QuadratureError,
    bubble_dirichlet_energy,
    bubble_eval,
    bubble_pde_residual,
    bubble_weighted_mass,
    residual_grid,
    unit_bubble,
    wide_flat_grid,
)
from .constants import (
    Params,
    bubble_scale_constant,
    critical_b,
    critical_exponent,
    k_opt,
    k_opt_inv,
)
from .expansion import (
    DEFAULT_LADDER,
    BracketNotFound,
    FitDegenerate,
    b0_search,
    expansion_fit,
)
from .geometry import flat_disk, round_sphere
from .radial import build_grid, grid_csv_text
from .solver import GridPolicy, SolverError, SolverOptions, minimize, sweep_alpha

log = logging.getLogger("hslab")

SUBCOMMANDS = ("constants", "bubble-check", "minimize", "sweep", "blowup", "expansion",
               "b0-search")
EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "n": 4,
    "s": 1.0,
    "alpha": 10.0,
    "alphas": "1,4,16,64,256",
    "model": "sphere",
    "r_max": None,
    "nodes": 4000,
    "grading": 3.0,
    "tol": 1e-8,
    "damping": 0.7,
    "max_iterations": 40000,
    "seed": None,
    "warm_start": True,
    "jobs": 1,
    "eps_ladder": ",".join(repr(f) for f in DEFAULT_LADDER),
    "B": None,
    "b0_tol": 1e-4,
    "out": "run",
    "plots": True,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: Params
    model: str
    r_max: float | None
    nodes: int
    grading: float
    solver: SolverOptions
    alphas: list
    warm_start: bool
    jobs: int
    eps_ladder: list
    B: list | None
    b0_tol: float
    out: Path
    plots: bool
    resolved: dict = field(default_factory=dict)

    def manifold(self):
        if self.model == "sphere":
            return round_sphere(self.params.n)
        radius = self.r_max
        if radius is None:
            radius = 1000.0 * bubble_scale_constant(self.params)
        return flat_disk(self.params.n, radius)


def _floats(text: str, key: str) -> list:
    text = str(text).strip()
    try:
        if text.startswith("geom:"):
            start, ratio, count = text[5:].split(":")
            return [float(start) * float(ratio) ** i for i in range(int(count))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None


def _bool(text, key):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def read_config_file(path) -> dict:
    """key = value lines; '#' starts a comment.  Keys use the long flag names."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"config file {path}: {exc.strerror}") from None
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hslab", description="Hardy-Sobolev numerical lab")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key = value file; command-line flags take precedence")
    ap.add_argument("--n", type=int)
    ap.add_argument("--s", type=float)
    ap.add_argument("--alpha", type=float, help="penalty for 'minimize'")
    ap.add_argument("--alphas", help="comma list or geom:start:ratio:count")
    ap.add_argument("--model", choices=("sphere", "flat"))
    ap.add_argument("--r-max", dest="r_max", type=float,
                    help="flat chart radius (default 1000 bubble scales)")
    ap.add_argument("--nodes", type=int)
    ap.add_argument("--grading", type=float)
    ap.add_argument("--tol", type=float, help="relative lambda change that stops the solver")
    ap.add_argument("--damping", type=float)
    ap.add_argument("--max-iterations", dest="max_iterations", type=int)
    ap.add_argument("--seed", choices=("bubble_seed", "constant_seed"))
    ap.add_argument("--no-warm-start", dest="warm_start", action="store_const", const=False)
    ap.add_argument("--jobs", type=int, help="worker processes for independent sweep points")
    ap.add_argument("--eps-ladder", dest="eps_ladder",
                    help="decreasing eps values as fractions of r_max")
    ap.add_argument("--B", help="comma list of B values for 'expansion' (default 0 and critical)")
    ap.add_argument("--b0-tol", dest="b0_tol", type=float)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve(ns: argparse.Namespace) -> RunConfig:
    merged = dict(DEFAULTS)
    if ns.config:
        merged.update(read_config_file(ns.config))
    for key in DEFAULTS:
        v = getattr(ns, key, None)
        if v is not None:
            merged[key] = v
    sub = ns.subcommand

    def num(key, kind):
        v = merged[key]
        if v is None:
            return None
        try:
            return kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected {kind.__name__}, got {v!r}") from None

    n, s = num("n", int), num("s", float)
    alpha = num("alpha", float) if sub == "minimize" else 0.0
    try:
        params = Params(n, s, alpha)
    except ValueError as exc:
        raise ConfigError(f"n/s/alpha: {exc}") from None
    model = str(merged["model"])
    if model not in ("sphere", "flat"):
        raise ConfigError(f"model: expected 'sphere' or 'flat', got {model!r}")
    seed = merged["seed"] or ("bubble_seed" if model == "flat" else "constant_seed")
    try:
        solver = SolverOptions(max_iterations=num("max_iterations", int),
                               tolerance=num("tol", float), damping=num("damping", float),
                               initial_profile=seed)
    except ValueError as exc:
        raise ConfigError(f"solver options: {exc}") from None
    nodes, grading = num("nodes", int), num("grading", float)
    if nodes < 16:
        raise ConfigError("nodes: need at least 16")
    if not grading > 0:
        raise ConfigError("grading: must be positive")
    jobs = num("jobs", int)
    if jobs < 1:
        raise ConfigError("jobs: must be >= 1")
    alphas = _floats(merged["alphas"], "alphas")
    if sub in ("sweep", "blowup"):
        if not alphas or any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigError("alphas: need a strictly increasing, nonempty list")
        if any(a < 0 for a in alphas):
            raise ConfigError("alphas: penalties must be >= 0")
    ladder = _floats(merged["eps_ladder"], "eps_ladder")
    if sub == "expansion":
        if len(ladder) < 4 or any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("eps_ladder: need >= 4 strictly decreasing fractions")
        if ladder[0] >= 0.1 or ladder[-1] <= 0:
            raise ConfigError("eps_ladder: fractions must lie in (0, 0.1)")
    B = None if merged["B"] is None else _floats(merged["B"], "B")
    r_max = num("r_max", float)
    if r_max is not None and not r_max > 0:
        raise ConfigError("r_max: must be positive")
    b0_tol = num("b0_tol", float)
    if not b0_tol > 0:
        raise ConfigError("b0_tol: must be positive")
    out = Path(str(merged["out"]))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"out: cannot create {out} ({exc.strerror})") from None
    resolved = {"subcommand": sub}
    resolved.update({k: merged[k] for k in DEFAULTS})
    resolved["seed"] = seed
    return RunConfig(sub, params, model, r_max, nodes, grading, solver, alphas,
                     _bool(merged["warm_start"], "warm_start"), jobs, ladder, B, b0_tol, out,
                     _bool(merged["plots"], "plots"), resolved)


def fmt(x) -> str:
    """Deterministic text for CSV cells: repr for floats, str otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")  # RFC 4180 line ends
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_bytes(buf.getvalue().encode("utf-8"))


class Gates:
    def __init__(self):
        self.items = []

    def check(self, name: str, value, threshold: str, ok: bool):
        self.items.append((name, value, threshold, bool(ok)))
        log.info("gate %-32s %s (%s) %s", name, fmt(value), threshold, "pass" if ok else "FAIL")

    @property
    def passed(self) -> bool:
        return all(ok for *_, ok in self.items)


def write_manifest(cfg: RunConfig, gates: Gates, status: str):
    import scipy

    lines = [f"hslab {__version__}", f"numpy {np.__version__}", f"scipy {scipy.__version__}",
             f"status {status}", "", "[config]"]
    lines += [f"{k} = {v}" for k, v in sorted(cfg.resolved.items())]
    lines += ["", "[gates]"]
    lines += [f"{name} = {fmt(v)} ; {thr} ; {'pass' if ok else 'fail'}"
              for name, v, thr, ok in gates.items]
    (cfg.out / "manifest.txt").write_text("\n".join(lines) + "\n")


SOLVER_COLUMNS = ["alpha", "lambda", "mu", "peak_radius", "l2_norm", "el_residual",
                  "iterations", "converged"]
REPORT_COLUMNS = ["sup_deviation", "concentration_tail", "pointwise_bound",
                  "peak_offset_ratio", "alpha_mu2"]


def _solver_row(r):
    return [r.alpha, r.lam, r.mu, r.peak_radius, r.l2_norm, r.el_residual, r.iterations,
            r.converged]


def _profile_name(alpha: float) -> str:
    return f"profile_{alpha!r}.csv"


def run_constants(cfg: RunConfig, gates: Gates):
    p = cfg.params
    row = [p.n, p.s, critical_exponent(p), k_opt(p), k_opt_inv(p), bubble_scale_constant(p)]
    write_csv(cfg.out / "results.csv", ["n", "s", "critical_exponent", "K", "K_inv", "k"], [row])
    print(f"2*(s) = {row[2]!r}\nK(n,s) = {row[3]!r}\n1/K = {row[4]!r}\nk = {row[5]!r}")


def run_bubble_check(cfg: RunConfig, gates: Gates):
    p = cfg.params
    b = unit_bubble(p)
    quad = wide_flat_grid(p, max(cfg.nodes, 4000), 1000.0, 3.0)
    mass = bubble_weighted_mass(b, quad)
    energy = bubble_dirichlet_energy(b, quad)
    rows = []
    res = []
    for count in (cfg.nodes // 4, cfg.nodes // 2, cfg.nodes):
        g = residual_grid(p, count)
        res.append(bubble_pde_residual(b, g))
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    kinv = k_opt_inv(p)
    rows.append(["mass", mass, 1.0, abs(mass - 1.0)])
    rows.append(["energy", energy, kinv, abs(energy / kinv - 1.0)])
    for c, r_ in zip((cfg.nodes // 4, cfg.nodes // 2, cfg.nodes), res):
        rows.append([f"residual_{c}", r_, 0.0, r_])
    write_csv(cfg.out / "results.csv", ["quantity", "value", "reference", "error"], rows)
    gates.check("mass_error", abs(mass - 1.0), "<= 1e-6", abs(mass - 1.0) <= 1e-6)
    gates.check("energy_rel_error", abs(energy / kinv - 1.0), "<= 1e-6",
                abs(energy / kinv - 1.0) <= 1e-6)
    gates.check("residual_order_min", min(orders), ">= 3", min(orders) >= 3.0)
    for row in rows:
        print(f"{row[0]:>16s}  {float(row[1])!r:>24}  err {float(row[3]):.3e}")
    if cfg.plots:
        from .plots import profile_figure

        r = quad.nodes
        profile_figure(cfg.out / "bubble.png", r, bubble_eval(b, r), f"bubble n={p.n} s={p.s}")


def run_minimize(cfg: RunConfig, gates: Gates):
    m = cfg.manifold()
    p = cfg.params
    grid = build_grid(m, p, cfg.nodes, cfg.grading)
    r = minimize(m, p, grid, cfg.solver)
    write_csv(cfg.out / "results.csv", SOLVER_COLUMNS, [_solver_row(r)])
    (cfg.out / _profile_name(r.alpha)).write_text(grid_csv_text(grid, r.u), newline="")
    kinv = k_opt_inv(p)
    print(f"lambda = {r.lam!r} (lambda K = {r.lam / kinv!r}), mu = {r.mu!r}, "
          f"iterations = {r.iterations}, status = {r.status}")
    gates.check("converged", r.converged, "true", r.converged)
    if r.lam >= kinv:
        log.warning("lambda >= 1/K: the discrete minimiser sits at or above the sharp level")
    if cfg.plots:
        from .plots import profile_figure

        profile_figure(cfg.out / "profile.png", grid.nodes, r.u.values,
                       f"{cfg.model} n={p.n} s={p.s} alpha={p.alpha:g}")


def _sweep(cfg: RunConfig):
    m = cfg.manifold()
    policy = GridPolicy(count=cfg.nodes, grading=cfg.grading)
    return sweep_alpha(m, cfg.params, cfg.alphas, policy, cfg.solver,
                       warm_start=cfg.warm_start, jobs=cfg.jobs)


def _reports(cfg, results):
    p = cfg.params
    reports = []
    for r in results:
        try:
            reports.append(blowup_report(r, p.with_alpha(r.alpha)) if r.converged else None)
        except (WindowError, ValueError) as exc:
            log.info("no blow-up report at alpha=%g: %s", r.alpha, exc)
            reports.append(None)
    return reports


def _write_sweep(cfg, results, reports):
    rows = []
    for r, rep in zip(results, reports):
        extra = ([rep.sup_deviation, rep.concentration_tail, rep.pointwise_bound,
                  rep.peak_offset_ratio, rep.alpha_mu2] if rep else [""] * 5)
        rows.append(_solver_row(r) + extra + [r.status])
    write_csv(cfg.out / "results.csv", SOLVER_COLUMNS + REPORT_COLUMNS + ["status"], rows)
    for r in results:
        if r.converged:
            (cfg.out / _profile_name(r.alpha)).write_text(grid_csv_text(r.grid, r.u), newline="")
    if cfg.plots:
        from .plots import rescaled_figure, sweep_figure

        ok = [r for r in results if r.converged]
        if ok:
            sweep_figure(cfg.out / "sweep.png", [r.alpha for r in ok], [r.lam for r in ok],
                         [r.mu for r in ok], k_opt_inv(cfg.params))
        curves = []
        for r, rep in zip(results, reports):
            if rep is not None:
                uh = rescale(r.u, r.mu, rep.window)
                curves.append((f"alpha={r.alpha:g}", uh.grid.nodes, uh.values))
        if curves:
            x = curves[0][1]
            rescaled_figure(cfg.out / "rescaled.png", curves, x,
                            bubble_eval(unit_bubble(cfg.params), x))


def run_sweep(cfg: RunConfig, gates: Gates):
    results = _sweep(cfg)
    reports = _reports(cfg, results)
    _write_sweep(cfg, results, reports)
    conv = all(r.converged for r in results)
    gates.check("all_converged", conv, "true", conv)
    lams = [r.lam for r in results]
    mus = [r.mu for r in results]
    gates.check("lambda_nondecreasing", min(np.diff(lams), default=0.0), ">= 0",
                all(b >= a for a, b in zip(lams, lams[1:])))
    gates.check("mu_decreasing", max(np.diff(mus), default=-1.0), "< 0",
                all(b < a for a, b in zip(mus, mus[1:])))
    for r in results:
        print(f"alpha={r.alpha:<8g} lambda K={r.lam / k_opt_inv(cfg.params):.8f} "
              f"mu={r.mu:.4e} it={r.iterations} {r.status}")
    return results, reports


def run_blowup(cfg: RunConfig, gates: Gates):
    results, reports = run_sweep(cfg, gates)
    p = cfg.params
    last = reports[-1]
    if last is None:
        raise SolverError("no blow-up report at the largest alpha")
    if len(results) >= 4:
        _, slope, vanishing = vanishing_A_check(results)
        gates.check("alpha_mu2_slope", slope, "< 0", vanishing)
    gates.check("sup_deviation_R5", last.sup_deviation, "<= 5e-2", last.sup_deviation <= 5e-2)
    gates.check("concentration_tail_R10", last.concentration_tail, "<= 0.05",
                last.concentration_tail <= 0.05)
    sup_ref = bubble_pointwise_sup(p)
    worst = max(pointwise_bound(r.u, p) for r in results if r.converged)
    gates.check("pointwise_bound_ratio", worst / sup_ref, "<= 2", worst <= 2.0 * sup_ref)


def run_expansion(cfg: RunConfig, gates: Gates):
    m = cfg.manifold()
    p = cfg.params
    kinv = k_opt_inv(p)
    scal = m.scalar_curvature_at_base
    bcrit = critical_b(p, scal) if p.n >= 4 else float("nan")
    B_values = cfg.B if cfg.B is not None else [0.0, 0.8 * bcrit, bcrit, 1.2 * bcrit]
    eps = [f * m.r_max for f in cfg.eps_ladder]
    rows, fit_rows, fits = [], [], []
    for B in B_values:
        fit = expansion_fit(m, p, B, eps)
        for e, th, v, d in fit.rows():
            rows.append([B, e, th, v, d])
        fit_rows.append([B, fit.fitted_coeff, fit.fitted_coeff / kinv, fit.fit_residual,
                         fit.trend_ok])
        fits.append((f"B={B:.4g}", fit.theta(np.array(eps)), np.array(fit.values) - kinv,
                     fit.fitted_coeff))
        print(f"B={B:.6g}  c={fit.fitted_coeff:.6e}  c K={fit.fitted_coeff / kinv:.4f}  "
              f"residual={fit.fit_residual:.3e}  trend {'ok' if fit.trend_ok else 'NOT shrinking'}")
    write_csv(cfg.out / "results.csv", ["B", "eps", "theta", "I_value", "I_minus_K_inv"], rows)
    write_csv(cfg.out / "fit.csv", ["B", "fitted_coeff", "fitted_coeff_times_K", "fit_residual",
                                    "trend_ok"], fit_rows)
    zero = [fr for fr in fit_rows if fr[0] == 0.0]
    if zero and scal > 0:
        gates.check("coeff_negative_at_B0", zero[0][1], "< 0", zero[0][1] < 0)
    if cfg.plots:
        from .plots import expansion_figure

        expansion_figure(cfg.out / "expansion.png", fits)


def run_b0_search(cfg: RunConfig, gates: Gates):
    m = cfg.manifold()
    p = cfg.params
    policy = GridPolicy(count=cfg.nodes, grading=cfg.grading)
    opts = SolverOptions(cfg.solver.max_iterations, cfg.solver.tolerance, cfg.solver.damping,
                         "constant_seed")
    est = b0_search(m, p, policy, cfg.b0_tol, opts=opts)
    bound = critical_b(p, m.scalar_curvature_at_base) if p.n >= 4 else 0.0
    write_csv(cfg.out / "results.csv",
              ["B_low", "B_high", "lambda_at_B", "iterations", "tol", "curvature_bound"],
              [[est.B_low, est.B_high, est.lambda_at_B, est.iterations, est.tol, bound]])
    write_csv(cfg.out / "history.csv", ["B", "lambda", "passed", "converged"],
              [list(h) for h in est.history])
    print(f"B0 in [{est.B_low!r}, {est.B_high!r}]; curvature bound {bound!r}")
    if p.n >= 4:
        gates.check("B_high_over_bound", est.B_high / bound if bound > 0 else float("inf"),
                    ">= 0.95", est.B_high >= 0.95 * bound)
    if cfg.plots:
        from .plots import b0_figure

        b0_figure(cfg.out / "b0_search.png", est.history, k_opt_inv(p), bound)


RUNNERS = {
    "constants": run_constants,
    "bubble-check": run_bubble_check,
    "minimize": run_minimize,
    "sweep": run_sweep,
    "blowup": run_blowup,
    "expansion": run_expansion,
    "b0-search": run_b0_search,
}

NUMERIC_ERRORS = (SolverError, QuadratureError, GridTooCoarse, BracketNotFound, FitDegenerate,
                  WindowError, FloatingPointError)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    gates = Gates()
    try:
        RUNNERS[cfg.subcommand](cfg, gates)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        write_manifest(cfg, gates, f"numeric-failure: {exc}")
        return EXIT_NUMERIC
    status = "pass" if gates.passed else "gate-failed"
    write_manifest(cfg, gates, status)
    return EXIT_OK if gates.passed else EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
