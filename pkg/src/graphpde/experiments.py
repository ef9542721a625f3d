"""Quantitative studies: consistency, convergence, evolution, alpha scaling.

All experiments derive per-trial random streams from one master seed through
``numpy.random.SeedSequence`` spawning keyed by (row, trial), so reports are
reproducible row for row regardless of execution order or worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from graphpde.continuum import (
    GridField,
    interpolate,
    solve_pde_2nd,
    solve_pde_time,
    time_step_bound,
)
from graphpde.errors import ConfigurationError
from graphpde.geometry import torus_distance
from graphpde.graph import build_rdgg
from graphpde.kernels import DriftSpec, KernelSpec
from graphpde.pagerank import PageRankConfig, evolve_surfer, solve_pagerank

TWO_PI = 2.0 * np.pi

H_RULES = {
    "log-sqrt": lambda n: np.log(n) * n ** -0.5,
    "two-cbrt": lambda n: 2.0 * n ** (-1.0 / 3.0),
    "quarter": lambda n: n ** -0.25,
}

#: §-style preset: (n values, {rule: alpha prefactor C in alpha = C h^2})
FIG1_NS = (2500, 10_000, 40_000)
FIG1_RULE_C = {"log-sqrt": 30.0, "two-cbrt": 20.0, "quarter": 10.0}


def fit_power_law(xs, ys):
    """Least squares on log-transformed data: y ~ a * x^p.

    Returns (exponent, prefactor, rms residual of the log fit).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2:
        raise ValueError("need at least 2 points")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    p, loga = np.polyfit(lx, ly, 1)
    resid = ly - (loga + p * lx)
    return float(p), float(np.exp(loga)), float(np.sqrt(np.mean(resid**2)))


@dataclass
class ConsistencyStats:
    """Discrepancy between the discrete operator and its continuum expansion."""

    function: str
    n: int
    h: float
    eps: float
    mean_abs: float
    max_abs: float
    mean_scaled_2nd: float   # mean_abs / (eps + h^2)
    mean_abs_1st: float      # against the first-order (advection-only) form
    mean_scaled_1st: float   # mean_abs_1st / eps (inf when eps = 0)


def consistency_check(graph, kernel, drift, density, test_functions):
    """Compare (d_x / (rho n h^d)) L_n phi against the continuum expansion
    -rho^-2 div(rho^2 b phi) eps + (sigma/2) rho^-2 div(rho^2 grad phi) h^2
    at every node, for each analytic test function."""
    if not graph.params.get("identity_B", True):
        raise ConfigurationError("consistency requires identity B")
    if graph.points is None:
        raise ValueError("graph must carry its sample points")
    pts = graph.points
    n = graph.n
    h = float(graph.params["h"])
    eps = float(graph.params["eps"])
    d = pts.shape[1]
    rho = np.asarray(density.rho(pts), dtype=float)
    glog = density.grad_log(pts)
    bvals = drift.eval_b(pts)
    div_b = np.asarray(drift.div(pts), dtype=float)
    w_field = div_b + 2.0 * np.einsum("mi,mi->m", glog, bvals)
    scale = rho * n * h**d

    results = []
    for idx, phi in enumerate(test_functions):
        name = getattr(phi, "name", f"phi{idx}")
        vals = phi.value(pts)
        grad = phi.grad(pts)
        lap = phi.laplacian(pts)
        lhs = (graph.Wt @ vals) / scale - graph.degrees * vals / scale
        adv = vals * w_field + np.einsum("mi,mi->m", grad, bvals)
        dif = 0.5 * lap + np.einsum("mi,mi->m", glog, grad)
        rhs_2nd = -adv * eps + kernel.sigma_phi * h**2 * dif
        rhs_1st = -adv * eps
        disc2 = np.abs(lhs - rhs_2nd)
        disc1 = np.abs(lhs - rhs_1st)
        results.append(ConsistencyStats(
            function=name, n=n, h=h, eps=eps,
            mean_abs=float(disc2.mean()), max_abs=float(disc2.max()),
            mean_scaled_2nd=float(disc2.mean() / (eps + h**2)),
            mean_abs_1st=float(disc1.mean()),
            mean_scaled_1st=float(disc1.mean() / eps) if eps > 0 else float("inf")))
    return results


@dataclass
class ConvergenceRow:
    rule: str
    n: int
    h: float
    alpha: float
    eps: float
    trials: int
    mean_linf_error: float
    lipschitz_ratio_stat: float


@dataclass
class ConvergenceReport:
    rows: list
    slopes: dict        # rule -> (exponent, prefactor, rms)
    seed: int
    elapsed: float = 0.0

    @property
    def fitted_slope(self):
        hs = [r.h for r in self.rows]
        errs = [r.mean_linf_error for r in self.rows]
        return fit_power_law(hs, errs)[0]


def explicit_solution(pts):
    return 2.0 - (np.cos(TWO_PI * pts[:, 0]) + np.cos(TWO_PI * pts[:, 1]))


def explicit_rhs(pts, gamma_h):
    return 2.0 - (1.0 + 0.5 * gamma_h * np.pi**2) * (
        np.cos(TWO_PI * pts[:, 0]) + np.cos(TWO_PI * pts[:, 1]))


def _convergence_trial(n, h, alpha, seed_seq, lipschitz_edges=50_000):
    """One trial of the explicit-solution experiment; returns (err, lip99)."""
    rng = np.random.default_rng(seed_seq)
    pts = rng.random((n, 2))
    kernel = KernelSpec.indicator(2)
    graph = build_rdgg(pts, kernel, DriftSpec.zero(2), h=h, eps=0.0)
    gamma_h = (1.0 - alpha) * h**2 / alpha
    v = explicit_rhs(pts, gamma_h)
    result = solve_pagerank(graph, PageRankConfig(alpha, v))
    err = float(np.abs(result.u - explicit_solution(pts)).max())

    coo = graph.W.tocoo()
    m = coo.nnz
    take = min(lipschitz_edges, m)
    sel = rng.choice(m, size=take, replace=False) if take < m else np.arange(m)
    i, j = coo.row[sel], coo.col[sel]
    keep = i != j
    i, j = i[keep], j[keep]
    dist = torus_distance(pts[i], pts[j])
    ratios = np.abs(result.u[i] - result.u[j]) / (dist + h)
    lip = float(np.percentile(ratios, 99.0))
    return err, lip


def convergence_study(schedule, trials, seed, threads=1):
    """Explicit-solution convergence sweep.

    ``schedule`` rows are (n, h_rule, C) with h_rule a name from H_RULES, a
    callable n -> h, or a number; alpha = C h^2 per row.  Uniform density,
    indicator kernel, no drift (the regime of the explicit pair).
    """
    if not schedule:
        raise ValueError("schedule must be nonempty")
    t0 = time.monotonic()
    master = np.random.SeedSequence(seed)
    tasks = []
    for row_idx, (n, h_rule, c_alpha) in enumerate(schedule):
        if callable(h_rule):
            h, rule_name = float(h_rule(n)), getattr(h_rule, "__name__", "custom")
        elif isinstance(h_rule, str):
            h, rule_name = float(H_RULES[h_rule](n)), h_rule
        else:
            h, rule_name = float(h_rule), f"h={h_rule:g}"
        alpha = min(c_alpha * h**2, 1.0)
        children = np.random.SeedSequence(
            entropy=master.entropy, spawn_key=(row_idx,)).spawn(trials)
        tasks.append((rule_name, n, h, alpha, children))

    rows = []
    for rule_name, n, h, alpha, children in tasks:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(
                    _convergence_trial, [n] * trials, [h] * trials,
                    [alpha] * trials, children))
        else:
            outcomes = [_convergence_trial(n, h, alpha, c) for c in children]
        errs = [o[0] for o in outcomes]
        lips = [o[1] for o in outcomes]
        rows.append(ConvergenceRow(
            rule=rule_name, n=n, h=h, alpha=alpha, eps=0.0, trials=trials,
            mean_linf_error=float(np.mean(errs)),
            lipschitz_ratio_stat=float(np.mean(lips))))

    slopes = {}
    for rule_name in {r.rule for r in rows}:
        sub = [r for r in rows if r.rule == rule_name]
        if len(sub) >= 2:
            slopes[rule_name] = fit_power_law(
                [r.h for r in sub], [r.mean_linf_error for r in sub])
    return ConvergenceReport(rows=rows, slopes=slopes, seed=seed,
                             elapsed=time.monotonic() - t0)


def paper_fig1_schedule(ns=FIG1_NS, rules=None):
    rules = rules or list(FIG1_RULE_C)
    return [(n, rule, FIG1_RULE_C[rule]) for rule in rules for n in ns]


@dataclass
class EvolutionTable:
    steps: np.ndarray
    errors: np.ndarray
    alpha: float
    relative_trend: float        # slope * K / mean error, ~0 for stationary g
    growth_exponent: float       # fit of error ~ (alpha k)^q over k >= 1

    def rows(self):
        return list(zip(self.steps, self.errors))


def evolution_study(graph, coeffs, g, K, dt=None):
    """Random-surfer evolution vs the continuum time-dependent solution.

    ``g`` is a callable initial condition or the string "stationary" for the
    interpolated stationary solution of the second-order problem.  The grid
    time step is snapped to divide alpha so snapshots align with u(., alpha k).
    """
    if coeffs.alpha is None:
        raise ValueError("coeffs must carry alpha (build via from_fields)")
    if graph.points is None:
        raise ValueError("graph must carry its sample points")
    alpha = coeffs.alpha
    pts = graph.points
    if coeffs.v_func is not None:
        v_pts = np.asarray(coeffs.v_func(pts), dtype=float)
    else:
        v_pts = interpolate(GridField(coeffs.v), pts)

    bound = time_step_bound(coeffs)
    target = min(dt or bound, bound)
    stride = max(1, int(np.ceil(alpha / target)))
    dt_grid = alpha / stride

    if isinstance(g, str) and g == "stationary":
        g_grid = solve_pde_2nd(coeffs, tol=1e-10)
        g_pts = interpolate(g_grid, pts)
    else:
        g_grid = GridField.from_callable(g, coeffs.resolution, coeffs.dim)
        g_pts = np.asarray(g(pts), dtype=float)

    cfg = PageRankConfig(alpha, v_pts)
    surfer = evolve_surfer(graph, cfg, g_pts, K)
    _, snaps = solve_pde_time(coeffs, g_grid, T=alpha * K, dt=dt_grid,
                              snapshot_stride=stride)
    errors = np.array([
        np.abs(surfer[k] - interpolate(snaps[k], pts)).max()
        for k in range(K + 1)])

    ks = np.arange(K + 1)
    slope = np.polyfit(ks, errors, 1)[0]
    rel_trend = float(slope * K / max(errors.mean(), 1e-300))
    if K >= 2 and np.all(errors[1:] > 0.0):
        growth = fit_power_law(alpha * ks[1:], errors[1:])[0]
    else:
        growth = float("nan")
    return EvolutionTable(steps=ks, errors=errors, alpha=alpha,
                          relative_trend=rel_trend, growth_exponent=growth)


def teleport_distance(graph, alpha, v=None, tol=None):
    """L-inf distance between the probability-normalized PageRank vector and
    the probability-normalized teleportation distribution."""
    if v is None:
        v = np.full(graph.n, 1.0 / graph.n)
    res = solve_pagerank(graph, PageRankConfig(alpha, v, tol=tol))
    r_prob = res.r / res.r.sum()
    v_prob = v / v.sum()
    return float(np.abs(r_prob - v_prob).max())


@dataclass
class AlphaSweepResult:
    alphas: np.ndarray
    distances: np.ndarray
    exponent: float     # p in distance ~ alpha^{-p}
    prefactor: float
    rms_residual: float

    def rows(self):
        return list(zip(self.alphas, self.distances))


def alpha_sweep(graph, alphas, v=None):
    """Distance-to-teleportation scaling; fits a power law alpha^{-p}."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any((alphas <= 0.0) | (alphas >= 1.0)):
        raise ValueError("alphas must lie in (0, 1)")
    distances = np.array([teleport_distance(graph, a, v) for a in alphas])
    exponent, prefactor, rms = fit_power_law(alphas, distances)
    return AlphaSweepResult(alphas=alphas, distances=distances,
                            exponent=-exponent, prefactor=prefactor,
                            rms_residual=rms)
