"""Stochastic (imperfect knowledge matching) joint UA/BA.

The random-coefficient objective is replaced by its alpha-confidence lower
bound ``fbar = mean - z_alpha * std`` of the Gaussian system throughput.
Association maximizes that bound at threshold bandwidths over relaxed
weights with a log barrier on the budgets, is rounded and repaired, and the
bandwidth is then refined by block-coordinate projected gradient ascent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assignment import (Assignment, Instance, SolverReport, masked_argmax, one_hot,
                         repair_overload)
from .numerics import ProjectionSpec, inv_norm_cdf, project_capped_simplex, project_rows_simplex


@dataclass(frozen=True)
class IkmConfig:
    alpha: float = 0.95
    r_init: float = 1.0
    r_decay: float = 0.2
    r_min: float = 1e-6
    inner_tol: float = 1e-8  # relative to |fbar|
    inner_max_iters: int = 2000
    ba_max_sweeps: int = 50

    def __post_init__(self):
        if not 0.5 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0.5, 1)")
        if not self.r_init > 0:
            raise ValueError("r_init must be positive")
        if not 0.0 < self.r_decay < 1.0:
            raise ValueError("r_decay must lie in (0, 1)")

    @property
    def z(self) -> float:
        return inv_norm_cdf(self.alpha)


def _terms(inst: Instance, n):
    s = inst.message_rate(n)
    return inst.matching.tau * s, inst.matching.sigma * s


def fbar(x, n, inst: Instance, alpha: float) -> float:
    """Confidence lower bound on the random throughput at level ``alpha``."""
    a, c = _terms(inst, n)
    x = np.asarray(x, dtype=float)
    s = (x * c).sum(axis=1)
    return float((x * a).sum() - inv_norm_cdf(alpha) * np.sqrt(np.dot(s, s)))


def fbar_grad(x, n, inst: Instance, alpha: float, wrt: str = "x") -> np.ndarray:
    """Analytic gradient of ``fbar`` with respect to ``x`` or ``n``.

    Where the spread term vanishes its contribution is taken as zero.
    """
    x = np.asarray(x, dtype=float)
    a, c = _terms(inst, n)
    s = (x * c).sum(axis=1)
    root = np.sqrt(np.dot(s, s))
    z = inv_norm_cdf(alpha)
    w = z * s / root if root > 0 else np.zeros_like(s)
    if wrt == "x":
        return a - w[:, None] * c
    if wrt == "n":
        rate = inst.b2m.slope * inst.channel.spectral_eff
        return x * rate * (inst.matching.tau - w[:, None] * inst.matching.sigma)
    raise ValueError("wrt must be 'x' or 'n'")


def budget_slack(x, inst: Instance) -> np.ndarray:
    return inst.budgets - (np.asarray(x) * inst.n_threshold).sum(axis=0)


def barrier_objective(x, r: float, inst: Instance, alpha: float) -> float:
    """fbar at threshold bandwidths plus ``r`` times the log budget slack.

    Returns -inf unless every BS is strictly inside its budget.
    """
    slack = budget_slack(x, inst)
    if np.any(slack <= 0):
        return -np.inf
    return fbar(x, inst.n_threshold, inst, alpha) + r * float(np.log(slack).sum())


def barrier_grad(x, r: float, inst: Instance, alpha: float) -> np.ndarray:
    g = fbar_grad(x, inst.n_threshold, inst, alpha, "x")
    return g - r * inst.n_threshold / budget_slack(x, inst)[None, :]


def interior_start(inst: Instance, mask, max_power: float = 64.0):
    """Strictly feasible relaxed weights, starting from the uniform split.

    When the uniform split overloads a BS the weights are tilted towards
    cheap links, x_ij ~ (1 / n_T_ij) ** p, doubling p until every budget has
    slack. Returns (x, ok).
    """
    mask = np.asarray(mask, dtype=bool)
    nt = inst.n_threshold
    # work relative to each MU's cheapest link to keep the powers finite
    rel = np.where(mask, nt / np.where(mask, nt, np.inf).min(axis=1, keepdims=True), np.inf)
    p = 0.0
    while True:
        w = np.where(mask, rel ** -p, 0.0)
        rows = w.sum(axis=1, keepdims=True)
        x = np.divide(w, rows, out=np.zeros_like(w), where=rows > 0)
        if np.all(budget_slack(x, inst) > 0):
            return x, True
        if p >= max_power:
            return x, False
        p = 1.0 if p == 0 else 2.0 * p


def _fw_gap(x, g, mask) -> float:
    """Frank-Wolfe gap over the product of row simplices (zero at the optimum)."""
    best = np.where(mask, g, -np.inf).max(axis=1, initial=-np.inf)
    rows = mask.any(axis=1)
    return float((best[rows] - (x * g).sum(axis=1)[rows]).sum())


def _ascent(f, grad, project, x, tol_fn, max_iters, feasible=None):
    """Projected gradient ascent with Barzilai-Borwein trial steps and
    Armijo backtracking. Returns (x, f(x), iterations)."""
    fx = f(x)
    g = grad(x)
    step = 1.0 / max(float(np.abs(g).max()), 1e-300)
    iters = 0
    for iters in range(1, max_iters + 1):
        for _ in range(60):
            y = project(x + step * g)
            fy = f(y) if feasible is None or feasible(y) else -np.inf
            if np.isfinite(fy) and fy >= fx + 1e-4 * float(np.sum(g * (y - x))):
                break
            step *= 0.5
        else:
            break
        g_new = grad(y)
        s_k = (y - x).ravel()
        y_k = (g - g_new).ravel()  # curvature of -f along the step
        moved = float(np.abs(s_k).max())
        x, fx, g = y, fy, g_new
        if moved == 0.0 or tol_fn(x, g, fx):
            break
        sy = float(s_k @ y_k)
        step = float(s_k @ s_k) / sy if sy > 0 else 2.0 * step
    return x, fx, iters


def solve_relaxed_ua(inst: Instance, config: IkmConfig = IkmConfig()):
    """Sequential barrier maximization over relaxed association weights.

    Returns (x_hat, info) with the per-stage r, fbar and barrier traces.
    """
    mask = inst.matching.ikm_eligible
    x, ok = interior_start(inst, mask)
    info = {"feasible_start": ok, "r": [], "fbar": [], "inner_iters": []}
    if not ok:
        return x, info
    alpha = config.alpha
    nt = inst.n_threshold
    project = lambda v: project_rows_simplex(v, mask)

    def feasible(y):
        return bool(np.all(budget_slack(y, inst) > 0))

    r = config.r_init
    while r >= config.r_min:
        f = lambda v, r=r: barrier_objective(v, r, inst, alpha)
        grad = lambda v, r=r: barrier_grad(v, r, inst, alpha)

        def tol_fn(v, g, fv):
            scale = abs(fbar(v, nt, inst, alpha))
            return _fw_gap(v, g, mask) <= config.inner_tol * max(scale, 1.0)

        x, _, iters = _ascent(f, grad, project, x, tol_fn, config.inner_max_iters, feasible)
        info["r"].append(r)
        info["fbar"].append(fbar(x, nt, inst, alpha))
        info["inner_iters"].append(iters)
        r *= config.r_decay
    return x, info


def round_ua(x_hat, mask) -> np.ndarray:
    """Largest relaxed weight per MU over its eligible BSs (lowest id on ties)."""
    return one_hot(masked_argmax(np.asarray(x_hat), np.asarray(mask, dtype=bool)),
                   np.asarray(mask).shape[1])


def repair_overload_ikm(x, x_hat, inst: Instance):
    """Budget repair that re-homes evicted MUs by their relaxed weights."""
    return repair_overload(x, inst.n_threshold, inst.budgets, x_hat, inst.matching.ikm_eligible)


def solve_ba_ikm(x, inst: Instance, alpha: float, config: IkmConfig = IkmConfig()):
    """Block-coordinate ascent of fbar over bandwidth, one BS block at a time.

    Each block keeps its budget exactly and every member at or above its
    threshold. Returns (n, info).
    """
    x = np.asarray(x)
    nt = inst.n_threshold
    n = np.zeros(inst.shape)
    served = np.flatnonzero(x.any(axis=1))
    home = x[served].argmax(axis=1)
    # per served MU: S = rate * n + base, mean weight tau, spread weight sigma
    rate = (inst.b2m.slope * inst.channel.spectral_eff)[served, home]
    base = inst.b2m.intercept[served, home]
    tau = inst.matching.tau[served, home]
    sig = inst.matching.sigma[served, home]
    z = inv_norm_cdf(alpha)
    bw = np.empty(served.size)
    blocks = []
    for j in range(inst.shape[1]):
        pos = np.flatnonzero(home == j)
        if pos.size == 0:
            continue
        floors = nt[served[pos], j]
        residual = inst.budgets[j] - floors.sum()
        if residual < -1e-9 * inst.budgets[j]:
            return n, {"feasible": False, "sweeps": 0, "trace": []}
        bw[pos] = floors + max(residual, 0.0) / pos.size
        blocks.append((pos, ProjectionSpec(float(inst.budgets[j]), floors)))

    def total(v):
        s = rate * v + base
        return float(tau @ s - z * np.sqrt(np.sum((sig * s) ** 2)))

    current = total(bw)
    trace = [current]
    sweeps = 0
    for sweeps in range(1, config.ba_max_sweeps + 1):
        before = current
        for pos, spec in blocks:
            if pos.size == 1:
                continue
            s_all = rate * bw + base
            mask = np.ones(bw.size, dtype=bool)
            mask[pos] = False
            lin_rest = float(tau[mask] @ s_all[mask])
            q_rest = float(np.sum((sig[mask] * s_all[mask]) ** 2))
            r_, b_, t_, g_ = rate[pos], base[pos], tau[pos], sig[pos]

            def f(v):
                s = r_ * v + b_
                return lin_rest + float(t_ @ s) - z * np.sqrt(q_rest + float(np.sum((g_ * s) ** 2)))

            def grad(v):
                s = r_ * v + b_
                root = np.sqrt(q_rest + float(np.sum((g_ * s) ** 2)))
                w = z / root if root > 0 else 0.0
                return r_ * (t_ - w * g_ * g_ * s)

            def tol_fn(v, g, fv, spec=spec):
                # Frank-Wolfe gap of the block: best vertex minus current point
                gap = float(g @ spec.lower_bounds) + (spec.total - spec.lower_bounds.sum()) * g.max()
                return gap - float(g @ v) <= config.inner_tol * max(abs(fv), 1.0)

            v, current, _ = _ascent(f, grad, lambda v, spec=spec: project_capped_simplex(v, spec),
                                    bw[pos], tol_fn, config.inner_max_iters)
            bw[pos] = v
        trace.append(current)
        if current - before <= config.inner_tol * max(abs(current), 1.0):
            break
    n[served, home] = bw
    return n, {"feasible": True, "sweeps": sweeps, "trace": trace}


def solve_ikm(inst: Instance, config: IkmConfig = IkmConfig(), mc_samples: int = 0,
              seed: int = 0):
    """Full IKM pipeline. Returns (Assignment, SolverReport)."""
    from .metrics import stm_ikm_mc

    t0 = time.perf_counter()
    mask = inst.matching.ikm_eligible
    x_hat, ua_info = solve_relaxed_ua(inst, config)
    x = round_ua(x_hat, mask)
    x, actions, stranded = repair_overload_ikm(x, x_hat, inst)
    stranded = sorted(set(stranded) | set(inst.matching.stranded_ikm))
    n, ba_info = solve_ba_ikm(x, inst, config.alpha, config)
    value = fbar(x, n, inst, config.alpha)
    stm_mean = float(np.where(x.astype(bool), inst.matching.tau * inst.message_rate(n), 0).sum())
    extras = {"fbar_physical": max(value, 0.0), "r_trace": ua_info["r"],
              "ua_fbar_trace": ua_info["fbar"], "inner_iters": ua_info["inner_iters"],
              "ba_trace": ba_info["trace"], "ba_sweeps": ba_info["sweeps"],
              "feasible_start": ua_info["feasible_start"]}
    if mc_samples:
        extras["mc"] = stm_ikm_mc(x, n, inst, mc_samples, seed=seed, keep_samples=False)
    assignment = Assignment(x, n, stranded, ba_info["feasible"] and not stranded
                            and ua_info["feasible_start"])
    report = SolverReport(
        method="ikm", objective=value, stm=stm_mean, fbar=value,
        iterations=int(sum(ua_info["inner_iters"])), runtime_s=time.perf_counter() - t0,
        trace=ua_info["fbar"], repair_actions=actions, stranded=stranded, extras=extras)
    return assignment, report
