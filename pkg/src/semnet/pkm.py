"""Deterministic (perfect knowledge matching) joint UA/BA.

Association is found by Lagrangian dual decomposition on the threshold-rate
problem, repaired for budget overloads, and bandwidth is then allocated per
BS. Because the message rate is affine in bandwidth, the per-BS allocation
is closed form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assignment import (Assignment, Instance, SolverReport, masked_argmax, one_hot,
                         repair_overload)
from .topology import ChannelState


@dataclass(frozen=True)
class PkmConfig:
    stepsize_coeff: float = 0.8
    max_iters: int = 500
    stability_window: int = 10
    # bandwidth unit of the multiplier update (MHz): mu is msg/s per MHz
    bandwidth_unit_hz: float = 1e6

    def __post_init__(self):
        if not self.stepsize_coeff > 0:
            raise ValueError("stepsize_coeff must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")


def xi_threshold(channel: ChannelState, b2m) -> np.ndarray:
    """Message rate of every link at its threshold bandwidth.

    n_T * e equals the MU's minimum bit rate by construction, so the rate is
    taken from the bit-rate threshold directly (keeps equal links exactly equal).
    """
    return b2m.slope * channel.min_bit_rate[:, None] + b2m.intercept


def ua_scores(xi, mu, n_threshold, unit: float = 1.0) -> np.ndarray:
    return xi - np.asarray(mu)[None, :] * (n_threshold / unit)


def ua_argmax_rule(xi, mu, n_threshold, eligible, unit: float = 1.0) -> np.ndarray:
    """Associate every MU with its best eligible BS under the current prices.

    Ties prefer the BS needing the least threshold bandwidth, then the lowest id.
    MUs without eligible BSs get an all-zero row.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("multipliers must be non-negative")
    eligible = np.asarray(eligible, dtype=bool)
    score = ua_scores(xi, mu, n_threshold, unit)
    choice = masked_argmax(score, eligible, secondary=n_threshold)
    return one_hot(choice, eligible.shape[1])


def update_multipliers(mu, x, n_threshold, budgets, t: int,
                       config: PkmConfig = PkmConfig(), unit: float = 1.0) -> np.ndarray:
    """Projected subgradient step mu <- [mu - c/t * (N - load)]^+."""
    if t < 1:
        raise ValueError("iteration counter starts at 1")
    delta = config.stepsize_coeff / t
    load = (np.asarray(x) * np.asarray(n_threshold)).sum(axis=0) / unit
    return np.maximum(np.asarray(mu) - delta * (np.asarray(budgets) / unit - load), 0.0)


def dual_value(xi, mu, n_threshold, budgets, eligible, unit: float = 1.0) -> float:
    """D(mu): relaxed Lagrangian maximum plus sum mu_j N_j."""
    score = np.where(eligible, ua_scores(xi, mu, n_threshold, unit), -np.inf)
    rows = eligible.any(axis=1)
    g = score[rows].max(axis=1).sum() if rows.any() else 0.0
    return float(g + np.dot(mu, np.asarray(budgets) / unit))


def solve_ua_pkm(inst: Instance, config: PkmConfig = PkmConfig()):
    """Alternate the argmax association and multiplier updates, then repair.

    Returns (x, mu, info) where ``info`` carries the dual trace, iteration
    counts, repair actions and stranded MUs.
    """
    xi = xi_threshold(inst.channel, inst.b2m)
    nt = inst.n_threshold
    eligible = inst.matching.pkm_eligible
    unit = config.bandwidth_unit_hz
    mu = np.zeros(inst.shape[1])
    trace, prev = [], None
    stable, settled_at, t = 0, 1, 0
    for t in range(1, config.max_iters + 1):
        x = ua_argmax_rule(xi, mu, nt, eligible, unit)
        trace.append(dual_value(xi, mu, nt, inst.budgets, eligible, unit))
        if prev is not None and np.array_equal(x, prev):
            stable += 1
        else:
            stable, settled_at = 0, t
        if stable >= config.stability_window:
            break
        prev = x
        mu = update_multipliers(mu, x, nt, inst.budgets, t, config, unit)
    pref = ua_scores(xi, mu, nt, unit)
    x, actions, stranded = repair_overload(x, nt, inst.budgets, pref, eligible)
    stranded = sorted(set(stranded) | set(inst.matching.stranded_pkm))
    info = {"trace": trace, "iterations": t, "settled_at": settled_at,
            "repair_actions": actions, "stranded": stranded,
            "converged": stable >= config.stability_window}
    return x, mu, info


def solve_ba_pkm(n_threshold, spectral_eff, slope, budget: float):
    """Optimal split of one BS's budget among its members (1-D arrays).

    Every member gets its threshold; the remaining budget goes to the member
    with the largest slope * efficiency (lowest index on ties).
    Returns (n, feasible).
    """
    nt = np.asarray(n_threshold, dtype=float)
    if nt.size == 0:
        return nt.copy(), True
    residual = budget - nt.sum()
    if residual < -1e-9 * max(budget, 1.0):
        return nt.copy(), False
    n = nt.copy()
    gain = np.asarray(slope) * np.asarray(spectral_eff)
    n[int(np.argmax(gain))] += max(residual, 0.0)
    return n, True


def allocate_pkm(inst: Instance, x) -> tuple:
    """Per-BS closed-form allocation for a fixed association. Returns (n, ok)."""
    n = np.zeros(inst.shape)
    ok = True
    for j in range(inst.shape[1]):
        idx = np.flatnonzero(x[:, j])
        if idx.size == 0:
            continue
        row, feasible = solve_ba_pkm(inst.n_threshold[idx, j], inst.channel.spectral_eff[idx, j],
                                     inst.b2m.slope[idx, j], inst.budgets[j])
        n[idx, j] = row
        ok &= feasible
    return n, ok


def stm_of(inst: Instance, x, n) -> float:
    return float(np.where(np.asarray(x, dtype=bool), inst.message_rate(n), 0.0).sum())


def solve_pkm(inst: Instance, config: PkmConfig = PkmConfig()):
    """Full PKM pipeline. Returns (Assignment, SolverReport)."""
    t0 = time.perf_counter()
    x, mu, info = solve_ua_pkm(inst, config)
    n, ok = allocate_pkm(inst, x)
    stm = stm_of(inst, x, n)
    assignment = Assignment(x, n, info["stranded"], ok and not info["stranded"])
    xi = xi_threshold(inst.channel, inst.b2m)
    report = SolverReport(
        method="pkm", objective=stm, stm=stm, iterations=info["iterations"],
        runtime_s=time.perf_counter() - t0, trace=info["trace"], multipliers=mu.tolist(),
        repair_actions=info["repair_actions"], stranded=info["stranded"],
        extras={"settled_at": info["settled_at"], "converged": info["converged"],
                "ua_objective": float((x * xi).sum())})
    return assignment, report
