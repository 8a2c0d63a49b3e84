"""Comparison schemes: max-SINR association with water-filling or even BA."""

from __future__ import annotations

import time

import numpy as np

from .assignment import Assignment, Instance, SolverReport, masked_argmax, one_hot, repair_overload
from .numerics import InfeasibleError, water_level_bisect

# water levels are computed with bandwidth in MHz
WF_UNIT_HZ = 1e6


def max_sinr_ua(sinr, eligible, n_threshold=None, budgets=None):
    """Strongest-SINR eligible BS per MU (lowest id on ties).

    With thresholds and budgets given, overloads are repaired using SINR as
    the ranking. Returns (x, actions, stranded).
    """
    sinr = np.asarray(sinr, dtype=float)
    eligible = np.asarray(eligible, dtype=bool)
    x = one_hot(masked_argmax(sinr, eligible), sinr.shape[1])
    stranded = [int(i) for i in np.flatnonzero(~eligible.any(axis=1))]
    actions = []
    if n_threshold is not None and budgets is not None:
        x, actions, more = repair_overload(x, n_threshold, budgets, sinr, eligible)
        stranded = sorted(set(stranded) | set(more))
    return x, actions, stranded


def water_filling_ba(spectral_eff, n_threshold, budget: float, unit_hz: float = WF_UNIT_HZ):
    """Water-level split of one BS's budget among its members (1-D arrays)."""
    nt = np.asarray(n_threshold, dtype=float)
    if nt.size == 0:
        return nt.copy()
    n = water_level_bisect(spectral_eff, budget / unit_hz, nt / unit_hz)
    return n * unit_hz


def evenly_distributed_ba(n_threshold, budget: float):
    """Even split; members whose share falls below their floor are raised to
    it and the rest of the budget is re-split among the others."""
    nt = np.asarray(n_threshold, dtype=float)
    m = nt.size
    if m == 0:
        return nt.copy()
    if nt.sum() > budget * (1 + 1e-12):
        raise InfeasibleError(f"floors sum to {nt.sum():.6g} > budget {budget:.6g}")
    pinned = np.zeros(m, dtype=bool)
    while True:
        free = ~pinned
        share = (budget - nt[pinned].sum()) / free.sum()
        newly = free & (nt > share)
        if not newly.any():
            break
        pinned |= newly
        if pinned.all():
            return nt.copy()
    return np.where(pinned, nt, share)


def _allocate(inst: Instance, x, rule) -> np.ndarray:
    n = np.zeros(inst.shape)
    for j in range(inst.shape[1]):
        idx = np.flatnonzero(x[:, j])
        if idx.size:
            n[idx, j] = rule(idx, j)
    return n


def solve_baseline(inst: Instance, ba: str = "wf", mode: str = "pkm"):
    """Max-SINR UA plus ``ba`` in {"wf", "even"} under ``mode`` eligibility.

    Returns (Assignment, SolverReport). For IKM mode the report's ``fbar``
    needs a confidence level and is filled in by the caller.
    """
    t0 = time.perf_counter()
    nt = inst.n_threshold
    eligible = inst.matching.eligible(mode)
    x, actions, stranded = max_sinr_ua(inst.channel.sinr, eligible, nt, inst.budgets)
    eff = inst.channel.spectral_eff
    if ba == "wf":
        n = _allocate(inst, x, lambda idx, j: water_filling_ba(eff[idx, j], nt[idx, j], inst.budgets[j]))
    elif ba == "even":
        n = _allocate(inst, x, lambda idx, j: evenly_distributed_ba(nt[idx, j], inst.budgets[j]))
    else:
        raise ValueError(f"unknown bandwidth rule {ba!r}")
    stm = float(np.where(x.astype(bool), inst.message_rate(n), 0.0).sum())
    assignment = Assignment(x, n, stranded, not stranded)
    report = SolverReport(method=f"maxsinr_{ba}", objective=stm, stm=stm,
                          runtime_s=time.perf_counter() - t0, repair_actions=actions,
                          stranded=stranded)
    return assignment, report
