"""Numerical primitives shared by the solvers.

Normal quantile, projections onto (capped) simplices, the water-level rule
used by the water-filling baseline, and a central-difference gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class InfeasibleError(ValueError):
    """Raised when a constraint set is empty (floors exceed the budget, etc.)."""


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def inv_norm_cdf(p: float) -> float:
    """Standard normal quantile by safeguarded Newton iteration on the erf CDF.

    Raises ValueError unless 0 < p < 1.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    lo, hi = -40.0, 40.0
    z = 0.0
    for _ in range(200):
        f = norm_cdf(z) - p
        if f > 0:
            hi = z
        else:
            lo = z
        dens = _INV_SQRT_2PI * math.exp(-0.5 * z * z)
        step = f / dens if dens > 0 else math.inf
        z_new = z - step
        if not lo < z_new < hi:
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= 1e-15 * max(1.0, abs(z)):
            return z_new
        z = z_new
    return z


@dataclass(frozen=True)
class ProjectionSpec:
    """Feasible set {x : sum(x) = total, lower <= x <= upper}."""

    total: float
    lower_bounds: np.ndarray
    upper_bounds: Optional[np.ndarray] = None

    def __post_init__(self):
        lo = np.asarray(self.lower_bounds, dtype=float)
        object.__setattr__(self, "lower_bounds", lo)
        if self.upper_bounds is not None:
            hi = np.asarray(self.upper_bounds, dtype=float)
            object.__setattr__(self, "upper_bounds", hi)

    @property
    def upper(self) -> np.ndarray:
        if self.upper_bounds is None:
            return np.full_like(self.lower_bounds, np.inf)
        return self.upper_bounds

    def check(self) -> None:
        lo, hi = self.lower_bounds, self.upper
        tol = 1e-12 * max(1.0, abs(self.total))
        if np.any(lo > hi):
            raise InfeasibleError("lower bound exceeds upper bound")
        if lo.sum() > self.total + tol:
            raise InfeasibleError(
                f"floors sum to {lo.sum():.6g} > total {self.total:.6g}")
        if np.all(np.isfinite(hi)) and hi.sum() < self.total - tol:
            raise InfeasibleError(
                f"caps sum to {hi.sum():.6g} < total {self.total:.6g}")


def project_capped_simplex(v, spec: ProjectionSpec) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``spec``'s capped simplex.

    The projection is ``clip(v - lam, lower, upper)`` for the unique shift
    ``lam`` that meets the budget; ``lam`` is located exactly among the
    breakpoints of the piecewise-linear sum.
    """
    spec.check()
    v = np.asarray(v, dtype=float)
    lo, hi = spec.lower_bounds, spec.upper
    if v.shape != lo.shape:
        raise ValueError("vector and bounds differ in shape")
    if v.size == 0:
        return v.copy()

    bps = np.unique(np.concatenate([v - lo, (v - hi)[np.isfinite(hi)]]))
    # sums is non-increasing in the shift
    sums = np.clip(v[None, :] - bps[:, None], lo, hi).sum(axis=1)
    target = spec.total
    k = int(np.searchsorted(-sums, -target, side="left"))
    if k == 0:
        # below every breakpoint only the uncapped coordinates still move
        n_free = int((~np.isfinite(hi)).sum())
        lam = bps[0] - (target - sums[0]) / max(n_free, 1)
    elif k == bps.size or sums[k] == target:
        lam = bps[min(k, bps.size - 1)]
    else:
        a, b = bps[k - 1], bps[k]
        sa, sb = sums[k - 1], sums[k]
        lam = a + (sa - target) * (b - a) / (sa - sb)
    x = np.clip(v - lam, lo, hi)
    # one exact correction on the free coordinates keeps the budget tight
    free = (x > lo) & (x < hi)
    if free.any():
        x[free] += (target - x.sum()) / free.sum()
        x = np.clip(x, lo, hi)
    return x


def project_rows_simplex(V: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Project every row of ``V`` onto the probability simplex over ``mask``.

    Entries outside the mask are returned as zero.  Rows with an empty mask
    come back all-zero.
    """
    V = np.asarray(V, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=1)
    W = np.where(mask, V, -np.inf)
    U = -np.sort(-W, axis=1)
    finite = np.isfinite(U)
    css = np.cumsum(np.where(finite, U, 0.0), axis=1)
    k = np.arange(1, V.shape[1] + 1)
    cond = finite & (U - (css - 1.0) / k > 0)
    rho = np.where(cond.any(axis=1), V.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1), 0)
    rows = np.arange(V.shape[0])
    theta = (css[rows, rho] - 1.0) / (rho + 1)
    X = np.where(mask, np.maximum(V - theta[:, None], 0.0), 0.0)
    X[counts == 0] = 0.0
    return X


def water_level_bisect(efficiencies, total: float, floors,
                       rtol: float = 1e-9) -> np.ndarray:
    """Allocate ``total`` as n_i = max(floor_i, level - 1/e_i).

    The level is bracketed and bisected, then pinned exactly on the final
    active set so the allocation sums to ``total``.
    """
    e = np.asarray(efficiencies, dtype=float)
    floors = np.asarray(floors, dtype=float)
    if e.shape != floors.shape:
        raise ValueError("efficiencies and floors differ in shape")
    if e.size == 0:
        return e.copy()
    if np.any(e <= 0):
        raise ValueError("efficiencies must be positive")
    slack = total - floors.sum()
    if slack < -1e-12 * max(1.0, abs(total)):
        raise InfeasibleError(
            f"floors sum to {floors.sum():.6g} > budget {total:.6g}")
    if slack <= 0:
        return floors.copy()
    inv = 1.0 / e

    def alloc(level):
        return np.maximum(floors, level - inv)

    lo = float(np.min(floors + inv))
    hi = float(np.max(floors + inv)) + total
    step = max(total, 1e-15 * abs(hi))
    while alloc(hi).sum() < total:
        # geometric growth so tiny budgets cannot stall the bracket
        hi += step
        step *= 2.0
    tol = rtol * total
    while hi - lo > tol * 1e-3 and (hi - lo) > 1e-15 * abs(hi):
        mid = 0.5 * (lo + hi)
        if alloc(mid).sum() > total:
            hi = mid
        else:
            lo = mid
    level = 0.5 * (lo + hi)
    active = level - inv > floors
    if active.any():
        level = (total - floors[~active].sum() + inv[active].sum()) / active.sum()
    n = alloc(level)
    return n


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar field ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[k] += h
        xm[k] -= h
        gflat[k] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return g
