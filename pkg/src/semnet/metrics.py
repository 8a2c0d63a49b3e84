"""Throughput metrics, Monte-Carlo checks of the chance constraint, and an
exhaustive oracle for tiny instances."""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .assignment import Instance
from .numerics import inv_norm_cdf
from .semantics import PHYSICAL, RAW, beta_std

ORACLE_MAX_MU = 6
ORACLE_MAX_BS = 3
ORACLE_MAX_LEVELS = 6


def stm_pkm(x, n, inst: Instance) -> float:
    """Sum of message rates over active links."""
    x = np.asarray(x, dtype=bool)
    if not x.any():
        return 0.0
    return float(inst.message_rate(n)[x].sum())


def stm_ikm_mc(x, n, inst: Instance, samples: int, mode: str = RAW, seed: int = 0,
               keep_samples: bool = True, chunk: int = 20000) -> dict:
    """Throughput under sampled matching coefficients on the active links.

    Returns mean, std, a few quantiles and (optionally) every sample.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if mode not in (RAW, PHYSICAL):
        raise ValueError(f"unknown sampling mode {mode!r}")
    x = np.asarray(x, dtype=bool)
    rate = inst.message_rate(n)[x]
    tau = inst.matching.tau[x]
    sd = beta_std(tau)
    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for lo in range(0, samples, chunk):
        m = min(chunk, samples - lo)
        beta = tau + sd * rng.standard_normal((m, tau.size))
        if mode == PHYSICAL:
            beta = np.clip(beta, 0.0, 1.0)
        out[lo:lo + m] = beta @ rate
    res = {"mean": float(out.mean()), "std": float(out.std(ddof=1)) if samples > 1 else 0.0,
           "q05": float(np.quantile(out, 0.05)), "q50": float(np.quantile(out, 0.5)),
           "q95": float(np.quantile(out, 0.95)), "samples_n": samples, "mode": mode}
    if keep_samples:
        res["samples"] = out
    return res


def chance_coverage(x, n, inst: Instance, alpha: float, samples: int, seed: int = 0) -> float:
    """Empirical Pr{throughput >= fbar} under raw Gaussian coefficients.

    A degenerate (zero-variance) configuration is compared exactly.
    """
    from .ikm import fbar

    bound = fbar(x, n, inst, alpha)
    x = np.asarray(x, dtype=bool)
    spread = (inst.matching.sigma * inst.message_rate(n))[x]
    if not np.any(spread != 0):
        mean = float((inst.matching.tau * inst.message_rate(n))[x].sum())
        return 1.0 if mean >= bound else 0.0
    mc = stm_ikm_mc(x, n, inst, samples, RAW, seed)
    return float(np.mean(mc["samples"] >= bound))


def _compositions(total: int, parts: int):
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield out


def _grid(n_thr, budget, levels):
    """Candidate bandwidth vectors for one BS block (rows = candidates)."""
    m = n_thr.size
    residual = budget - n_thr.sum()
    q = np.array(list(_compositions(levels, m)), dtype=float)
    return n_thr[None, :] + q * (residual / levels)


def brute_force_joint(inst: Instance, mode: str = "pkm", levels: int = 5,
                      alpha: float = 0.95):
    """Exhaustive search over eligible associations and gridded bandwidth.

    Each BS splits its residual budget (above the thresholds) into ``levels``
    equal quanta. Returns (x, n, objective) maximizing the deterministic
    throughput (``mode="pkm"``) or the confidence bound (``mode="ikm"``).
    Stranded MUs (no eligible BS) are left unassigned.
    """
    U, B = inst.shape
    if U > ORACLE_MAX_MU or B > ORACLE_MAX_BS or levels > ORACLE_MAX_LEVELS:
        raise ValueError("instance too large for exhaustive search")
    if mode not in ("pkm", "ikm"):
        raise ValueError("mode must be 'pkm' or 'ikm'")
    eligible = inst.matching.eligible(mode)
    nt = inst.n_threshold
    rate = inst.b2m.slope * inst.channel.spectral_eff
    base = inst.b2m.intercept
    tau, sigma = inst.matching.tau, inst.matching.sigma
    z = inv_norm_cdf(alpha) if mode == "ikm" else 0.0
    options = [list(np.flatnonzero(row)) or [-1] for row in eligible]

    best = (-np.inf, None, None)
    for choice in itertools.product(*options):
        choice = np.array(choice)
        load = np.zeros(B)
        for i, j in enumerate(choice):
            if j >= 0:
                load[j] += nt[i, j]
        if np.any(load > inst.budgets * (1 + 1e-12)):
            continue
        blocks = []
        for j in range(B):
            idx = np.flatnonzero(choice == j)
            if idx.size:
                blocks.append((j, idx, _grid(nt[idx, j], inst.budgets[j], levels)))
        if mode == "pkm":
            value, n = 0.0, np.zeros((U, B))
            for j, idx, cand in blocks:
                v = (cand * rate[idx, j] + base[idx, j]).sum(axis=1)
                k = int(np.argmax(v))
                value += v[k]
                n[idx, j] = cand[k]
        else:
            value, n = _best_ikm_grid(blocks, rate, base, tau, sigma, z, (U, B))
        if value > best[0]:
            x = np.zeros((U, B), dtype=int)
            ok = choice >= 0
            x[np.flatnonzero(ok), choice[ok]] = 1
            best = (value, x, n)
    return best[1], best[2], float(best[0])


def _best_ikm_grid(blocks, rate, base, tau, sigma, z, shape):
    # cartesian product over blocks; every candidate evaluated in one shot
    if not blocks:
        return 0.0, np.zeros(shape)
    lin_parts, sq_parts = [], []
    for j, idx, cand in blocks:
        s = cand * rate[idx, j] + base[idx, j]
        lin_parts.append((s * tau[idx, j]).sum(axis=1))
        sq_parts.append(((s * sigma[idx, j]) ** 2).sum(axis=1))
    lin = lin_parts[0]
    sq = sq_parts[0]
    for lp, sp in zip(lin_parts[1:], sq_parts[1:]):
        lin = (lin[:, None] + lp[None, :]).ravel()
        sq = (sq[:, None] + sp[None, :]).ravel()
    val = lin - z * np.sqrt(sq)
    k = int(np.argmax(val))
    sizes = [len(b[2]) for b in blocks]
    picks = np.unravel_index(k, sizes)
    n = np.zeros(shape)
    for (j, idx, cand), p in zip(blocks, picks):
        n[idx, j] = cand[p]
    return float(val[k]), n


def grid_size(members: int, levels: int) -> int:
    return comb(levels + members - 1, members - 1)
