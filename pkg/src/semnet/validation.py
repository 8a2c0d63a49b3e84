"""Property suites shared by the ``validate`` command and the test-suite.

Each suite returns a ``CheckResult`` with a pass flag and the measured
numbers, so callers can print or tabulate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .assignment import Instance
from .ikm import IkmConfig, fbar, fbar_grad, solve_ikm
from .metrics import brute_force_joint, chance_coverage
from .numerics import (InfeasibleError, ProjectionSpec, finite_diff_grad, inv_norm_cdf,
                       norm_cdf, project_capped_simplex, water_level_bisect)
from .pkm import solve_pkm
from .semantics import B2MProfile, MatchingProfile, binomial_matching_oracle
from .topology import ChannelState, GenConfig, generate_topology


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def random_instance(rng: np.random.Generator, n_mu: int, n_bs: int, tau_range=(0.2, 1.0),
                    tau0: float = 0.0) -> Instance:
    """Synthetic instance with random SINRs, B2M profiles and matching degrees."""
    sinr = 10 ** rng.uniform(-1.0, 2.0, (n_mu, n_bs))
    channel = ChannelState.from_sinr(sinr, np.full(n_mu, 1e4))
    b2m = B2MProfile(rng.uniform(0.5, 1.5, (n_mu, n_bs)), rng.uniform(-2e3, 2e3, (n_mu, n_bs)))
    tau = rng.uniform(*tau_range, (n_mu, n_bs))
    full = np.ones((n_mu, n_bs), dtype=bool)
    matching = MatchingProfile(tau, tau0, full, tau >= tau0)
    budgets = np.full(n_bs, 2e6)
    return Instance(channel, b2m, matching, budgets)


def _rel_err(a, b) -> float:
    scale = max(np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / scale)


def gradient_check(points: int = 100, seed: int = 0, rtol: float = 1e-5) -> CheckResult:
    """Analytic confidence-bound gradients against central differences."""
    rng = np.random.default_rng(seed)
    worst_x = worst_n = 0.0
    for _ in range(points):
        U, B = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        inst = random_instance(rng, U, B)
        alpha = float(rng.uniform(0.55, 0.99))
        x = rng.dirichlet(np.ones(B), size=U)
        n = inst.n_threshold * rng.uniform(1.0, 3.0, (U, B))
        gx = fbar_grad(x, n, inst, alpha, "x")
        fx = finite_diff_grad(lambda v: fbar(v, n, inst, alpha), x, h=1e-6)
        gn = fbar_grad(x, n, inst, alpha, "n")
        fn = finite_diff_grad(lambda v: fbar(x, v, inst, alpha), n, h=1e-6 * float(n.max()))
        worst_x = max(worst_x, _rel_err(gx, fx))
        worst_n = max(worst_n, _rel_err(gn, fn))
    ok = worst_x <= rtol and worst_n <= rtol
    return CheckResult("gradient check", ok,
                       f"{points} points, max rel err x={worst_x:.2e} n={worst_n:.2e} (tol {rtol:g})",
                       {"worst_x": worst_x, "worst_n": worst_n})


def _bisect_quantile(p: float) -> float:
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quantile_check(tol: float = 1e-6) -> CheckResult:
    got = inv_norm_cdf(0.95)
    ref = _bisect_quantile(0.95)
    ok = abs(got - 1.644854) <= tol and abs(got - ref) <= tol
    return CheckResult("inverse normal CDF", ok, f"Phi^-1(0.95)={got:.9f}, bisection {ref:.9f}",
                       {"value": got, "bisection": ref})


def projection_suite(cases: int = 1000, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    """KKT check of the capped-simplex projection on random feasible specs."""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(cases):
        m = int(rng.integers(1, 12))
        lo = rng.uniform(0, 1, m)
        hi = lo + rng.uniform(0, 2, m) if rng.random() < 0.5 else None
        top = lo.sum() + (rng.uniform(0, 1) * (hi - lo).sum() if hi is not None
                          else rng.uniform(0, 5))
        v = rng.normal(0, 3, m)
        p = project_capped_simplex(v, ProjectionSpec(top, lo, hi))
        ub = np.full(m, np.inf) if hi is None else hi
        scale = 1.0 + np.abs(v).max() + top
        if (abs(p.sum() - top) > tol * scale or np.any(p < lo - tol * scale)
                or np.any(p > ub + tol * scale)):
            failures += 1
            continue
        # KKT: v - p equals a common shift on free coordinates, and is below
        # (above) it on coordinates at the lower (upper) bound
        r = v - p
        free = (p > lo + 1e-9 * scale) & (p < ub - 1e-9 * scale)
        at_lo = ~free & (p <= lo + 1e-9 * scale)
        at_hi = ~free & ~at_lo
        if free.any():
            shift = r[free].mean()
            bad = (np.abs(r[free] - shift).max() > 1e-7 * scale
                   or np.any(r[at_lo] > shift + 1e-7 * scale)
                   or np.any(r[at_hi] < shift - 1e-7 * scale))
        else:
            bad = at_lo.any() and at_hi.any() and r[at_lo].max() > r[at_hi].min() + 1e-7 * scale
        failures += bool(bad)
    return CheckResult("projection optimality", failures == 0,
                       f"{cases - failures}/{cases} cases satisfy feasibility and KKT",
                       {"failures": failures})


def water_filling_suite(cases: int = 1000, seed: int = 0) -> CheckResult:
    """Budget exactness and floor/level structure of the water-filling split."""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(cases):
        m = int(rng.integers(1, 12))
        e = rng.uniform(0.05, 8, m)
        floors = rng.uniform(0, 0.5, m)
        total = floors.sum() + rng.uniform(0, 4)
        n = water_level_bisect(e, total, floors)
        above = n > floors + 1e-9
        level = (n + 1 / e)[above]
        bad = (abs(n.sum() - total) > 1e-9 * total or np.any(n < floors - 1e-12)
               or (above.any() and np.ptp(level) > 1e-8 * (1 + level.max()))
               or (above.any() and np.any((floors + 1 / e)[~above] < level.max() - 1e-8)))
        failures += bool(bad)
    return CheckResult("water-filling exactness", failures == 0,
                       f"{cases - failures}/{cases} cases exact to 1e-9 of the budget",
                       {"failures": failures})


def ks_binomial(M: int = 10_000, taus=(0.2, 0.5, 0.8), trials: int = 20, sums: int = 500,
                seed: int = 0, p_min: float = 0.01, need: int = 18) -> CheckResult:
    """Standardized matching-indicator means against the standard normal."""
    from scipy.stats import kstest

    passes = {}
    for tau in taus:
        ok = 0
        for t in range(trials):
            rng = np.random.default_rng([seed, int(round(tau * 1000)), t])
            means = binomial_matching_oracle(tau, M, rng, size=sums)
            z = (means - tau) * np.sqrt(M / (tau * (1 - tau)))
            ok += kstest(z, "norm").pvalue > p_min
        passes[tau] = ok
    good = all(v >= need for v in passes.values())
    detail = ", ".join(f"tau={k:g}: {v}/{trials}" for k, v in passes.items())
    return CheckResult("matching-indicator CLT (KS)", good, detail + f" (need {need})", passes)


def chance_calibration(assignments: int = 20, samples: int = 100_000, alpha: float = 0.95,
                       seed: int = 0, band: float = 0.01, n_users: int = 200,
                       tau: float = 0.5) -> CheckResult:
    """Empirical coverage of the confidence bound on solved IKM assignments."""
    cov = []
    for k in range(assignments):
        topo = generate_topology(GenConfig(n_users=n_users), seed + k)
        inst = Instance.build(topo, tau=tau, tau0=0.1)
        a, _ = solve_ikm(inst, IkmConfig(alpha=alpha))
        cov.append(chance_coverage(a.x, a.n, inst, alpha, samples, seed=seed + k))
    cov = np.array(cov)
    ok = bool(np.all(np.abs(cov - alpha) <= band))
    return CheckResult("chance calibration", ok,
                       f"coverage in [{cov.min():.4f}, {cov.max():.4f}] for alpha={alpha} "
                       f"(band +-{band})", {"coverage": cov.tolist()})


def tiny_instance(seed: int, mode: str) -> Instance:
    """Reference generator shrunk to 1 macro plus up to 2 small cells and 2-5 MUs.

    PKM instances give every BS the full KB pool; IKM instances keep the
    default KB policy and derive matching degrees from KB overlap.
    """
    rng = np.random.default_rng([seed, 7])
    pico = int(rng.integers(0, 3))
    femto = int(rng.integers(0, 3 - pico))
    users = int(rng.integers(2, 6))
    cfg = GenConfig(n_pico=pico, n_femto=femto, n_users=users)
    if mode == "pkm":
        return Instance.build(generate_topology(replace(cfg, kb_per_bs=cfg.kb_pool), seed))
    return Instance.build(generate_topology(cfg, seed), tau0=1 / 3)


def oracle_certification(instances: int = 100, seed: int = 0, levels: int = 5,
                         alpha: float = 0.95, need_pkm: int = 90,
                         need_ikm: int = 85) -> CheckResult:
    """Solver objective against exhaustive search on tiny instances.

    A solver "passes" an instance when it reaches 95% of the oracle value
    (for a negative oracle bound: within 5% of its magnitude).
    """
    hits = {"pkm": 0, "ikm": 0}
    ratios = {"pkm": [], "ikm": []}
    for k in range(instances):
        inst = tiny_instance(seed + k, "pkm")
        _, rep = solve_pkm(inst)
        _, _, best = brute_force_joint(inst, "pkm", levels)
        hits["pkm"] += rep.stm >= best - 0.05 * abs(best)
        ratios["pkm"].append(rep.stm / best if best else 1.0)

        inst = tiny_instance(seed + k, "ikm")
        _, rep = solve_ikm(inst, IkmConfig(alpha=alpha))
        _, _, best = brute_force_joint(inst, "ikm", levels, alpha)
        hits["ikm"] += rep.fbar >= best - 0.05 * abs(best)
        ratios["ikm"].append((rep.fbar, best))
    ok = hits["pkm"] >= need_pkm and hits["ikm"] >= need_ikm
    return CheckResult("oracle certification", ok,
                       f"PKM {hits['pkm']}/{instances} (need {need_pkm}), "
                       f"IKM {hits['ikm']}/{instances} (need {need_ikm})",
                       {"hits": hits, "ratios": ratios})


def run_all(quick: bool = False, seed: int = 0):
    """Every suite; ``quick`` shrinks the sample counts for a smoke run."""
    if quick:
        return [gradient_check(20, seed), quantile_check(), projection_suite(100, seed),
                water_filling_suite(100, seed),
                ks_binomial(M=2000, trials=5, sums=200, seed=seed, need=4),
                chance_calibration(3, 20_000, seed=seed, band=0.02, n_users=60),
                oracle_certification(10, seed, need_pkm=9, need_ikm=8)]
    return [gradient_check(100, seed), quantile_check(), projection_suite(1000, seed),
            water_filling_suite(1000, seed), ks_binomial(seed=seed),
            chance_calibration(seed=seed), oracle_certification(seed=seed)]


__all__ = ["CheckResult", "run_all", "gradient_check", "quantile_check", "projection_suite",
           "water_filling_suite", "ks_binomial", "chance_calibration", "oracle_certification",
           "tiny_instance", "random_instance", "InfeasibleError"]
