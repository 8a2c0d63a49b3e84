"""Trial runner, sweeps and CSV/SVG output for batch experiments.

Every trial owns its topology, RNG and solver state. Trial ``t`` of a run
with base seed ``s`` uses seed ``s + t``, so the same trial seed reproduces
the same network whatever axis value it is paired with.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .assignment import Instance
from .baselines import solve_baseline
from .config import ScenarioConfig
from .ikm import solve_ikm
from .pkm import solve_pkm
from .semantics import B2MProfile
from .topology import GenConfig, generate_topology

METHODS = ("pkm", "ikm", "wf", "even")
AXES = ("mus", "bss", "alpha", "tau")
DEFAULT_AXIS_VALUES = {
    "mus": [100, 120, 140, 160, 180, 200],
    "bss": [10, 12, 14, 16, 18, 20],
    "alpha": [0.55, 0.75, 0.95],
    "tau": [0.3, 0.7],
}
DEFAULT_AXIS_METHODS = {"mus": ("pkm", "wf", "even"), "bss": ("pkm", "wf", "even"),
                        "alpha": ("ikm",), "tau": ("ikm",)}

TRIAL_FIELDS = ["trial_seed", "n_mu", "n_bs", "alpha", "tau", "method", "value", "stm", "fbar",
                "iterations", "stranded", "feasible"]
TIMING_FIELDS = ["trial_seed", "n_mu", "n_bs", "alpha", "tau", "method", "runtime_s"]
AGGREGATE_FIELDS = ["axis", "axis_value", "method", "trials", "mean_value", "mean_stm",
                    "mean_fbar", "mean_iterations", "mean_stranded", "feasible_fraction"]


def bs_counts(total: int):
    """Split a BS total into (macro, pico, femto): one macro, the rest 1:2."""
    if total < 1:
        raise ValueError("need at least one BS")
    pico = round((total - 1) / 3)
    return 1, pico, total - 1 - pico


def scenario_network(cfg: ScenarioConfig, n_users: Optional[int] = None,
                     n_bs: Optional[int] = None) -> GenConfig:
    net = cfg.network
    if n_users is not None:
        net = replace(net, n_users=int(n_users))
    if n_bs is not None:
        m, p, f = bs_counts(int(n_bs))
        net = replace(net, n_macro=m, n_pico=p, n_femto=f)
    return net


def build_instance(cfg: ScenarioConfig, seed: int, n_users=None, n_bs=None,
                   tau=None) -> Instance:
    """Instance for one trial; ``tau`` overrides the configured matching degree."""
    topology = generate_topology(scenario_network(cfg, n_users, n_bs), seed)
    tau = cfg.tau if tau is None else tau
    inst = Instance.build(topology, tau=tau, tau0=cfg.tau0)
    if cfg.slope == "sinr_table":
        b2m = B2MProfile.from_sinr_table(inst.channel, intercept=cfg.hs)
    else:
        b2m = B2MProfile.uniform(inst.shape, cfg.slope, cfg.hs)
    return replace(inst, b2m=b2m)


def solve(inst: Instance, method: str, cfg: ScenarioConfig, alpha=None):
    """Dispatch one solver. Returns (Assignment, SolverReport)."""
    if method == "pkm":
        return solve_pkm(inst, cfg.pkm)
    if method == "ikm":
        ikm = cfg.ikm if alpha is None else replace(cfg.ikm, alpha=float(alpha))
        return solve_ikm(inst, ikm)
    if method in ("wf", "even"):
        return solve_baseline(inst, method, "pkm")
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


@dataclass(frozen=True)
class TrialSpec:
    seed: int
    method: str
    n_users: Optional[int] = None
    n_bs: Optional[int] = None
    alpha: Optional[float] = None
    tau: Optional[float] = None


def run_trial(cfg: ScenarioConfig, spec: TrialSpec, keep_solution: bool = False) -> dict:
    """Solve one trial and return its CSV row (plus timing)."""
    inst = build_instance(cfg, spec.seed, spec.n_users, spec.n_bs, spec.tau)
    alpha = cfg.ikm.alpha if spec.alpha is None else spec.alpha
    assignment, report = solve(inst, spec.method, cfg, alpha)
    eligible = inst.matching.eligible("ikm" if spec.method == "ikm" else "pkm")
    violations = assignment.violations(inst.n_threshold, inst.budgets, eligible)
    tau = cfg.tau if spec.tau is None else spec.tau
    row = {
        "trial_seed": spec.seed, "n_mu": inst.shape[0], "n_bs": inst.shape[1],
        "alpha": alpha if spec.method == "ikm" else "",
        "tau": "" if tau is None else tau,
        "method": spec.method,
        "value": report.objective, "stm": report.stm,
        "fbar": report.fbar if report.fbar is not None else "",
        "iterations": report.iterations, "stranded": len(report.stranded),
        "feasible": int(not violations),
        "runtime_s": report.runtime_s,
    }
    if keep_solution:
        row["_assignment"], row["_report"], row["_instance"] = assignment, report, inst
        row["_violations"] = violations
    return row


def _run_one(args):
    cfg, spec = args
    return run_trial(cfg, spec)


def run_trials(cfg: ScenarioConfig, specs: Sequence[TrialSpec], workers: Optional[int] = None):
    """Run trials, in parallel when ``workers`` > 1; rows come back in input order."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, s) for s in specs]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def trial_seeds(cfg: ScenarioConfig, trials: Optional[int] = None):
    n = cfg.trials if trials is None else trials
    return [cfg.seed + t for t in range(n)]


def sweep_specs(cfg: ScenarioConfig, axis: str, values, methods, trials=None):
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")
    key = {"mus": "n_users", "bss": "n_bs", "alpha": "alpha", "tau": "tau"}[axis]
    specs = []
    for v in values:
        for m in methods:
            for s in trial_seeds(cfg, trials):
                specs.append(TrialSpec(seed=s, method=m, **{key: v}))
    return specs


def aggregate(specs, rows, axis: str, values, methods):
    """Mean of each metric per (axis value, method), in sweep order.

    ``axis="run"`` groups by method only (``values`` should be ``[None]``).
    """
    key = {"mus": "n_users", "bss": "n_bs", "alpha": "alpha", "tau": "tau", "run": None}[axis]
    out = []
    for v in values:
        for m in methods:
            sel = [r for s, r in zip(specs, rows)
                   if s.method == m and (key is None or float(getattr(s, key)) == float(v))]
            if not sel:
                continue
            fb = [r["fbar"] for r in sel if r["fbar"] != ""]
            out.append({
                "axis": axis, "axis_value": "" if v is None else v, "method": m, "trials": len(sel),
                "mean_value": float(np.mean([r["value"] for r in sel])),
                "mean_stm": float(np.mean([r["stm"] for r in sel])),
                "mean_fbar": float(np.mean(fb)) if fb else "",
                "mean_iterations": float(np.mean([r["iterations"] for r in sel])),
                "mean_stranded": float(np.mean([r["stranded"] for r in sel])),
                "feasible_fraction": float(np.mean([r["feasible"] for r in sel])),
            })
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f, "")) for f in fields])
    return buf.getvalue()


def plot_sweep(agg, axis: str, path) -> None:
    """Mean objective against the sweep axis, one line per method (SVG)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = {"mus": "number of MUs", "bss": "number of BSs", "alpha": "confidence level",
              "tau": "matching degree"}
    names = {"pkm": "PKM", "ikm": "IKM (lower bound)", "wf": "max-SINR + water-filling",
             "even": "max-SINR + even"}
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for m in dict.fromkeys(r["method"] for r in agg):
        pts = [(float(r["axis_value"]), r["mean_value"] / 1e6) for r in agg if r["method"] == m]
        ax.plot(*zip(*pts), marker="o", label=names.get(m, m))
    ax.set_xlabel(labels[axis])
    ax.set_ylabel("throughput (Mmsg/s)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    # fixed hash salt keeps the SVG byte-stable
    matplotlib.rcParams["svg.hashsalt"] = "semnet"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
