"""Problem instances, assignments, solver reports and the overload repair."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .semantics import B2MProfile, MatchingProfile, eligibility
from .topology import ChannelState, Topology, compute_sinr

BUDGET_RTOL = 1e-9


@dataclass(frozen=True)
class Instance:
    """Everything a solver needs about one network snapshot."""

    channel: ChannelState
    b2m: B2MProfile
    matching: MatchingProfile
    budgets: np.ndarray
    topology: Optional[Topology] = None

    @classmethod
    def build(cls, topology: Topology, tau=None, tau0: float = 0.0,
              b2m: Optional[B2MProfile] = None) -> "Instance":
        channel = compute_sinr(topology)
        if b2m is None:
            b2m = B2MProfile.uniform(channel.shape)
        return cls(channel, b2m, eligibility(topology, tau0, tau), topology.budgets, topology)

    @property
    def shape(self):
        return self.channel.shape

    @property
    def n_threshold(self) -> np.ndarray:
        return self.channel.n_threshold

    def message_rate(self, n) -> np.ndarray:
        """Per-link PKM message rate S(n * e) for a bandwidth matrix ``n``."""
        return self.b2m.slope * (np.asarray(n) * self.channel.spectral_eff) + self.b2m.intercept

    def with_tau(self, tau, tau0: Optional[float] = None) -> "Instance":
        m = self.matching
        tau_m = np.broadcast_to(np.asarray(tau, dtype=float), self.shape).copy()
        t0 = m.tau0 if tau0 is None else float(tau0)
        matching = MatchingProfile(tau_m, t0, m.pkm_eligible, tau_m >= t0)
        return Instance(self.channel, self.b2m, matching, self.budgets, self.topology)

    def with_budgets(self, scale: float) -> "Instance":
        return Instance(self.channel, self.b2m, self.matching, self.budgets * scale,
                        None if self.topology is None else self.topology.with_budgets(scale))


@dataclass
class Assignment:
    """Binary association ``x`` and bandwidth ``n`` (Hz), both U x B."""

    x: np.ndarray
    n: np.ndarray
    stranded: list = field(default_factory=list)
    feasible: bool = True

    @property
    def serving(self) -> np.ndarray:
        """Serving BS per MU, -1 for stranded MUs."""
        return np.where(self.x.any(axis=1), self.x.argmax(axis=1), -1)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.x[:, j])

    def violations(self, n_threshold, budgets, eligible) -> list:
        """Constraint violations, as human-readable strings (empty when clean)."""
        out = []
        x = self.x.astype(bool)
        rows = x.sum(axis=1)
        stranded = set(self.stranded)
        for i, c in enumerate(rows):
            if i in stranded:
                if c != 0:
                    out.append(f"stranded MU {i} still associated")
            elif c != 1:
                out.append(f"MU {i} associated with {c} BSs")
        bad = x & ~np.asarray(eligible, dtype=bool)
        for i, j in zip(*np.nonzero(bad)):
            out.append(f"MU {i} associated with ineligible BS {j}")
        used = np.where(x, self.n, 0.0).sum(axis=0)
        tol = BUDGET_RTOL * np.maximum(budgets, 1.0)
        for j in np.flatnonzero(used > budgets + tol):
            out.append(f"BS {j} uses {used[j]:.6g} Hz > budget {budgets[j]:.6g}")
        short = x & (self.n < n_threshold * (1 - 1e-12))
        for i, j in zip(*np.nonzero(short)):
            out.append(f"link ({i},{j}) below threshold bandwidth")
        if np.any(self.n[~x] != 0):
            out.append("bandwidth assigned on inactive links")
        return out


@dataclass
class SolverReport:
    method: str
    objective: float
    stm: float
    fbar: Optional[float] = None
    iterations: int = 0
    runtime_s: float = 0.0
    trace: list = field(default_factory=list)
    multipliers: Optional[list] = None
    repair_actions: list = field(default_factory=list)
    stranded: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d, default=_jsonable))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def trace_csv(self) -> str:
        lines = ["iteration,value"]
        lines += [f"{k + 1},{v!r}" for k, v in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def one_hot(choice: np.ndarray, n_bs: int) -> np.ndarray:
    """U x B 0/1 matrix from a serving vector (-1 means unassigned)."""
    x = np.zeros((choice.size, n_bs), dtype=int)
    ok = choice >= 0
    x[np.flatnonzero(ok), choice[ok]] = 1
    return x


def masked_argmax(score: np.ndarray, mask: np.ndarray, secondary=None) -> np.ndarray:
    """Row-wise argmax over ``mask``; ties go to the smallest ``secondary``
    value (if given) and then the lowest column. Rows without candidates get -1."""
    s = np.where(mask, score, -np.inf)
    best = s.max(axis=1, initial=-np.inf)
    cand = mask & (s == best[:, None])
    if secondary is not None:
        sec = np.where(cand, secondary, np.inf)
        cand &= sec == sec.min(axis=1, initial=np.inf)[:, None]
    out = cand.argmax(axis=1)
    return np.where(mask.any(axis=1), out, -1)


def repair_overload(x, n_threshold, budgets, preference, eligible):
    """Evict MUs from over-budget BSs until every threshold load fits.

    Over-budget BSs are handled in descending overload; inside a BS the MU
    with the largest threshold bandwidth leaves first and moves to the
    eligible BS with the highest ``preference`` that still has room for it.
    MUs with nowhere to go are stranded.

    Returns (x, actions, stranded).
    """
    x = np.array(x, dtype=int, copy=True)
    nt = np.asarray(n_threshold, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    eligible = np.asarray(eligible, dtype=bool)
    pref = np.asarray(preference, dtype=float)
    load = (x * nt).sum(axis=0)
    tol = BUDGET_RTOL * np.maximum(budgets, 1.0)
    over = load - budgets
    order = [int(j) for j in np.argsort(-over, kind="stable") if over[j] > tol[j]]
    actions, stranded = [], []
    for j in order:
        while load[j] > budgets[j] + tol[j]:
            members = np.flatnonzero(x[:, j])
            # largest consumer first, lowest id among equals
            i = int(members[np.argmax(nt[members, j])])
            x[i, j] = 0
            load[j] -= nt[i, j]
            room = eligible[i] & (budgets - load + tol >= nt[i])
            room[j] = False
            if room.any():
                k = int(masked_argmax(pref[i][None, :], room[None, :])[0])
                x[i, k] = 1
                load[k] += nt[i, k]
                actions.append({"mu": i, "from": j, "to": k})
            else:
                stranded.append(i)
                actions.append({"mu": i, "from": j, "to": None})
    return x, actions, stranded


def check_budgets(x, n_threshold, budgets) -> np.ndarray:
    """Threshold load per BS."""
    return (np.asarray(x) * np.asarray(n_threshold)).sum(axis=0)
