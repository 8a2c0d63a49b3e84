"""Semantic channel models: B2M maps, knowledge matching, eligibility sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .topology import ChannelState, Topology

RAW = "raw"
PHYSICAL = "physical"

# SINR (dB) -> B2M slope; better links convert bits to messages faster
DEFAULT_SLOPE_TABLE = ((0.0, 0.55), (3.0, 0.7), (6.0, 0.85), (9.0, 1.0))


@dataclass(frozen=True)
class B2MProfile:
    """Affine bit-rate-to-message-rate map per link: S(c) = slope * c + intercept."""

    slope: np.ndarray
    intercept: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.slope, dtype=float)
        h = np.asarray(self.intercept, dtype=float)
        k, h = np.broadcast_arrays(k, h)
        if np.any(k < 0):
            raise ValueError("B2M slope must be non-negative")
        object.__setattr__(self, "slope", np.array(k))
        object.__setattr__(self, "intercept", np.array(h))

    @classmethod
    def uniform(cls, shape, slope: float = 1.0, intercept: float = 0.0) -> "B2MProfile":
        return cls(np.full(shape, float(slope)), np.full(shape, float(intercept)))

    @classmethod
    def from_sinr_table(cls, channel: ChannelState,
                        table: Sequence = DEFAULT_SLOPE_TABLE,
                        intercept=0.0) -> "B2MProfile":
        """Slope interpolated piecewise-linearly in SINR (dB), held flat past the ends."""
        pts = np.asarray(table, dtype=float)
        sinr_db = 10.0 * np.log10(channel.sinr)
        k = np.interp(sinr_db, pts[:, 0], pts[:, 1])
        return cls(k, np.broadcast_to(np.asarray(intercept, dtype=float), k.shape))

    def __call__(self, bit_rate):
        return b2m_pkm(bit_rate, self.slope, self.intercept)


def b2m_pkm(bit_rate, slope=1.0, intercept=0.0):
    """Message rate of a perfectly matched link."""
    return np.asarray(slope) * np.asarray(bit_rate, dtype=float) + np.asarray(intercept)


def b2m_ikm(bit_rate, slope=1.0, intercept=0.0, beta=1.0):
    """Message rate when only a fraction ``beta`` of messages is interpretable."""
    return np.asarray(beta) * b2m_pkm(bit_rate, slope, intercept)


def beta_std(tau):
    tau = np.asarray(tau, dtype=float)
    return np.sqrt(np.clip(tau * (1.0 - tau), 0.0, None))


def sample_beta(tau, rng: np.random.Generator, mode: str = RAW, size=None):
    """Draw matching coefficients from N(tau, tau(1 - tau)).

    ``mode="raw"`` returns the Gaussian draw unchanged; ``mode="physical"``
    clips it to [0, 1].
    """
    tau = np.asarray(tau, dtype=float)
    if np.any((tau < 0) | (tau > 1)):
        raise ValueError("matching degree must lie in [0, 1]")
    if mode not in (RAW, PHYSICAL):
        raise ValueError(f"unknown sampling mode {mode!r}")
    shape = tau.shape if size is None else tuple(np.atleast_1d(size)) + tau.shape
    beta = tau + beta_std(tau) * rng.standard_normal(shape)
    if mode == PHYSICAL:
        beta = np.clip(beta, 0.0, 1.0)
    return beta


def binomial_matching_oracle(tau: float, M: int, rng: np.random.Generator, size=None):
    """Mean of ``M`` Bernoulli(tau) KB-matching indicators.

    With ``size`` set, returns that many independent means.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("matching degree must lie in [0, 1]")
    n = 1 if size is None else int(size)
    z = rng.random((n, M)) < tau
    means = z.mean(axis=1)
    return float(means[0]) if size is None else means


def tau_from_kbs(required: Sequence[frozenset], held: Sequence[frozenset]) -> np.ndarray:
    """tau_ij = |K_i & K_j| / |K_i| (fraction of MU i's KBs present at BS j)."""
    tau = np.zeros((len(required), len(held)))
    for i, ki in enumerate(required):
        if not ki:
            tau[i] = 1.0
            continue
        for j, kj in enumerate(held):
            tau[i, j] = len(ki & kj) / len(ki)
    return tau


@dataclass(frozen=True)
class MatchingProfile:
    """Matching degrees and the per-MU eligibility masks for both modes."""

    tau: np.ndarray
    tau0: float
    pkm_eligible: np.ndarray  # bool U x B
    ikm_eligible: np.ndarray  # bool U x B

    @property
    def sigma(self) -> np.ndarray:
        return beta_std(self.tau)

    @property
    def stranded_pkm(self) -> list:
        return [int(i) for i in np.flatnonzero(~self.pkm_eligible.any(axis=1))]

    @property
    def stranded_ikm(self) -> list:
        return [int(i) for i in np.flatnonzero(~self.ikm_eligible.any(axis=1))]

    def eligible(self, mode: str) -> np.ndarray:
        return self.pkm_eligible if mode == "pkm" else self.ikm_eligible

    def sets(self, mode: str) -> list:
        """Eligible BS ids per MU, as Python lists."""
        m = self.eligible(mode)
        return [list(map(int, np.flatnonzero(row))) for row in m]


def eligibility(topology: Topology, tau0: float = 0.0,
                tau: Optional[np.ndarray] = None) -> MatchingProfile:
    """Build eligibility sets.

    PKM eligibility is KB subset inclusion.  ``tau`` (scalar or U x B) fixes
    the matching degrees; without it they are derived from the KB sets.
    """
    if not 0.0 <= tau0 <= 1.0:
        raise ValueError("tau0 must lie in [0, 1]")
    required = [u.required_kbs for u in topology.users]
    held = [b.kb_set for b in topology.base_stations]
    shape = (topology.n_mu, topology.n_bs)
    pkm = np.array([[ki <= kj for kj in held] for ki in required], dtype=bool).reshape(shape)
    if tau is None:
        tau_m = tau_from_kbs(required, held)
    else:
        tau_m = np.broadcast_to(np.asarray(tau, dtype=float), shape).copy()
        if np.any((tau_m < 0) | (tau_m > 1)):
            raise ValueError("matching degrees must lie in [0, 1]")
    return MatchingProfile(tau_m, float(tau0), pkm, tau_m >= tau0)


def load_matrix_csv(path, shape=None) -> np.ndarray:
    """Read a numeric U x B matrix (comma separated, no header)."""
    m = np.loadtxt(path, delimiter=",", ndmin=2)
    if shape is not None and m.shape != tuple(shape):
        raise ValueError(f"{path}: expected shape {tuple(shape)}, got {m.shape}")
    return m
