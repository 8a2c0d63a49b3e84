"""Heterogeneous network layout and physical-layer link quantities."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import FrozenSet

import numpy as np

D_MIN = 1.0  # metres; keeps the log-distance path loss non-negative
NOISE_DBM = -111.45
MIN_BIT_RATE = 0.01e6  # bit/s
BUDGET_HZ = 2e6


class ConfigError(ValueError):
    """Raised for invalid generator or scenario parameters."""


class Tier(str, enum.Enum):
    MACRO = "macro"
    PICO = "pico"
    FEMTO = "femto"


TIER_POWER_DBM = {Tier.MACRO: 43.0, Tier.PICO: 35.0, Tier.FEMTO: 20.0}

# (intercept dB, slope dB/decade)
_PATH_LOSS = {Tier.MACRO: (34.0, 40.0), Tier.PICO: (34.0, 40.0), Tier.FEMTO: (37.0, 30.0)}


@dataclass(frozen=True)
class BaseStation:
    id: int
    tier: Tier
    position: tuple
    tx_power_dbm: float
    budget_hz: float
    kb_set: FrozenSet[int] = frozenset()

    def __post_init__(self):
        if not self.budget_hz > 0:
            raise ConfigError(f"BS {self.id}: bandwidth budget must be positive")


@dataclass(frozen=True)
class MobileUser:
    id: int
    position: tuple
    required_kbs: FrozenSet[int] = frozenset()
    min_bit_rate: float = MIN_BIT_RATE

    def __post_init__(self):
        if not self.min_bit_rate > 0:
            raise ConfigError(f"MU {self.id}: minimum bit rate must be positive")


@dataclass(frozen=True)
class Topology:
    base_stations: tuple
    users: tuple
    radius: float = 500.0
    noise_dbm: float = NOISE_DBM

    @property
    def n_bs(self) -> int:
        return len(self.base_stations)

    @property
    def n_mu(self) -> int:
        return len(self.users)

    @property
    def budgets(self) -> np.ndarray:
        return np.array([b.budget_hz for b in self.base_stations], dtype=float)

    @property
    def min_bit_rates(self) -> np.ndarray:
        return np.array([u.min_bit_rate for u in self.users], dtype=float)

    def distances(self) -> np.ndarray:
        """MU-to-BS distance matrix (U x B), metres, before clamping."""
        mu = np.array([u.position for u in self.users], dtype=float).reshape(-1, 2)
        bs = np.array([b.position for b in self.base_stations], dtype=float).reshape(-1, 2)
        return np.linalg.norm(mu[:, None, :] - bs[None, :, :], axis=-1)

    def with_budgets(self, scale: float) -> "Topology":
        bss = tuple(BaseStation(b.id, b.tier, b.position, b.tx_power_dbm,
                                b.budget_hz * scale, b.kb_set)
                    for b in self.base_stations)
        return Topology(bss, self.users, self.radius, self.noise_dbm)

    def to_csv(self) -> str:
        """One row per entity: kind, id, tier, x, y, power, budget, rate, KBs."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "id", "tier", "x_m", "y_m", "tx_power_dbm",
                    "budget_hz", "min_bit_rate", "kbs"])
        for b in self.base_stations:
            w.writerow(["bs", b.id, b.tier.value, repr(float(b.position[0])),
                        repr(float(b.position[1])), b.tx_power_dbm, b.budget_hz, "",
                        " ".join(map(str, sorted(b.kb_set)))])
        for u in self.users:
            w.writerow(["mu", u.id, "", repr(float(u.position[0])),
                        repr(float(u.position[1])), "", "", u.min_bit_rate,
                        " ".join(map(str, sorted(u.required_kbs)))])
        return buf.getvalue()


@dataclass(frozen=True)
class GenConfig:
    """Parameters of the random layout; defaults follow the reference scenario."""

    n_macro: int = 1
    n_pico: int = 5
    n_femto: int = 10
    n_users: int = 200
    radius: float = 500.0
    powers_dbm: dict = field(default_factory=lambda: {t.value: p for t, p in TIER_POWER_DBM.items()})
    budget_hz: float = BUDGET_HZ
    noise_dbm: float = NOISE_DBM
    min_bit_rate: float = MIN_BIT_RATE
    kb_pool: int = 10
    kb_per_bs: int = 6
    kb_per_mu: int = 3

    def validate(self) -> None:
        counts = (self.n_macro, self.n_pico, self.n_femto, self.n_users)
        if min(counts) < 0:
            raise ConfigError("entity counts must be non-negative")
        if self.n_macro + self.n_pico + self.n_femto == 0:
            raise ConfigError("topology needs at least one base station")
        if self.n_users == 0:
            raise ConfigError("topology needs at least one mobile user")
        if not self.radius > 0:
            raise ConfigError("radius must be positive")
        if not self.budget_hz > 0:
            raise ConfigError("budget_hz must be positive")
        if not 0 < self.kb_per_mu <= self.kb_pool or not 0 <= self.kb_per_bs <= self.kb_pool:
            raise ConfigError("KB subset sizes must fit inside the KB pool")


def _uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _kb_subset(rng: np.random.Generator, pool: int, k: int) -> FrozenSet[int]:
    return frozenset(int(v) for v in rng.choice(pool, size=k, replace=False))


def generate_topology(cfg: GenConfig, seed: int) -> Topology:
    """Random layout: first macro at the centre, everything else uniform in the disc.

    BS ids run macro, pico, femto in that order; MU ids follow generation order.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    powers = {Tier(k): float(v) for k, v in cfg.powers_dbm.items()}
    tiers = ([Tier.MACRO] * cfg.n_macro + [Tier.PICO] * cfg.n_pico
             + [Tier.FEMTO] * cfg.n_femto)
    positions = _uniform_disc(rng, len(tiers), cfg.radius)
    if cfg.n_macro:
        positions[0] = (0.0, 0.0)
    bss = tuple(
        BaseStation(j, t, (float(positions[j, 0]), float(positions[j, 1])),
                    powers[t], cfg.budget_hz, _kb_subset(rng, cfg.kb_pool, cfg.kb_per_bs))
        for j, t in enumerate(tiers))
    mu_pos = _uniform_disc(rng, cfg.n_users, cfg.radius)
    users = tuple(
        MobileUser(i, (float(mu_pos[i, 0]), float(mu_pos[i, 1])),
                   _kb_subset(rng, cfg.kb_pool, cfg.kb_per_mu), cfg.min_bit_rate)
        for i in range(cfg.n_users))
    return Topology(bss, users, cfg.radius, cfg.noise_dbm)


def path_loss_db(tier, distance):
    """Log-distance path loss in dB (base-10 log), distance clamped at ``D_MIN``."""
    tier = Tier(tier)
    d = np.asarray(distance, dtype=float)
    if np.any(~(d >= 0)):
        raise ValueError("distance must be a non-negative number")
    d = np.maximum(d, D_MIN)
    a, b = _PATH_LOSS[tier]
    out = a + b * np.log10(d)
    return float(out) if out.ndim == 0 else out


def dbm_to_mw(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


@dataclass(frozen=True)
class ChannelState:
    """Per-link SINR, spectral efficiency and threshold bandwidth (U x B)."""

    sinr: np.ndarray
    spectral_eff: np.ndarray
    n_threshold: np.ndarray
    min_bit_rate: np.ndarray  # per MU, bit/s

    @property
    def shape(self):
        return self.sinr.shape

    @classmethod
    def from_sinr(cls, sinr, min_bit_rate) -> "ChannelState":
        sinr = np.asarray(sinr, dtype=float)
        rate = np.broadcast_to(np.asarray(min_bit_rate, dtype=float), sinr.shape[:1]).copy()
        eff = np.log2(1.0 + sinr)
        return cls(sinr, eff, rate[:, None] / eff, rate)


def received_power_mw(topology: Topology) -> np.ndarray:
    d = topology.distances()
    rx = np.empty_like(d)
    for j, b in enumerate(topology.base_stations):
        rx[:, j] = dbm_to_mw(b.tx_power_dbm - path_loss_db(b.tier, d[:, j]))
    return rx


def compute_sinr(topology: Topology) -> ChannelState:
    """Downlink SINR with full-buffer co-channel interference from every other BS."""
    rx = received_power_mw(topology)
    noise = float(dbm_to_mw(topology.noise_dbm))
    others = np.ones((rx.shape[1], rx.shape[1])) - np.eye(rx.shape[1])
    sinr = rx / (rx @ others + noise)
    return ChannelState.from_sinr(sinr, topology.min_bit_rates)
