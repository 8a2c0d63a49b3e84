"""Scenario configuration files (JSON or TOML).

Schema (every section and key is optional)::

    [network]
    counts = {macro = 1, pico = 5, femto = 10, users = 200}
    radius = 500.0
    powers_dbm = {macro = 43.0, pico = 35.0, femto = 20.0}
    noise_dbm = -111.45
    budget_hz = 2e6
    min_bit_rate = 1e4

    [semantics]
    tau = 0.5                  # or kb_policy = {pool = 10, per_bs = 6, per_mu = 3}
    tau0 = 0.1
    hs = 0.0
    slope = 1.0                # or "sinr_table"

    [pkm]
    stepsize_coeff = 0.8
    max_iters = 500
    stability_window = 10

    [ikm]
    alpha = 0.95
    r_init = 1.0
    r_decay = 0.2
    r_min = 1e-6

    [experiment]
    trials = 50
    seed = 0
    workers = 1

Errors are reported as ``ConfigError`` with the offending line when it can
be located.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .ikm import IkmConfig
from .pkm import PkmConfig
from .topology import ConfigError, GenConfig

SCHEMA = {
    "network": {"counts", "radius", "powers_dbm", "noise_dbm", "budget_hz", "min_bit_rate"},
    "semantics": {"tau", "kb_policy", "tau0", "hs", "slope"},
    "pkm": {"stepsize_coeff", "max_iters", "stability_window"},
    "ikm": {"alpha", "r_init", "r_decay", "r_min", "inner_tol", "inner_max_iters", "ba_max_sweeps"},
    "experiment": {"trials", "seed", "workers"},
}
COUNT_KEYS = {"macro": "n_macro", "pico": "n_pico", "femto": "n_femto", "users": "n_users"}
KB_KEYS = {"pool": "kb_pool", "per_bs": "kb_per_bs", "per_mu": "kb_per_mu"}
TIERS = ("macro", "pico", "femto")


@dataclass(frozen=True)
class ScenarioConfig:
    network: GenConfig = field(default_factory=GenConfig)
    tau: Optional[float] = None
    tau0: float = 0.0
    hs: float = 0.0
    slope: Union[float, str] = 1.0
    pkm: PkmConfig = field(default_factory=PkmConfig)
    ikm: IkmConfig = field(default_factory=IkmConfig)
    trials: int = 50
    seed: int = 0
    workers: int = 1

    def replace(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


def _line_of(text: str, section: str, key: Optional[str]) -> Optional[int]:
    """Best-effort 1-based line of ``key`` (inside ``section``) in the source."""
    lines = text.splitlines()
    sec_pat = re.compile(rf'^\s*(\[\s*{re.escape(section)}\s*\]|"{re.escape(section)}"\s*:)')
    start = None
    for k, line in enumerate(lines):
        if sec_pat.search(line):
            start = k
            break
    if start is None:
        return None
    if key is None:
        return start + 1
    key_pat = re.compile(rf'(^|[\s{{,])"?{re.escape(key)}"?\s*[:=]')
    for k in range(start, len(lines)):
        if k > start and re.match(r"^\s*\[", lines[k]):
            break
        if key_pat.search(lines[k]):
            return k + 1
    return start + 1


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def fail(self, section, key, msg):
        line = _line_of(self.text, section, key)
        where = f"{self.source}:{line}" if line else self.source
        name = f"{section}.{key}" if key else section
        raise ConfigError(f"{where}: {name}: {msg}")

    def number(self, sec, data, key, kind=float, lo=None, hi=None, lo_open=False):
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(sec, key, f"expected a number, got {v!r}")
        if kind is int and v != int(v):
            self.fail(sec, key, f"expected an integer, got {v!r}")
        v = kind(v)
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(sec, key, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            self.fail(sec, key, f"must be <= {hi}, got {v}")
        return v

    def table(self, sec, data, key, allowed):
        v = data[key]
        if not isinstance(v, dict):
            self.fail(sec, key, "expected a table")
        extra = set(v) - set(allowed)
        if extra:
            self.fail(sec, key, f"unknown keys {sorted(extra)}")
        return v


def parse_config(text: str, fmt: str, source: str = "<config>") -> ScenarioConfig:
    """Parse and validate config text in ``fmt`` ("json" or "toml")."""
    try:
        if fmt == "json":
            raw = json.loads(text)
        elif fmt == "toml":
            raw = tomllib.loads(text)
        else:
            raise ConfigError(f"{source}: unsupported config format {fmt!r}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}: {e.msg}") from None
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        where = f"{source}:{m.group(1)}" if m else source
        raise ConfigError(f"{where}: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be a table/object")

    rd = _Reader(text, source)
    for sec, body in raw.items():
        if sec not in SCHEMA:
            rd.fail(sec, None, "unknown section")
        if not isinstance(body, dict):
            rd.fail(sec, None, "section must be a table/object")
        for key in body:
            if key not in SCHEMA[sec]:
                rd.fail(sec, key, "unknown key")

    net = raw.get("network", {})
    gen = {}
    if "counts" in net:
        for k, v in rd.table("network", net, "counts", COUNT_KEYS).items():
            gen[COUNT_KEYS[k]] = _count(rd, k, v)
    if "radius" in net:
        gen["radius"] = rd.number("network", net, "radius", lo=0, lo_open=True)
    if "powers_dbm" in net:
        p = rd.table("network", net, "powers_dbm", TIERS)
        base = dict(GenConfig().powers_dbm)
        for k, v in p.items():
            base[k] = _num(rd, "network", "powers_dbm", v)
        gen["powers_dbm"] = base
    if "noise_dbm" in net:
        gen["noise_dbm"] = rd.number("network", net, "noise_dbm")
    if "budget_hz" in net:
        gen["budget_hz"] = rd.number("network", net, "budget_hz", lo=0, lo_open=True)
    if "min_bit_rate" in net:
        gen["min_bit_rate"] = rd.number("network", net, "min_bit_rate", lo=0, lo_open=True)

    sem = raw.get("semantics", {})
    out = {}
    if "tau" in sem and "kb_policy" in sem:
        rd.fail("semantics", "kb_policy", "give either tau or kb_policy, not both")
    if "tau" in sem:
        out["tau"] = rd.number("semantics", sem, "tau", lo=0, hi=1)
    if "kb_policy" in sem:
        for k, v in rd.table("semantics", sem, "kb_policy", KB_KEYS).items():
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                rd.fail("semantics", "kb_policy", f"{k} must be a non-negative integer")
            gen[KB_KEYS[k]] = v
    if "tau0" in sem:
        out["tau0"] = rd.number("semantics", sem, "tau0", lo=0, hi=1)
    if "hs" in sem:
        out["hs"] = rd.number("semantics", sem, "hs")
    if "slope" in sem:
        if sem["slope"] == "sinr_table":
            out["slope"] = "sinr_table"
        else:
            out["slope"] = rd.number("semantics", sem, "slope", lo=0)

    network = GenConfig(**gen)
    try:
        network.validate()
    except ConfigError as e:
        rd.fail("network", None, str(e))

    pk = raw.get("pkm", {})
    pkm_kw = {}
    if "stepsize_coeff" in pk:
        pkm_kw["stepsize_coeff"] = rd.number("pkm", pk, "stepsize_coeff", lo=0, lo_open=True)
    if "max_iters" in pk:
        pkm_kw["max_iters"] = rd.number("pkm", pk, "max_iters", int, lo=1)
    if "stability_window" in pk:
        pkm_kw["stability_window"] = rd.number("pkm", pk, "stability_window", int, lo=1)

    ik = raw.get("ikm", {})
    ikm_kw = {}
    for key, kind in (("alpha", float), ("r_init", float), ("r_decay", float), ("r_min", float),
                      ("inner_tol", float), ("inner_max_iters", int), ("ba_max_sweeps", int)):
        if key in ik:
            ikm_kw[key] = rd.number("ikm", ik, key, kind)
    try:
        ikm = IkmConfig(**ikm_kw)
    except ValueError as e:
        bad = next((k for k in ikm_kw if str(e).startswith(k)), None)
        rd.fail("ikm", bad, str(e))

    ex = raw.get("experiment", {})
    if "trials" in ex:
        out["trials"] = rd.number("experiment", ex, "trials", int, lo=1)
    if "seed" in ex:
        out["seed"] = rd.number("experiment", ex, "seed", int, lo=0)
    if "workers" in ex:
        out["workers"] = rd.number("experiment", ex, "workers", int, lo=1)

    return ScenarioConfig(network=network, pkm=PkmConfig(**pkm_kw), ikm=ikm, **out)


def _num(rd, sec, key, v):
    return rd.number(sec, {key: v}, key)


def _count(rd, k, v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        rd.fail("network", "counts", f"{k} must be a non-negative integer, got {v!r}")
    return v


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e.strerror})") from None
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return parse_config(text, fmt, str(path))
