"""Experiment configuration, deterministic user geometry, and seeded RNG streams.

All powers and gains are stored in linear units; dB/dBm appear only in config
files and reports. Config files are either line-based ``key = value`` documents
or JSON objects with the same keys.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Malformed config file or a parameter outside its allowed range."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Scenario:
    """Resolved experiment description.

    Attributes mirror the simulation setup: array geometry (L microstrips of S
    elements on the (x,z) plane), user circle geometry, Rician statistics, and
    solver controls. N = L*S elements total.
    """

    L: int
    S: int
    K: int
    lambda_c: float = 0.0107           # carrier wavelength (m)
    d_x: float | None = None           # element spacing along a microstrip (m)
    d_z: float | None = None           # microstrip spacing (m)
    alpha_wg: float = 0.6              # waveguide attenuation (1/m)
    gamma_wg: float = 827.67           # guide wavenumber (1/m)
    K0: float = 10.0                   # Rician factor, linear
    r: float = 0.7                     # exponential correlation coefficient
    gamma_pl: float = 2.5              # path-loss exponent
    alpha0: float = 1e-3               # reference path loss at D0, linear
    D0: float = 1.0                    # reference distance (m)
    N0: float = 1e-8                   # uplink noise power, linear
    N_k: float = 1e-11                 # downlink UE noise power (W)
    P_max: float | None = None         # downlink power budget (W); None = uplink only
    dma_position: tuple = (0.0, 0.0, 20.0)
    user_center: tuple = (0.0, 200.0, 0.0)
    user_radius: float = 20.0
    constraint: str = "LP"             # LP | AO | BA | UC
    trials: int = 10_000
    seed: int = 0
    randomize_users: bool = False
    rho_positions: tuple | None = None  # per-element feed distances (length S)
    q0: str | None = None               # optional initial weights ("ones")
    # architecture power model (linear W)
    P_RF: float = dbm_to_watt(27.0)
    P_BS: float = dbm_to_watt(39.0)
    P_PS: float = dbm_to_watt(17.0)
    amp_eff: float = 0.35
    # solver controls
    wmmse_tol: float = 1e-4
    wmmse_max_iters: int = 200
    ewr_tol: float = 1e-6
    ewr_max_sweeps: int = 100
    pdd_beta0: float = 1e5
    pdd_c1: float = 0.5
    pdd_c2: float = 1.0 / 6.0
    pdd_eps: float = 1e-5
    pdd_inner_tol: float = 1e-4
    pdd_inner_iters: int = 100
    pdd_outer_iters: int = 200

    def __post_init__(self):
        if self.d_x is None:
            object.__setattr__(self, "d_x", self.lambda_c / 2.0)
        if self.d_z is None:
            object.__setattr__(self, "d_z", self.lambda_c / 2.0)
        _validate(self)

    @property
    def N(self) -> int:
        return self.L * self.S


@dataclass(frozen=True)
class UserGeometry:
    """One user's placement relative to the DMA."""

    position: tuple          # (x, y, z) in m
    distance: float          # D_k (m)
    psi: float               # azimuth AoA (rad)
    omega: float             # polar AoA from the array z-axis (rad)
    alpha: float             # large-scale path loss, linear


def _validate(sc: Scenario) -> None:
    def require(cond, key, msg):
        if not cond:
            raise ConfigError(f"invalid value for '{key}': {msg}")

    require(sc.L >= 1, "L", f"must be >= 1, got {sc.L}")
    require(sc.S >= 1, "S", f"must be >= 1, got {sc.S}")
    require(sc.K >= 1, "K", f"must be >= 1, got {sc.K}")
    require(sc.lambda_c > 0, "lambda_c", f"must be > 0, got {sc.lambda_c}")
    require(sc.d_x > 0, "d_x", f"must be > 0, got {sc.d_x}")
    require(sc.d_z > 0, "d_z", f"must be > 0, got {sc.d_z}")
    require(sc.user_radius > 0, "user_radius", f"must be > 0, got {sc.user_radius}")
    require(sc.K0 >= 0, "K0_db", f"linear K0 must be >= 0, got {sc.K0}")
    require(0 < sc.r < 1, "r", f"must satisfy 0 < r < 1, got {sc.r}")
    require(sc.alpha0 > 0, "alpha0_db", f"linear alpha0 must be > 0, got {sc.alpha0}")
    require(sc.D0 > 0, "D0", f"must be > 0, got {sc.D0}")
    require(sc.N0 > 0, "N0_db", f"linear N0 must be > 0, got {sc.N0}")
    require(sc.N_k > 0, "Nk_dbm", f"linear N_k must be > 0, got {sc.N_k}")
    if sc.P_max is not None:
        require(sc.P_max > 0, "Pmax_dbm", f"linear P_max must be > 0, got {sc.P_max}")
    require(sc.alpha_wg >= 0, "alpha_wg", f"must be >= 0, got {sc.alpha_wg}")
    require(sc.gamma_wg > 0, "gamma_wg", f"must be > 0, got {sc.gamma_wg}")
    require(sc.constraint in ("LP", "AO", "BA", "UC"), "constraint",
            f"must be one of LP/AO/BA/UC, got {sc.constraint!r}")
    require(sc.trials >= 1, "trials", f"must be >= 1, got {sc.trials}")
    require(0 < sc.amp_eff <= 1, "amp_eff", f"must be in (0, 1], got {sc.amp_eff}")
    require(len(sc.dma_position) == 3, "dma_position", "must have 3 coordinates")
    require(len(sc.user_center) == 3, "user_center", "must have 3 coordinates")
    if sc.rho_positions is not None:
        require(len(sc.rho_positions) == sc.S, "rho_positions",
                f"must list {sc.S} distances, got {len(sc.rho_positions)}")
        require(all(p > 0 for p in sc.rho_positions), "rho_positions",
                "distances must be > 0")
    if sc.q0 is not None:
        require(sc.q0 == "ones", "q0", f"only 'ones' is supported, got {sc.q0!r}")


# Config keys. dB/dBm keys are converted to the linear Scenario fields on load.
_DB_KEYS = {"K0_db": "K0", "alpha0_db": "alpha0", "N0_db": "N0"}
_DBM_KEYS = {"Nk_dbm": "N_k", "Pmax_dbm": "P_max", "P_RF_dbm": "P_RF",
             "P_BS_dbm": "P_BS", "P_PS_dbm": "P_PS"}
_DIRECT_KEYS = {
    "L", "S", "K", "lambda_c", "d_x", "d_z", "alpha_wg", "gamma_wg", "r",
    "gamma_pl", "D0", "dma_position", "user_center", "user_radius",
    "constraint", "trials", "seed", "randomize_users", "rho_positions", "q0",
    "amp_eff", "wmmse_tol", "wmmse_max_iters", "ewr_tol", "ewr_max_sweeps",
    "pdd_beta0", "pdd_c1", "pdd_c2", "pdd_eps", "pdd_inner_tol",
    "pdd_inner_iters", "pdd_outer_iters",
}
KNOWN_KEYS = _DIRECT_KEYS | set(_DB_KEYS) | set(_DBM_KEYS)
_REQUIRED_KEYS = {"L", "S", "K"}
_INT_FIELDS = {"L", "S", "K", "trials", "seed", "wmmse_max_iters",
               "ewr_max_sweeps", "pdd_inner_iters", "pdd_outer_iters"}
_TUPLE_FIELDS = {"dma_position", "user_center", "rho_positions"}


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if text.startswith(("'", '"')) and text.endswith(text[0]) and len(text) >= 2:
        return text[1:-1]
    if "," in text:
        return tuple(float(x) for x in text.split(","))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_lines(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key '{key}'")
        out[key] = _parse_scalar(val)
    return out


def scenario_from_dict(raw: dict) -> Scenario:
    """Build a validated Scenario from raw config keys (dB still in dB)."""
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(raw)
    if missing:
        raise ConfigError(f"missing required config keys: {sorted(missing)}")

    kwargs = {}
    for key, val in raw.items():
        if key in _DB_KEYS:
            kwargs[_DB_KEYS[key]] = db_to_linear(_as_number(key, val))
        elif key in _DBM_KEYS:
            kwargs[_DBM_KEYS[key]] = dbm_to_watt(_as_number(key, val))
        elif key in _TUPLE_FIELDS:
            if not isinstance(val, (tuple, list)):
                raise ConfigError(f"invalid value for '{key}': expected a "
                                  f"comma-separated list, got {val!r}")
            kwargs[key] = tuple(float(x) for x in val)
        elif key in _INT_FIELDS:
            num = _as_number(key, val)
            if num != int(num):
                raise ConfigError(f"invalid value for '{key}': expected an "
                                  f"integer, got {val!r}")
            kwargs[key] = int(num)
        elif key == "randomize_users":
            if not isinstance(val, bool):
                raise ConfigError(f"invalid value for '{key}': expected "
                                  f"true/false, got {val!r}")
            kwargs[key] = val
        elif key in ("constraint", "q0"):
            kwargs[key] = str(val)
        else:
            kwargs[key] = _as_number(key, val)
    return Scenario(**kwargs)


def _as_number(key, val):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"invalid value for '{key}': expected a number, "
                          f"got {val!r}")
    return val


def read_config(path: str) -> dict:
    """Read a config file (key=value lines or JSON) into a raw key dict."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON parse failure: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
        return {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return _parse_lines(text)


def load_scenario(path: str, overrides: dict | None = None) -> Scenario:
    """Load a config file into a validated Scenario.

    `overrides` are raw config keys applied on top of the file content.
    """
    raw = read_config(path)
    if overrides:
        raw.update(overrides)
    return scenario_from_dict(raw)


def resolved_config(sc: Scenario) -> dict:
    """Canonical resolved-parameter dict (linear units), for fingerprinting."""
    out = {}
    for f in fields(sc):
        val = getattr(sc, f.name)
        out[f.name] = list(val) if isinstance(val, tuple) else val
    out["N"] = sc.N
    return out


_STREAM_KIND = {"mc": 0, "init": 1, "geometry": 2}


def rng_stream(master_seed: int, trial: int, kind: str = "mc") -> np.random.Generator:
    """Deterministic, trial-indexed RNG substream.

    Same (master_seed, trial, kind) always yields the same draws; distinct
    trials give statistically independent streams.
    """
    if trial < 0:
        raise ValueError(f"trial index must be >= 0, got {trial}")
    seq = np.random.SeedSequence(entropy=master_seed,
                                 spawn_key=(_STREAM_KIND[kind], trial))
    return np.random.default_rng(seq)


def place_users(sc: Scenario) -> list[UserGeometry]:
    """Place K users on the configured circle and compute per-user geometry.

    Deterministic equal angular spacing 2*pi*k/K unless `randomize_users` is
    set, in which case angles are drawn from the scenario's geometry stream.
    The polar angle omega is measured from the array z-axis and psi is the
    azimuth in the (x, y) plane, so the unit direction from the DMA is
    (sin(omega)cos(psi), sin(omega)sin(psi), cos(omega)).
    """
    if sc.randomize_users:
        rng = rng_stream(sc.seed, 0, kind="geometry")
        angles = rng.uniform(0.0, 2.0 * math.pi, sc.K)
    else:
        angles = 2.0 * math.pi * np.arange(sc.K) / sc.K

    dma = np.asarray(sc.dma_position, dtype=float)
    cx, cy, cz = sc.user_center
    users = []
    for a in angles:
        pos = np.array([cx + sc.user_radius * math.cos(a),
                        cy + sc.user_radius * math.sin(a),
                        cz])
        diff = pos - dma
        dist = float(np.linalg.norm(diff))
        u = diff / dist
        omega = math.acos(min(1.0, max(-1.0, u[2])))
        psi = math.atan2(u[1], u[0])
        alpha = sc.alpha0 * (dist / sc.D0) ** (-sc.gamma_pl)
        users.append(UserGeometry(position=tuple(pos), distance=dist,
                                  psi=psi, omega=omega, alpha=alpha))
    return users


def with_overrides(sc: Scenario, **changes) -> Scenario:
    """Return a copy of the scenario with the given resolved fields replaced."""
    return replace(sc, **changes)
