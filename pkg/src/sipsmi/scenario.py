"""Deterministic scenario construction.

Builds every non-random input of the model from a validated configuration:
uniform-linear-array steering vectors, row-orthonormal DFT pilots, the
random-but-seeded communication channel, and the two derived scalars that
drive the sensing analysis (effective SNR rho and beam gain d).

All constructors are pure functions of the config and return immutable
values, so they can be shared freely across worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ._linalg import check_hermitian

# Substream tags, so channel draws, Monte-Carlo trials and gradient-check
# directions never consume the same random stream.
CHANNEL_STREAM = 1
MC_STREAM = 2
GRADCHECK_STREAM = 3


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed or fails validation."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def derived_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the substream identified by (seed, *key)."""
    ss = np.random.SeedSequence(entropy=(int(seed),) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one experiment.

    Powers are in watts, angles in degrees, rates in nats. ``alpha`` may be
    left as None, in which case |alpha|^2 = noise_power * rho_target / n_rx_sense
    so the effective sensing SNR equals ``rho_target`` regardless of the
    noise floor.
    """

    n_tx: int = 4
    n_rx_sense: int = 6
    n_rx_comm: int = 4
    slots: int = 16
    aod_deg: float = 10.0
    aoa_deg: float = 20.0
    alpha: complex | None = None
    rho_target: float = 10.0
    noise_power: float = 1e-12
    power_budget: float = 1.0
    rate_floor: float = 0.0
    seed: int = 0
    fp_tol: float = 1e-12
    gp_tol: float = 1e-10
    admm_tol: float = 1e-6
    max_fp_iters: int = 100_000
    max_gp_iters: int = 2000
    max_admm_iters: int = 200
    gp_step: float = 0.01
    penalty: float = 10.0
    mc_trials: int = 10_000
    report_bits: bool = False

    def __post_init__(self) -> None:
        if self.n_tx < 1 or self.n_rx_sense < 1 or self.n_rx_comm < 1:
            raise ConfigError("antenna counts must be positive")
        if self.slots < self.n_tx:
            raise ConfigError(
                f"slots ({self.slots}) must be >= n_tx ({self.n_tx}) for orthogonal pilots"
            )
        if self.noise_power <= 0 or self.power_budget <= 0:
            raise ConfigError("noise_power and power_budget must be strictly positive")
        if self.rate_floor < 0:
            raise ConfigError("rate_floor must be nonnegative")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if min(self.fp_tol, self.gp_tol, self.admm_tol) <= 0:
            raise ConfigError("tolerances must be strictly positive")
        if min(self.max_fp_iters, self.max_gp_iters, self.max_admm_iters) < 1:
            raise ConfigError("iteration limits must be positive")
        if self.gp_step <= 0 or self.penalty <= 0:
            raise ConfigError("gp_step and penalty must be strictly positive")
        if self.mc_trials < 1:
            raise ConfigError("mc_trials must be >= 1")
        if self.rho_target < 0:
            raise ConfigError("rho_target must be nonnegative")
        if self.alpha is None:
            gain2 = self.noise_power * self.rho_target / self.n_rx_sense
            object.__setattr__(self, "alpha", complex(math.sqrt(gain2)))
        else:
            object.__setattr__(self, "alpha", complex(self.alpha))


_INT_KEYS = {
    "n_tx", "n_rx_sense", "n_rx_comm", "slots", "seed",
    "max_fp_iters", "max_gp_iters", "max_admm_iters", "mc_trials",
}
_FLOAT_KEYS = {
    "aod_deg", "aoa_deg", "rho_target", "noise_power", "power_budget",
    "rate_floor", "fp_tol", "gp_tol", "admm_tol", "gp_step", "penalty",
}
_BOOL_KEYS = {"report_bits"}
# dBm variants are converted to watts at parse time; everything downstream is watts.
_DBM_KEYS = {"power_budget_dbm": "power_budget", "noise_power_dbm": "noise_power"}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(path: str | Path) -> ScenarioConfig:
    """Read a plain-text ``key = value`` file into a ScenarioConfig.

    Blank lines and '#' comments are ignored. Unknown keys, duplicate keys
    and malformed values are reported with their line number. Powers may be
    given either in watts (``power_budget``, ``noise_power``) or in dBm via
    the ``*_dbm`` variants.
    """
    values: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    field_names = {f.name for f in fields(ScenarioConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _DBM_KEYS:
            target = _DBM_KEYS[key]
            if target in values:
                raise ConfigError(f"{path}: line {lineno}: duplicate setting for {target!r}")
            try:
                values[target] = dbm_to_watts(float(val))
            except ValueError as exc:
                raise ConfigError(f"{path}: line {lineno}: bad dBm value {val!r}") from exc
            continue
        if key not in field_names:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _BOOL_KEYS:
                values[key] = _parse_bool(val)
            elif key == "alpha":
                values[key] = complex(val)
            else:
                raise ValueError(f"unhandled key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}: line {lineno}: bad value {val!r} for {key!r}") from exc
    try:
        return ScenarioConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def make_steering(angle_deg: float, n: int) -> np.ndarray:
    """Half-wavelength ULA steering vector: entry k = exp(i*pi*k*sin(angle))."""
    if n < 1:
        raise ValueError("steering vector needs at least one antenna")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.sin(np.deg2rad(angle_deg)))


def make_pilot(n_tx: int, slots: int) -> np.ndarray:
    """Row-orthonormal pilot block: first n_tx rows of the slots x slots unitary DFT.

    Satisfies S_p S_p^H = I_{n_tx}; requires slots >= n_tx.
    """
    if slots < n_tx:
        raise ValueError(f"cannot build {n_tx} orthogonal pilot rows in {slots} slots")
    k = np.arange(n_tx)[:, None]
    l = np.arange(slots)[None, :]
    return np.exp(-2j * np.pi * k * l / slots) / np.sqrt(slots)


def make_comm_channel(cfg: ScenarioConfig) -> np.ndarray:
    """i.i.d. CN(0, 1) communication channel, n_rx_comm x n_tx, seeded from the config."""
    rng = derived_rng(cfg.seed, CHANNEL_STREAM)
    shape = (cfg.n_rx_comm, cfg.n_tx)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def effective_snr(cfg: ScenarioConfig, a_r: np.ndarray) -> float:
    """rho = |alpha|^2 * ||a_r||^2 / sigma^2 (the receive correlation is rank one)."""
    return float(abs(cfg.alpha) ** 2 * np.linalg.norm(a_r) ** 2 / cfg.noise_power)


def beam_gain(theta: np.ndarray, a_t: np.ndarray) -> float:
    """d = a_t^H Theta a_t for Hermitian theta; tiny negative roundoff is clamped."""
    check_hermitian(theta)
    d = float(np.real(a_t.conj() @ theta @ a_t))
    if d < 0.0 and d > -1e-12 * max(1.0, float(np.max(np.abs(theta)))):
        d = 0.0
    return d
