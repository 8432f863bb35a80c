"""Sensing mutual information evaluators.

Three routes to the same quantity:

* exact per-realization samples, either through the full Kronecker
  log-det (test oracle, O((n_t n_r)^3)) or the reduced scalar form
  log(1 + rho ||a_t^H X||^2 / L) that the rank-one geometry admits;
* a seeded Monte-Carlo expectation over random payloads;
* the closed-form large-L equivalent driven by the scalar fixed point
  (delta, delta_tilde).

Also hosts the communication rate log|I + G Theta G^H / sigma^2| used by
the precoder optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scenario
from ._linalg import check_covariance, hermitian_part, psd_factor
from .scenario import ScenarioConfig


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


@dataclass(frozen=True)
class FixedPointSolution:
    """Converged (delta, delta_tilde) pair with its residual certificate."""

    delta: float
    delta_tilde: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class SmiEstimate:
    """Monte-Carlo mean with its standard error."""

    mean: float
    std_error: float
    trials: int


@dataclass(frozen=True)
class SmiDeterministic:
    """Closed-form SMI value plus the scalars it was built from."""

    value: float
    solution: FixedPointSolution
    rho: float
    gain: float


def smi_sample_full(
    x: np.ndarray,
    a_t: np.ndarray,
    a_r: np.ndarray,
    alpha: complex,
    sigma2: float,
) -> float:
    """One-realization SMI through the full Kronecker log-det.

    log|I + |alpha|^2/(L sigma^2) * (a_r a_r^H kron R^{1/2} X X^H R^{1/2})|
    with R = a_t a_t^H. Cubic in n_t*n_r; meant for small test instances.
    """
    n_t, slots = x.shape
    if a_t.shape[0] != n_t:
        raise ValueError(f"a_t has {a_t.shape[0]} entries but x has {n_t} rows")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    r_r = np.outer(a_r, a_r.conj())
    nt_norm = np.linalg.norm(a_t)
    if nt_norm == 0.0:
        return 0.0
    rt_half = np.outer(a_t, a_t.conj()) / nt_norm
    core = rt_half @ x @ x.conj().T @ rt_half
    kron = np.kron(r_r, core)
    lam = np.clip(np.linalg.eigvalsh(hermitian_part(kron)), 0.0, None)
    scale = abs(alpha) ** 2 / (slots * sigma2)
    return float(np.sum(np.log1p(scale * lam)))


def smi_sample_reduced(x: np.ndarray, a_t: np.ndarray, rho: float, slots: int) -> float:
    """Reduced scalar form: log(1 + rho ||a_t^H X||^2 / L)."""
    z2 = float(np.linalg.norm(a_t.conj() @ x) ** 2) / slots
    return float(np.log1p(rho * z2))


def solve_fixed_point(
    rho: float,
    gain: float,
    at_norm2: float,
    slots: int,
    fp_tol: float = 1e-12,
    max_iters: int = 100_000,
    x0: tuple[float, float] = (1.0, 1.0),
    damping: float = 0.5,
) -> FixedPointSolution:
    """Solve the coupled scalar fixed point by damped simultaneous iteration.

        delta       = (d/L) / (rho^{-1}(1 + dt*d) + A/(L(1+delta)))
        delta_tilde = (1/L) / (rho^{-1}(1+delta) + A/(L(1+dt*d))) + (L-1)/L * rho/(1+delta)

    with A = ||a_t||^2 and d = gain. The update is
    x <- (1-damping) x + damping Phi(x); the returned pair satisfies both
    residuals |x - Phi(x)| <= fp_tol. For rho = 0 the solution is (0, 0).
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if gain < 0:
        raise ValueError("gain must be nonnegative")
    if slots < 1:
        raise ValueError("slots must be >= 1")
    if rho == 0.0:
        return FixedPointSolution(0.0, 0.0, 0.0, 0)

    inv_rho = 1.0 / rho
    L = float(slots)
    de, dt = float(x0[0]), float(x0[1])
    res = np.inf
    for it in range(max_iters + 1):
        de_next = (gain / L) / (inv_rho * (1.0 + dt * gain) + at_norm2 / (L * (1.0 + de)))
        dt_next = (1.0 / L) / (inv_rho * (1.0 + de) + at_norm2 / (L * (1.0 + dt * gain))) \
            + (L - 1.0) / L * rho / (1.0 + de)
        res = max(abs(de_next - de), abs(dt_next - dt))
        if res <= fp_tol:
            return FixedPointSolution(de, dt, res, it)
        de = (1.0 - damping) * de + damping * de_next
        dt = (1.0 - damping) * dt + damping * dt_next
    raise ConvergenceError(
        f"fixed point not converged after {max_iters} iterations (residual {res:.3e})"
    )


def smi_deterministic_scalar(
    rho: float,
    gain: float,
    at_norm2: float,
    slots: int,
    fp_tol: float = 1e-12,
    max_iters: int = 100_000,
    x0: tuple[float, float] = (1.0, 1.0),
) -> tuple[float, FixedPointSolution]:
    """Closed-form SMI from the raw scalars, returning the fixed point used.

    value = log(1 + dt*d + rho A/(L(1+delta))) + L log(1+delta) - L delta dt / rho.
    At rho = 0 the value is 0 by continuity (delta*dt vanishes faster than rho).
    """
    if rho == 0.0:
        return 0.0, FixedPointSolution(0.0, 0.0, 0.0, 0)
    sol = solve_fixed_point(rho, gain, at_norm2, slots, fp_tol, max_iters, x0)
    de, dt = sol.delta, sol.delta_tilde
    L = float(slots)
    value = float(
        np.log(1.0 + dt * gain + rho * at_norm2 / (L * (1.0 + de)))
        + L * np.log1p(de)
        - L * de * dt / rho
    )
    if value < 0.0:
        if value < -1e-9:
            raise ConvergenceError(f"negative SMI value {value:.3e} at converged fixed point")
        value = 0.0
    return value, sol


def smi_deterministic(theta: np.ndarray, cfg: ScenarioConfig) -> SmiDeterministic:
    """Deterministic-equivalent SMI of a precoder covariance under the config."""
    check_covariance(theta)
    a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
    a_r = scenario.make_steering(cfg.aoa_deg, cfg.n_rx_sense)
    rho = scenario.effective_snr(cfg, a_r)
    gain = scenario.beam_gain(theta, a_t)
    at_norm2 = float(np.linalg.norm(a_t) ** 2)
    value, sol = smi_deterministic_scalar(
        rho, gain, at_norm2, cfg.slots, cfg.fp_tol, cfg.max_fp_iters
    )
    return SmiDeterministic(value=value, solution=sol, rho=rho, gain=gain)


def smi_monte_carlo(theta: np.ndarray, pilot: np.ndarray, cfg: ScenarioConfig) -> SmiEstimate:
    """Empirical SMI over cfg.mc_trials random payload draws.

    Each trial owns a counter-based substream keyed by (seed, trial), so the
    estimate is reproducible under any execution order. The precoder enters
    only through theta; any factor F with F F^H = theta gives the same
    sample distribution.
    """
    check_covariance(theta)
    n_t, slots = pilot.shape
    if n_t != cfg.n_tx or slots != cfg.slots:
        raise ValueError(
            f"pilot is {pilot.shape}, config wants ({cfg.n_tx}, {cfg.slots})"
        )
    a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
    a_r = scenario.make_steering(cfg.aoa_deg, cfg.n_rx_sense)
    rho = scenario.effective_snr(cfg, a_r)
    f = psd_factor(theta)
    vals = np.empty(cfg.mc_trials)
    for t in range(cfg.mc_trials):
        rng = scenario.derived_rng(cfg.seed, scenario.MC_STREAM, t)
        s_d = (rng.standard_normal((n_t, slots)) + 1j * rng.standard_normal((n_t, slots)))
        s_d *= np.sqrt(0.5)
        vals[t] = smi_sample_reduced(pilot + f @ s_d, a_t, rho, slots)
    mean = float(np.mean(vals))
    std_error = 0.0 if cfg.mc_trials == 1 else float(np.std(vals, ddof=1) / np.sqrt(cfg.mc_trials))
    return SmiEstimate(mean=mean, std_error=std_error, trials=cfg.mc_trials)


def comm_rate(g: np.ndarray, theta: np.ndarray, sigma2: float) -> float:
    """Communication rate log|I + G Theta G^H / sigma^2| in nats."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    check_covariance(theta)
    inner = hermitian_part(g @ theta @ g.conj().T) / sigma2
    lam = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.log1p(lam)))
