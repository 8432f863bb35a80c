"""Gradient of the closed-form SMI with respect to the precoder covariance.

The SMI equivalent depends on Theta only through the scalar beam gain
d = a_t^H Theta a_t, so its gradient is (dI/dd) * a_t a_t^H. The scalar
dI/dd is assembled by implicit differentiation of the fixed point:
differentiating both fixed-point equations with respect to d yields a
2x2 linear system for the sensitivities c1 = d(delta)/dd and
c2 = d(delta_tilde)/dd, solved in closed form, then chained through the
SMI expression. A finite-difference verifier is included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scenario
from ._linalg import check_covariance, hermitian_part, real_inner
from .scenario import ScenarioConfig
from .smi import FixedPointSolution, smi_deterministic_scalar, solve_fixed_point

_DET_GUARD = 1e-14


@dataclass(frozen=True)
class GradCoefficients:
    """2x2 sensitivity system and its solution (c1, c2)."""

    a11: float
    a12: float
    a21: float
    a22: float
    b1: float
    b2: float
    c1: float
    c2: float
    residual: float
    condition: float


@dataclass(frozen=True)
class SmiGradient:
    """Hermitian rank-one gradient matrix with its scalar coefficient."""

    matrix: np.ndarray
    coefficient: float
    coefficients: GradCoefficients | None


def grad_coefficients(
    sol: FixedPointSolution,
    rho: float,
    gain: float,
    at_norm2: float,
    slots: int,
) -> GradCoefficients:
    """Sensitivities of (delta, delta_tilde) to the beam gain d.

    With T1 = rho^{-1}(1+dt*d) + A/(L(1+de)) and
    T2 = rho^{-1}(1+de) + A/(L(1+dt*d)), differentiating the fixed point gives

        [1 - d A /(L^2 (1+de)^2 T1^2)] c1 + [d^2/(rho L T1^2)] c2
            = 1/(L T1) - d dt/(rho L T1^2)
        [1/(rho L T2^2) + (L-1) rho/(L (1+de)^2)] c1
            + [1 - A d/(L^2 T2^2 (1+dt*d)^2)] c2
            = A dt/(L^2 T2^2 (1+dt*d)^2)

    solved by Cramer's rule with a determinant-magnitude guard.
    """
    if rho <= 0:
        raise ValueError("rho must be positive for gradient coefficients")
    de, dt = sol.delta, sol.delta_tilde
    L = float(slots)
    A = at_norm2
    d = gain
    inv_rho = 1.0 / rho
    t1 = inv_rho * (1.0 + dt * d) + A / (L * (1.0 + de))
    t2 = inv_rho * (1.0 + de) + A / (L * (1.0 + dt * d))
    gam = 1.0 / t1

    a11 = 1.0 - d * A * gam ** 2 / (L ** 2 * (1.0 + de) ** 2)
    a12 = d ** 2 * gam ** 2 * inv_rho / L
    b1 = (gam / L) * (1.0 - inv_rho * d * dt * gam)
    a21 = inv_rho / (L * t2 ** 2) + (L - 1.0) * rho / (L * (1.0 + de) ** 2)
    a22 = 1.0 - A * d / (L ** 2 * t2 ** 2 * (1.0 + dt * d) ** 2)
    b2 = A * dt / (L ** 2 * t2 ** 2 * (1.0 + dt * d) ** 2)

    det = a11 * a22 - a12 * a21
    if abs(det) < _DET_GUARD:
        raise ArithmeticError(f"singular sensitivity system (determinant {det:.3e})")
    c1 = (b1 * a22 - a12 * b2) / det
    c2 = (a11 * b2 - a21 * b1) / det
    residual = max(abs(a11 * c1 + a12 * c2 - b1), abs(a21 * c1 + a22 * c2 - b2))
    condition = float(np.linalg.cond(np.array([[a11, a12], [a21, a22]])))
    return GradCoefficients(a11, a12, a21, a22, b1, b2, c1, c2, residual, condition)


def gradient_coefficient(
    sol: FixedPointSolution,
    coeffs: GradCoefficients,
    rho: float,
    gain: float,
    at_norm2: float,
    slots: int,
) -> float:
    """Total derivative dI/dd, chaining c1, c2 through the SMI expression."""
    de, dt = sol.delta, sol.delta_tilde
    c1, c2 = coeffs.c1, coeffs.c2
    L = float(slots)
    A = at_norm2
    d = gain
    s = 1.0 + dt * d + rho * A / (L * (1.0 + de))
    return float(
        (d * c2 + dt - rho * A / (L * (1.0 + de) ** 2) * c1) / s
        + L * c1 / (1.0 + de)
        - (L / rho) * (de * c2 + dt * c1)
    )


def smi_gradient(theta: np.ndarray, cfg: ScenarioConfig) -> SmiGradient:
    """Gradient of the closed-form SMI at theta: a real multiple of a_t a_t^H.

    For rho = 0 the SMI is identically zero and so is its gradient.
    """
    check_covariance(theta)
    a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
    a_r = scenario.make_steering(cfg.aoa_deg, cfg.n_rx_sense)
    rho = scenario.effective_snr(cfg, a_r)
    outer = np.outer(a_t, a_t.conj())
    if rho == 0.0:
        return SmiGradient(matrix=np.zeros_like(outer), coefficient=0.0, coefficients=None)
    gain = scenario.beam_gain(theta, a_t)
    at_norm2 = float(np.linalg.norm(a_t) ** 2)
    sol = solve_fixed_point(rho, gain, at_norm2, cfg.slots, cfg.fp_tol, cfg.max_fp_iters)
    coeffs = grad_coefficients(sol, rho, gain, at_norm2, cfg.slots)
    coef = gradient_coefficient(sol, coeffs, rho, gain, at_norm2, cfg.slots)
    return SmiGradient(matrix=coef * outer, coefficient=coef, coefficients=coeffs)


def _psd_safe_direction(
    e: np.ndarray, theta_eigs: np.ndarray, theta_vecs: np.ndarray, h: float
) -> tuple[np.ndarray, float]:
    """Restrict e to the strictly-positive eigenspace of theta and shrink h
    so theta +/- h e stays PSD."""
    pos = theta_eigs > 1e-14 * max(1.0, float(theta_eigs[-1]))
    if not np.all(pos):
        proj = theta_vecs[:, pos] @ theta_vecs[:, pos].conj().T
        e = hermitian_part(proj @ e @ proj)
        norm = np.linalg.norm(e)
        if norm < 1e-14:
            return e, h
        e = e / norm
    lam_min = float(theta_eigs[pos][0]) if np.any(pos) else 0.0
    if lam_min <= h:
        h = 0.5 * lam_min if lam_min > 0 else h
    return e, h


def finite_diff_check(
    theta: np.ndarray,
    cfg: ScenarioConfig,
    h: float = 1e-6,
    n_directions: int = 16,
) -> float:
    """Max relative error between <grad, E> and a central difference of the SMI.

    Directions E are random unit-Frobenius Hermitian matrices, projected
    (and h shrunk) as needed to keep theta +/- h E PSD. Relative error uses
    max(|analytic|, |numeric|, 1e-12) as denominator.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    check_covariance(theta)
    a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
    a_r = scenario.make_steering(cfg.aoa_deg, cfg.n_rx_sense)
    rho = scenario.effective_snr(cfg, a_r)
    at_norm2 = float(np.linalg.norm(a_t) ** 2)
    grad = smi_gradient(theta, cfg).matrix
    eigs, vecs = np.linalg.eigh(hermitian_part(theta))
    rng = scenario.derived_rng(cfg.seed, scenario.GRADCHECK_STREAM)
    worst = 0.0
    for _ in range(n_directions):
        m = rng.standard_normal((cfg.n_tx, cfg.n_tx)) + 1j * rng.standard_normal((cfg.n_tx, cfg.n_tx))
        e = hermitian_part(m)
        e = e / np.linalg.norm(e)
        e, h_dir = _psd_safe_direction(e, eigs, vecs, h)
        d_plus = scenario.beam_gain(hermitian_part(theta + h_dir * e), a_t)
        d_minus = scenario.beam_gain(hermitian_part(theta - h_dir * e), a_t)
        v_plus, _ = smi_deterministic_scalar(rho, d_plus, at_norm2, cfg.slots,
                                             cfg.fp_tol, cfg.max_fp_iters)
        v_minus, _ = smi_deterministic_scalar(rho, d_minus, at_norm2, cfg.slots,
                                              cfg.fp_tol, cfg.max_fp_iters)
        numeric = (v_plus - v_minus) / (2.0 * h_dir)
        analytic = real_inner(grad, e)
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
        worst = max(worst, err)
    return worst
