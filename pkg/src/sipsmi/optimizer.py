"""Precoder covariance optimization under power and rate constraints.

Consensus ADMM on the split

    maximize  SMI(Theta)   s.t.  tr(Theta) <= P,  rate(Omega) >= R0,  Theta = Omega

* Theta-update: gradient projection on -SMI(Theta) + (gamma/2)||Theta - Omega + U||^2
  with a clip-negative-eigenvalues + trace-rescale retraction and Armijo
  backtracking around the configured step.
* Omega-update: Frobenius projection of Theta + U onto
  {Omega PSD, rate(Omega) >= R0}, via a self-contained path-following
  barrier with damped Newton steps (no external solver).
* scaled dual update U <- U + Theta - Omega.

Also provides the sensing- and communication-oriented baseline precoders,
time sharing between them, and precoder extraction from a covariance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import scenario
from ._linalg import (
    check_covariance,
    hermitian_basis,
    hermitian_part,
    psd_clip,
    psd_factor,
    real_inner,
)
from .gradient import grad_coefficients, gradient_coefficient
from .scenario import ScenarioConfig
from .smi import ConvergenceError, comm_rate, smi_deterministic_scalar

_ARMIJO = 1e-4
_OBJ_SLACK = 1e-13          # roundoff allowance in the Armijo test
_BACKTRACK_LIMIT = 2.0 ** -45
_BARRIER_EPS = 1e-12        # ridge inside log det(Omega + eps I)
_BARRIER_T_MAX = 1e8


class InfeasibleRateError(ValueError):
    """The requested rate floor exceeds the channel capacity at full power."""


@dataclass
class AdmmState:
    """Consensus state (Theta, Omega, U) plus residual and SMI histories."""

    theta: np.ndarray
    omega: np.ndarray
    u: np.ndarray
    iteration: int = 0
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    smi_trace: list[float] = field(default_factory=list)
    primal_trace: list[float] = field(default_factory=list)
    dual_trace: list[float] = field(default_factory=list)
    restore_blend: float = 0.0


@dataclass(frozen=True)
class ParetoRecord:
    """One frontier row: requested floor, achieved rate/SMI, producing method."""

    r0: float
    rate: float
    smi: float
    method: str


# ---------------------------------------------------------------------------
# baselines and precoder extraction
# ---------------------------------------------------------------------------

def extract_precoder(theta: np.ndarray) -> np.ndarray:
    """Square precoding factor F with F F^H = theta (eigendecomposition route)."""
    check_covariance(theta)
    return psd_factor(theta)


def sensing_oriented(a_t: np.ndarray, p: float) -> np.ndarray:
    """Rank-one covariance p * a_t a_t^H / ||a_t||^2: maximal beam gain at trace p."""
    norm2 = float(np.linalg.norm(a_t) ** 2)
    if norm2 == 0.0:
        raise ValueError("steering vector must be nonzero")
    if p < 0:
        raise ValueError("power must be nonnegative")
    return (p / norm2) * np.outer(a_t, a_t.conj())


def waterfilling(g: np.ndarray, p: float, sigma2: float) -> np.ndarray:
    """Capacity-maximizing covariance under tr <= p, by bisection on the water level."""
    if p <= 0:
        raise ValueError("power budget must be positive")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    gram = hermitian_part(g.conj().T @ g)
    s2, v = np.linalg.eigh(gram)
    s2 = np.clip(s2, 0.0, None)
    active = s2 > s2.max() * 1e-13 if s2.max() > 0 else np.zeros_like(s2, dtype=bool)
    if not np.any(active):
        warnings.warn("rank-0 channel: falling back to isotropic power allocation")
        n = g.shape[1]
        return (p / n) * np.eye(n, dtype=complex)

    floors = sigma2 / s2[active]

    def total_power(mu: float) -> float:
        return float(np.sum(np.clip(mu - floors, 0.0, None)))

    lo = float(floors.min())            # zero power
    hi = float(floors.max()) + p        # at least p
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pw = total_power(mid)
        if abs(pw - p) <= 1e-12:
            lo = hi = mid
            break
        if pw > p:
            hi = mid
        else:
            lo = mid
    mu = 0.5 * (lo + hi)
    q = np.zeros_like(s2)
    q[active] = np.clip(mu - floors, 0.0, None)
    if q.sum() > 0:
        q *= p / q.sum()                # exact power after bisection
    return hermitian_part((v * q) @ v.conj().T)


def time_sharing(point_s: ParetoRecord, point_c: ParetoRecord, lam: float) -> ParetoRecord:
    """Convex combination of the two baseline operating points."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    rate = lam * point_s.rate + (1.0 - lam) * point_c.rate
    smi = lam * point_s.smi + (1.0 - lam) * point_c.smi
    return ParetoRecord(r0=0.0, rate=rate, smi=smi, method="timeshare")


# ---------------------------------------------------------------------------
# Theta-update: gradient projection with retraction
# ---------------------------------------------------------------------------

def _simplex_cap(lam: np.ndarray, p: float) -> np.ndarray:
    # Euclidean projection of a real vector onto {x >= 0, sum(x) <= p}
    lam = np.clip(lam, 0.0, None)
    if lam.sum() <= p:
        return lam
    u = np.sort(lam)[::-1]
    css = np.cumsum(u) - p
    idx = np.arange(1, lam.size + 1)
    rho = int(np.max(idx[u - css / idx > 0]))
    tau = css[rho - 1] / rho
    return np.clip(lam - tau, 0.0, None)


def _retract(theta: np.ndarray, p: float) -> np.ndarray:
    """Exact Frobenius projection onto {Theta PSD, tr(Theta) <= p}.

    The constraint set is unitarily invariant, so projecting the eigenvalue
    vector onto {lam >= 0, sum(lam) <= p} and rebuilding gives the matrix
    projection. A plain trace rescale is not used: its fixed points are not
    KKT points of the subproblem, which stalls the consensus iteration.
    """
    lam, vec = np.linalg.eigh(hermitian_part(theta))
    lam = _simplex_cap(lam, p)
    return hermitian_part((vec * lam) @ vec.conj().T)


class _SmiObjective:
    """-SMI(Theta) + (gamma/2)||Theta - V||^2 with warm-started fixed points."""

    def __init__(self, cfg: ScenarioConfig, v: np.ndarray):
        self.cfg = cfg
        self.v = v
        self.gamma = cfg.penalty
        self.a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
        a_r = scenario.make_steering(cfg.aoa_deg, cfg.n_rx_sense)
        self.rho = scenario.effective_snr(cfg, a_r)
        self.at_norm2 = float(np.linalg.norm(self.a_t) ** 2)
        self.outer = np.outer(self.a_t, self.a_t.conj())
        self._x0 = (1.0, 1.0)

    def __call__(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        diff = theta - self.v
        quad = 0.5 * self.gamma * float(np.real(np.sum(diff.conj() * diff)))
        if self.rho == 0.0:
            return quad, self.gamma * diff
        d = scenario.beam_gain(theta, self.a_t)
        value, sol = smi_deterministic_scalar(
            self.rho, d, self.at_norm2, self.cfg.slots,
            self.cfg.fp_tol, self.cfg.max_fp_iters, self._x0,
        )
        self._x0 = (sol.delta, sol.delta_tilde)
        coeffs = grad_coefficients(sol, self.rho, d, self.at_norm2, self.cfg.slots)
        coef = gradient_coefficient(sol, coeffs, self.rho, d, self.at_norm2, self.cfg.slots)
        grad = -coef * self.outer + self.gamma * diff
        return -value + quad, grad


def theta_update(state: AdmmState, cfg: ScenarioConfig) -> np.ndarray:
    """Minimize the augmented Lagrangian in Theta over {PSD, tr <= P} by GP."""
    p = cfg.power_budget
    objective = _SmiObjective(cfg, hermitian_part(state.omega - state.u))
    theta = _retract(hermitian_part(state.theta), p)
    obj, grad = objective(theta)
    beta0 = cfg.gp_step
    for k in range(cfg.max_gp_iters):
        candidate = _retract(theta - beta0 * grad, p)
        gap = float(np.linalg.norm(candidate - theta))
        if gap / beta0 <= cfg.gp_tol:
            break
        accepted = False
        beta = beta0
        while not accepted:
            if beta != beta0:
                candidate = _retract(theta - beta * grad, p)
                gap = float(np.linalg.norm(candidate - theta))
            if gap == 0.0:
                break  # retraction absorbed the step entirely; nothing left to gain
            cand_obj, cand_grad = objective(candidate)
            if cand_obj <= obj - _ARMIJO * gap * gap / beta + _OBJ_SLACK * max(1.0, abs(obj)):
                theta, obj, grad = candidate, cand_obj, cand_grad
                accepted = True
            else:
                beta *= 0.5
                if beta < beta0 * _BACKTRACK_LIMIT:
                    raise ConvergenceError(
                        f"backtracking step underflow in Theta-update at inner iteration {k}"
                    )
        if not accepted:
            break
    return theta


# ---------------------------------------------------------------------------
# Omega-update: barrier projection onto {PSD, rate >= R0}
# ---------------------------------------------------------------------------

def _rate_and_grad(omega: np.ndarray, g: np.ndarray, sigma2: float) -> tuple[float, np.ndarray]:
    m = hermitian_part(np.eye(g.shape[0], dtype=complex) + (g @ omega @ g.conj().T) / sigma2)
    lam = np.clip(np.linalg.eigvalsh(m), 1e-300, None)
    rate = float(np.sum(np.log(lam)))
    m_inv = np.linalg.inv(m)
    grad = hermitian_part(g.conj().T @ m_inv @ g) / sigma2
    return rate, grad


def _strictly_feasible_start(
    v_psd: np.ndarray, g: np.ndarray, cfg: ScenarioConfig, anchor: np.ndarray
) -> np.ndarray:
    """Blend the PSD part of the target with a scaled capacity anchor until
    the rate constraint holds strictly."""
    r0 = cfg.rate_floor
    sigma2 = cfg.noise_power
    scaled = anchor.copy()
    for _ in range(60):
        if comm_rate(g, scaled, sigma2) > r0 + 1e-6:
            break
        scaled = 1.5 * scaled + 1e-6 * np.trace(scaled).real * np.eye(scaled.shape[0])
    ridge = 1e-9 * max(1.0, float(np.real(np.trace(scaled)))) * np.eye(scaled.shape[0])
    lam = 0.5
    for _ in range(60):
        candidate = hermitian_part((1.0 - lam) * v_psd + lam * scaled + ridge)
        if comm_rate(g, candidate, sigma2) > r0 + 1e-8:
            return candidate
        lam = 0.5 * (1.0 + lam)
    raise ConvergenceError("could not find a strictly feasible start for the rate projection")


def omega_update(state: AdmmState, g: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """Project Theta + U onto {Omega PSD, rate(Omega) >= R0} in Frobenius norm.

    If the plain PSD projection already satisfies the rate floor it is
    returned unchanged (the constraint is inactive). Otherwise a
    path-following barrier

        (gamma/2)||Omega - V||^2 - (1/t) [log(rate(Omega) - R0) + log det(Omega + eps I)]

    is minimized by damped Newton steps while t grows 1 -> 1e8.
    """
    v = hermitian_part(state.theta + state.u)
    r0 = cfg.rate_floor
    sigma2 = cfg.noise_power
    gamma = cfg.penalty
    v_psd = psd_clip(v)
    if comm_rate(g, v_psd, sigma2) >= r0:
        return v_psd

    anchor = waterfilling(g, cfg.power_budget, sigma2)
    omega = _strictly_feasible_start(v_psd, g, cfg, anchor)
    n = omega.shape[0]
    basis = hermitian_basis(n)
    dim = len(basis)
    eye_ridge = _BARRIER_EPS * np.eye(n, dtype=complex)

    def barrier_value(om: np.ndarray, mu: float) -> float:
        rate, _ = _rate_and_grad(om, g, sigma2)
        h = rate - r0
        if h <= 0:
            return np.inf
        sign, logdet = np.linalg.slogdet(om + eye_ridge)
        if sign <= 0:
            return np.inf
        diff = om - v
        quad = 0.5 * gamma * float(np.real(np.sum(diff.conj() * diff)))
        return quad - mu * (np.log(h) + logdet)

    t = 1.0
    while t <= _BARRIER_T_MAX:
        mu = 1.0 / t
        stage_done = False
        f_prev = barrier_value(omega, mu)
        for _ in range(100):
            rate, rate_grad = _rate_and_grad(omega, g, sigma2)
            h = rate - r0
            w = np.linalg.inv(hermitian_part(omega + eye_ridge))
            grad_mat = gamma * (omega - v) - mu * (rate_grad / h + w)
            grad_vec = np.array([real_inner(grad_mat, e) for e in basis])
            grad_scale = gamma * max(1.0, float(np.linalg.norm(omega - v))) \
                + mu * (float(np.linalg.norm(rate_grad)) / h + float(np.linalg.norm(w)))
            if np.linalg.norm(grad_vec) <= 1e-12 * max(1.0, grad_scale):
                stage_done = True
                break
            # Hessian columns in the Hermitian basis
            m = hermitian_part(np.eye(g.shape[0], dtype=complex) + (g @ omega @ g.conj().T) / sigma2)
            m_inv = np.linalg.inv(m)
            hess = np.empty((dim, dim))
            for j, e in enumerate(basis):
                gmg = g @ e @ g.conj().T / sigma2
                rate_curv = hermitian_part(g.conj().T @ m_inv @ gmg @ m_inv @ g) / sigma2
                h_e = (
                    gamma * e
                    + mu * (real_inner(rate_grad, e) / h ** 2) * rate_grad
                    + mu * rate_curv / h
                    + mu * w @ e @ w
                )
                hess[:, j] = [real_inner(h_e, b) for b in basis]
            hess = 0.5 * (hess + hess.T)
            # ridge escalation keeps the direction a descent direction despite
            # the extreme scale spread the rate barrier can produce
            ridge = 0.0
            for _attempt in range(40):
                try:
                    step_vec = np.linalg.solve(hess + ridge * np.eye(dim), -grad_vec)
                except np.linalg.LinAlgError:
                    step_vec = None
                if step_vec is not None:
                    slope = float(grad_vec @ step_vec)
                    if slope < 0 and np.all(np.isfinite(step_vec)):
                        break
                ridge = max(10.0 * ridge, 1e-8 * max(1.0, float(np.abs(hess).max())))
            else:
                raise ConvergenceError("could not form a descent direction in rate projection")
            decrement2 = -slope
            if decrement2 <= 1e-16 * max(1.0, abs(f_prev)):
                stage_done = True
                break
            step = sum(s * e for s, e in zip(step_vec, basis))
            alpha = 1.0
            accepted = False
            while alpha > 1e-14:
                cand = hermitian_part(omega + alpha * step)
                f_cand = barrier_value(cand, mu)
                if f_cand <= f_prev + 0.25 * alpha * slope:
                    omega, f_new = cand, f_cand
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                stage_done = True  # stuck at the float64 floor for this stage
                break
            if f_prev - f_new <= 1e-14 * max(1.0, abs(f_prev)):
                f_prev = f_new
                stage_done = True
                break
            f_prev = f_new
        if not stage_done:
            raise ConvergenceError(f"Newton stage at t={t:g} did not converge")
        t *= 10.0
    return hermitian_part(omega)


def dual_update(state: AdmmState) -> AdmmState:
    """Scaled dual ascent U <- U + Theta - Omega."""
    state.u = hermitian_part(state.u + state.theta - state.omega)
    return state


# ---------------------------------------------------------------------------
# outer ADMM loop
# ---------------------------------------------------------------------------

def admm_solve(
    cfg: ScenarioConfig,
    g: np.ndarray,
    warm: np.ndarray | None = None,
) -> tuple[np.ndarray, AdmmState]:
    """Run consensus ADMM; returns the final covariance and the full state.

    Raises InfeasibleRateError when the rate floor exceeds the waterfilling
    capacity at the configured power budget.
    """
    p = cfg.power_budget
    sigma2 = cfg.noise_power
    capacity = comm_rate(g, waterfilling(g, p, sigma2), sigma2)
    if cfg.rate_floor > capacity + 1e-9:
        raise InfeasibleRateError(
            f"rate floor {cfg.rate_floor:.6g} exceeds capacity {capacity:.6g} at power {p:g}"
        )

    n = cfg.n_tx
    if warm is not None:
        check_covariance(warm)
        theta = _retract(hermitian_part(warm), p)
    else:
        theta = (p / n) * np.eye(n, dtype=complex)
    state = AdmmState(theta=theta, omega=theta.copy(), u=np.zeros((n, n), dtype=complex))

    a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
    a_r = scenario.make_steering(cfg.aoa_deg, cfg.n_rx_sense)
    rho = scenario.effective_snr(cfg, a_r)
    at_norm2 = float(np.linalg.norm(a_t) ** 2)

    for it in range(1, cfg.max_admm_iters + 1):
        state.iteration = it
        try:
            state.theta = theta_update(state, cfg)
            omega_prev = state.omega
            state.omega = omega_update(state, g, cfg)
            dual_update(state)
        except ConvergenceError as exc:
            raise ConvergenceError(f"ADMM iteration {it}: {exc}") from exc
        state.primal_residual = float(np.linalg.norm(state.theta - state.omega))
        state.dual_residual = float(cfg.penalty * np.linalg.norm(state.omega - omega_prev))
        d = scenario.beam_gain(state.theta, a_t)
        value, _ = smi_deterministic_scalar(rho, d, at_norm2, cfg.slots,
                                            cfg.fp_tol, cfg.max_fp_iters)
        state.smi_trace.append(value)
        state.primal_trace.append(state.primal_residual)
        state.dual_trace.append(state.dual_residual)
        if state.primal_residual <= cfg.admm_tol and state.dual_residual <= cfg.admm_tol:
            break

    # Feasibility restoration. At tiny noise powers the rate is log-sensitive
    # in near-zero eigendirections: Omega regains feasibility with eigenvalue
    # dust that the trace projection on the Theta side trims away, so the
    # consensus transfers the rate constraint only asymptotically. Blending
    # minimally toward the capacity anchor supplies that dust directly; the
    # superlevel set of the concave rate along the segment is an interval
    # containing s = 1, so bisection finds its edge.
    if comm_rate(g, state.theta, sigma2) < cfg.rate_floor:
        anchor = waterfilling(g, p, sigma2)
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            cand = hermitian_part((1.0 - mid) * state.theta + mid * anchor)
            if comm_rate(g, cand, sigma2) >= cfg.rate_floor:
                hi = mid
            else:
                lo = mid
        state.restore_blend = hi
        state.theta = hermitian_part((1.0 - hi) * state.theta + hi * anchor)
    return state.theta, state
