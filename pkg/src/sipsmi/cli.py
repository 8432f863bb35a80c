"""Experiment drivers: slot sweeps, rate/SMI frontiers, gradient checks, single runs.

Each subcommand reads a plain-text config (defaults apply when omitted),
runs deterministically under the configured seed, and emits CSV with 17
significant digits. Exit codes: 0 success, 2 infeasible or bad input,
1 numerical failure. Plotting lives in a separate companion script; this
module only emits data.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import optimizer, scenario, smi
from .gradient import finite_diff_check
from .optimizer import InfeasibleRateError, ParetoRecord
from .scenario import ConfigError, ScenarioConfig
from .smi import ConvergenceError

L_SWEEP_HEADER = ["L", "smi_theoretical", "smi_empirical_mean",
                  "smi_empirical_stderr", "fp_residual", "rel_error"]
PARETO_HEADER = ["method", "r0", "rate", "smi", "iterations", "primal_residual"]
ADMM_HEADER = ["iteration", "smi", "primal_residual", "dual_residual"]

DEFAULT_SLOT_GRID = (4, 8, 16, 32, 64, 128)
DEFAULT_PARETO_POINTS = 10
GRADCHECK_THRESHOLD = 1e-5


@dataclass(frozen=True)
class SweepSpec:
    """A one-variable experiment grid over a base configuration."""

    variable: str                # "slots" or "rate_floor"
    values: tuple
    base: ScenarioConfig
    output_path: str

    def __post_init__(self) -> None:
        if self.variable not in ("slots", "rate_floor"):
            raise ValueError(f"unsupported sweep variable {self.variable!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one grid value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _unit_scale(cfg: ScenarioConfig) -> float:
    # nats by default; log2 reporting on request
    return 1.0 / math.log(2.0) if cfg.report_bits else 1.0


def _map_grid(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# L sweep (empirical vs closed form)
# ---------------------------------------------------------------------------

def _l_sweep_point(args: tuple[ScenarioConfig, int]) -> list:
    base, slots = args
    cfg = replace(base, slots=int(slots))
    theta = (cfg.power_budget / cfg.n_tx) * np.eye(cfg.n_tx, dtype=complex)
    pilot = scenario.make_pilot(cfg.n_tx, cfg.slots)
    det = smi.smi_deterministic(theta, cfg)
    est = smi.smi_monte_carlo(theta, pilot, cfg)
    rel = abs(det.value - est.mean) / est.mean if est.mean > 0 else 0.0
    u = _unit_scale(cfg)
    return [cfg.slots, det.value * u, est.mean * u, est.std_error * u,
            det.solution.residual, rel]


def run_l_sweep(spec: SweepSpec, workers: int = 1) -> list[list]:
    """Closed-form vs Monte-Carlo SMI over a grid of slot counts; writes CSV."""
    if spec.variable != "slots":
        raise ValueError("run_l_sweep expects a 'slots' sweep")
    for value in spec.values:
        if int(value) < spec.base.n_tx:
            raise ConfigError(f"slot count {value} below n_tx={spec.base.n_tx}")
    rows = _map_grid(_l_sweep_point, [(spec.base, int(v)) for v in spec.values], workers)
    _write_csv(spec.output_path, L_SWEEP_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# rate/SMI frontier
# ---------------------------------------------------------------------------

def _pareto_point(args: tuple[ScenarioConfig, float]) -> tuple[str, object]:
    base, r0 = args
    cfg = replace(base, rate_floor=float(r0))
    g = scenario.make_comm_channel(cfg)
    try:
        theta, state = optimizer.admm_solve(cfg, g)
    except InfeasibleRateError as exc:
        return "infeasible", f"skipping infeasible rate floor {r0:g}: {exc}"
    rate = smi.comm_rate(g, theta, cfg.noise_power)
    value = smi.smi_deterministic(theta, cfg).value
    u = _unit_scale(cfg)
    row = ["proposed", r0 * u, rate * u, value * u, state.iteration, state.primal_residual]
    return "ok", row


def run_pareto(spec: SweepSpec, workers: int = 1) -> list[list]:
    """Frontier sweep: ADMM per rate floor plus baseline and time-sharing rows."""
    if spec.variable != "rate_floor":
        raise ValueError("run_pareto expects a 'rate_floor' sweep")
    cfg = spec.base
    g = scenario.make_comm_channel(cfg)
    u = _unit_scale(cfg)

    rows: list[list] = []
    outcomes = _map_grid(_pareto_point, [(cfg, float(r0)) for r0 in spec.values], workers)
    for status, payload in outcomes:
        if status == "ok":
            rows.append(payload)
        else:
            print(f"warning: {payload}", file=sys.stderr)

    a_t = scenario.make_steering(cfg.aod_deg, cfg.n_tx)
    theta_s = optimizer.sensing_oriented(a_t, cfg.power_budget)
    theta_c = optimizer.waterfilling(g, cfg.power_budget, cfg.noise_power)
    point_s = ParetoRecord(
        r0=0.0,
        rate=smi.comm_rate(g, theta_s, cfg.noise_power),
        smi=smi.smi_deterministic(theta_s, cfg).value,
        method="sensing",
    )
    point_c = ParetoRecord(
        r0=0.0,
        rate=smi.comm_rate(g, theta_c, cfg.noise_power),
        smi=smi.smi_deterministic(theta_c, cfg).value,
        method="comm",
    )
    rows.append(["sensing", 0.0, point_s.rate * u, point_s.smi * u, 0, 0.0])
    rows.append(["comm", 0.0, point_c.rate * u, point_c.smi * u, 0, 0.0])
    for k in range(11):
        lam = k / 10.0
        mix = optimizer.time_sharing(point_s, point_c, lam)
        rows.append(["timeshare", 0.0, mix.rate * u, mix.smi * u, 0, 0.0])
    _write_csv(spec.output_path, PARETO_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# gradient check and single runs
# ---------------------------------------------------------------------------

def run_gradcheck(
    cfg_path: str | None,
    out_path: str | None = None,
    h: float = 1e-6,
    n_directions: int = 16,
    seed: int | None = None,
) -> float:
    """Finite-difference audit of the SMI gradient at the isotropic precoder."""
    cfg = parse_or_default(cfg_path, seed)
    theta = (cfg.power_budget / cfg.n_tx) * np.eye(cfg.n_tx, dtype=complex)
    err = finite_diff_check(theta, cfg, h=h, n_directions=n_directions)
    verdict = "PASS" if err <= GRADCHECK_THRESHOLD else "FAIL"
    report = (
        f"gradcheck: h={h:g} directions={n_directions} "
        f"max_relative_error={err:.6e} threshold={GRADCHECK_THRESHOLD:g} -> {verdict}"
    )
    print(report)
    if out_path is not None:
        Path(out_path).write_text(report + "\n", encoding="utf-8")
    return err


def run_admm_once(
    cfg_path: str | None, r0: float | None, out_path: str, seed: int | None = None
) -> dict:
    """One ADMM run at a given rate floor; writes the per-iteration trace CSV."""
    cfg = parse_or_default(cfg_path, seed)
    if r0 is not None:
        cfg = replace(cfg, rate_floor=float(r0))
    g = scenario.make_comm_channel(cfg)
    theta, state = optimizer.admm_solve(cfg, g)
    u = _unit_scale(cfg)
    rows = [
        [it + 1, s * u, pr, dr]
        for it, (s, pr, dr) in enumerate(
            zip(state.smi_trace, state.primal_trace, state.dual_trace)
        )
    ]
    _write_csv(out_path, ADMM_HEADER, rows)
    rate = smi.comm_rate(g, theta, cfg.noise_power)
    value = smi.smi_deterministic(theta, cfg).value
    summary = {
        "rate": rate * u,
        "smi": value * u,
        "trace_theta": float(np.real(np.trace(theta))),
        "min_eig": float(np.linalg.eigvalsh(theta)[0]),
        "iterations": state.iteration,
        "primal_residual": state.primal_residual,
    }
    print(
        "summary: rate={rate:.9g} smi={smi:.9g} trace_theta={trace_theta:.9g} "
        "min_eig={min_eig:.3e} iterations={iterations} "
        "primal_residual={primal_residual:.3e}".format(**summary)
    )
    return summary


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def parse_or_default(cfg_path: str | None, seed: int | None = None) -> ScenarioConfig:
    cfg = scenario.parse_config(cfg_path) if cfg_path else ScenarioConfig()
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return cfg


def _add_common(sub: argparse.ArgumentParser, out_required: bool) -> None:
    sub.add_argument("--config", default=None, help="plain-text key=value config file")
    sub.add_argument("--out", required=out_required, default=None, help="output path")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sipsmi",
        description="SMI experiments for pilot+data waveforms",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("l-sweep", help="closed-form vs Monte-Carlo SMI over slot counts")
    _add_common(p, out_required=True)
    p.add_argument("--slots", default=",".join(str(v) for v in DEFAULT_SLOT_GRID),
                   help="comma-separated slot grid (ascending)")
    p.add_argument("--workers", type=int, default=1, help="process pool size")

    p = subs.add_parser("pareto", help="rate/SMI frontier with baselines")
    _add_common(p, out_required=True)
    p.add_argument("--points", type=int, default=DEFAULT_PARETO_POINTS,
                   help="number of rate-floor grid points (fractions of capacity)")
    p.add_argument("--workers", type=int, default=1, help="process pool size")

    p = subs.add_parser("gradcheck", help="finite-difference audit of the SMI gradient")
    _add_common(p, out_required=False)
    p.add_argument("--h", type=float, default=1e-6, help="central-difference step")
    p.add_argument("--directions", type=int, default=16, help="number of random directions")

    p = subs.add_parser("admm", help="single precoder optimization run")
    _add_common(p, out_required=True)
    p.add_argument("--r0", type=float, default=None,
                   help="rate floor in nats (default: config rate_floor)")
    return parser


def _cmd_l_sweep(args: argparse.Namespace) -> int:
    cfg = parse_or_default(args.config, args.seed)
    values = tuple(int(s) for s in str(args.slots).split(",") if s.strip())
    spec = SweepSpec(variable="slots", values=values, base=cfg, output_path=args.out)
    run_l_sweep(spec, workers=args.workers)
    return 0


def _cmd_pareto(args: argparse.Namespace) -> int:
    cfg = parse_or_default(args.config, args.seed)
    g = scenario.make_comm_channel(cfg)
    capacity = smi.comm_rate(
        g, optimizer.waterfilling(g, cfg.power_budget, cfg.noise_power), cfg.noise_power
    )
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    values = tuple(capacity * (k + 1) / args.points for k in range(args.points))
    spec = SweepSpec(variable="rate_floor", values=values, base=cfg, output_path=args.out)
    run_pareto(spec, workers=args.workers)
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    err = run_gradcheck(args.config, args.out, h=args.h,
                        n_directions=args.directions, seed=args.seed)
    return 0 if err <= GRADCHECK_THRESHOLD else 1


def _cmd_admm(args: argparse.Namespace) -> int:
    run_admm_once(args.config, args.r0, args.out, seed=args.seed)
    return 0


_COMMANDS = {
    "l-sweep": _cmd_l_sweep,
    "pareto": _cmd_pareto,
    "gradcheck": _cmd_gradcheck,
    "admm": _cmd_admm,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InfeasibleRateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
