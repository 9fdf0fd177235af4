"""Inertial dynamics driven by the Yosida regularization, and first-order flows.

The second-order system

    x''(t) + (alpha/t) x'(t) + A_{lam(t)}(x(t)) = f(t)

is integrated in phase space ``(x, x')``. Passing ``schedule=None`` replaces
``A_{lam(t)}`` by the raw operator ``A`` (single-valued operators only).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .operators import MonotoneOperator, OperatorError, as_point
from .schedules import NoSource, Schedule, Source
from .trajectory import Trajectory

__all__ = [
    "DIVERGENCE_NORM",
    "BLOWUP_FACTOR",
    "IntegrationError",
    "ContinuousConfig",
    "reduce_to_first_order",
    "simulate_second_order",
    "simulate_first_order",
    "rk4_integrate",
]

log = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e30
# runs that end this many times larger than their initial data count as diverged
BLOWUP_FACTOR = 1e10


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_t: float):
        super().__init__(f"{message} (last good t = {last_t:.17g})")
        self.last_t = last_t


@dataclass
class ContinuousConfig:
    alpha: float
    schedule: Schedule | None
    x0: np.ndarray
    v0: np.ndarray | None = None
    t0: float = 1.0
    t_end: float = 100.0
    source: Source = field(default_factory=NoSource)
    method: str = "rk45"
    rtol: float = 1e-8
    atol: float = 1e-10
    dt: float = 0.01
    sample_stride: int = 1

    def __post_init__(self):
        self.x0 = as_point(self.x0)
        self.v0 = np.zeros_like(self.x0) if self.v0 is None else as_point(self.v0, self.x0.size)
        if not self.t0 > 0:
            raise ValueError("t0 must be positive; the damping alpha/t is singular at 0")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")

    @property
    def compliant(self) -> bool:
        return (self.schedule is not None and self.schedule.compliant(self.alpha)
                and self.source.integrable())


def _field(op: MonotoneOperator, schedule: Schedule | None):
    """Return ``t, x -> A_{lam(t)}(x)`` (or ``A(x)`` when raw)."""
    if schedule is None:
        if not op.single_valued:
            raise OperatorError(f"raw flow needs a single-valued operator, got {op.kind}")
        return lambda t, x: op.apply(x)
    return lambda t, x: (x - op._resolvent(schedule(t), x)) / schedule(t)


def reduce_to_first_order(op: MonotoneOperator, config: ContinuousConfig):
    """Phase-space vector field ``F(t, (u, v)) = (v, -(alpha/t) v - A_{lam(t)}(u) + f(t))``."""
    drive = _field(op, config.schedule)
    alpha, source, n = config.alpha, config.source, op.dim

    def F(t, u, v):
        return v, -(alpha / t) * v - drive(t, u) + source(t, n)

    return F


def rk4_integrate(fun, t0: float, y0: np.ndarray, t_end: float, dt: float, stop=None):
    """Classical fixed-step RK4. Returns ``(ts, ys, stopped)``.

    The final step is shortened to land exactly on ``t_end``. ``stop(t, y)``
    ends the integration early when it returns True.
    """
    n_steps = int(np.ceil((t_end - t0) / dt - 1e-12))
    ts = [t0]
    ys = [np.array(y0, dtype=np.float64)]
    t, y = t0, ys[0]
    for i in range(n_steps):
        h = min(dt, t_end - t)
        k1 = fun(t, y)
        k2 = fun(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = fun(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = fun(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t_end if i == n_steps - 1 else t0 + (i + 1) * dt
        ts.append(t)
        ys.append(y)
        if not np.all(np.isfinite(y)) or (stop is not None and stop(t, y)):
            return np.array(ts), np.array(ys), True
    return np.array(ts), np.array(ys), False


def _integrate(fun, y0, cfg: ContinuousConfig, n: int):
    """Run the chosen integrator, returning accepted step times and states."""
    def too_big(t, y):
        return np.linalg.norm(y[:n]) - DIVERGENCE_NORM
    too_big.terminal = True
    too_big.direction = 1

    if cfg.method == "rk4":
        ts, ys, stopped = rk4_integrate(
            fun, cfg.t0, y0, cfg.t_end, cfg.dt,
            stop=lambda t, y: np.linalg.norm(y[:n]) > DIVERGENCE_NORM)
        return ts, ys, stopped
    sol = solve_ivp(fun, (cfg.t0, cfg.t_end), y0, method="RK45",
                    rtol=cfg.rtol, atol=cfg.atol, events=too_big)
    if sol.status == -1:
        last = float(sol.t[-1]) if sol.t.size else cfg.t0
        raise IntegrationError(sol.message, last)
    return sol.t, sol.y.T, sol.status == 1


def _pick(m: int, stride: int) -> np.ndarray:
    idx = np.arange(0, m, stride)
    if idx[-1] != m - 1:
        idx = np.append(idx, m - 1)
    return idx


def _build(op, schedule, ts, xs, vs, stopped, cfg_meta: dict, x0_scale: float, wall: float):
    drive = _field(op, schedule)
    if schedule is None:
        lam = np.zeros(ts.size)
    else:
        lam = np.array([schedule(t) for t in ts])
    res = np.array([np.linalg.norm(drive(t, x)) if np.all(np.isfinite(x)) else np.nan
                    for t, x in zip(ts, xs)])
    traj = Trajectory(ts, xs, vs, lam, res, discrete=False, metadata=dict(cfg_meta))
    traj = traj.truncate_nonfinite()
    blown = traj.norms()[-1] > BLOWUP_FACTOR * max(x0_scale, 1.0)
    traj.diverged = traj.diverged or stopped or blown
    traj.metadata.update(truncated=bool(stopped), wall_time=wall)
    if traj.diverged:
        log.info("trajectory diverged: final norm %.3e at t=%.6g", traj.norms()[-1], traj.t[-1])
    return traj


def simulate_second_order(op: MonotoneOperator, config: ContinuousConfig) -> Trajectory:
    """Integrate the (possibly perturbed) inertial dynamics from ``(x0, v0)`` at ``t0``.

    Samples every ``sample_stride`` accepted steps plus the final one. Runs
    whose state norm crosses :data:`DIVERGENCE_NORM` stop there and are
    flagged ``diverged``; so are runs that finish :data:`BLOWUP_FACTOR`
    times larger than their initial data.
    """
    n = op.dim
    as_point(config.x0, n)
    F = reduce_to_first_order(op, config)

    def fun(t, y):
        du, dv = F(t, y[:n], y[n:])
        return np.concatenate([du, dv])

    start = time.perf_counter()
    ts, ys, stopped = _integrate(fun, np.concatenate([config.x0, config.v0]), config, n)
    wall = time.perf_counter() - start
    idx = _pick(ts.size, config.sample_stride)
    meta = {"order": 2, "compliant": config.compliant, "method": config.method}
    scale = np.linalg.norm(config.x0) + np.linalg.norm(config.v0)
    return _build(op, config.schedule, ts[idx], ys[idx, :n], ys[idx, n:], stopped, meta, scale, wall)


def simulate_first_order(op: MonotoneOperator, schedule: Schedule | None, x0, t0: float = 1.0,
                         t_end: float = 100.0, method: str = "rk45", rtol: float = 1e-8,
                         atol: float = 1e-10, dt: float = 0.01,
                         sample_stride: int = 1) -> Trajectory:
    """Integrate ``x' = -A_{lam(t)}(x)``, or ``x' = -A(x)`` when ``schedule`` is None.

    The stored velocity is the vector field at the sample.
    """
    # reuse the config validation; alpha plays no role in a first-order flow
    cfg = ContinuousConfig(alpha=1.0, schedule=schedule, x0=x0, t0=t0, t_end=t_end, method=method,
                           rtol=rtol, atol=atol, dt=dt, sample_stride=sample_stride)
    n = op.dim
    as_point(cfg.x0, n)
    drive = _field(op, schedule)

    def fun(t, y):
        return -drive(t, y)

    start = time.perf_counter()
    ts, ys, stopped = _integrate(fun, cfg.x0, cfg, n)
    wall = time.perf_counter() - start
    idx = _pick(ts.size, sample_stride)
    ts, xs = ts[idx], ys[idx]
    vs = np.array([-drive(t, x) if np.all(np.isfinite(x)) else np.full(n, np.nan)
                   for t, x in zip(ts, xs)])
    meta = {"order": 1, "method": method,
            "compliant": schedule is not None and schedule.compliant()}
    return _build(op, schedule, ts, xs, vs, stopped, meta, np.linalg.norm(cfg.x0), wall)
