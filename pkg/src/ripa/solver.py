"""Regularized inertial proximal iterations.

One step, for ``k >= 1`` and ``alpha_k = 1 - alpha/k`` (negative for ``k < alpha``,
used as is)::

    y_k     = x_k + alpha_k (x_k - x_{k-1})
    w_k     = y_k + s f_k
    x_{k+1} = lam_k/(lam_k+s) w_k + s/(lam_k+s) J_{(lam_k+s)A}(w_k)
            = w_k - s A_{lam_k+s}(w_k)

The classical inertial proximal step replaces the last line by
``x_{k+1} = J_{sA}(y_k)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .operators import MonotoneOperator, as_point
from .schedules import NoSource, PowerDecay
from .trajectory import Trajectory

__all__ = [
    "SCHEDULES",
    "DiscreteConfig",
    "IterationState",
    "FormMismatch",
    "ripa_step",
    "classical_step",
    "run",
]

SCHEDULES = ("standard", "perturbed", "constant", "classical")
DIVERGENCE_NORM = 1e30


class FormMismatch(AssertionError):
    """The resolvent and Yosida forms of a step disagreed."""


@dataclass
class DiscreteConfig:
    """Parameters of an iteration run.

    ``x0`` and ``x_minus1`` are the two starting points: the first step
    (``k = 1``) uses them as ``x_k`` and ``x_{k-1}``.
    """

    x0: np.ndarray
    alpha: float = 10.0
    s: float = 1.0
    epsilon: float = 1.25
    schedule: str = "standard"
    lam_bar: float = 1.0
    max_iters: int = 1000
    perturbation: NoSource | PowerDecay = field(default_factory=NoSource)
    x_minus1: np.ndarray | None = None
    tol: float | None = None
    debug: bool = False

    def __post_init__(self):
        self.x0 = as_point(self.x0)
        self.x_minus1 = self.x0.copy() if self.x_minus1 is None else as_point(self.x_minus1, self.x0.size)
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; choose from {SCHEDULES}")
        if not self.s > 0:
            raise ValueError("step s must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.schedule in ("standard", "perturbed") and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.schedule == "constant" and not self.lam_bar > 0:
            raise ValueError("lam_bar must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")

    def lam(self, k: int) -> float:
        """Regularization index ``lam_k``; 0 for the classical scheme."""
        if self.schedule == "standard":
            return (1.0 + self.epsilon) * (self.s / self.alpha ** 2) * k * k
        if self.schedule == "perturbed":
            return (1.0 + self.s / 2.0 + self.epsilon) * (2.0 * self.s / self.alpha ** 2) * k * k
        if self.schedule == "constant":
            return self.lam_bar
        return 0.0

    @property
    def beta(self) -> float:
        if self.schedule == "perturbed":
            return (1.0 + self.s / 2.0 + self.epsilon) / self.alpha
        return (1.0 + self.epsilon) / self.alpha

    @property
    def perturbed(self) -> bool:
        return not isinstance(self.perturbation, NoSource) and self.perturbation.c != 0

    @property
    def compliant(self) -> bool:
        if self.alpha <= 2:
            return False
        if self.schedule == "standard":
            return not self.perturbed and self.epsilon > 2.0 / (self.alpha - 2.0)
        if self.schedule == "perturbed":
            return (self.epsilon > (2.0 + self.s) / (self.alpha - 2.0)
                    and self.perturbation.integrable())
        return False

    def f(self, k: int, dim: int) -> np.ndarray:
        return self.perturbation(float(k), dim)


@dataclass
class IterationState:
    k: int
    x: np.ndarray
    x_prev: np.ndarray
    y: np.ndarray | None = None
    residual: np.ndarray | None = None
    diverged: bool = False


def _extrapolate(state: IterationState, cfg: DiscreteConfig) -> np.ndarray:
    return state.x + (1.0 - cfg.alpha / state.k) * (state.x - state.x_prev)


def ripa_step(op: MonotoneOperator, state: IterationState, cfg: DiscreteConfig) -> IterationState:
    """Advance the regularized scheme by one step (``k -> k+1``).

    With ``cfg.debug`` the Yosida form is recomputed through a second operator
    call and must match the resolvent form to 1e-12 (relative to the iterate).
    """
    if state.k < 1:
        raise ValueError("iterations start at k = 1")
    k = state.k
    lam = cfg.lam(k)
    y = _extrapolate(state, cfg)
    w = y + cfg.s * cfg.f(k, y.size) if cfg.perturbed else y
    idx = lam + cfg.s
    J = op._resolvent(idx, w)
    # lam/idx w + s/idx J, written so that J == w returns w exactly
    x_next = w + (cfg.s / idx) * (J - w)
    residual = (w - J) / idx
    if cfg.debug:
        alt = w - cfg.s * op.yosida(idx, w)
        if np.linalg.norm(alt - x_next) > 1e-12 * (1.0 + np.linalg.norm(x_next)):
            raise FormMismatch(f"resolvent and Yosida forms disagree at k={k}")
    return IterationState(k + 1, x_next, state.x, y, residual,
                          not np.linalg.norm(x_next) <= DIVERGENCE_NORM)


def classical_step(op: MonotoneOperator, state: IterationState, cfg: DiscreteConfig) -> IterationState:
    """Unregularized inertial proximal step ``x_{k+1} = J_{sA}(y_k)``."""
    if state.k < 1:
        raise ValueError("iterations start at k = 1")
    y = _extrapolate(state, cfg)
    x_next = op._resolvent(cfg.s, y)
    return IterationState(state.k + 1, x_next, state.x, y, (y - x_next) / cfg.s,
                          not np.linalg.norm(x_next) <= DIVERGENCE_NORM)


def _peek_residual(op, state, cfg) -> float:
    """Residual norm the next step would see, without taking it."""
    y = _extrapolate(state, cfg)
    if cfg.schedule == "classical":
        return float(np.linalg.norm((y - op._resolvent(cfg.s, y)) / cfg.s))
    w = y + cfg.s * cfg.f(state.k, y.size) if cfg.perturbed else y
    idx = cfg.lam(state.k) + cfg.s
    return float(np.linalg.norm((w - op._resolvent(idx, w)) / idx))


def run(op: MonotoneOperator, cfg: DiscreteConfig, z=None):
    """Iterate from ``k = 1`` for ``cfg.max_iters`` steps.

    Returns ``(trajectory, report)``. Sample ``k`` holds ``x_k``,
    ``x_k - x_{k-1}``, ``lam_k`` and the residual norm of step ``k``; the
    last sample is the final iterate, with the residual its next step would
    see. Runs stop early once ``k |x_k - x_{k-1}| < cfg.tol`` or when the
    iterate norm exceeds 1e30 (flagged diverged). ``z`` defaults to the
    operator's known zero and anchors the Lyapunov report.
    """
    n = op.dim
    x0 = as_point(cfg.x0, n)
    step = classical_step if cfg.schedule == "classical" else ripa_step
    N = cfg.max_iters
    xs = np.empty((N + 1, n))
    dxs = np.empty((N + 1, n))
    lams = np.empty(N + 1)
    res = np.empty(N + 1)

    state = IterationState(1, x0.copy(), cfg.x_minus1.copy())
    start = time.perf_counter()
    m = 0
    early = False
    for _ in range(N):
        new = step(op, state, cfg)
        xs[m], dxs[m] = state.x, state.x - state.x_prev
        lams[m] = cfg.lam(state.k)
        res[m] = math.sqrt(float(new.residual @ new.residual))
        m += 1
        state = new
        if state.diverged or not np.all(np.isfinite(state.x)):
            break
        if cfg.tol is not None and state.k * np.linalg.norm(state.x - state.x_prev) < cfg.tol:
            early = True
            break
    diverged = state.diverged or not np.all(np.isfinite(state.x))
    if not diverged:
        xs[m], dxs[m] = state.x, state.x - state.x_prev
        lams[m] = cfg.lam(state.k)
        res[m] = _peek_residual(op, state, cfg)
        m += 1
    wall = time.perf_counter() - start

    traj = Trajectory(np.arange(1, m + 1, dtype=np.float64), xs[:m], dxs[:m], lams[:m], res[:m],
                      discrete=True, diverged=diverged,
                      metadata={"schedule": cfg.schedule, "compliant": cfg.compliant,
                                "early_exit": early, "wall_time": wall, "iterations": m - 1})
    if z is None:
        z = op.known_zero
    report = diagnostics.discrete_report(traj, cfg, z)
    return traj, report
