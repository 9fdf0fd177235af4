"""Lyapunov, rate and distance diagnostics computed from trajectories.

Nothing here hides a tolerance: increments and slacks are returned raw and
callers decide what counts as a violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import MonotoneOperator, as_point
from .trajectory import Trajectory

__all__ = [
    "AnchorSeries",
    "LyapunovReport",
    "SolutionSet",
    "GrowthCertificate",
    "DiagnosticsReport",
    "anchor_series",
    "continuous_lyapunov",
    "discrete_lyapunov",
    "lyapunov_report",
    "growth_certificate",
    "variation_bound_audit",
    "decade_max",
    "cumulative_trapezoid",
    "acceleration",
    "continuous_report",
    "discrete_report",
]


def cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Running trapezoidal integral, starting at 0."""
    out = np.zeros_like(y, dtype=np.float64)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def decade_max(t: np.ndarray, values: np.ndarray, lo: float, hi: float) -> float:
    mask = (t >= lo) & (t <= hi)
    if not mask.any():
        raise ValueError(f"no samples in [{lo}, {hi}]")
    return float(np.max(values[mask]))


def acceleration(traj: Trajectory) -> np.ndarray:
    """Central differences of the sampled velocity (one-sided at the ends)."""
    return np.gradient(traj.v, traj.t, axis=0)


@dataclass
class AnchorSeries:
    """``h = |x - z|^2 / 2`` and its derivative (continuous) or backward difference (discrete)."""

    t: np.ndarray
    h: np.ndarray
    dh: np.ndarray


def anchor_series(traj: Trajectory, z) -> AnchorSeries:
    z = as_point(z, traj.dim)
    e = traj.x - z
    h = 0.5 * np.einsum("ij,ij->i", e, e)
    if traj.discrete:
        e_prev = e - traj.v
        dh = h - 0.5 * np.einsum("ij,ij->i", e_prev, e_prev)
    else:
        dh = np.einsum("ij,ij->i", e, traj.v)
    return AnchorSeries(traj.t, h, dh)


@dataclass
class LyapunovReport:
    """A series that the theory says is non-increasing, with its raw increments.

    ``increments[i] = series[i+1] - series[i]``. Only increments whose end
    index is at least ``start`` are monitored; earlier ones are kept for
    inspection. ``series`` may end with NaN where the value needs samples
    beyond the trajectory.
    """

    t: np.ndarray
    series: np.ndarray
    start: int = 0

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.series)

    def _monitored(self) -> np.ndarray:
        inc = self.increments
        mask = np.isfinite(inc)
        mask[: max(self.start - 1, 0)] = False
        return mask

    def violations(self, tol: float = 0.0) -> np.ndarray:
        """Sample indices ``i`` (end of the step) where the series rose by more than ``tol``."""
        inc = self.increments
        return np.nonzero(self._monitored() & (inc > tol))[0] + 1

    def violation_count(self, tol: float = 0.0) -> int:
        return int(self.violations(tol).size)

    def max_violation(self) -> float:
        inc = self.increments[self._monitored()]
        return float(inc.max()) if inc.size else -math.inf

    @property
    def raw_violation_count(self) -> int:
        """Increases anywhere, including before the monitored window."""
        inc = self.increments
        return int(np.count_nonzero(np.isfinite(inc) & (inc > 0)))

    @property
    def initial(self) -> float:
        return float(self.series[self.start])


def continuous_lyapunov(traj: Trajectory, z, alpha: float, epsilon: float) -> LyapunovReport:
    """``Phi(t) = t h' + (alpha-1) h + beta t^2 g + (epsilon - 2 beta) int_{t0}^t s g(s) ds``.

    ``g = |x'|^2`` and ``beta = (1+epsilon)/alpha``. Along unperturbed runs with
    ``lam(t) = (1+epsilon) t^2/alpha^2`` its derivative is at most
    ``-t lam(t) |x''|^2``. The integral uses the trapezoidal rule on the samples.
    """
    if traj.discrete:
        raise ValueError("continuous_lyapunov needs a continuous trajectory")
    a = anchor_series(traj, z)
    t = traj.t
    g = np.einsum("ij,ij->i", traj.v, traj.v)
    beta = (1.0 + epsilon) / alpha
    integral = cumulative_trapezoid(t * g, t)
    phi = t * a.dh + (alpha - 1.0) * a.h + beta * t * t * g + (epsilon - 2.0 * beta) * integral
    return LyapunovReport(t, phi, 0)


def discrete_lyapunov(traj: Trajectory, z, alpha: float, epsilon: float, beta: float | None = None,
                      s: float = 1.0, perturbation=None) -> LyapunovReport:
    """``E_K = K(h_{K+1} - h_K) + (alpha-1) h_K + beta K^2 g_{K+1}
    + (epsilon - 2 beta) sum_{p<=K} p g_p + beta sum_{p<=K} g_p``.

    Here ``g_k = |x_k - x_{k-1}|^2`` and ``beta`` defaults to
    ``(1+epsilon)/alpha``. With a perturbation ``f_k`` the accumulated budget
    ``s sum_{p<=K} p (|x_p - z| |f_p| + (1/2 + s + lam_p) |f_p|^2)`` is
    subtracted so the result is again non-increasing.

    The per-step decrease needs ``0 <= 1 - alpha/k``, so monitoring starts
    at the first ``K >= alpha``.
    """
    if not traj.discrete:
        raise ValueError("discrete_lyapunov needs a discrete trajectory")
    if beta is None:
        beta = (1.0 + epsilon) / alpha
    a = anchor_series(traj, z)
    k = traj.t
    h = a.h
    g = np.einsum("ij,ij->i", traj.v, traj.v)
    E = np.full(k.size, np.nan)
    m = k.size - 1
    if m > 0:
        K = k[:m]
        E[:m] = (K * (h[1:] - h[:-1]) + (alpha - 1.0) * h[:m] + beta * K * K * g[1:]
                 + (epsilon - 2.0 * beta) * np.cumsum(K * g[:m]) + beta * np.cumsum(g[:m]))
        if perturbation is not None:
            fn = perturbation.norm(K)
            dist = np.linalg.norm(traj.x[:m] - as_point(z, traj.dim), axis=1)
            E[:m] -= np.cumsum(s * K * (dist * fn + (0.5 + s + traj.lam[:m]) * fn * fn))
    start = int(np.searchsorted(k, alpha))
    return LyapunovReport(k, E, start)


def lyapunov_report(traj: Trajectory, z, params) -> LyapunovReport:
    """Dispatch on the trajectory type.

    ``params`` is a :class:`~ripa.solver.DiscreteConfig` for discrete runs, or
    a :class:`~ripa.dynamics.ContinuousConfig` whose schedule is quadratic in time.
    """
    if z is None:
        raise ValueError("the Lyapunov report needs a known zero of the operator")
    if traj.discrete:
        pert = params.perturbation if params.perturbed else None
        return discrete_lyapunov(traj, z, params.alpha, params.epsilon, params.beta,
                                 params.s, pert)
    sched = params.schedule
    if getattr(sched, "kind", None) != "quadratic":
        raise ValueError("the continuous Lyapunov function is defined for quadratic-in-time schedules")
    if getattr(params.source, "kind", "none") != "none":
        raise ValueError("the continuous Lyapunov function is defined for unperturbed dynamics")
    return continuous_lyapunov(traj, z, params.alpha, sched.epsilon)


@dataclass
class SolutionSet:
    """The zero set ``S``: one point, or ``offset + span(basis)``.

    The basis is orthonormalized on construction. ``growth_modulus`` is the
    user-certified constant ``nu`` of the quadratic growth inequality.
    """

    offset: np.ndarray
    basis: np.ndarray | None = None
    growth_modulus: float | None = None

    def __post_init__(self):
        self.offset = as_point(self.offset)
        if self.basis is not None:
            B = np.atleast_2d(np.asarray(self.basis, dtype=np.float64))
            if B.shape[0] != self.offset.size and B.shape[1] == self.offset.size:
                B = B.T
            if B.shape[0] != self.offset.size:
                raise ValueError("basis vectors must live in the ambient dimension")
            q, r = np.linalg.qr(B)
            rank = int(np.sum(np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r).max())))
            self.basis = q[:, :rank]
        if self.growth_modulus is not None and not self.growth_modulus > 0:
            raise ValueError("growth modulus must be positive")

    @classmethod
    def point(cls, z, growth_modulus=None) -> "SolutionSet":
        return cls(z, None, growth_modulus)

    @classmethod
    def affine(cls, offset, basis, growth_modulus=None) -> "SolutionSet":
        return cls(offset, basis, growth_modulus)

    def distance(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        D = X - self.offset
        if self.basis is not None and self.basis.size:
            D = D - (D @ self.basis) @ self.basis.T
        return np.linalg.norm(D, axis=1)


@dataclass
class GrowthCertificate:
    t: np.ndarray
    dist: np.ndarray
    bound: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        """``bound - dist^2``; nonnegative wherever the certificate holds."""
        return self.bound - self.dist ** 2

    def violation_count(self, tol: float = 0.0) -> int:
        return int(np.count_nonzero(self.slack < -tol))


def growth_certificate(traj: Trajectory, S: SolutionSet, op: MonotoneOperator | None = None
                       ) -> GrowthCertificate:
    """Distance to ``S`` and the quadratic-growth bound

    ``dist(x, S)^2 <= [2(1 + lam0 nu)/(lam0 nu)] lam (lam + 1/(2 nu)) |A_lam(x)|^2``

    with ``lam0`` the smallest index on the trajectory. The stored residual
    is used unless ``op`` is given, in which case ``|A_lam(x)|`` is recomputed
    at every sample (needed for discrete runs, whose stored residual lives at
    ``y_k``).
    """
    nu = S.growth_modulus
    if nu is None:
        raise ValueError("growth certificate needs a certified growth modulus")
    lam = traj.lam
    if np.any(lam <= 0):
        raise ValueError("growth certificate needs a positive regularization index at every sample")
    if op is None:
        if traj.discrete:
            raise ValueError("discrete trajectories need the operator to evaluate |A_lam(x_k)|")
        r = traj.residual
    else:
        r = np.linalg.norm(op.yosida_batch(lam, traj.x), axis=1)
    lam0 = float(lam.min())
    c = 2.0 * (1.0 + lam0 * nu) / (lam0 * nu)
    bound = c * lam * (lam + 1.0 / (2.0 * nu)) * r * r
    return GrowthCertificate(traj.t, S.distance(traj.x), bound)


def variation_bound_audit(op: MonotoneOperator, z=None, sample_count: int = 10_000,
                          rng: np.random.Generator | None = None, scale: float = 3.0,
                          index_range=(1e-3, 1e3)) -> float:
    """Largest value of ``|g A_g x - d A_d y| - (2|x-y| + 2|x-z| |g-d|/g)`` over random draws.

    ``g, d`` are log-uniform in ``index_range``; ``x, y`` are Gaussian with
    standard deviation ``scale``. A correct operator gives a value <= 0.
    """
    if z is None:
        z = op.known_zero
    if z is None:
        raise ValueError("variation audit needs a known zero")
    z = as_point(z, op.dim)
    rng = np.random.default_rng() if rng is None else rng
    lo, hi = np.log(index_range[0]), np.log(index_range[1])
    gam = np.exp(rng.uniform(lo, hi, sample_count))
    dlt = np.exp(rng.uniform(lo, hi, sample_count))
    X = rng.normal(scale=scale, size=(sample_count, op.dim))
    Y = rng.normal(scale=scale, size=(sample_count, op.dim))
    lhs = np.linalg.norm(gam[:, None] * op.yosida_batch(gam, X) - dlt[:, None] * op.yosida_batch(dlt, Y),
                         axis=1)
    rhs = (2.0 * np.linalg.norm(X - Y, axis=1)
           + 2.0 * np.linalg.norm(X - z, axis=1) * np.abs(gam - dlt) / gam)
    return float(np.max(lhs - rhs))


@dataclass
class DiagnosticsReport:
    """Scalar summary plus the series it was computed from."""

    anchor: AnchorSeries | None
    lyapunov: LyapunovReport | None
    rate: np.ndarray
    partial_speed: np.ndarray
    partial_residual: np.ndarray
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = dict(self.stats)
        if self.lyapunov is not None:
            out["lyapunov_raw_violations"] = self.lyapunov.raw_violation_count
            out["lyapunov_violations"] = self.lyapunov.violation_count(0.0)
            out["lyapunov_max_increment"] = self.lyapunov.max_violation()
            out["lyapunov_monitor_start"] = float(self.lyapunov.t[self.lyapunov.start])
        return out


def _finish(traj, z, lyap, rate, ps, pr, extra):
    stats = {
        "samples": len(traj),
        "diverged": bool(traj.diverged),
        "final_norm": float(np.linalg.norm(traj.final)) if len(traj) else math.nan,
        "sup_rate": float(np.max(rate)) if rate.size else math.nan,
        "partial_speed_total": float(ps[-1]) if ps.size else 0.0,
        "partial_residual_total": float(pr[-1]) if pr.size else 0.0,
    }
    if z is not None and len(traj):
        stats["final_distance_to_zero"] = float(np.linalg.norm(traj.final - z))
    stats.update(extra)
    anchor = anchor_series(traj, z) if z is not None and len(traj) else None
    return DiagnosticsReport(anchor, lyap, rate, ps, pr, stats)


def discrete_report(traj: Trajectory, cfg, z=None) -> DiagnosticsReport:
    """Rates ``k |x_k - x_{k-1}|``, partial sums ``sum k |dx_k|^2`` and
    ``sum k lam_k |A_{lam_k+s}(y_k)|^2``, and ``E_K`` when ``z`` is known."""
    k = traj.t
    dx = traj.speeds()
    rate = k * dx
    ps = np.cumsum(k * dx * dx)
    pr = np.cumsum(k * traj.lam * traj.residual ** 2)
    lyap = None
    if z is not None and len(traj) > 1 and cfg.schedule in ("standard", "perturbed"):
        lyap = lyapunov_report(traj, z, cfg)
    return _finish(traj, z, lyap, rate, ps, pr, {"compliant": bool(cfg.compliant)})


def continuous_report(traj: Trajectory, cfg, z=None) -> DiagnosticsReport:
    """Rates ``t |x'|``, partial integrals ``int t |x'|^2`` and
    ``int t lam |A_lam(x)|^2``, and ``Phi`` for compliant unperturbed runs."""
    t = traj.t
    sp = traj.speeds()
    rate = t * sp
    ps = cumulative_trapezoid(t * sp * sp, t)
    pr = cumulative_trapezoid(t * traj.lam * traj.residual ** 2, t)
    lyap = None
    if (z is not None and len(traj) > 1 and getattr(cfg, "schedule", None) is not None
            and cfg.schedule.kind == "quadratic" and getattr(cfg.source, "kind", "none") == "none"):
        lyap = lyapunov_report(traj, z, cfg)
    return _finish(traj, z, lyap, rate, ps, pr, {"compliant": bool(getattr(cfg, "compliant", False))})
