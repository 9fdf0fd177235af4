"""Eigenvalue analysis of the regularized rotation dynamics.

Writing the plane as C, the rotation becomes ``z -> i z`` and its Yosida
regularization ``z -> c z`` with ``c = (lam + i)/(1 + lam^2)``. In phase
space the dynamics read ``Z' + M(t) Z = 0`` with
``M(t) = [[0, -1], [c, alpha/t]]``; a mode decays when the real part of the
corresponding eigenvalue ``theta`` is positive and integrates to infinity.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .schedules import quadratic_time_compliant
from .trajectory import fmt

__all__ = ["EigenPair", "RateClass", "rotation_eigenvalues", "characteristic_residual",
           "classify_rate", "spectra_csv"]


@dataclass(frozen=True)
class EigenPair:
    theta_plus: complex
    theta_minus: complex


def _coupling(lam: float) -> complex:
    return complex(lam, 1.0) / (1.0 + lam * lam)


def rotation_eigenvalues(t: float, alpha: float, lam: float) -> EigenPair:
    """Roots of ``theta^2 - (alpha/t) theta + c = 0``.

    ``theta_plus = (alpha/2t)(1 + sqrt(1 - 4 t^2 c / alpha^2))`` with the
    principal square root. ``theta_minus`` is recovered as ``c/theta_plus``,
    which avoids cancellation when the square root is close to 1.
    """
    if not (t > 0 and alpha > 0 and lam > 0):
        raise ValueError("t, alpha and lam must be positive")
    c = _coupling(lam)
    half = alpha / (2.0 * t)
    root = cmath.sqrt(1.0 - c / (half * half))
    plus = half * (1.0 + root)
    return EigenPair(plus, c / plus)


def characteristic_residual(pair: EigenPair, t: float, alpha: float, lam: float) -> float:
    """Largest relative residual of the characteristic polynomial at both roots."""
    c = _coupling(lam)
    trace = alpha / t
    worst = 0.0
    for th in (pair.theta_plus, pair.theta_minus):
        value = th * th - trace * th + c
        scale = max(abs(th) ** 2, trace * abs(th), abs(c))
        worst = max(worst, abs(value) / scale)
    return worst


@dataclass(frozen=True)
class RateClass:
    """Outcome of :func:`classify_rate`.

    ``label`` is ``"convergent"``, ``"critical"`` (p = 2) or
    ``"non-convergent"``. ``exponents`` are the decay exponents ``(a, b)``
    with ``theta_plus ~ t^-a`` and ``theta_minus ~ t^-b`` when both roots
    have power-law real parts. ``integral`` is the quadrature of
    ``Re theta_minus`` over the requested range, when computed.
    """

    label: str
    exponents: tuple | None
    compliant: bool | None = None
    integral: float | None = None
    tail_real: float | None = None

    @property
    def convergent(self) -> bool:
        return self.label in ("convergent", "critical")


def _tail_slope(f, t_hi: float) -> float:
    a, b = t_hi / 10.0, t_hi
    fa, fb = f(a), f(b)
    if fa <= 0 or fb <= 0:
        return math.nan
    return math.log(fb / fa) / math.log(b / a)


def classify_rate(p: float, alpha: float, t_range=(1.0, 1e6), c: float = 1.0) -> RateClass:
    """Classify ``lam(t) = c t^p`` on the rotation example.

    * ``p > 2``: ``theta_minus ~ t^-(p-1)`` is integrable, so the slow mode
      freezes: non-convergent.
    * ``p = 2``: the boundary; both roots behave like ``1/t``. The
      compliance flag tells whether ``c = (1+eps)/alpha^2`` with
      ``eps > 2/(alpha-2)``.
    * ``p < 2``: decided numerically from ``Re theta_minus`` on ``t_range``.
      A real part that turns negative at the upper end means a growing
      mode. Otherwise the integral diverges (convergent) exactly when the
      real part decays no faster than ``1/t``, judged from the log-log
      slope over the last decade.
    """
    if not p >= 0:
        raise ValueError("p must be nonnegative")
    t_lo, t_hi = map(float, t_range)

    def re_minus(t):
        return rotation_eigenvalues(t, alpha, c * t ** p).theta_minus.real

    if p > 2:
        return RateClass("non-convergent", (1.0, p - 1.0))
    if p == 2:
        eps = c * alpha * alpha - 1.0
        return RateClass("critical", (1.0, 1.0), compliant=eps > 0 and quadratic_time_compliant(alpha, eps))

    # integrate in log time: d t = t d(log t)
    integral, _ = quad(lambda u: re_minus(math.exp(u)) * math.exp(u),
                       math.log(t_lo), math.log(t_hi), limit=400)
    tail = re_minus(t_hi)
    if tail < 0:
        return RateClass("non-convergent", None, integral=integral, tail_real=tail)
    slope = _tail_slope(re_minus, t_hi)
    if slope >= -1.0 - 0.05:
        return RateClass("convergent", (1.0, -slope), integral=integral, tail_real=tail)
    return RateClass("non-convergent", (1.0, -slope), integral=integral, tail_real=tail)


def spectra_csv(path, times, alpha: float, schedule) -> Path:
    """Write ``t, Re theta+, Im theta+, Re theta-, Im theta-`` rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re_theta_plus", "im_theta_plus", "re_theta_minus", "im_theta_minus"])
        for t in np.asarray(times, dtype=float):
            pair = rotation_eigenvalues(t, alpha, schedule(t))
            w.writerow([fmt(t), fmt(pair.theta_plus.real), fmt(pair.theta_plus.imag),
                        fmt(pair.theta_minus.real), fmt(pair.theta_minus.imag)])
    return path
