"""Regularization-index schedules and source terms.

The schedules give lambda(t) (continuous time) or lambda_k (iteration count).
Each carries a compliance predicate telling whether the convergence theory
covers it; non-compliant schedules are still runnable for criticality studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constant",
    "QuadraticTime",
    "PowerLaw",
    "Schedule",
    "NoSource",
    "PowerDecay",
    "CustomSource",
    "Source",
    "quadratic_time_compliant",
    "schedule_from_dict",
    "source_from_dict",
]


def quadratic_time_compliant(alpha: float, epsilon: float) -> bool:
    """``alpha > 2`` and ``epsilon > 2/(alpha - 2)``."""
    return alpha > 2 and epsilon > 2.0 / (alpha - 2.0)


def _positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a positive real, got {v}")


@dataclass(frozen=True)
class Constant:
    lam: float
    kind = "constant"

    def __post_init__(self):
        _positive(lam=self.lam)

    def __call__(self, t: float) -> float:
        return self.lam

    def compliant(self, alpha: float | None = None) -> bool:
        return False


@dataclass(frozen=True)
class QuadraticTime:
    """``lambda(t) = (1 + epsilon) t^2 / alpha^2``."""

    alpha: float
    epsilon: float
    kind = "quadratic"

    def __post_init__(self):
        _positive(alpha=self.alpha, epsilon=self.epsilon)

    def __call__(self, t: float) -> float:
        return (1.0 + self.epsilon) * t * t / (self.alpha * self.alpha)

    def compliant(self, alpha: float | None = None) -> bool:
        # the schedule's alpha must also be the damping coefficient
        if alpha is not None and alpha != self.alpha:
            return False
        return quadratic_time_compliant(self.alpha, self.epsilon)


@dataclass(frozen=True)
class PowerLaw:
    """``lambda(t) = c t^p``; ``p = 0`` is a constant index."""

    c: float
    p: float
    kind = "power"

    def __post_init__(self):
        _positive(c=self.c)
        if not (np.isfinite(self.p) and self.p >= 0):
            raise ValueError(f"p must be a nonnegative real, got {self.p}")

    def __call__(self, t: float) -> float:
        return self.c * t ** self.p

    def compliant(self, alpha: float | None = None) -> bool:
        return False


Schedule = Constant | QuadraticTime | PowerLaw


@dataclass(frozen=True)
class NoSource:
    kind = "none"

    def __call__(self, t: float, dim: int) -> np.ndarray:
        return np.zeros(dim)

    def integrable(self) -> bool:
        return True

    def norm(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class PowerDecay:
    """``f(t) = c t^(-q) u`` for a unit direction ``u``.

    ``u`` defaults to the first basis vector. When sampled at integers this
    doubles as the discrete perturbation ``f_k = c k^(-q) u``.
    """

    c: float
    q: float
    direction: tuple | None = None
    kind = "power_decay"

    def unit(self, dim: int) -> np.ndarray:
        if self.direction is None:
            u = np.zeros(dim)
            u[0] = 1.0
            return u
        u = np.asarray(self.direction, dtype=np.float64)
        if u.shape != (dim,):
            raise ValueError(f"direction has shape {u.shape}, expected ({dim},)")
        nrm = np.linalg.norm(u)
        if nrm == 0:
            raise ValueError("direction must be nonzero")
        return u / nrm

    def __call__(self, t: float, dim: int) -> np.ndarray:
        return self.c * t ** (-self.q) * self.unit(dim)

    def norm(self, t):
        return abs(self.c) * np.asarray(t, dtype=float) ** (-self.q)

    def integrable(self) -> bool:
        """Both ``int t^3 |f|^2`` and ``int t |f|`` finite at infinity, i.e. ``q > 2``.

        The same threshold makes ``sum k |f_k|`` and ``sum k^3 |f_k|^2`` finite.
        """
        return self.c == 0 or self.q > 2


@dataclass(frozen=True)
class CustomSource:
    """Tabulated source, linearly interpolated and held constant outside the table."""

    times: tuple
    values: tuple
    kind = "custom"
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if v.shape[0] != t.size and v.shape[1] == t.size:
            v = v.T
        if t.ndim != 1 or v.shape[0] != t.size or t.size < 2:
            raise ValueError("custom source needs matching times and values (at least 2 rows)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("custom source times must be strictly increasing")
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_v", v)

    def __call__(self, t: float, dim: int) -> np.ndarray:
        if self._v.shape[1] != dim:
            raise ValueError(f"custom source has dimension {self._v.shape[1]}, expected {dim}")
        return np.array([np.interp(t, self._t, self._v[:, j]) for j in range(dim)])

    def norm(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([np.linalg.norm(self(tt, self._v.shape[1])) for tt in t])

    def integrable(self) -> bool:
        # only parametric families admit an exact check
        return False


Source = NoSource | PowerDecay | CustomSource


def schedule_from_dict(d: dict) -> Schedule:
    kind = d.get("kind")
    if kind == "constant":
        return Constant(float(d["lambda"]))
    if kind == "quadratic":
        return QuadraticTime(float(d["alpha"]), float(d["epsilon"]))
    if kind == "power":
        return PowerLaw(float(d.get("c", 1.0)), float(d["p"]))
    raise ValueError(f"unknown schedule kind {kind!r}")


def source_from_dict(d: dict | None) -> Source:
    if not d or d.get("kind", "none") == "none":
        return NoSource()
    kind = d["kind"]
    if kind == "power_decay":
        direction = d.get("direction")
        return PowerDecay(float(d.get("c", 1.0)), float(d["q"]),
                          tuple(direction) if direction is not None else None)
    if kind == "custom":
        return CustomSource(tuple(d["times"]), tuple(map(tuple, d["values"])))
    raise ValueError(f"unknown source kind {kind!r}")
