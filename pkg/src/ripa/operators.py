"""Maximally monotone operators given by exact resolvent oracles.

Every operator here knows how to evaluate its resolvent ``(I + lam*A)^{-1}``
in closed form. The Yosida regularization defaults to ``(x - J(x))/lam``;
concrete operators override it with equivalent formulas that stay accurate
when ``lam`` is small.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

__all__ = [
    "OperatorError",
    "MonotoneOperator",
    "ZeroOperator",
    "AffineOperator",
    "Rotation2D",
    "ProxOperator",
    "YosidaView",
    "QuadraticData",
    "as_point",
    "resolvent",
    "yosida",
    "yosida_view_resolvent",
    "build_saddle_operator",
    "solve_kkt",
    "operator_from_dict",
    "operator_to_dict",
]

MONOTONICITY_TOL = 1e-10


class OperatorError(ValueError):
    """Invalid operator data or an operator evaluation that cannot proceed."""


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` into a finite 1-D float64 array, optionally checking its size."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise OperatorError(f"point must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise OperatorError("point has non-finite coordinates")
    if dim is not None and arr.shape[0] != dim:
        raise OperatorError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    return arr


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or not np.isfinite(lam):
        raise OperatorError(f"index must be a positive finite real, got {lam}")
    return lam


class MonotoneOperator:
    """Base class for a maximally monotone operator on R^n.

    Subclasses implement ``_resolvent(lam, x)``. Input validation happens in
    :meth:`resolvent` so subclasses only deal with clean arrays.
    """

    dim: int
    known_zero: np.ndarray | None = None
    single_valued: bool = True
    kind: str = "abstract"

    def resolvent(self, lam: float, x) -> np.ndarray:
        lam = _check_lam(lam)
        x = as_point(x, self.dim)
        out = self._resolvent(lam, x)
        if not np.all(np.isfinite(out)):
            raise OperatorError("resolvent produced non-finite values")
        return out

    def yosida(self, lam: float, x) -> np.ndarray:
        lam = _check_lam(lam)
        x = as_point(x, self.dim)
        return self._yosida(lam, x)

    def _yosida(self, lam: float, x: np.ndarray) -> np.ndarray:
        # subclasses override with forms that avoid cancellation for small lam
        return (x - self._resolvent(lam, x)) / lam

    def resolvent_batch(self, lams, X) -> np.ndarray:
        """Row-wise resolvents: row ``i`` is ``J_{lams[i] A}(X[i])``."""
        lams = np.asarray(lams, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        if np.any(lams <= 0):
            raise OperatorError("indices must be positive")
        return self._resolvent_batch(lams, X)

    def yosida_batch(self, lams, X) -> np.ndarray:
        lams = np.asarray(lams, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        if np.any(lams <= 0):
            raise OperatorError("indices must be positive")
        return self._yosida_batch(lams, X)

    def _resolvent_batch(self, lams, X):
        return np.array([self._resolvent(lam, x) for lam, x in zip(lams, X)])

    def _yosida_batch(self, lams, X):
        return np.array([self._yosida(lam, x) for lam, x in zip(lams, X)])

    def apply(self, x) -> np.ndarray:
        """Evaluate ``A(x)`` for single-valued operators."""
        raise OperatorError(f"{self.kind} operator is set-valued; raw evaluation unavailable")

    def _resolvent(self, lam: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)


class ZeroOperator(MonotoneOperator):
    kind = "zero"

    def __init__(self, dim: int):
        if dim < 1:
            raise OperatorError("dimension must be >= 1")
        self.dim = int(dim)
        self.known_zero = np.zeros(self.dim)

    def _resolvent(self, lam, x):
        return x.copy()

    def _resolvent_batch(self, lams, X):
        return X.copy()

    def _yosida(self, lam, x):
        return np.zeros_like(x)

    def _yosida_batch(self, lams, X):
        return np.zeros_like(X)

    def apply(self, x):
        return np.zeros(self.dim)


class AffineOperator(MonotoneOperator):
    """``A(x) = M x + q`` with ``M + M^T`` positive semidefinite."""

    kind = "affine"

    def __init__(self, matrix, offset=None, known_zero=None):
        M = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        n = M.shape[0]
        if M.shape != (n, n):
            raise OperatorError(f"matrix must be square, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise OperatorError("matrix has non-finite entries")
        sym_min = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
        if sym_min < -MONOTONICITY_TOL:
            raise OperatorError(
                f"matrix is not monotone: smallest eigenvalue of symmetric part is {sym_min:.3e}")
        self.dim = n
        self.matrix = M
        self.offset = np.zeros(n) if offset is None else as_point(offset, n)
        if known_zero is None:
            known_zero = self._find_zero()
        else:
            known_zero = as_point(known_zero, n)
            if np.linalg.norm(self.apply(known_zero)) > 1e-10 * (1 + np.linalg.norm(known_zero)):
                raise OperatorError("supplied known_zero is not a zero of the operator")
        self.known_zero = known_zero
        # the memo is per instance; lru_cache on a bound method would pin self
        self._factor = lru_cache(maxsize=8)(self._factorize)

    def _find_zero(self) -> np.ndarray | None:
        sol, *_ = np.linalg.lstsq(self.matrix, -self.offset, rcond=None)
        if np.linalg.norm(self.matrix @ sol + self.offset) <= 1e-12 * (1 + np.linalg.norm(self.offset)):
            return sol
        return None

    def _factorize(self, lam: float):
        lu = sla.lu_factor(np.eye(self.dim) + lam * self.matrix, check_finite=False)
        if np.any(np.diag(lu[0]) == 0):
            raise OperatorError("singular resolvent system; the matrix is not monotone")
        return lu

    def _resolvent(self, lam, x):
        return sla.lu_solve(self._factor(lam), x - lam * self.offset, check_finite=False)

    def _resolvent_batch(self, lams, X):
        mats = np.eye(self.dim) + lams[:, None, None] * self.matrix
        rhs = X - lams[:, None] * self.offset
        return np.linalg.solve(mats, rhs[..., None])[..., 0]

    # A_lam(x) = (I + lam M)^{-1} (M x + q), free of the x - J(x) cancellation
    def _yosida(self, lam, x):
        return sla.lu_solve(self._factor(lam), self.matrix @ x + self.offset, check_finite=False)

    def _yosida_batch(self, lams, X):
        mats = np.eye(self.dim) + lams[:, None, None] * self.matrix
        rhs = X @ self.matrix.T + self.offset
        return np.linalg.solve(mats, rhs[..., None])[..., 0]

    def apply(self, x):
        return self.matrix @ as_point(x, self.dim) + self.offset


class Rotation2D(AffineOperator):
    """Counterclockwise rotation by pi/2 in the plane, ``A(x, y) = (-y, x)``.

    The resolvent has the closed form ``(x + lam*y, y - lam*x) / (1 + lam^2)``.
    """

    kind = "rotation2d"

    def __init__(self):
        super().__init__([[0.0, -1.0], [1.0, 0.0]], known_zero=[0.0, 0.0])

    def _resolvent(self, lam, x):
        d = 1.0 + lam * lam
        return np.array([(x[0] + lam * x[1]) / d, (x[1] - lam * x[0]) / d])

    def _resolvent_batch(self, lams, X):
        d = 1.0 + lams * lams
        return np.column_stack([(X[:, 0] + lams * X[:, 1]) / d, (X[:, 1] - lams * X[:, 0]) / d])

    def _yosida(self, lam, x):
        d = 1.0 + lam * lam
        return np.array([(lam * x[0] - x[1]) / d, (x[0] + lam * x[1]) / d])

    def _yosida_batch(self, lams, X):
        d = 1.0 + lams * lams
        return np.column_stack([(lams * X[:, 0] - X[:, 1]) / d, (X[:, 0] + lams * X[:, 1]) / d])

    def apply(self, x):
        x = as_point(x, 2)
        return np.array([-x[1], x[0]])


class ProxOperator(MonotoneOperator):
    """Subdifferential of a convex function with a closed-form proximal map.

    Rules
    -----
    ``abs``
        ``f(x) = weight * ||x||_1``; the prox is soft-thresholding.
    ``box``
        indicator of ``[lower, upper]^n``; the prox is clamping.
    ``quadratic``
        ``f(x) = a/2 * ||x - c||^2``; the prox is ``(x + lam*a*c) / (1 + lam*a)``.
    """

    kind = "prox"
    RULES = ("abs", "box", "quadratic")

    def __init__(self, rule: str, dim: int = 1, **params):
        if rule not in self.RULES:
            raise OperatorError(f"unknown prox rule {rule!r}; choose from {self.RULES}")
        if dim < 1:
            raise OperatorError("dimension must be >= 1")
        self.rule = rule
        self.dim = int(dim)
        self.params = dict(params)
        if rule == "abs":
            self.weight = float(params.get("weight", 1.0))
            if not self.weight > 0:
                raise OperatorError("abs weight must be positive")
            self.single_valued = False
            self.known_zero = np.zeros(self.dim)
        elif rule == "box":
            self.lower = float(params.get("lower", -1.0))
            self.upper = float(params.get("upper", 1.0))
            if not self.lower <= self.upper:
                raise OperatorError("box requires lower <= upper")
            self.single_valued = False
            self.known_zero = np.full(self.dim, 0.5 * (self.lower + self.upper))
        else:
            self.a = float(params.get("a", 1.0))
            if not self.a >= 0:
                raise OperatorError("quadratic curvature a must be nonnegative")
            self.center = as_point(params.get("c", np.zeros(self.dim)), self.dim)
            self.single_valued = True
            self.known_zero = self.center.copy()

    def _resolvent(self, lam, x):
        if self.rule == "abs":
            t = lam * self.weight
            return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
        if self.rule == "box":
            return np.clip(x, self.lower, self.upper)
        return (x + lam * self.a * self.center) / (1.0 + lam * self.a)

    def _resolvent_batch(self, lams, X):
        # every rule broadcasts once the index is a column
        return self._resolvent(np.asarray(lams)[:, None], X)

    def _yosida(self, lam, x):
        if self.rule == "abs":
            return np.sign(x) * np.minimum(np.abs(x) / lam, self.weight)
        if self.rule == "box":
            return (x - np.clip(x, self.lower, self.upper)) / lam
        return self.a * (x - self.center) / (1.0 + lam * self.a)

    def _yosida_batch(self, lams, X):
        return self._yosida(np.asarray(lams)[:, None], X)

    def apply(self, x):
        if self.rule != "quadratic":
            return super().apply(x)
        return self.a * (as_point(x, self.dim) - self.center)


class YosidaView(MonotoneOperator):
    """The Yosida regularization ``A_lam`` of ``base``, itself an operator.

    Its resolvent comes from the resolvent identity
    ``J_{mu A_lam} = lam/(lam+mu) I + mu/(lam+mu) J_{(lam+mu) A}``,
    so one base resolvent call suffices.
    """

    kind = "yosida"
    single_valued = True

    def __init__(self, base: MonotoneOperator, lam: float):
        self.base = base
        self.lam = _check_lam(lam)
        self.dim = base.dim
        self.known_zero = base.known_zero

    def _resolvent(self, mu, x):
        total = self.lam + mu
        return (self.lam / total) * x + (mu / total) * self.base._resolvent(total, x)

    def _resolvent_batch(self, mus, X):
        total = self.lam + mus
        return ((self.lam / total)[:, None] * X
                + (mus / total)[:, None] * self.base._resolvent_batch(total, X))

    def _yosida(self, mu, x):
        # (A_lam)_mu = A_{lam+mu}
        return self.base._yosida(self.lam + mu, x)

    def _yosida_batch(self, mus, X):
        return self.base._yosida_batch(self.lam + mus, X)

    def apply(self, x):
        return self.base.yosida(self.lam, x)


def resolvent(op: MonotoneOperator, lam: float, x) -> np.ndarray:
    """``J_{lam A}(x) = (I + lam A)^{-1} x``."""
    return op.resolvent(lam, x)


def yosida(op: MonotoneOperator, lam: float, x) -> np.ndarray:
    """``A_lam(x) = (x - J_{lam A}(x)) / lam``."""
    return op.yosida(lam, x)


def yosida_view_resolvent(view: YosidaView, mu: float, x) -> np.ndarray:
    return view.resolvent(mu, x)


@dataclass
class QuadraticData:
    """``f(x) = 1/2 x^T P x + p^T x`` with ``P`` symmetric positive semidefinite."""

    P: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=np.float64))
        n = self.P.shape[0]
        if self.P.shape != (n, n):
            raise OperatorError("quadratic data needs a square matrix")
        self.p = as_point(self.p, n)
        if not np.allclose(self.P, self.P.T, atol=1e-12):
            raise OperatorError("quadratic data matrix must be symmetric")
        if np.linalg.eigvalsh(self.P).min() < -MONOTONICITY_TOL:
            raise OperatorError("quadratic data is not convex")

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @classmethod
    def centered(cls, center, weight: float = 1.0) -> "QuadraticData":
        """``weight/2 * ||x - center||^2`` (constant dropped)."""
        c = np.atleast_1d(np.asarray(center, dtype=np.float64))
        return cls(weight * np.eye(c.size), -weight * c)


def _as_quadratic(data) -> QuadraticData:
    if isinstance(data, QuadraticData):
        return data
    if isinstance(data, ProxOperator):
        raise OperatorError(
            "saddle operators with prox data have no closed-form resolvent; pass quadratic data")
    raise OperatorError(f"unsupported saddle data {type(data).__name__}")


def build_saddle_operator(f, g, A, B) -> AffineOperator:
    """Operator of the Lagrangian ``f(x) + g(y) + <z, Ax - By>``.

    ``M(x, y, z) = (grad f(x) + A^T z, grad g(y) - B^T z, By - Ax)`` on
    ``X x Y x Z``. With quadratic ``f`` and ``g`` this is affine, and its
    coupling block is antisymmetric, so it is monotone whenever ``f`` and
    ``g`` are convex.
    """
    f = _as_quadratic(f)
    g = _as_quadratic(g)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    nx, ny = f.dim, g.dim
    nz = A.shape[0]
    if A.shape != (nz, nx) or B.shape != (nz, ny):
        raise OperatorError(
            f"inconsistent coupling shapes: A {A.shape}, B {B.shape} for dims x={nx}, y={ny}")
    n = nx + ny + nz
    M = np.zeros((n, n))
    ix, iy, iz = slice(0, nx), slice(nx, nx + ny), slice(nx + ny, n)
    M[ix, ix] = f.P
    M[ix, iz] = A.T
    M[iy, iy] = g.P
    M[iy, iz] = -B.T
    M[iz, ix] = -A
    M[iz, iy] = B
    q = np.concatenate([f.p, g.p, np.zeros(nz)])
    op = AffineOperator(M, q)
    op.kind = "saddle"
    op.blocks = (nx, ny, nz)
    return op


def solve_kkt(f, g, A, B) -> np.ndarray:
    """Primal-dual solution ``(x, y, z)`` of the quadratic saddle problem.

    Solves the KKT system ``P x + p + A^T z = 0``, ``Q y + q - B^T z = 0``,
    ``A x - B y = 0`` by least squares and checks the residual.
    """
    f = _as_quadratic(f)
    g = _as_quadratic(g)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    nx, ny, nz = f.dim, g.dim, A.shape[0]
    K = np.block([
        [f.P, np.zeros((nx, ny)), A.T],
        [np.zeros((ny, nx)), g.P, -B.T],
        [A, -B, np.zeros((nz, nz))],
    ])
    rhs = np.concatenate([-f.p, -g.p, np.zeros(nz)])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    if np.linalg.norm(K @ sol - rhs) > 1e-10 * (1 + np.linalg.norm(rhs)):
        raise OperatorError("KKT system has no solution")
    return sol


# --- JSON scenario schema -------------------------------------------------

def operator_from_dict(spec: dict) -> MonotoneOperator:
    """Build an operator from its JSON scenario description."""
    kind = spec.get("kind")
    if kind == "zero":
        return ZeroOperator(int(spec.get("dim", 1)))
    if kind == "rotation2d":
        return Rotation2D()
    if kind == "affine":
        return AffineOperator(spec["matrix"], spec.get("offset"), spec.get("known_zero"))
    if kind == "prox":
        params = {k: v for k, v in spec.items() if k not in ("kind", "rule", "dim")}
        return ProxOperator(spec["rule"], int(spec.get("dim", 1)), **params)
    if kind == "saddle":
        def quad(d):
            if "center" in d:
                return QuadraticData.centered(d["center"], d.get("weight", 1.0))
            return QuadraticData(d["P"], d["p"])
        f, g = quad(spec["f"]), quad(spec["g"])
        return build_saddle_operator(f, g, spec["A"], spec["B"])
    raise OperatorError(f"unknown operator kind {kind!r}")


def operator_to_dict(op: MonotoneOperator) -> dict:
    if isinstance(op, ZeroOperator):
        return {"kind": "zero", "dim": op.dim}
    if isinstance(op, Rotation2D):
        return {"kind": "rotation2d"}
    if isinstance(op, AffineOperator):
        return {"kind": "affine", "matrix": op.matrix.tolist(), "offset": op.offset.tolist()}
    if isinstance(op, ProxOperator):
        out = {"kind": "prox", "rule": op.rule, "dim": op.dim}
        out.update({k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in op.params.items()})
        return out
    raise OperatorError(f"operator {op.kind!r} has no JSON form")
