"""Randomized audits of the resolvent / Yosida identities over an operator catalog."""

from __future__ import annotations

import numpy as np

from .diagnostics import variation_bound_audit
from .operators import (AffineOperator, MonotoneOperator, ProxOperator, QuadraticData, Rotation2D,
                        YosidaView, ZeroOperator, build_saddle_operator)

__all__ = ["TOLERANCES", "catalog", "yosida_resolvent_direct", "audit_operator", "audit_catalog"]

TOLERANCES = {
    "resolvent_equation": 1e-10,   # relative to 1 + |x|
    "firm_nonexpansive": 1e-12,
    "cocoercive": 1e-12,
    "lipschitz": 1e-12,            # relative factor on 1/lam
    "graph": 1e-12,
    "zero_set": 1e-12,
    "variation": 1e-10,
}


def catalog() -> dict[str, MonotoneOperator]:
    """The operators every audit runs on."""
    skew = np.array([[0.0, 2.0, -1.0], [-2.0, 0.0, 0.5], [1.0, -0.5, 0.0]])
    psd = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 0.0]])
    return {
        "zero": ZeroOperator(2),
        "rotation2d": Rotation2D(),
        "affine": AffineOperator(psd + skew, [0.3, -0.2, 0.0]),
        "identity": AffineOperator(np.eye(2)),
        "diag10": AffineOperator(np.diag([1.0, 0.0])),
        "prox_abs": ProxOperator("abs", 3, weight=0.7),
        "prox_box": ProxOperator("box", 2, lower=-1.0, upper=2.0),
        "prox_quadratic": ProxOperator("quadratic", 2, a=3.0, c=[1.0, -2.0]),
        "saddle": build_saddle_operator(QuadraticData.centered([4.0]), QuadraticData.centered([2.0]),
                                        [[1.0]], [[1.0]]),
        "yosida_rotation": YosidaView(Rotation2D(), 0.5),
    }


def yosida_resolvent_direct(op: MonotoneOperator, lam: float, mu: float, x) -> np.ndarray:
    """``J_{mu A_lam}(x)`` solved from the explicit form of ``A_lam``.

    This avoids the resolvent identity on purpose, so it can check it.
    """
    x = np.asarray(x, dtype=np.float64)
    if isinstance(op, ZeroOperator):
        return x.copy()
    if isinstance(op, AffineOperator):
        # A_lam(x) = M_lam x + q_lam with M_lam = (I - R)/lam, q_lam = R q, R = (I + lam M)^-1
        n = op.dim
        R = np.linalg.inv(np.eye(n) + lam * op.matrix)
        M_lam = (np.eye(n) - R) / lam
        q_lam = R @ op.offset
        return np.linalg.solve(np.eye(n) + mu * M_lam, x - mu * q_lam)
    if isinstance(op, ProxOperator):
        if op.rule == "quadratic":
            # A_lam is a/(1 + lam a) (x - c): a quadratic with a smaller curvature
            a = op.a / (1.0 + lam * op.a)
            return (x + mu * a * op.center) / (1.0 + mu * a)
        if op.rule == "abs":
            # A_lam(u) = clip(u/lam, -w, w); solve u + mu A_lam(u) = x coordinatewise
            w = op.weight
            inner = np.abs(x) <= w * (lam + mu)
            return np.where(inner, lam * x / (lam + mu), x - mu * w * np.sign(x))
        if op.rule == "box":
            # A_lam(u) = (u - clip(u))/lam; outside the box u moves toward it by lam/(lam+mu)
            p = np.clip(x, op.lower, op.upper)
            return p + lam / (lam + mu) * (x - p)
    if isinstance(op, YosidaView):
        # (A_a)_lam = A_{a+lam}
        return yosida_resolvent_direct(op.base, op.lam + lam, mu, x)
    raise TypeError(f"no direct form for {op.kind}")


def audit_operator(op: MonotoneOperator, samples: int, rng: np.random.Generator,
                   scale: float = 1.0, index_range=(1e-3, 1e3)) -> dict:
    """Worst-case slack of each property over ``samples`` random draws.

    Every entry is reported so that ``value <= 0`` means the property held
    (tolerances from :data:`TOLERANCES` are already subtracted).
    """
    n = op.dim
    lo, hi = np.log(index_range[0]), np.log(index_range[1])
    lam = np.exp(rng.uniform(lo, hi, samples))
    mu = np.exp(rng.uniform(lo, hi, samples))
    X = rng.normal(scale=scale, size=(samples, n))
    Y = rng.normal(scale=scale, size=(samples, n))
    out = {}

    # resolvent identity against the explicit form of A_lam, on a subsample
    m = min(samples, 2000)
    worst = -np.inf
    for i in range(m):
        short = YosidaView(op, lam[i])._resolvent(mu[i], X[i])
        direct = yosida_resolvent_direct(op, lam[i], mu[i], X[i])
        err = np.linalg.norm(short - direct) - TOLERANCES["resolvent_equation"] * (1 + np.linalg.norm(X[i]))
        worst = max(worst, err)
    # (A_lam)_mu = A_{lam+mu} on the full sample
    shifted = ((lam / (lam + mu))[:, None] * X
               + (mu / (lam + mu))[:, None] * op.resolvent_batch(lam + mu, X))
    lhs = (X - shifted) / mu[:, None]
    rhs = op.yosida_batch(lam + mu, X)
    err = (np.linalg.norm(lhs - rhs, axis=1)
           - TOLERANCES["resolvent_equation"] * (1 + np.linalg.norm(X, axis=1)))
    out["resolvent_equation"] = float(max(worst, err.max()))

    JX, JY = op.resolvent_batch(lam, X), op.resolvent_batch(lam, Y)
    dJ, dX = JX - JY, X - Y
    out["firm_nonexpansive"] = float(np.max(
        np.einsum("ij,ij->i", dJ, dJ) - np.einsum("ij,ij->i", dJ, dX) - TOLERANCES["firm_nonexpansive"]))

    AX, AY = op.yosida_batch(lam, X), op.yosida_batch(lam, Y)
    dA = AX - AY
    out["cocoercive"] = float(np.max(
        lam * np.einsum("ij,ij->i", dA, dA) - np.einsum("ij,ij->i", dA, dX) - TOLERANCES["cocoercive"]))
    out["lipschitz"] = float(np.max(
        np.linalg.norm(dA, axis=1)
        - np.linalg.norm(dX, axis=1) / lam * (1 + TOLERANCES["lipschitz"])))

    if isinstance(op, AffineOperator):
        out["graph"] = float(np.max(
            np.linalg.norm(AX - (JX @ op.matrix.T + op.offset), axis=1) - TOLERANCES["graph"]))

    z = op.known_zero
    if z is not None:
        Z = np.broadcast_to(z, (samples, n))
        out["zero_set"] = float(np.max(np.linalg.norm(op.yosida_batch(lam, Z), axis=1)
                                       - TOLERANCES["zero_set"]))
        out["variation"] = variation_bound_audit(op, z, samples, rng, scale, index_range) \
            - TOLERANCES["variation"]
    return out


def audit_catalog(samples: int = 100_000, seed: int = 0) -> dict[str, dict]:
    rng = np.random.default_rng(seed)
    return {name: audit_operator(op, samples, rng) for name, op in catalog().items()}
