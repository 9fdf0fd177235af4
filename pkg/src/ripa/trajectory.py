"""Sampled trajectories shared by the ODE integrator and the iteration engine."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Trajectory", "config_hash", "fmt"]


def fmt(v: float) -> str:
    """17 significant digits, enough to round-trip a float64."""
    return format(float(v), ".17g")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Trajectory:
    """Ordered samples of a run.

    For continuous runs ``t`` is time and ``v`` the velocity. For discrete
    runs ``t`` holds the iteration index ``k`` and ``v`` the difference
    ``x_k - x_{k-1}``. ``lam`` is the regularization index used at the
    sample and ``residual`` the norm of the Yosida term evaluated there
    (``|A_{lam(t)}(x(t))|`` continuous, ``|A_{lam_k+s}(y_k)|`` discrete).
    """

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    residual: np.ndarray
    discrete: bool = False
    diverged: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.v = np.atleast_2d(np.asarray(self.v, dtype=np.float64))
        self.lam = np.asarray(self.lam, dtype=np.float64)
        self.residual = np.asarray(self.residual, dtype=np.float64)
        m = self.t.size
        if not (self.x.shape[0] == self.v.shape[0] == self.lam.size == self.residual.size == m):
            raise ValueError("trajectory fields have inconsistent lengths")
        if m > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory sample times must be strictly increasing")

    def __len__(self) -> int:
        return self.t.size

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=1)

    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def window(self, lo: float, hi: float) -> np.ndarray:
        """Boolean mask of samples with ``lo <= t <= hi``."""
        return (self.t >= lo) & (self.t <= hi)

    def truncate_nonfinite(self) -> "Trajectory":
        """Cut at the first sample holding a non-finite value and flag divergence."""
        bad = ~(np.all(np.isfinite(self.x), axis=1) & np.all(np.isfinite(self.v), axis=1)
                & np.isfinite(self.lam) & np.isfinite(self.residual))
        if not bad.any():
            return self
        i = int(np.argmax(bad))
        return Trajectory(self.t[:i], self.x[:i], self.v[:i], self.lam[:i], self.residual[:i],
                          self.discrete, True, dict(self.metadata))

    # --- CSV ----------------------------------------------------------------

    def header(self) -> list[str]:
        n = self.dim
        xs = [f"x{i + 1}" for i in range(n)]
        if self.discrete:
            return ["k", *xs, "dx_norm", "k_dx_norm", "lambda_k", "yosida_norm"]
        return ["t", *xs, *[f"v{i + 1}" for i in range(n)], "lambda", "yosida_norm"]

    def rows(self):
        if self.discrete:
            dx = self.speeds()
            for i in range(len(self)):
                yield [str(int(self.t[i])), *map(fmt, self.x[i]), fmt(dx[i]),
                       fmt(self.t[i] * dx[i]), fmt(self.lam[i]), fmt(self.residual[i])]
        else:
            for i in range(len(self)):
                yield [fmt(self.t[i]), *map(fmt, self.x[i]), *map(fmt, self.v[i]),
                       fmt(self.lam[i]), fmt(self.residual[i])]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows(self.rows())
        return path

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        """Reload a continuous trajectory written by :meth:`to_csv`.

        Discrete exports keep only difference norms, so they cannot be rebuilt.
        """
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "t":
                raise ValueError("only continuous trajectory CSVs can be reloaded")
            data = np.array([[float(c) for c in row] for row in reader], dtype=np.float64)
        data = data.reshape(-1, len(header))
        n = sum(1 for h in header if h.startswith("x"))
        return cls(data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n],
                   data[:, -2], data[:, -1])
