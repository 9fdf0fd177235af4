"""Scenario ingestion, the five-row rotation benchmark, parameter sweeps and spectra output.

A scenario is a JSON object with ``"schema": 1``. Fields by mode:

* every mode: ``name``, ``mode``, ``operator``, ``x0``
* continuous modes (``first_order_raw``, ``first_order_yosida``,
  ``second_order_raw``, ``second_order_yosida``): ``t0``, ``t_end``,
  ``integrator`` (``method``, ``rtol``, ``atol``, ``dt``), ``sample_stride``;
  second order adds ``alpha``, ``v0``, ``source``; the Yosida modes need
  ``schedule``
* discrete modes (``ripa``, ``ripa_pert``, ``classical``): ``alpha``, ``s``,
  ``epsilon``, ``max_iters``, ``x_minus1``, ``tol``, ``perturbation``;
  ``ripa`` also takes ``schedule`` = ``"standard"`` or ``"constant"`` with
  ``lam_bar``
* optional ``outputs``: ``{"trajectory": "...csv", "diagnostics": "...json"}``,
  relative to the output directory
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import diagnostics
from .dynamics import ContinuousConfig, IntegrationError, simulate_first_order, simulate_second_order
from .operators import OperatorError, operator_from_dict
from .schedules import (NoSource, PowerDecay, PowerLaw, QuadraticTime, schedule_from_dict,
                        source_from_dict)
from .solver import DiscreteConfig, run
from .spectral import spectra_csv
from .trajectory import Trajectory, config_hash, fmt

__all__ = [
    "SCHEMA_VERSION", "MODES", "EXIT_OK", "EXIT_INVALID", "EXIT_RUNTIME",
    "ScenarioError", "ScenarioResult", "validate_scenario", "simulate", "run_scenario",
    "TABLE1", "table1_scenarios", "table1", "sweep", "SWEEP_COLUMNS", "spectra",
]

SCHEMA_VERSION = 1
CONTINUOUS_MODES = ("first_order_raw", "first_order_yosida", "second_order_yosida", "second_order_raw")
DISCRETE_MODES = ("ripa", "ripa_pert", "classical")
MODES = CONTINUOUS_MODES + DISCRETE_MODES

EXIT_OK = 0
EXIT_BAND = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3


class ScenarioError(ValueError):
    """The scenario document is malformed or misses a mode-specific field."""


def _require(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ScenarioError(f"scenario {cfg.get('name', '?')!r} misses {', '.join(missing)}")


def validate_scenario(cfg) -> dict:
    """Structural checks only; numeric validation happens when objects are built."""
    if not isinstance(cfg, dict):
        raise ScenarioError("a scenario must be a JSON object")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema {cfg.get('schema')!r}; expected {SCHEMA_VERSION}")
    _require(cfg, "name", "mode", "operator", "x0")
    mode = cfg["mode"]
    if mode not in MODES:
        raise ScenarioError(f"unknown mode {mode!r}; choose from {MODES}")
    if not isinstance(cfg["operator"], dict):
        raise ScenarioError("operator must be an object")
    if mode in ("first_order_yosida", "second_order_yosida"):
        _require(cfg, "schedule")
    if mode.startswith("second_order") or mode in DISCRETE_MODES:
        _require(cfg, "alpha")
    if mode == "ripa_pert":
        _require(cfg, "perturbation")
    return cfg


def _schedule(cfg: dict):
    d = dict(cfg["schedule"])
    if d.get("kind") == "quadratic":
        d.setdefault("alpha", cfg.get("alpha"))
        d.setdefault("epsilon", cfg.get("epsilon"))
        if d["alpha"] is None or d["epsilon"] is None:
            raise ScenarioError("quadratic schedule needs alpha and epsilon")
    try:
        return schedule_from_dict(d)
    except KeyError as exc:
        raise ScenarioError(f"schedule misses {exc}") from None


@dataclass
class ScenarioResult:
    name: str
    mode: str
    trajectory: Trajectory
    report: diagnostics.DiagnosticsReport
    metadata: dict = field(default_factory=dict)

    @property
    def final_distance(self) -> float:
        return float(self.metadata["final_distance"])


def simulate(cfg: dict) -> ScenarioResult:
    """Build everything a scenario describes and run it (no file output)."""
    validate_scenario(cfg)
    op = operator_from_dict(cfg["operator"])
    mode = cfg["mode"]
    z = op.known_zero
    start = time.perf_counter()
    if mode in CONTINUOUS_MODES:
        integ = cfg.get("integrator", {})
        common = dict(t0=float(cfg.get("t0", 1.0)), t_end=float(cfg.get("t_end", 100.0)),
                      method=integ.get("method", "rk45"), rtol=float(integ.get("rtol", 1e-8)),
                      atol=float(integ.get("atol", 1e-10)), dt=float(integ.get("dt", 0.01)),
                      sample_stride=int(cfg.get("sample_stride", 1)))
        schedule = _schedule(cfg) if mode.endswith("yosida") else None
        if mode.startswith("first_order"):
            traj = simulate_first_order(op, schedule, cfg["x0"], **common)
            ns = SimpleNamespace(schedule=None, compliant=traj.metadata["compliant"])
            report = diagnostics.continuous_report(traj, ns, z)
        else:
            ccfg = ContinuousConfig(alpha=float(cfg["alpha"]), schedule=schedule, x0=cfg["x0"],
                                    v0=cfg.get("v0"), source=source_from_dict(cfg.get("source")),
                                    **common)
            traj = simulate_second_order(op, ccfg)
            report = diagnostics.continuous_report(traj, ccfg, z)
    else:
        kind = {"ripa_pert": "perturbed", "classical": "classical"}.get(mode, cfg.get("schedule", "standard"))
        if kind not in ("standard", "constant", "perturbed", "classical"):
            raise ScenarioError(f"ripa schedule must be 'standard' or 'constant', got {kind!r}")
        pert = source_from_dict(cfg.get("perturbation"))
        if not isinstance(pert, (NoSource, PowerDecay)):
            raise ScenarioError("discrete perturbations must be power_decay")
        dcfg = DiscreteConfig(x0=cfg["x0"], alpha=float(cfg["alpha"]), s=float(cfg.get("s", 1.0)),
                              epsilon=float(cfg.get("epsilon", 1.25)), schedule=kind,
                              lam_bar=float(cfg.get("lam_bar", 1.0)),
                              max_iters=int(cfg.get("max_iters", 1000)), perturbation=pert,
                              x_minus1=cfg.get("x_minus1"), tol=cfg.get("tol"))
        traj, report = run(op, dcfg, z)
    wall = time.perf_counter() - start
    final = traj.final if len(traj) else np.full(op.dim, math.nan)
    dist = float(np.linalg.norm(final - (z if z is not None else 0.0)))
    meta = {
        "name": cfg["name"], "mode": mode, "config_hash": config_hash(cfg),
        "compliant": bool(traj.metadata.get("compliant", False)),
        "diverged": bool(traj.diverged), "final_distance": dist,
        "final_time": float(traj.t[-1]) if len(traj) else math.nan,
        "wall_time": wall,
    }
    return ScenarioResult(cfg["name"], mode, traj, report, meta)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _traj_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(traj.header())
    w.writerows(traj.rows())
    return buf.getvalue()


def run_scenario(config, out_dir=".") -> tuple[int, ScenarioResult | None, str]:
    """Run one scenario and write its trajectory CSV and diagnostics JSON.

    ``config`` is a dict, a JSON string or a path. Returns
    ``(exit_code, result, message)``; artifacts are only written on exit 0.
    Divergence is a valid outcome (exit 0, ``diverged`` true in the JSON).
    """
    try:
        if isinstance(config, (str, Path)) and not str(config).lstrip().startswith("{"):
            text = Path(config).read_text()
        else:
            text = config if isinstance(config, str) else None
        cfg = json.loads(text) if text is not None else copy.deepcopy(config)
        validate_scenario(cfg)
    except (json.JSONDecodeError, ScenarioError, OSError) as exc:
        return EXIT_INVALID, None, f"invalid scenario: {exc}"
    try:
        result = simulate(cfg)
    except ScenarioError as exc:
        return EXIT_INVALID, None, f"invalid scenario: {exc}"
    except (OperatorError, IntegrationError) as exc:
        return EXIT_RUNTIME, None, f"{type(exc).__name__}: {exc}"
    except (ValueError, KeyError, TypeError) as exc:
        return EXIT_INVALID, None, f"invalid scenario: {exc}"

    out = Path(out_dir)
    outputs = cfg.get("outputs", {})
    traj_path = out / outputs.get("trajectory", f"{cfg['name']}.csv")
    diag_path = out / outputs.get("diagnostics", f"{cfg['name']}.json")
    doc = {"metadata": result.metadata, "diagnostics": result.report.to_json()}
    _atomic_write(traj_path, _traj_csv(result.trajectory))
    _atomic_write(diag_path, json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
    msg = (f"{cfg['name']}: final distance {result.final_distance:.6g}"
           f"{' (diverged)' if result.trajectory.diverged else ''}")
    return EXIT_OK, result, msg


# --- rotation benchmark -------------------------------------------------------

ALPHA, EPSILON, LAM_BAR = 10.0, 1.25, 10.0
X0 = [10.0, 10.0]
SQRT200 = math.sqrt(200.0)
# first-order flow of A_10 contracts at rate 10/101 over [1, 100]
E4_CLOSED_FORM = SQRT200 * math.exp(-(LAM_BAR / (1.0 + LAM_BAR ** 2)) * 99.0)


@dataclass(frozen=True)
class BenchRow:
    key: str
    equation: str
    reference: float
    kind: str          # "relative" or "floor"
    band: float

    def check(self, value: float, diverged: bool) -> bool:
        if self.kind == "floor":
            return bool(value >= self.band and diverged)
        return bool(abs(value - self.reference) <= self.band * self.reference)


TABLE1 = (
    BenchRow("E1", "x' + A x = 0", SQRT200, "relative", 1e-3),
    BenchRow("E2", "x'' + (alpha/t) x' + A x = 0", 3.186e24, "floor", 1e20),
    BenchRow("E3", "x' + A_lambda(t) x = 0", 0.0135184, "relative", 0.10),
    BenchRow("E4", "x' + A_lambda x = 0", E4_CLOSED_FORM, "relative", 0.01),
    BenchRow("E5", "x'' + (alpha/t) x' + A_lambda(t) x = 0", 0.000323, "relative", 0.10),
)


def table1_scenarios(rtol=1e-8, atol=1e-10, dt=0.01, method="rk45") -> dict[str, dict]:
    base = {"schema": SCHEMA_VERSION, "operator": {"kind": "rotation2d"}, "x0": X0,
            "t0": 1.0, "t_end": 100.0,
            "integrator": {"method": method, "rtol": rtol, "atol": atol, "dt": dt}}
    quad = {"kind": "quadratic", "alpha": ALPHA, "epsilon": EPSILON}
    modes = {
        "E1": {"mode": "first_order_raw"},
        "E2": {"mode": "second_order_raw", "alpha": ALPHA, "v0": [0.0, 0.0]},
        "E3": {"mode": "first_order_yosida", "schedule": quad},
        "E4": {"mode": "first_order_yosida", "schedule": {"kind": "constant", "lambda": LAM_BAR}},
        "E5": {"mode": "second_order_yosida", "alpha": ALPHA, "epsilon": EPSILON,
               "v0": [0.0, 0.0], "schedule": quad},
    }
    return {k: {**base, "name": k, **v} for k, v in modes.items()}


def table1(out_dir=None, rtol=1e-8, atol=1e-10, dt=0.01, method="rk45"):
    """Run E1..E5 and compare each final distance with its band.

    Returns ``(rows, ok)`` where each row is a dict. With ``out_dir`` the
    table is written as ``table1.csv`` and ``table1.txt``.
    """
    scen = table1_scenarios(rtol, atol, dt, method)
    rows = []
    for bench in TABLE1:
        res = simulate(scen[bench.key])
        d = res.final_distance
        rows.append({"key": bench.key, "equation": bench.equation, "distance": d,
                     "reference": bench.reference, "band": bench.band, "band_kind": bench.kind,
                     "diverged": res.trajectory.diverged,
                     "passed": bench.check(d, res.trajectory.diverged)})
    ok = all(r["passed"] for r in rows)
    if out_dir is not None:
        out = Path(out_dir)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "equation", "distance", "reference", "band", "band_kind", "diverged", "passed"])
        for r in rows:
            w.writerow([r["key"], r["equation"], fmt(r["distance"]), fmt(r["reference"]), fmt(r["band"]),
                        r["band_kind"], str(r["diverged"]).lower(), str(r["passed"]).lower()])
        _atomic_write(out / "table1.csv", buf.getvalue())
        _atomic_write(out / "table1.txt", format_table1(rows))
    return rows, ok


def format_table1(rows) -> str:
    lines = [f"{'key':<4} {'equation':<42} {'distance':>14} {'reference':>14}  result"]
    for r in rows:
        lines.append(f"{r['key']:<4} {r['equation']:<42} {r['distance']:>14.7g} {r['reference']:>14.7g}  "
                     f"{'ok' if r['passed'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


# --- sweeps -------------------------------------------------------------------

SWEEP_KEYS = ("alpha", "epsilon", "p", "q")
SWEEP_COLUMNS = ["cell", *SWEEP_KEYS, "compliant", "diverged", "final_distance", "sup_rate", "status", "error"]


def _cell_config(base: dict, cell: dict) -> dict:
    cfg = copy.deepcopy(base)
    for key in ("alpha", "epsilon"):
        if key in cell:
            cfg[key] = cell[key]
            if isinstance(cfg.get("schedule"), dict) and cfg["schedule"].get("kind") == "quadratic":
                cfg["schedule"][key] = cell[key]
    if "p" in cell:
        if cfg["mode"] not in ("first_order_yosida", "second_order_yosida"):
            raise ScenarioError("p cells need a continuous Yosida mode")
        alpha, eps = float(cfg["alpha"]), float(cfg.get("epsilon", EPSILON))
        prev = cfg.get("schedule") or {}
        if prev.get("kind") == "power" and "c" in prev:
            c = float(prev["c"])
        else:
            # same leading constant as the quadratic schedule, so p = 2 reproduces it
            c = (1.0 + eps) / alpha ** 2
        cfg["schedule"] = {"kind": "power", "c": c, "p": cell["p"]}
    if "q" in cell:
        slot = "perturbation" if cfg["mode"] in DISCRETE_MODES else "source"
        prev = cfg.get(slot) or {}
        src = {"kind": "power_decay", "c": prev.get("c", 1.0), "q": cell["q"]}
        if "direction" in prev:
            src["direction"] = prev["direction"]
        cfg[slot] = src
    return cfg


def _run_cell(index: int, base: dict, cell: dict) -> list[str]:
    # shortest round-trip form, so 0.1 stays "0.1"
    values = [repr(float(cell[k])).removesuffix(".0") if k in cell else "" for k in SWEEP_KEYS]
    try:
        res = simulate(_cell_config(base, cell))
        stats = res.report.stats
        return [str(index), *values, str(res.metadata["compliant"]).lower(),
                str(res.metadata["diverged"]).lower(), fmt(res.final_distance),
                fmt(stats.get("sup_rate", math.nan)), "ok", ""]
    except Exception as exc:  # noqa: BLE001 - a failing cell is data, not a crash
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        return [str(index), *values, "", "", "", "", "error", msg]


def sweep_cells(grid: dict) -> list[dict]:
    unknown = set(grid) - set(SWEEP_KEYS)
    if unknown:
        raise ScenarioError(f"unknown sweep keys {sorted(unknown)}")
    keys = [k for k in SWEEP_KEYS if k in grid]
    if not keys:
        return []
    return [dict(zip(keys, combo)) for combo in itertools.product(*(list(grid[k]) for k in keys))]


def sweep(base: dict, grid: dict, out_path=None, workers: int = 1) -> str:
    """One CSV row per grid cell, in grid order (alpha, epsilon, p, q; last key fastest).

    Cells fail independently: the error lands in the ``status``/``error``
    columns. Returns the CSV text and writes it to ``out_path`` if given.
    """
    validate_scenario(base)
    cells = sweep_cells(grid)
    if len(cells) > 10_000:
        raise ScenarioError(f"grid has {len(cells)} cells; the limit is 10000")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda ic: _run_cell(ic[0], base, ic[1]), enumerate(cells)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    w.writerows(rows)
    text = buf.getvalue()
    if out_path is not None:
        _atomic_write(Path(out_path), text)
    return text


# --- spectra ------------------------------------------------------------------

def spectra(out_path, alpha=ALPHA, epsilon=EPSILON, p=None, c=None, t0=1.0, t_end=100.0, points=200):
    """Eigenvalues of the rotation system on a log-spaced grid.

    The schedule is quadratic in time unless ``p`` is given, in which case
    ``lam(t) = c t^p`` with ``c`` defaulting to ``(1+eps)/alpha^2``.
    """
    if p is None:
        schedule = QuadraticTime(alpha, epsilon)
    else:
        schedule = PowerLaw((1.0 + epsilon) / alpha ** 2 if c is None else c, p)
    times = np.geomspace(t0, t_end, points)
    return spectra_csv(out_path, times, alpha, schedule)


def rotation_benchmark_config(**overrides) -> dict:
    """The discrete rotation benchmark as a scenario dict."""
    cfg = {"schema": SCHEMA_VERSION, "name": "ripa_rotation", "mode": "ripa",
           "operator": {"kind": "rotation2d"}, "x0": X0, "alpha": ALPHA, "s": 1.0,
           "epsilon": EPSILON, "max_iters": 100_000}
    cfg.update(overrides)
    return cfg

