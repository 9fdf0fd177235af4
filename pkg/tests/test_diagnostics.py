import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar

from ripa import (AffineOperator, ContinuousConfig, DiscreteConfig, QuadraticTime, Rotation2D, Trajectory,
                  ZeroOperator, run, simulate_second_order)
from ripa import diagnostics as D
from ripa.audit import catalog


def line_traj(z, u, t):
    t = np.asarray(t, float)
    x = z + t[:, None] * u
    v = np.broadcast_to(u, x.shape).copy()
    return Trajectory(t, x, v, np.ones_like(t), np.zeros_like(t))


def test_anchor_constant_at_zero():
    z = np.array([1.0, 2.0])
    traj = Trajectory(np.arange(1.0, 6.0), np.tile(z, (5, 1)), np.zeros((5, 2)), np.ones(5), np.zeros(5))
    a = D.anchor_series(traj, z)
    assert np.all(a.h == 0) and np.all(a.dh == 0)


def test_anchor_straight_line():
    z, u = np.array([1.0, -1.0]), np.array([0.6, 0.8])
    t = np.linspace(1, 5, 9)
    a = D.anchor_series(line_traj(z, u, t), z)
    assert_allclose(a.h, t ** 2 / 2)
    assert_allclose(a.dh, t)


def test_anchor_discrete_backward_difference():
    x = np.array([[0.0], [1.0], [3.0]])
    traj = Trajectory(np.array([1.0, 2.0, 3.0]), x, np.array([[0.0], [1.0], [2.0]]), np.ones(3), np.zeros(3),
                      discrete=True)
    a = D.anchor_series(traj, [0.0])
    assert_allclose(a.h, [0, 0.5, 4.5])
    assert_allclose(a.dh, [0, 0.5, 4.0])


def test_anchor_on_e5(e5):
    a = D.anchor_series(e5, [0.0, 0.0])
    assert a.h[-1] == pytest.approx(0.5 * 0.000323 ** 2, rel=0.21)
    assert len(a.h) == len(e5)


def test_continuous_lyapunov_zero_operator():
    cfg = ContinuousConfig(10.0, QuadraticTime(10, 1.25), [1.0, 1.0], v0=[0.3, -0.2])
    traj = simulate_second_order(ZeroOperator(2), cfg)
    L = D.lyapunov_report(traj, [0.0, 0.0], cfg)
    assert L.violation_count(1e-6 * abs(L.initial)) == 0


def test_continuous_lyapunov_e5(e5, e5_config):
    L = D.lyapunov_report(e5, [0.0, 0.0], e5_config)
    assert len(L.series) == len(e5)
    assert L.violation_count(1e-6 * L.initial) == 0
    assert L.raw_violation_count == L.violation_count(0.0)


def test_discrete_lyapunov_benchmark(ripa_rotation):
    cfg, traj, rep = ripa_rotation
    L = rep.lyapunov
    assert L.t[L.start] == cfg.alpha
    assert L.violation_count(1e-9 * abs(L.initial)) == 0


def test_discrete_lyapunov_needs_zero():
    traj, _ = run(Rotation2D(), DiscreteConfig([1.0, 1.0], max_iters=10))
    with pytest.raises(ValueError):
        D.lyapunov_report(traj, None, DiscreteConfig([1.0, 1.0]))


def test_violation_accounting_is_raw():
    L = D.LyapunovReport(np.arange(5.0), np.array([5.0, 4.0, 4.5, 3.0, 3.0 + 1e-9]), 0)
    assert L.raw_violation_count == 2
    assert L.violation_count(1e-6) == 1
    assert L.max_violation() == pytest.approx(0.5)


def test_growth_bound_formula():
    traj = Trajectory(np.array([1.0, 2.0]), np.array([[1.0, 0.0], [0.5, 0.0]]), np.zeros((2, 2)),
                      np.array([2.0, 4.0]), np.array([0.1, 0.3]))
    cert = D.growth_certificate(traj, D.SolutionSet.point([0.0, 0.0], 1.0))
    lam0 = 2.0
    assert cert.bound[1] == pytest.approx(2 * (1 + lam0) / lam0 * 4 * 4.5 * 0.3 ** 2)
    assert_allclose(cert.dist, [1.0, 0.5])


def test_growth_needs_modulus():
    traj = line_traj(np.zeros(2), np.ones(2), [1.0, 2.0])
    with pytest.raises(ValueError):
        D.growth_certificate(traj, D.SolutionSet.point([0.0, 0.0]))


def test_growth_constant_in_set():
    S = D.SolutionSet.affine([0.0, 0.0], [[0.0, 1.0]], 1.0)
    traj = Trajectory(np.arange(1.0, 4.0), np.array([[0.0, 5.0]] * 3), np.zeros((3, 2)), np.ones(3), np.zeros(3))
    assert np.all(D.growth_certificate(traj, S).dist == 0)


@pytest.mark.parametrize("matrix,S", [
    (np.eye(2), D.SolutionSet.point([0.0, 0.0], 1.0)),
    (np.diag([1.0, 0.0]), D.SolutionSet.affine([0.0, 0.0], [[0.0, 1.0]], 1.0)),
])
def test_growth_certificate_dominates(matrix, S):
    op = AffineOperator(matrix)
    cfg = ContinuousConfig(10.0, QuadraticTime(10, 1.25), [10.0, 10.0], t_end=1000.0)
    traj = simulate_second_order(op, cfg)
    cert = D.growth_certificate(traj, S)
    assert cert.violation_count() == 0
    assert cert.dist[-1] <= 1e-6
    dtraj, _ = run(op, DiscreteConfig([10.0, 10.0], max_iters=100_000))
    dcert = D.growth_certificate(dtraj, S, op)
    assert dcert.violation_count() == 0 and dcert.dist[-1] <= 1e-6


def test_diag_distance_at_t100_follows_power_law():
    # for large t the first coordinate solves t^2 x'' + 10 t x' + 44 x ~ 0, decaying like t^-4.5,
    # so at t = 100 the distance is a few 1e-6
    op = AffineOperator(np.diag([1.0, 0.0]))
    traj = simulate_second_order(op, ContinuousConfig(10.0, QuadraticTime(10, 1.25), [10.0, 10.0]))
    d = abs(traj.final[0])
    assert 1e-6 < d < 1e-5


def test_affine_distance_matches_brute_force(rng):
    S = D.SolutionSet.affine([1.0, -2.0], [[3.0, 4.0]])
    assert_allclose(np.linalg.norm(S.basis), 1.0)
    for x in rng.normal(scale=5, size=(20, 2)):
        grid = np.linspace(-50, 50, 100_001)
        pts = S.offset + grid[:, None] * np.array([0.6, 0.8])
        k = int(np.argmin(np.linalg.norm(pts - x, axis=1)))
        fine = minimize_scalar(lambda s: np.linalg.norm(S.offset + s * np.array([0.6, 0.8]) - x),
                               bounds=(grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]),
                               method="bounded", options={"xatol": 1e-12})
        assert S.distance(x)[0] == pytest.approx(fine.fun, abs=1e-8)


def test_variation_examples():
    R = Rotation2D()
    x, y, z = np.array([1.0, 0.0]), np.zeros(2), np.zeros(2)
    lhs = np.linalg.norm(1.0 * R.yosida(1.0, x) - 2.0 * R.yosida(2.0, y))
    assert lhs == pytest.approx(np.sqrt(2) / 2)
    assert lhs - (2 * 1.0 + 2 * 1.0 * 1.0) < 0
    same = np.linalg.norm(3.0 * R.yosida(3.0, x) - 3.0 * R.yosida(3.0, x))
    assert same == 0.0


@pytest.mark.slow
def test_variation_audit_million_samples():
    rng = np.random.default_rng(2024)
    for name, op in catalog().items():
        assert D.variation_bound_audit(op, None, 1_000_000, rng, scale=1.0) <= 1e-10, name


def test_report_shapes_and_monotone_sums(e5, e5_config, ripa_rotation):
    rep = D.continuous_report(e5, e5_config, np.zeros(2))
    assert len(rep.rate) == len(rep.partial_speed) == len(rep.partial_residual) == len(e5)
    assert np.all(np.diff(rep.partial_speed) >= 0) and np.all(np.diff(rep.partial_residual) >= 0)
    _, traj, drep = ripa_rotation
    assert len(drep.rate) == len(traj)
    doc = drep.to_json()
    assert doc["lyapunov_violations"] == 0 and doc["compliant"] is True
