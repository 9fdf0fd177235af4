import numpy as np
import pytest
from numpy.testing import assert_allclose

from ripa import (AffineOperator, DiscreteConfig, IterationState, PowerDecay, Rotation2D, ZeroOperator,
                  classical_step, ripa_step, run)
from ripa import diagnostics as D
from ripa.solver import FormMismatch


def state(k, x, x_prev):
    return IterationState(k, np.asarray(x, float), np.asarray(x_prev, float))


def test_schedules():
    cfg = DiscreteConfig([0.0], alpha=10, s=1, epsilon=1.25)
    assert cfg.lam(10) == pytest.approx(2.25)
    pert = DiscreteConfig([0.0], alpha=10, s=2, epsilon=1.0, schedule="perturbed")
    assert pert.lam(5) == pytest.approx((1 + 1 + 1) * (4 / 100) * 25)
    assert pert.beta == pytest.approx(0.3)
    assert DiscreteConfig([0.0], schedule="constant", lam_bar=3.0).lam(99) == 3.0


def test_compliance_flags():
    assert DiscreteConfig([0.0], alpha=10, epsilon=1.25).compliant
    assert not DiscreteConfig([0.0], alpha=10, epsilon=0.2).compliant
    assert not DiscreteConfig([0.0], alpha=2, epsilon=5.0).compliant
    ok = DiscreteConfig([0.0], alpha=10, s=1, epsilon=0.4, schedule="perturbed",
                        perturbation=PowerDecay(1.0, 3.0))
    assert ok.compliant                                   # 0.4 > 3/8
    assert not DiscreteConfig([0.0], alpha=10, s=1, epsilon=0.3, schedule="perturbed",
                              perturbation=PowerDecay(1.0, 3.0)).compliant
    assert not DiscreteConfig([0.0], alpha=10, s=1, epsilon=1.0, schedule="perturbed",
                              perturbation=PowerDecay(1.0, 2.0)).compliant
    assert not DiscreteConfig([0.0], schedule="constant").compliant


def test_config_validation():
    with pytest.raises(ValueError):
        DiscreteConfig([0.0], schedule="nesterov")
    with pytest.raises(ValueError):
        DiscreteConfig([0.0], s=0.0)
    with pytest.raises(ValueError):
        DiscreteConfig([0.0], epsilon=0.0)


def test_zero_operator_step_is_extrapolation():
    cfg = DiscreteConfig([0.0, 0.0], alpha=3.0)
    nxt = ripa_step(ZeroOperator(2), state(6, [1.0, 2.0], [0.0, 1.0]), cfg)
    assert_allclose(nxt.x, [1.5, 2.5])
    assert_allclose(nxt.y, nxt.x)
    assert nxt.k == 7


def test_rotation_step_hand_values():
    cfg = DiscreteConfig([0.0, 0.0], alpha=4.0, s=1.0, epsilon=2.0, debug=True)
    assert cfg.compliant and cfg.lam(4) == pytest.approx(3.0)
    R = Rotation2D()
    J4 = np.array([[1.0, 4.0], [-4.0, 1.0]]) / 17
    assert_allclose(R.resolvent(4.0, [1, 0]), J4 @ [1, 0], atol=1e-15)
    assert_allclose(R.resolvent(4.0, [0, 1]), J4 @ [0, 1], atol=1e-15)
    # alpha_4 = 0 so y_4 = x_4 whatever x_3 is
    nxt = ripa_step(R, state(4, [1.0, 0.0], [5.0, -3.0]), cfg)
    assert_allclose(nxt.y, [1.0, 0.0])
    A4 = np.array([[4.0, -1.0], [1.0, 4.0]]) / 17
    assert_allclose(nxt.x, np.array([1.0, 0.0]) - A4 @ [1.0, 0.0], atol=1e-15)
    assert_allclose(nxt.x, [13 / 17, -1 / 17], atol=1e-15)


def test_perturbed_zero_operator_adds_source():
    cfg = DiscreteConfig([0.0, 0.0], alpha=10, s=1.0, schedule="perturbed", perturbation=PowerDecay(1.0, 3.0))
    st = state(2, [1.0, 1.0], [1.0, 1.0])
    nxt = ripa_step(ZeroOperator(2), st, cfg)
    assert_allclose(nxt.x, nxt.y + [0.125, 0.0])


def test_negative_extrapolation_used_verbatim():
    cfg = DiscreteConfig([0.0], alpha=10)
    nxt = ripa_step(ZeroOperator(1), state(1, [2.0], [1.0]), cfg)
    assert_allclose(nxt.y, [2.0 - 9.0])


def test_classical_step():
    cfg = DiscreteConfig([0.0, 0.0], schedule="classical", alpha=3.0)
    st = state(3, [1.0, 0.0], [1.0, 0.0])
    assert_allclose(classical_step(ZeroOperator(2), st, cfg).x, [1.0, 0.0])
    assert_allclose(classical_step(AffineOperator(np.eye(2)), st, cfg).x, [0.5, 0.0])
    assert_allclose(classical_step(Rotation2D(), st, cfg).x, [0.5, -0.5])


def test_debug_form_check_runs_and_catches_mismatch():
    cfg = DiscreteConfig([10.0, 10.0], max_iters=300, debug=True)
    run(Rotation2D(), cfg)

    class Broken(Rotation2D):
        def _yosida(self, lam, x):
            return super()._yosida(lam, x) * (1 + 1e-6)

    with pytest.raises(FormMismatch):
        run(Broken(), cfg)


def test_zero_operator_constant_sequence():
    traj, rep = run(ZeroOperator(2), DiscreteConfig([1.0, -2.0], max_iters=50))
    assert np.all(traj.x == [1.0, -2.0])
    assert rep.stats["sup_rate"] == 0.0 and rep.stats["partial_speed_total"] == 0.0


def test_identity_strong_convergence():
    traj, _ = run(AffineOperator(np.eye(2)), DiscreteConfig([10.0, 10.0], max_iters=100_000))
    norms = traj.norms()
    above = np.flatnonzero(norms > 1e-6)
    K = int(traj.t[above[-1] + 1])      # first index after the last excursion
    assert K <= 100_000
    assert np.all(norms[above[-1] + 1:] <= 1e-6)


def test_early_exit():
    traj, _ = run(AffineOperator(np.eye(2)), DiscreteConfig([10.0, 10.0], max_iters=100_000, tol=1e-8))
    assert traj.metadata["early_exit"] and len(traj) < 100_000


def test_divergence_flag():
    # alpha_k = 1 - alpha/k is hugely negative for small k, so differences explode
    cfg = DiscreteConfig([1.0], alpha=1e6, max_iters=100, x_minus1=[0.0])
    traj, rep = run(ZeroOperator(1), cfg)
    assert traj.diverged and rep.stats["diverged"]
    assert len(traj) < 100 and np.all(np.isfinite(traj.x))


def test_sampling_layout(ripa_rotation):
    cfg, traj, _ = ripa_rotation
    assert traj.t[0] == 1 and traj.t[-1] == cfg.max_iters + 1
    assert_allclose(traj.lam[:3], [cfg.lam(1), cfg.lam(2), cfg.lam(3)])
    assert traj.discrete


def test_discrete_csv_header(tmp_path):
    traj, _ = run(Rotation2D(), DiscreteConfig([10.0, 10.0], max_iters=20))
    text = traj.to_csv(tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "k,x1,x2,dx_norm,k_dx_norm,lambda_k,yosida_norm"
    assert len(text) == 22


def test_y_convergence(ripa_rotation):
    cfg, traj, _ = ripa_rotation
    gap = cfg.s * traj.residual          # |x_{k+1} - y_k| = s |A_{lam_k+s}(y_k)|
    assert D.decade_max(traj.t, gap, 1e4, 1e5) <= 0.1 * D.decade_max(traj.t, gap, 1, 10)


def test_gap_matches_iterates():
    cfg = DiscreteConfig([10.0, 10.0], max_iters=40)
    R = Rotation2D()
    st = state(1, cfg.x0, cfg.x_minus1)
    for _ in range(30):
        nxt = ripa_step(R, st, cfg)
        assert np.linalg.norm(nxt.x - nxt.y) == pytest.approx(cfg.s * np.linalg.norm(nxt.residual), rel=1e-12)
        st = nxt


def test_partial_sums_nondecreasing(ripa_rotation):
    _, _, rep = ripa_rotation
    assert np.all(np.diff(rep.partial_speed) >= 0)
    assert np.all(np.diff(rep.partial_residual) >= 0)


def test_perturbed_properties(ripa_perturbed):
    cfg, traj, rep = ripa_perturbed
    assert cfg.compliant
    k = traj.t
    rate = k * traj.speeds()
    assert D.decade_max(k, rate, 1e4, 1e5) <= 2 * D.decade_max(k, rate, 1e2, 1e3)
    assert np.linalg.norm(traj.final) <= 1e-2 * np.linalg.norm(cfg.x0)
    assert rep.lyapunov.violation_count(1e-9 * abs(rep.lyapunov.initial)) == 0
