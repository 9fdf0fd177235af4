import numpy as np
import pytest
from numpy.testing import assert_allclose

from ripa import (AffineOperator, OperatorError, ProxOperator, QuadraticData, Rotation2D, YosidaView,
                  ZeroOperator, build_saddle_operator, resolvent, solve_kkt, yosida,
                  yosida_view_resolvent)
from ripa.audit import audit_operator, catalog, yosida_resolvent_direct
from ripa.operators import operator_from_dict, operator_to_dict


def test_zero_resolvent_and_yosida():
    Z = ZeroOperator(2)
    assert_allclose(resolvent(Z, 1.0, [3, 4]), [3, 4])
    assert_allclose(yosida(Z, 7.5, [3, 4]), [0, 0])


def test_rotation_resolvent_hand_inverse():
    R = Rotation2D()
    assert_allclose(resolvent(R, 1.0, [1, 0]), [0.5, -0.5], atol=1e-15)
    assert_allclose(yosida(R, 1.0, [1, 0]), [0.5, 0.5], atol=1e-15)


def test_rotation_yosida_matrix_formula():
    R = Rotation2D()
    for lam in (0.1, 1.0, 10.0):
        M = np.array([[lam, -1.0], [1.0, lam]]) / (1 + lam ** 2)
        x = np.array([0.3, -1.7])
        assert_allclose(yosida(R, lam, x), M @ x, rtol=1e-14)


def test_prox_abs_soft_threshold():
    P = ProxOperator("abs", 1)
    assert_allclose(resolvent(P, 1.0, [2.0]), [1.0])
    assert_allclose(yosida(P, 1.0, [2.0]), [1.0])
    assert_allclose(resolvent(P, 1.0, [-0.5]), [0.0])


def test_prox_box_and_quadratic():
    B = ProxOperator("box", 2, lower=-1.0, upper=2.0)
    assert_allclose(resolvent(B, 5.0, [3.0, -4.0]), [2.0, -1.0])
    Q = ProxOperator("quadratic", 1, a=2.0, c=[1.0])
    # (x + lam a c)/(1 + lam a) at x=4, lam=1: 6/3
    assert_allclose(resolvent(Q, 1.0, [4.0]), [2.0])
    assert_allclose(Q.apply([4.0]), [6.0])


def test_view_resolvent_examples():
    assert_allclose(yosida_view_resolvent(YosidaView(ZeroOperator(2), 2.0), 3.0, [1, 1]), [1, 1])
    assert_allclose(yosida_view_resolvent(YosidaView(Rotation2D(), 1.0), 1.0, [1, 0]), [0.6, -0.2],
                    atol=1e-15)
    ident = AffineOperator(np.eye(2))
    assert_allclose(yosida_view_resolvent(YosidaView(ident, 1.0), 1.0, [4, 0]), [8 / 3, 0], atol=1e-15)


def test_view_uses_one_base_call_at_summed_index():
    calls = []

    class Spy(Rotation2D):
        def _resolvent(self, lam, x):
            calls.append(lam)
            return super()._resolvent(lam, x)

    yosida_view_resolvent(YosidaView(Spy(), 1.5), 2.0, [1, 2])
    assert calls == [3.5]


def test_view_matches_direct_yosida_resolvent():
    for name, op in catalog().items():
        if name == "saddle":
            continue
        x = np.linspace(-1, 1, op.dim) + 0.3
        for lam, mu in ((1e-3, 5.0), (2.0, 0.7), (900.0, 1e-2)):
            short = yosida_view_resolvent(YosidaView(op, lam), mu, x)
            assert_allclose(short, yosida_resolvent_direct(op, lam, mu, x), atol=1e-10 * (1 + np.linalg.norm(x)))


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
def test_nonpositive_index_rejected(bad):
    with pytest.raises(OperatorError):
        resolvent(Rotation2D(), bad, [1, 0])


def test_dimension_and_finiteness_checks():
    with pytest.raises(OperatorError):
        resolvent(Rotation2D(), 1.0, [1, 0, 0])
    with pytest.raises(OperatorError):
        resolvent(Rotation2D(), 1.0, [np.nan, 0])


def test_nonmonotone_matrix_rejected():
    with pytest.raises(OperatorError):
        AffineOperator(np.diag([1.0, -1e-6]))
    # pure skew is fine: smallest symmetric eigenvalue is exactly 0
    AffineOperator(np.array([[0.0, 3.0], [-3.0, 0.0]]))


def test_affine_known_zero_found_and_checked():
    op = AffineOperator(np.diag([2.0, 1.0]), [-2.0, 3.0])
    assert_allclose(op.known_zero, [1.0, -3.0])
    with pytest.raises(OperatorError):
        AffineOperator(np.eye(2), known_zero=[1.0, 0.0])


def test_resolvent_fixes_known_zero(rng):
    for op in catalog().values():
        z = op.known_zero
        for lam in np.exp(rng.uniform(np.log(1e-3), np.log(1e3), 20)):
            assert np.linalg.norm(op.resolvent(lam, z) - z) <= 1e-12


def test_set_valued_apply_refused():
    with pytest.raises(OperatorError):
        ProxOperator("abs", 1).apply([1.0])


def test_batch_matches_pointwise(rng):
    for op in catalog().values():
        lams = np.exp(rng.uniform(-3, 3, 7))
        X = rng.normal(size=(7, op.dim))
        J = op.resolvent_batch(lams, X)
        A = op.yosida_batch(lams, X)
        for i in range(7):
            assert_allclose(J[i], op.resolvent(lams[i], X[i]), rtol=1e-12, atol=1e-14)
            assert_allclose(A[i], op.yosida(lams[i], X[i]), rtol=1e-10, atol=1e-12)


def test_affine_resolvent_solves_linear_system(rng):
    M = np.array([[1.0, 2.0, 0.0], [-2.0, 0.5, 1.0], [0.0, -1.0, 0.0]])
    q = np.array([0.3, 0.0, -1.0])
    op = AffineOperator(M, q)
    x = rng.normal(size=3)
    u = op.resolvent(0.7, x)
    assert_allclose((np.eye(3) + 0.7 * M) @ u, x - 0.7 * q, atol=1e-13)


# --- saddle ------------------------------------------------------------------

def test_saddle_block_matrix():
    half = QuadraticData.centered([0.0])
    op = build_saddle_operator(half, half, [[1.0]], [[1.0]])
    assert_allclose(op.matrix, [[1, 0, 1], [0, 1, -1], [-1, 1, 0]])
    assert_allclose(op.offset, [0, 0, 0])
    assert_allclose(op.known_zero, [0, 0, 0])


def test_saddle_known_zero_from_kkt():
    f, g = QuadraticData.centered([4.0]), QuadraticData.centered([2.0])
    op = build_saddle_operator(f, g, [[1.0]], [[1.0]])
    z = solve_kkt(f, g, [[1.0]], [[1.0]])
    assert_allclose(z, [3.0, 3.0, 1.0], atol=1e-12)
    assert_allclose(op.known_zero, z, atol=1e-12)
    assert np.linalg.norm(op.apply(z)) <= 1e-12


def test_saddle_monotone_on_random_pairs(rng):
    f = QuadraticData(np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([1.0, -1.0]))
    g = QuadraticData.centered([1.0], 3.0)
    A = rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 1))
    op = build_saddle_operator(f, g, A, B)
    U, V = rng.normal(size=(1000, op.dim)), rng.normal(size=(1000, op.dim))
    D = U - V
    vals = np.einsum("ij,ij->i", D @ op.matrix.T, D)
    assert vals.min() >= -1e-12


def test_saddle_rejects_bad_data():
    with pytest.raises(OperatorError):
        build_saddle_operator(QuadraticData.centered([0.0]), QuadraticData.centered([0.0]),
                              [[1.0, 2.0]], [[1.0]])
    with pytest.raises(OperatorError):
        QuadraticData(np.array([[-1.0]]), np.array([0.0]))
    with pytest.raises(OperatorError):
        build_saddle_operator(ProxOperator("abs", 1), QuadraticData.centered([0.0]), [[1.0]], [[1.0]])


# --- JSON --------------------------------------------------------------------

def test_operator_dict_roundtrip():
    specs = [{"kind": "zero", "dim": 3}, {"kind": "rotation2d"},
             {"kind": "affine", "matrix": [[1.0, 0.0], [0.0, 2.0]], "offset": [0.0, 1.0]},
             {"kind": "prox", "rule": "abs", "dim": 1, "weight": 0.5}]
    for spec in specs:
        op = operator_from_dict(spec)
        again = operator_from_dict(operator_to_dict(op))
        x = np.arange(op.dim) + 0.5
        assert_allclose(again.resolvent(2.0, x), op.resolvent(2.0, x))


def test_saddle_from_dict():
    op = operator_from_dict({"kind": "saddle", "f": {"center": [4.0]}, "g": {"center": [2.0]},
                             "A": [[1.0]], "B": [[1.0]]})
    assert_allclose(op.known_zero, [3, 3, 1], atol=1e-12)
    with pytest.raises(OperatorError):
        operator_from_dict({"kind": "mystery"})


def test_audit_small_sample_passes():
    rng = np.random.default_rng(7)
    for name, op in catalog().items():
        slack = audit_operator(op, 2000, rng)
        assert max(slack.values()) <= 0, (name, slack)
