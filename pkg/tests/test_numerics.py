import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeview import numerics as nm
from edgeview.errors import (
    InvalidInputError,
    PencilDegeneracyError,
    RankDeficiencyError,
    SymmetryError,
)


def random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return A + A.T


def test_sym_eig_identity():
    pairs = nm.sym_eig(np.eye(3), 3)
    assert np.allclose(pairs.values, 1.0)
    assert np.allclose(pairs.vectors.T @ pairs.vectors, np.eye(3), atol=1e-12)


def test_sym_eig_diagonal():
    pairs = nm.sym_eig(np.diag([5.0, 2.0, -1.0]), 2)
    assert np.allclose(pairs.values, [5.0, 2.0])
    assert np.allclose(np.abs(pairs.vectors), np.eye(3)[:, :2])


def test_sym_eig_against_independent_solver():
    rng = np.random.default_rng(3)
    S = random_sym(rng, 10)
    pairs = nm.sym_eig(S, 10)
    # oracle: roots of the characteristic polynomial
    oracle = np.sort(np.roots(np.poly(S)).real)[::-1]
    assert np.allclose(pairs.values, oracle, atol=1e-8)
    assert abs(pairs.values.sum() - np.trace(S)) < 1e-8 * np.linalg.norm(S)
    assert abs(np.sum(pairs.values ** 2) - np.sum(S * S)) < 1e-8 * np.sum(S * S)
    for lam, v in zip(pairs.values, pairs.vectors.T):
        assert np.linalg.norm(S @ v - lam * v) <= 1e-8 * np.linalg.norm(S)


def test_sym_eig_rejects_bad_input():
    with pytest.raises(SymmetryError):
        nm.sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)
    with pytest.raises(InvalidInputError):
        nm.sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]), 1)
    with pytest.raises(InvalidInputError):
        nm.sym_eig(np.eye(2), 3)


def test_sign_convention():
    pairs = nm.sym_eig(np.diag([3.0, 1.0]), 2)
    idx = np.argmax(np.abs(pairs.vectors), axis=0)
    assert np.all(pairs.vectors[idx, [0, 1]] > 0)


def test_projector_unit_row():
    P = nm.row_space_projector(np.array([[1.0, 0.0, 0.0]]), ridge=0.0)
    assert np.allclose(P, np.diag([1.0, 0.0, 0.0]))


def test_projector_orthonormal_rows():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    Y = Q.T
    P = nm.row_space_projector(Y, ridge=0.0)
    assert np.allclose(P, Y.T @ Y, atol=1e-12)
    assert np.allclose(P @ P, P, atol=1e-12)


def test_projector_random_full_rank():
    rng = np.random.default_rng(1)
    P = nm.row_space_projector(rng.standard_normal((4, 20)), ridge=0.0)
    assert abs(np.trace(P) - 4) < 1e-9
    assert np.linalg.norm(P @ P - P) <= 1e-9


def test_projector_rank_deficiency_names_view():
    Y = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    with pytest.raises(RankDeficiencyError) as err:
        nm.row_space_projector(Y, ridge=0.0, view=2)
    assert err.value.view == 2
    assert "view 2" in str(err.value)


def test_projector_ridge_matches_formula():
    rng = np.random.default_rng(2)
    Y = rng.standard_normal((3, 8))
    P = nm.row_space_projector(Y, ridge=0.5)
    direct = Y.T @ np.linalg.solve(Y @ Y.T + 0.5 * np.eye(3), Y)
    assert np.allclose(P, direct, atol=1e-12)
    Ps = nm.row_space_projector(Y, ridge="scaled")
    r = nm.default_ridge(Y)
    assert np.allclose(Ps, Y.T @ np.linalg.solve(Y @ Y.T + r * np.eye(3), Y), atol=1e-10)


def test_default_projector_handles_rank_deficiency():
    Y = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    P = nm.row_space_projector(Y)
    v = np.array([1.0, 2.0, 3.0]) / np.sqrt(14)
    assert np.allclose(P, np.outer(v, v), atol=1e-12)


def test_projector_rejects_tall():
    with pytest.raises(InvalidInputError):
        nm.row_space_projector(np.ones((4, 2)))


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 6), extra=st.integers(0, 10), seed=st.integers(0, 2**31))
def test_projector_law(m, extra, seed):
    rng = np.random.default_rng(seed)
    n = m + extra
    P = nm.row_space_projector(rng.standard_normal((m, n)), ridge=0.0)
    assert np.linalg.norm(P @ P - P) <= 1e-9 * n
    w = np.linalg.eigvalsh(P)
    assert w.min() >= -1e-9 and w.max() <= 1 + 1e-9


def test_gen_sym_eig_identity_b():
    rng = np.random.default_rng(4)
    A = random_sym(rng, 5)
    g = nm.gen_sym_eig(A, np.eye(5))
    assert np.allclose(g.values, nm.sym_eig(A).values)


def test_gen_sym_eig_scaled():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((4, 4))
    B = B @ B.T + 4 * np.eye(4)
    g = nm.gen_sym_eig(2 * B, B)
    assert np.allclose(g.values, 2.0)


def test_gen_sym_eig_against_explicit_reduction():
    rng = np.random.default_rng(6)
    B = rng.standard_normal((6, 6))
    B = B @ B.T + np.eye(6)
    A = random_sym(rng, 6)
    g = nm.gen_sym_eig(A, B)
    oracle = np.sort(np.linalg.eigvals(np.linalg.solve(B, A)).real)[::-1]
    assert np.allclose(g.values, oracle, atol=1e-8)
    assert np.allclose(g.vectors.T @ B @ g.vectors, np.eye(6), atol=1e-8)
    assert np.allclose(A @ g.vectors, B @ g.vectors * g.values, atol=1e-8)
    assert g.condition == pytest.approx(np.linalg.cond(B), rel=1e-6)


def test_gen_sym_eig_indefinite_b():
    B = np.diag([1.0, -2.0, 3.0])
    A = np.diag([2.0, 4.0, 3.0])
    g = nm.gen_sym_eig(A, B)
    assert np.allclose(sorted(g.values), [-2.0, 1.0, 2.0])
    assert np.allclose(np.abs(np.diag(g.vectors.T @ B @ g.vectors)), 1.0)


def test_gen_sym_eig_singular_b():
    with pytest.raises(PencilDegeneracyError):
        nm.gen_sym_eig(np.eye(2), np.diag([1.0, 0.0]))


def test_principal_angles_examples():
    e1, e2 = np.eye(3)[:, [0]], np.eye(3)[:, [1]]
    assert np.allclose(nm.principal_angles(e1, e1), 0.0)
    assert np.allclose(nm.principal_angles(e1, e2), np.pi / 2)
    d = (e1 + e2) / np.sqrt(2)
    assert np.allclose(nm.principal_angles(e1, d), np.pi / 4)


def test_principal_angles_unnormalized_input():
    U = np.array([[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    assert np.allclose(nm.principal_angles(U, np.eye(3)[:, :2]), 0.0, atol=1e-12)


def test_principal_angles_errors():
    with pytest.raises(InvalidInputError):
        nm.principal_angles(np.zeros((3, 0)), np.eye(3))
    with pytest.raises(InvalidInputError):
        nm.principal_angles(np.eye(3), np.eye(4))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(1, 3))
def test_principal_angles_symmetry_and_rotation(seed, k):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((8, k))
    V = rng.standard_normal((8, k + 1))
    a = nm.principal_angles(U, V)
    b = nm.principal_angles(V, U)
    assert np.allclose(a, b, atol=1e-10)
    R, _ = np.linalg.qr(rng.standard_normal((k, k)))
    assert np.allclose(nm.principal_angles(U @ R, V), a, atol=1e-10)
    assert np.all(np.diff(a) >= -1e-15)
