# tests/test_linsolve.py
"""
Tests for the dense linear-algebra kernels

Tests:
1. sym_eig - ordering, orthogonality, reconstruction, symmetry check
2. solve_spd / ridge_lstsq - hand cases and residual oracle
3. solve_sylvester_spd - hand cases, residual and Kronecker oracles
4. solve_sylvester_lowrank - agreement with the full eigen route

Run with: python tests/test_linsolve.py
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from utils import linsolve
from utils.errors import (
    DimensionMismatch,
    NonFiniteValue,
    NonSymmetric,
    NotPositiveDefinite,
    SingularPencil,
)


# ============================================================================
# TEST DATA
# ============================================================================

def random_spd(rng, n, shift=1.0):
    g = rng.normal(size=(n, n))
    return g @ g.T + shift * np.eye(n)


def random_psd(rng, n, rank):
    g = rng.normal(size=(n, rank))
    return g @ g.T


def kronecker_sylvester(a, b, c):
    """vec(W) = (I kron a + b^T kron I)^{-1} vec(c), column-major vec"""
    m, q = c.shape
    big = np.kron(np.eye(q), a) + np.kron(b.T, np.eye(m))
    return np.linalg.solve(big, c.ravel(order="F")).reshape((m, q), order="F")


# ============================================================================
# TESTS
# ============================================================================

def test_sym_eig_identity():
    eig = linsolve.sym_eig(np.eye(3))
    assert np.allclose(eig.eigenvalues, [1.0, 1.0, 1.0])
    q = eig.eigenvectors
    assert np.linalg.norm(q.T @ q - np.eye(3)) <= 1e-10


def test_sym_eig_diagonal_descending():
    eig = linsolve.sym_eig(np.diag([2.0, 5.0]))
    assert np.allclose(eig.eigenvalues, [5.0, 2.0])
    # eigenvectors are the axes, up to sign
    assert np.allclose(np.abs(eig.eigenvectors), [[0.0, 1.0], [1.0, 0.0]])


def test_sym_eig_two_by_two():
    eig = linsolve.sym_eig([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(eig.eigenvalues, [3.0, 1.0], atol=1e-14)


def test_sym_eig_reconstruction_and_orthogonality():
    rng = np.random.default_rng(0)
    m = random_spd(rng, 12)
    eig = linsolve.sym_eig(m)
    assert np.linalg.norm(eig.reconstruct() - m) / np.linalg.norm(m) <= 1e-10
    q = eig.eigenvectors
    assert np.linalg.norm(q.T @ q - np.eye(12)) <= 1e-10
    assert np.all(np.diff(eig.eigenvalues) <= 0)
    assert eig.is_positive_definite()


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(NonSymmetric):
        linsolve.sym_eig([[1.0, 2.0], [0.0, 1.0]])


def test_sym_eig_accepts_rounding_asymmetry():
    m = np.array([[2.0, 1.0], [1.0 + 1e-14, 2.0]])
    eig = linsolve.sym_eig(m)
    assert np.allclose(eig.eigenvalues, [3.0, 1.0])


def test_non_finite_input_rejected():
    with pytest.raises(NonFiniteValue):
        linsolve.sym_eig([[1.0, np.nan], [np.nan, 1.0]])


def test_require_positive_definite():
    eig = linsolve.sym_eig(np.diag([1.0, 0.0]))
    assert not eig.is_positive_definite()
    with pytest.raises(NotPositiveDefinite):
        eig.require_positive_definite()


def test_solve_spd_identity():
    r = np.arange(6.0).reshape(3, 2)
    assert np.allclose(linsolve.solve_spd(np.eye(3), r), r)


def test_solve_spd_diagonal_vector():
    w = linsolve.solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
    assert w.shape == (2,)
    assert np.allclose(w, [1.0, 1.0])


def test_solve_spd_random_residual():
    rng = np.random.default_rng(1)
    m = random_spd(rng, 20)
    rhs = rng.normal(size=(20, 3))
    w = linsolve.solve_spd(m, rhs)
    assert np.linalg.norm(m @ w - rhs) / np.linalg.norm(rhs) <= 1e-8


def test_solve_spd_deterministic():
    rng = np.random.default_rng(2)
    m = random_spd(rng, 15)
    rhs = rng.normal(size=(15, 4))
    assert np.array_equal(linsolve.solve_spd(m, rhs), linsolve.solve_spd(m, rhs))


def test_solve_spd_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        linsolve.solve_spd(np.diag([1.0, 0.0]), np.ones(2))
    with pytest.raises(NotPositiveDefinite):
        linsolve.solve_spd(np.diag([1.0, -1.0]), np.ones(2))


def test_solve_spd_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        linsolve.solve_spd(np.eye(3), np.ones((2, 1)))


def test_ridge_lstsq_zero_data():
    r = np.array([[1.0, -2.0], [3.0, 0.5]])
    assert np.allclose(linsolve.ridge_lstsq(np.zeros((2, 5)), 1.0, r), r)


def test_ridge_lstsq_scalar():
    assert np.allclose(linsolve.ridge_lstsq([[1.0]], 1.0, [[2.0]]), [[1.0]])


def test_ridge_lstsq_random_residual():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(8, 30))
    rhs = rng.normal(size=(8, 5))
    w = linsolve.ridge_lstsq(x, 0.3, rhs)
    lhs = (x @ x.T + 0.3 * np.eye(8)) @ w
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) <= 1e-8


def test_ridge_lstsq_requires_positive_ridge():
    with pytest.raises(ValueError):
        linsolve.ridge_lstsq(np.eye(2), 0.0, np.ones(2))


def test_sylvester_identity():
    w = linsolve.solve_sylvester_spd(np.eye(2), np.eye(2), 2.0 * np.ones((2, 2)))
    assert np.allclose(w, np.ones((2, 2)))


def test_sylvester_diagonal():
    w = linsolve.solve_sylvester_spd(np.diag([1.0, 2.0]), [[3.0]], [[4.0], [5.0]])
    assert np.allclose(w, [[1.0], [1.0]])


def test_sylvester_random_residual():
    rng = np.random.default_rng(4)
    a = random_spd(rng, 10)
    b = random_psd(rng, 15, 6)
    c = rng.normal(size=(10, 15))
    w = linsolve.solve_sylvester_spd(a, b, c)
    assert linsolve.sylvester_residual(a, b, c, w) <= 1e-8


def test_sylvester_matches_kronecker():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m, q = rng.integers(1, 9, size=2)
        a = random_spd(rng, m)
        b = random_psd(rng, q, int(rng.integers(1, q + 1)))
        c = rng.normal(size=(m, q))
        w = linsolve.solve_sylvester_spd(a, b, c)
        ref = kronecker_sylvester(a, b, c)
        assert np.linalg.norm(w - ref) / max(np.linalg.norm(ref), 1e-300) <= 1e-6


def test_sylvester_singular_pencil():
    with pytest.raises(SingularPencil):
        linsolve.solve_sylvester_spd(np.eye(2), -np.eye(2), np.ones((2, 2)))


def test_sylvester_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        linsolve.solve_sylvester_spd(np.eye(2), np.eye(3), np.ones((3, 2)))


def test_lowrank_matches_eigen_route():
    rng = np.random.default_rng(6)
    for _ in range(10):
        m, q, r = 6, 40, 5
        a = random_spd(rng, m)
        f = rng.normal(size=(q, r))
        c = rng.normal(size=(m, q))
        w_low = linsolve.solve_sylvester_lowrank(a, f, c)
        w_full = linsolve.solve_sylvester_spd(a, f @ f.T, c)
        assert linsolve.sylvester_residual(a, f @ f.T, c, w_low) <= 1e-8
        assert np.linalg.norm(w_low - w_full) / np.linalg.norm(w_full) <= 1e-8


def test_lowrank_requires_positive_definite_a():
    with pytest.raises(SingularPencil):
        linsolve.solve_sylvester_lowrank(np.diag([1.0, 0.0]), np.ones((3, 1)), np.ones((2, 3)))


@pytest.mark.slow
def test_sylvester_acceptance_sweep():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = int(rng.integers(1, 51))
        q = int(rng.integers(1, 201))
        a = random_spd(rng, m, shift=float(rng.uniform(0.1, 2.0)))
        b = random_psd(rng, q, int(rng.integers(1, min(q, 30) + 1)))
        c = rng.normal(size=(m, q))
        w = linsolve.solve_sylvester_spd(a, b, c)
        assert linsolve.sylvester_residual(a, b, c, w) <= 1e-8


# ============================================================================
# MAIN
# ============================================================================

def main():
    print("\n" + "=" * 70)
    print("LINSOLVE TESTS")
    print("=" * 70)
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        fn()
        print(f"  ✅ {name}")
    print(f"\n{len(tests)} tests passed")


if __name__ == "__main__":
    main()
