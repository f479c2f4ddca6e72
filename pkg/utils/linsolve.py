# utils/linsolve.py
"""
Dense linear-algebra kernels for the bilinear solver

All matrices are numpy float64 arrays in numpy's default row-major (C)
order. Every function is pure: inputs are never modified and no state is
shared, so the kernels are safe to call from several threads at once.

Kernels:
- sym_eig: symmetric eigendecomposition (eigenvalues descending)
- solve_spd: Cholesky solve of an SPD system
- ridge_lstsq: (x x^T + ridge I)^{-1} rhs
- solve_sylvester_spd: a W + W b = c for SPD a and symmetric PSD b
- solve_sylvester_lowrank: same equation when b = f f^T with thin f
"""

from dataclasses import dataclass
from typing import Type

import numpy as np
import scipy.linalg

from utils.errors import (
    DimensionMismatch,
    NonFiniteValue,
    NonSymmetric,
    NoConvergence,
    NotPositiveDefinite,
    SingularPencil,
    ZslError,
)

# Relative tolerances
SYMMETRY_TOL = 1e-10
POSITIVE_TOL = 1e-12


@dataclass(frozen=True)
class SpdFactorization:
    """Eigendecomposition M = Q diag(eigenvalues) Q^T of a symmetric matrix"""
    dimension: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T

    def is_positive_definite(self) -> bool:
        if self.dimension == 0:
            return False
        top = max(float(self.eigenvalues[0]), 0.0)
        return top > 0.0 and float(self.eigenvalues[-1]) > POSITIVE_TOL * top

    def require_positive_definite(self, error: Type[ZslError] = NotPositiveDefinite) -> "SpdFactorization":
        """Raise `error` unless every eigenvalue exceeds POSITIVE_TOL x the largest"""
        if not self.is_positive_definite():
            smallest = float(self.eigenvalues[-1]) if self.dimension else float("nan")
            largest = float(self.eigenvalues[0]) if self.dimension else float("nan")
            raise error(
                f"matrix is not positive definite (smallest eigenvalue {smallest:.3e}, "
                f"largest {largest:.3e})"
            )
        return self


def _as_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    return arr


def _require_square(m: np.ndarray, name: str):
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")


def relative_asymmetry(m: np.ndarray) -> float:
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(m - m.T) / scale)


def symmetrize(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Check the symmetry tolerance and return (m + m^T) / 2"""
    asym = relative_asymmetry(m)
    if asym > SYMMETRY_TOL:
        raise NonSymmetric(f"{name} relative asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}")
    return 0.5 * (m + m.T)


def sym_eig(m) -> SpdFactorization:
    """
    Eigendecomposition of a symmetric matrix.

    Args:
        m: Square matrix, symmetric to within 1e-10 relative asymmetry

    Returns:
        SpdFactorization with eigenvalues in descending order

    Raises:
        NonSymmetric: asymmetry above tolerance
        NoConvergence: LAPACK eigensolver failure
    """
    m = _as_matrix(m, "m")
    _require_square(m, "m")
    sym = symmetrize(m, "m")
    try:
        values, vectors = scipy.linalg.eigh(sym, check_finite=True)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NoConvergence(f"symmetric eigensolver failed: {e}") from e
    order = np.arange(values.shape[0] - 1, -1, -1)
    return SpdFactorization(
        dimension=m.shape[0],
        eigenvalues=np.ascontiguousarray(values[order]),
        eigenvectors=np.ascontiguousarray(vectors[:, order]),
    )


def solve_spd(m, rhs) -> np.ndarray:
    """
    Solve m W = rhs for symmetric positive definite m via Cholesky.

    A pivot whose square falls below 1e-12 x the largest squared pivot is
    treated as non-positive.

    Raises:
        NotPositiveDefinite: factorization failed or a pivot is below tolerance
        DimensionMismatch: rhs rows differ from m's dimension
    """
    m = _as_matrix(m, "m")
    _require_square(m, "m")
    rhs_arr = np.asarray(rhs, dtype=np.float64)
    vector_rhs = rhs_arr.ndim == 1
    rhs_arr = _as_matrix(rhs_arr, "rhs")
    if rhs_arr.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"rhs has {rhs_arr.shape[0]} rows, matrix dimension is {m.shape[0]}"
        )

    sym = 0.5 * (m + m.T)
    try:
        factor, lower = scipy.linalg.cho_factor(sym, lower=True, check_finite=True)
    except scipy.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {e}") from e

    pivots = np.diag(factor) ** 2
    if pivots.min() <= POSITIVE_TOL * pivots.max():
        raise NotPositiveDefinite(
            f"Cholesky pivot {pivots.min():.3e} below tolerance relative to {pivots.max():.3e}"
        )

    solution = scipy.linalg.cho_solve((factor, lower), rhs_arr, check_finite=False)
    return solution.ravel() if vector_rhs else solution


def ridge_lstsq(x, ridge: float, rhs) -> np.ndarray:
    """
    Return (x x^T + ridge I)^{-1} rhs.

    Args:
        x: d x N data matrix
        ridge: Positive ridge weight
        rhs: d x k right-hand side
    """
    if not ridge > 0:
        raise ValueError(f"ridge must be positive, got {ridge}")
    x = _as_matrix(x, "x")
    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += ridge
    return solve_spd(gram, rhs)


def sylvester_residual(a, b, c, w) -> float:
    """Relative residual ||a w + w b - c||_F / max(||c||_F, 1)"""
    residual = a @ w + w @ b - c
    return float(np.linalg.norm(residual) / max(np.linalg.norm(c), 1.0))


def _pencil_denominators(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    denom = alpha[:, None] + beta[None, :]
    scale = max(float(np.abs(alpha).max()), float(np.abs(beta).max()) if beta.size else 0.0)
    threshold = POSITIVE_TOL * scale
    if denom.min() <= threshold:
        raise SingularPencil(
            f"eigenvalue sum {denom.min():.3e} <= {threshold:.3e}; "
            "a and -b share (numerically) an eigenvalue"
        )
    return denom


def solve_sylvester_spd(a, b_sym, c) -> np.ndarray:
    """
    Solve a W + W b_sym = c with a SPD (m x m) and b_sym symmetric PSD (q x q).

    Both sides are diagonalized, a = U diag(alpha) U^T and
    b_sym = V diag(beta) V^T, and
        W = U [ (U^T c V)_ij / (alpha_i + beta_j) ] V^T.

    Raises:
        SingularPencil: some alpha_i + beta_j is not safely positive
        NonSymmetric: a or b_sym asymmetric beyond tolerance
        DimensionMismatch: shapes inconsistent
    """
    a = _as_matrix(a, "a")
    b_sym = _as_matrix(b_sym, "b_sym")
    c = _as_matrix(c, "c")
    _require_square(a, "a")
    _require_square(b_sym, "b_sym")
    if c.shape != (a.shape[0], b_sym.shape[0]):
        raise DimensionMismatch(
            f"c has shape {c.shape}, expected {(a.shape[0], b_sym.shape[0])}"
        )

    left = sym_eig(a)
    right = sym_eig(b_sym)
    u, alpha = left.eigenvectors, left.eigenvalues
    v, beta = right.eigenvectors, right.eigenvalues

    denom = _pencil_denominators(alpha, beta)
    return u @ (((u.T @ c) @ v) / denom) @ v.T


def solve_sylvester_lowrank(a, f, c) -> np.ndarray:
    """
    Solve a W + W (f f^T) = c with a SPD (m x m) and a thin factor f (q x r).

    With the thin SVD f = P diag(s) Q^T the right coefficient is
    P diag(s^2) P^T, zero on the complement of range(P). Splitting W along
    range(P) and its complement gives
        W = W_r P^T + a^{-1} c (I - P P^T),
    where W_r solves the small m x r equation a W_r + W_r diag(s^2) = c P.
    Exact up to rounding; no q x q matrix is ever formed.

    Raises:
        SingularPencil: a is not safely positive definite
        DimensionMismatch: shapes inconsistent
    """
    a = _as_matrix(a, "a")
    f = _as_matrix(f, "f")
    c = _as_matrix(c, "c")
    _require_square(a, "a")
    if c.shape != (a.shape[0], f.shape[0]):
        raise DimensionMismatch(f"c has shape {c.shape}, expected {(a.shape[0], f.shape[0])}")

    left = sym_eig(a)
    u, alpha = left.eigenvectors, left.eigenvalues
    if alpha[-1] <= POSITIVE_TOL * max(float(alpha[0]), 0.0) or alpha[0] <= 0.0:
        raise SingularPencil(f"a is not positive definite (smallest eigenvalue {alpha[-1]:.3e})")

    try:
        p, s, _ = scipy.linalg.svd(f, full_matrices=False, check_finite=True)
    except scipy.linalg.LinAlgError as e:
        raise NoConvergence(f"SVD of right factor failed: {e}") from e
    beta = s ** 2

    denom = _pencil_denominators(alpha, beta)
    ut_c = u.T @ c
    ut_c_p = ut_c @ p

    w_range = u @ (ut_c_p / denom)
    # a^{-1} c restricted to the complement of range(p)
    w_null = u @ ((ut_c - ut_c_p @ p.T) / alpha[:, None])
    return w_range @ p.T + w_null
