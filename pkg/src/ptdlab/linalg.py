"""Dense float64 linear algebra used by the analysis and model code.

Everything here works on plain ``numpy`` arrays; matrices are 2-D, vectors
1-D.  The routines are written out (rather than delegated to LAPACK) so the
singularity and definiteness thresholds are exact, documented numbers.
"""

import numpy as np

from .exceptions import DegenerateChain, ShapeMismatch, SingularMatrix

PIVOT_TOL = 1e-12
PD_TOL = 1e-10
STOCHASTIC_TOL = 1e-12


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def solve_linear(A, b):
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).

    Raises
    ------
    SingularMatrix
        If a pivot has magnitude below ``PIVOT_TOL`` after row exchange.
    """
    A = _as_square(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if b.shape[0] != n or b.ndim not in (1, 2):
        raise ShapeMismatch(f"right-hand side of shape {b.shape} does not match {A.shape}")
    vector_rhs = b.ndim == 1
    M = A.copy()
    X = b.reshape(n, -1).copy()

    for j in range(n):
        p = j + int(np.argmax(np.abs(M[j:, j])))
        if abs(M[p, j]) < PIVOT_TOL:
            raise SingularMatrix(f"pivot {M[p, j]:.3e} in column {j} below {PIVOT_TOL:g}")
        if p != j:
            M[[j, p]] = M[[p, j]]
            X[[j, p]] = X[[p, j]]
        if j + 1 < n:
            factors = M[j + 1:, j] / M[j, j]
            M[j + 1:, j:] -= np.outer(factors, M[j, j:])
            X[j + 1:] -= np.outer(factors, X[j])

    # back substitution
    for j in range(n - 1, -1, -1):
        X[j] -= M[j, j + 1:] @ X[j + 1:]
        X[j] /= M[j, j]
    return X[:, 0] if vector_rhs else X


def invert(A):
    """Inverse of ``A`` via column-wise elimination against the identity."""
    A = _as_square(A)
    return solve_linear(A, np.eye(A.shape[0]))


def cholesky(A, tol=PD_TOL):
    """Lower Cholesky factor of a symmetric matrix.

    Returns ``None`` when some pivot (the quantity under the square root)
    is not greater than ``tol``.
    """
    A = _as_square(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            return None
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_positive_definite(A) -> bool:
    """True iff ``x^T A x > 0`` for all ``x != 0``.

    Non-symmetric matrices are judged by their symmetric part, so this is
    the definiteness notion that matters for linear stochastic approximation.
    """
    A = _as_square(A)
    return cholesky(0.5 * (A + A.T)) is not None


def is_stochastic(P, tol=STOCHASTIC_TOL) -> bool:
    P = np.asarray(P, dtype=float)
    return bool(np.all(P >= -tol) and np.all(np.abs(P.sum(axis=-1) - 1.0) <= tol))


def stationary_distribution(P):
    """Stationary distribution ``d`` of an irreducible row-stochastic ``P``.

    Solves ``(P^T - I) d = 0`` with one balance equation replaced by
    ``sum(d) = 1``.  This is a direct solve, so periodic chains are fine.

    Raises
    ------
    DegenerateChain
        If the system is rank deficient beyond the one expected dimension
        (reducible chain) or the solution is not strictly positive.
    """
    P = _as_square(P, "P")
    if not is_stochastic(P):
        raise ValueError("P must be row-stochastic within 1e-12")
    n = P.shape[0]
    M = P.T - np.eye(n)
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        d = solve_linear(M, rhs)
    except SingularMatrix as exc:
        raise DegenerateChain("chain has no unique stationary distribution") from exc
    if np.max(np.abs(d @ P - d)) > 1e-10 or not np.all(d > 0):
        raise DegenerateChain("stationary vector is not strictly positive; chain is reducible")
    return d / d.sum()
