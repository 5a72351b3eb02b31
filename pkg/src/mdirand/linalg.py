"""Dense linear-algebra kernels for small Hermitian problems.

Pure functions; inputs are never mutated. Matrices are plain numpy arrays
(complex Hermitian or real symmetric), kept small by design (dim <= 32 on
the complex side, 64 after real embedding).
"""
from __future__ import annotations

import math

import numpy as np

from .config import DEFAULT_TOLS

__all__ = [
    "NotHermitianError",
    "NotPositiveDefiniteError",
    "ConvergenceError",
    "kron",
    "is_hermitian",
    "require_hermitian",
    "real_embed",
    "jacobi_eigvalsh",
    "jacobi_eigh",
    "eigh_hermitian",
    "min_eigenvalue",
    "cholesky_spd",
    "row_space_basis",
]


class NotHermitianError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two operators."""
    return np.kron(np.asarray(a), np.asarray(b))


def is_hermitian(a: np.ndarray, tol: float = DEFAULT_TOLS.hermitian) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def require_hermitian(a: np.ndarray, tol: float = DEFAULT_TOLS.hermitian) -> np.ndarray:
    a = np.asarray(a)
    if not is_hermitian(a, tol):
        raise NotHermitianError("matrix is not hermitian within tolerance")
    return a


def real_embed(h: np.ndarray) -> np.ndarray:
    """Real embedding [[A, -B], [B, A]] of h = A + iB.

    For Hermitian h the embedding is real symmetric, positive semidefinite
    iff h is, carries each eigenvalue of h twice, and satisfies
    trace(real_embed(x) @ real_embed(y)) = 2 * Re trace(x @ y).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    a = np.real(h).astype(float)
    b = np.imag(h).astype(float)
    return np.block([[a, -b], [b, a]])


def _jacobi_core(
    a: np.ndarray,
    tol: float,
    max_sweeps: int,
    want_vectors: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    m = np.array(a, dtype=float, copy=True)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(m), initial=0.0)):
        raise ValueError("matrix is not symmetric")
    m = 0.5 * (m + m.T)
    vecs = np.eye(n) if want_vectors else None
    if n == 1:
        return m[0, :1].copy(), vecs
    scale = max(1.0, float(np.linalg.norm(m)))
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(m[offdiag]))
        if off <= tol * scale:
            order = np.argsort(np.diag(m), kind="stable")
            vals = np.diag(m)[order]
            return vals, (vecs[:, order] if vecs is not None else None)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.hypot(theta, 1.0))
                else:
                    t = 1.0 / (theta - math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = m[:, p].copy()
                col_q = m[:, q].copy()
                m[:, p] = c * col_p - s * col_q
                m[:, q] = s * col_p + c * col_q
                row_p = m[p, :].copy()
                row_q = m[q, :].copy()
                m[p, :] = c * row_p - s * row_q
                m[q, :] = s * row_p + c * row_q
                m[p, q] = 0.0
                m[q, p] = 0.0
                if vecs is not None:
                    v_p = vecs[:, p].copy()
                    v_q = vecs[:, q].copy()
                    vecs[:, p] = c * v_p - s * v_q
                    vecs[:, q] = s * v_p + c * v_q
    raise ConvergenceError("jacobi sweeps did not converge")


def jacobi_eigvalsh(
    a: np.ndarray,
    tol: float = DEFAULT_TOLS.jacobi_off,
    max_sweeps: int = 100,
) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi sweeps.

    Deterministic row-cyclic pivot order; converges when the off-diagonal
    Frobenius norm drops below tol * max(1, ||a||_F). Returns eigenvalues
    sorted ascending.
    """
    vals, _ = _jacobi_core(a, tol, max_sweeps, want_vectors=False)
    return vals


def jacobi_eigh(
    a: np.ndarray,
    tol: float = DEFAULT_TOLS.jacobi_off,
    max_sweeps: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a real symmetric matrix.

    Same cyclic Jacobi iteration as jacobi_eigvalsh with the rotations
    accumulated; column k of the returned matrix belongs to eigenvalue k,
    ascending. The vectors are orthonormal by construction.
    """
    vals, vecs = _jacobi_core(a, tol, max_sweeps, want_vectors=True)
    assert vecs is not None
    return vals, vecs


def eigh_hermitian(
    h: np.ndarray,
    tol: float = DEFAULT_TOLS.jacobi_off,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a complex Hermitian matrix.

    Runs Jacobi on the real embedding, where every eigenvalue appears twice
    (an eigenvector u and its phase partner i*u embed to orthogonal real
    vectors). The duplicates are collapsed by a greedy complex
    Gram-Schmidt pass over the embedded eigenvectors in ascending order.
    """
    h = require_hermitian(h)
    if not np.iscomplexobj(h) or np.max(np.abs(np.imag(h))) == 0.0:
        vals, vecs = jacobi_eigh(np.real(h).astype(float), tol=tol)
        return vals, vecs.astype(complex)
    d = h.shape[0]
    vals2, vecs2 = jacobi_eigh(real_embed(h), tol=tol)
    kept_vals: list[float] = []
    kept_vecs: list[np.ndarray] = []
    for j in range(2 * d):
        u = vecs2[:d, j] + 1j * vecs2[d:, j]
        for w in kept_vecs:
            u = u - np.vdot(w, u) * w
        nrm = float(np.linalg.norm(u))
        if nrm > 0.5:
            kept_vals.append(float(vals2[j]))
            kept_vecs.append(u / nrm)
    if len(kept_vals) != d:
        raise ConvergenceError("embedded eigenvector pairing failed")
    return np.array(kept_vals), np.column_stack(kept_vecs)


def min_eigenvalue(h: np.ndarray, tol: float = DEFAULT_TOLS.hermitian) -> float:
    """Smallest eigenvalue of a Hermitian matrix.

    Complex input is reduced to the real symmetric embedding first (the
    embedding doubles multiplicities, leaving the minimum unchanged).
    """
    h = require_hermitian(h, tol)
    if np.iscomplexobj(h) and np.max(np.abs(np.imag(h))) > 0.0:
        m = real_embed(h)
    else:
        m = np.real(h).astype(float)
    return float(jacobi_eigvalsh(m)[0])


def cholesky_spd(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    try:
        return np.linalg.cholesky(0.5 * (m + m.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("not positive definite") from exc


def row_space_basis(
    rows: np.ndarray,
    tol: float = DEFAULT_TOLS.rank,
) -> tuple[list[int], dict[int, np.ndarray]]:
    """Select a maximal independent subset of rows, scanning in order.

    A row is kept iff its residual after projection onto the span of the
    rows kept so far exceeds tol (modified Gram-Schmidt with one
    re-orthogonalization pass). Returns the kept indices and, for every
    dropped row, its expansion coefficients over the kept rows.
    """
    r = np.asarray(rows, dtype=float)
    if r.ndim != 2:
        raise ValueError("expected a 2-d array of row vectors")
    kept: list[int] = []
    basis: list[np.ndarray] = []
    dropped: list[int] = []
    for i in range(r.shape[0]):
        v = r[i].copy()
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        norm = float(np.linalg.norm(v))
        if norm > tol:
            kept.append(i)
            basis.append(v / norm)
        else:
            dropped.append(i)
    coeffs: dict[int, np.ndarray] = {}
    if dropped:
        kept_rows = r[kept]
        for i in dropped:
            c, *_ = np.linalg.lstsq(kept_rows.T, r[i], rcond=None)
            coeffs[i] = c
    return kept, coeffs
