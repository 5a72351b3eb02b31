import numpy as np
import pytest

from mdirand import linalg
from mdirand.linalg import (
    ConvergenceError,
    NotHermitianError,
    NotPositiveDefiniteError,
    cholesky_spd,
    jacobi_eigvalsh,
    kron,
    min_eigenvalue,
    real_embed,
    row_space_basis,
)

SZ = np.diag([1.0, -1.0]).astype(complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])


def test_kron_sigma_z_pair_matches_sign_table():
    # oracle: enumerate <ab| sz (x) sz |ab> = (-1)^(a+b) by hand
    t = kron(SZ, SZ)
    expected = np.diag([1.0, -1.0, -1.0, 1.0])
    assert np.array_equal(t, expected.astype(complex))


def test_kron_mixed_product_property():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, b, c, d = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(4))
        lhs = kron(a @ c, b @ d)
        rhs = kron(a, b) @ kron(c, d)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_min_eigenvalue_qubit_state_spectrum():
    # oracle: eigenvalues of (I + r.sigma)/2 are (1 +- |r|)/2
    r = 0.6
    rho = 0.5 * (np.eye(2, dtype=complex) + r * SX)
    assert min_eigenvalue(rho) == pytest.approx((1 - r) / 2, abs=1e-10)
    assert min_eigenvalue(rho) == pytest.approx(0.2, abs=1e-10)


def test_min_eigenvalue_agrees_with_lapack_oracle():
    rng = np.random.default_rng(11)
    for n in (2, 3, 5, 8, 13):
        for _ in range(6):
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            h = a + a.conj().T
            assert min_eigenvalue(h) == pytest.approx(
                float(np.linalg.eigvalsh(h)[0]), abs=1e-10
            )


def test_min_eigenvalue_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        min_eigenvalue(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_jacobi_eigvalsh_matches_lapack_oracle():
    rng = np.random.default_rng(3)
    for n in (1, 2, 4, 7, 16, 32):
        a = rng.standard_normal((n, n))
        s = a + a.T
        got = jacobi_eigvalsh(s)
        want = np.linalg.eigvalsh(s)
        assert np.max(np.abs(got - want)) < 1e-10 * max(1.0, np.linalg.norm(s))


def test_jacobi_eigvalsh_degenerate_spectrum():
    assert np.allclose(jacobi_eigvalsh(np.eye(5) * 3.0), np.full(5, 3.0))


def test_jacobi_eigvalsh_rejects_asymmetric():
    with pytest.raises(ValueError):
        jacobi_eigvalsh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_jacobi_convergence_error_is_raisable():
    with pytest.raises(ConvergenceError):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((12, 12))
        jacobi_eigvalsh(a + a.T, max_sweeps=0)


def test_real_embed_sigma_y_eigenvalues():
    m = real_embed(SY)
    assert np.array_equal(
        m,
        np.array(
            [
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0, 0.0],
                [0.0, -1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
            ]
        ),
    )
    # oracle: det/trace enumeration gives doubled spectrum {-1, -1, 1, 1}
    assert np.allclose(np.linalg.eigvalsh(m), [-1.0, -1.0, 1.0, 1.0], atol=1e-12)


def test_real_embed_trace_identity_randomized():
    rng = np.random.default_rng(19)
    for _ in range(25):
        n = int(rng.integers(2, 6))
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        x = x + x.conj().T
        y = y + y.conj().T
        lhs = np.trace(real_embed(x) @ real_embed(y))
        rhs = 2.0 * np.real(np.trace(x @ y))
        assert lhs == pytest.approx(rhs, abs=1e-9 * max(1.0, abs(rhs)))


def test_real_embed_psd_iff_complex_psd():
    rng = np.random.default_rng(23)
    for _ in range(10):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = a + a.conj().T
        psd_complex = np.linalg.eigvalsh(h)[0] >= -1e-12
        psd_embed = np.linalg.eigvalsh(real_embed(h))[0] >= -1e-12
        assert psd_complex == psd_embed
        g = a @ a.conj().T  # PSD by construction
        assert np.linalg.eigvalsh(real_embed(g))[0] >= -1e-10


def test_cholesky_spd_worked_example():
    l = cholesky_spd(np.array([[4.0, 2.0], [2.0, 5.0]]))
    assert np.allclose(l, np.array([[2.0, 0.0], [1.0, 2.0]]), atol=1e-12)


def test_cholesky_spd_hilbert_roundtrip():
    n = 4
    h = np.array([[1.0 / (i + j + 1) for j in range(n)] for i in range(n)])
    l = cholesky_spd(h)
    assert np.tril(l).tolist() == l.tolist()
    resid = np.max(np.abs(l @ l.T - h))
    assert resid < 1e-10 * (1.0 + np.linalg.norm(h))


def test_cholesky_spd_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError, match="not positive definite"):
        cholesky_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_row_space_basis_keeps_first_independent_rows():
    rows = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    kept, coeffs = row_space_basis(rows, tol=1e-9)
    assert kept == [0, 1]
    assert set(coeffs) == {2}
    assert np.allclose(coeffs[2], [1.0, 1.0], atol=1e-12)


def test_row_space_basis_rank_matches_svd_oracle():
    rng = np.random.default_rng(31)
    for _ in range(20):
        m, n, r = int(rng.integers(3, 12)), int(rng.integers(3, 10)), int(rng.integers(1, 4))
        base = rng.standard_normal((r, n))
        mix = rng.standard_normal((m, r))
        rows = mix @ base
        kept, coeffs = row_space_basis(rows, tol=1e-9)
        svd_rank = int(np.linalg.matrix_rank(rows, tol=1e-9))
        assert len(kept) == svd_rank
        for i, c in coeffs.items():
            resid = np.linalg.norm(rows[i] - c @ rows[kept])
            assert resid < 1e-9 * max(1.0, np.linalg.norm(rows[i]))


def test_row_space_basis_all_independent():
    kept, coeffs = row_space_basis(np.eye(5), tol=1e-9)
    assert kept == [0, 1, 2, 3, 4]
    assert coeffs == {}


def test_linalg_functions_do_not_mutate_inputs():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4))
    s = a + a.T
    snap = s.copy()
    jacobi_eigvalsh(s)
    assert np.array_equal(s, snap)
    spd = s @ s.T + 5 * np.eye(4)
    snap2 = spd.copy()
    cholesky_spd(spd)
    assert np.array_equal(spd, snap2)
