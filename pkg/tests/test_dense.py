import numpy as np
import pytest
from hypothesis import given, strategies as st

from ritz_extract.dense import (general_eig_small, hermitian_eig, orthonormalize,
                                smallest_singular_right, solve_hpd)
from ritz_extract.errors import NearSingular, NonFiniteError, TooLarge, ZeroRank

from conftest import crandn


def _negative_pivots(M, x):
    """Sylvester inertia: number of eigenvalues of M below x, via LDL^* without pivoting."""
    A = (M - x * np.eye(len(M))).astype(complex).tolist()
    n, count = len(A), 0
    for j in range(n):
        d = A[j][j].real
        if d == 0.0:
            d = 1e-300
        count += d < 0
        for i in range(j + 1, n):
            f = A[i][j] / d
            for c in range(j + 1, n):
                A[i][c] -= f * A[j][c]
    return count


def bisection_eigenvalues(M, iters=200):
    r = np.abs(M).sum(axis=1).max()
    out = []
    for idx in range(len(M)):
        lo, hi = -r - 1, r + 1
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if _negative_pivots(M, mid) > idx:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-15 * r:
                break
        out.append(0.5 * (lo + hi))
    return np.array(out)


def test_identity_eigenvalues():
    r = hermitian_eig(np.eye(3))
    assert np.allclose(r.eigenvalues, 1.0)
    assert np.allclose(r.eigenvectors.conj().T @ r.eigenvectors, np.eye(3))


def test_diagonal_sorted_with_permuted_basis():
    r = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(r.eigenvalues, [1, 2, 3])
    assert np.allclose(np.abs(r.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_hermitian_eig_matches_inertia_bisection(rng):
    for _ in range(5):
        B = crandn(rng, 5, 5)
        M = B + B.conj().T
        ref = bisection_eigenvalues(M)
        got = hermitian_eig(M).eigenvalues
        assert np.max(np.abs(got - ref) / np.abs(ref)) <= 1e-10


@given(st.integers(2, 12), st.integers(0, 2**31))
def test_hermitian_eig_decomposition(n, seed):
    rng = np.random.default_rng(seed)
    B = crandn(rng, n, n)
    M = B + B.conj().T
    r = hermitian_eig(M)
    Q, lam = r.eigenvectors, r.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert np.linalg.norm(Q.conj().T @ Q - np.eye(n)) <= 1e-12 * n
    assert np.linalg.norm(M @ Q - Q * lam) <= 1e-12 * np.linalg.norm(M) * n


def test_hermitian_eig_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        hermitian_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_general_eig_triangular_and_rotation(rng):
    T = np.triu(crandn(rng, 4, 4))
    vals = sorted((t for t, _ in general_eig_small(T)), key=lambda z: (z.real, z.imag))
    assert np.allclose(vals, sorted(np.diag(T), key=lambda z: (z.real, z.imag)))
    rot = sorted(t.imag for t, _ in general_eig_small(np.array([[0.0, 1.0], [-1.0, 0.0]])))
    assert np.allclose(rot, [-1.0, 1.0])


def test_general_eig_residual(rng):
    H = crandn(rng, 6, 6)
    for th, y in general_eig_small(H):
        assert abs(np.linalg.norm(y) - 1) < 1e-14
        assert np.linalg.norm(H @ y - th * y) <= 1e-10 * np.linalg.norm(H)


def test_general_eig_size_cap():
    with pytest.raises(TooLarge):
        general_eig_small(np.eye(513))


def test_solve_hpd_examples(rng):
    b = crandn(rng, 4)
    assert np.allclose(solve_hpd(np.eye(4), b), b)
    assert np.allclose(solve_hpd(np.diag([4.0, 9.0]), np.array([2.0, 3.0])), [0.5, 1 / 3])
    C = crandn(rng, 10, 6)
    M = C.conj().T @ C + np.eye(6)
    b = crandn(rng, 6)
    assert np.linalg.norm(M @ solve_hpd(M, b) - b) <= 1e-12 * np.linalg.norm(b)


def test_solve_hpd_near_singular():
    with pytest.raises(NearSingular):
        solve_hpd(np.diag([1.0, 1e-20]), np.ones(2))


def test_orthonormalize_examples(rng):
    Q, _ = np.linalg.qr(crandn(rng, 8, 3))
    V = orthonormalize(Q)
    assert np.allclose(np.abs(np.sum(V.conj() * Q, axis=0)), 1.0)
    W = crandn(rng, 8, 2)
    assert orthonormalize(np.column_stack([W, W[:, 0]])).shape == (8, 2)
    V = orthonormalize(crandn(rng, 50, 6))
    assert np.linalg.norm(V.conj().T @ V - np.eye(6)) <= 1e-12
    with pytest.raises(ZeroRank):
        orthonormalize(np.zeros((5, 2)))


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_orthonormalize_preserves_span(k, seed):
    rng = np.random.default_rng(seed)
    W = crandn(rng, 20, k)
    V = orthonormalize(W)
    assert V.shape == (20, k)
    assert np.linalg.norm(W - V @ (V.conj().T @ W)) <= 1e-12 * np.linalg.norm(W)


def test_smallest_singular_examples(rng):
    Q, _ = np.linalg.qr(crandn(rng, 6, 3))
    s2, z = smallest_singular_right(Q)
    assert abs(s2 - 1) < 1e-12 and abs(np.linalg.norm(z) - 1) < 1e-14
    C = np.zeros((3, 2))
    C[0, 0], C[1, 1] = 2.0, 1.0
    s2, z = smallest_singular_right(C)
    assert abs(s2 - 1) < 1e-14 and np.allclose(np.abs(z), [0, 1])


def test_smallest_singular_random_minimization_oracle(rng):
    C = crandn(rng, 30, 5)
    s2, z = smallest_singular_right(C)
    U = crandn(rng, 5, 1000)
    U /= np.linalg.norm(U, axis=0)
    assert s2 <= np.min(np.linalg.norm(C @ U, axis=0) ** 2) * (1 + 1e-12)
    assert abs(np.linalg.norm(C @ z) ** 2 - s2) <= 1e-12 * s2
