"""Complex dense kernels for the small projected problems.

Vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``;
matrices are treated as column-major in the sense that columns are the
basis vectors.  Every function here is pure: inputs are never mutated.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NearSingular, NoConvergence, NonFiniteError, TooLarge, ZeroRank

#: Rank / singularity tolerance relative to the Frobenius norm.
RANK_RTOL = 1e-13
#: Largest projected problem accepted by :func:`general_eig_small`.
MAX_SMALL = 512
#: Reorthogonalize when a vector keeps less than this fraction of its norm.
REORTH_ETA = 0.5


def as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=np.complex128)


def check_finite(a: np.ndarray, what: str = "input") -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} contains NaN or Inf")


def phase_normalize(v: np.ndarray) -> np.ndarray:
    """Scale so the largest-magnitude entry is real positive.

    Works on a vector or column-wise on a matrix.  Ties are broken by the
    lowest index, which ``argmax`` already does.
    """
    v = as_complex(v)
    if v.ndim == 1:
        i = int(np.argmax(np.abs(v)))
        a = np.abs(v[i])
        return v if a == 0 else v * (np.conj(v[i]) / a)
    out = v.copy()
    for j in range(v.shape[1]):
        out[:, j] = phase_normalize(v[:, j])
    return out


@dataclass(frozen=True)
class HermitianEigResult:
    eigenvalues: np.ndarray   # real, ascending
    eigenvectors: np.ndarray  # unitary, column i <-> eigenvalue i


def hermitian_eig(M) -> HermitianEigResult:
    """Full spectrum of a Hermitian matrix, ascending.

    The input is symmetrized as ``(M + M^*)/2`` before the LAPACK call, so a
    relative asymmetry at rounding level is harmless.
    """
    M = as_complex(M)
    check_finite(M, "matrix")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    Ms = 0.5 * (M + M.conj().T)
    try:
        w, Q = np.linalg.eigh(Ms)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return HermitianEigResult(w, phase_normalize(Q))


def general_eig_small(H) -> list[tuple[complex, np.ndarray]]:
    """Eigenpairs of a small general matrix, unit right eigenvectors.

    Backed by the LAPACK QR algorithm.  Pairs come in LAPACK order; callers
    sort them by their own selection rule.
    """
    H = as_complex(H)
    check_finite(H, "matrix")
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if H.shape[0] > MAX_SMALL:
        raise TooLarge(f"order {H.shape[0]} exceeds {MAX_SMALL}")
    try:
        w, Y = np.linalg.eig(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NoConvergence(str(exc)) from exc
    Y = Y / np.linalg.norm(Y, axis=0)
    Y = phase_normalize(Y)
    return [(complex(w[i]), Y[:, i].copy()) for i in range(len(w))]


def solve_hpd(M, b, rtol: float = RANK_RTOL) -> np.ndarray:
    """Solve ``M x = b`` for Hermitian positive definite ``M`` by Cholesky.

    Raises
    ------
    NearSingular
        If a Cholesky pivot ``L_ii**2`` is at or below ``rtol * ||M||_F``,
        the factorization breaks down, or the solution grows beyond
        ``||b|| / (rtol * ||M||_F)``.
    """
    M = as_complex(M)
    b = as_complex(b)
    check_finite(M, "matrix")
    check_finite(b, "right-hand side")
    Ms = 0.5 * (M + M.conj().T)
    scale = np.linalg.norm(Ms)
    try:
        c, lower = scipy.linalg.cho_factor(Ms, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NearSingular(f"Cholesky breakdown: {exc}") from exc
    pivots = np.abs(np.diag(c)) ** 2
    if scale == 0.0 or pivots.min() <= rtol * scale:
        raise NearSingular(
            f"smallest Cholesky pivot {pivots.min():.3e} <= {rtol:g} * {scale:.3e}")
    x = scipy.linalg.cho_solve((c, lower), b, check_finite=False)
    # ||x|| / ||b|| <= ||M^{-1}||, so growth past 1/(rtol ||M||) exposes a tiny
    # eigenvalue that the pivots can hide
    bn, xn = np.linalg.norm(b), np.linalg.norm(x)
    if not np.isfinite(xn) or xn * rtol * scale >= bn > 0.0:
        raise NearSingular(f"solution growth ||x||/||b|| = {xn / bn:.3e} exceeds "
                           f"1/({rtol:g} * {scale:.3e})")
    return x


def mgs_against(V: np.ndarray, w: np.ndarray, eta: float = REORTH_ETA):
    """Orthogonalize ``w`` against the orthonormal columns of ``V``.

    Modified Gram-Schmidt with one extra pass when the first pass leaves less
    than ``eta`` of the original norm.

    Returns
    -------
    w : ndarray
        The orthogonalized (not normalized) vector.
    h : ndarray
        Accumulated projection coefficients ``V^* w``.
    """
    w = as_complex(w).copy()
    j = V.shape[1]
    h = np.zeros(j, dtype=np.complex128)
    before = np.linalg.norm(w)
    for i in range(j):
        h[i] = np.vdot(V[:, i], w)
        w -= h[i] * V[:, i]
    if np.linalg.norm(w) < eta * before:
        for i in range(j):
            c = np.vdot(V[:, i], w)
            h[i] += c
            w -= c * V[:, i]
    return w, h


def orthonormalize(W, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis for ``span(W)``, dropping rank-deficient columns.

    Columns are processed left to right with two full MGS passes each, so
    the leading columns of the result span the leading columns of ``W``.
    """
    W = as_complex(W)
    if W.ndim == 1:
        W = W[:, None]
    check_finite(W, "matrix")
    tol = rtol * np.linalg.norm(W)
    cols: list[np.ndarray] = []
    for j in range(W.shape[1]):
        w = W[:, j].copy()
        for _ in range(2):
            for q in cols:
                w -= np.vdot(q, w) * q
        nrm = np.linalg.norm(w)
        if nrm > tol and nrm > 0.0:
            cols.append(w / nrm)
    if not cols:
        raise ZeroRank("all columns are below the rank tolerance")
    return np.column_stack(cols)


def smallest_singular_right(C):
    """Smallest squared singular value of ``C`` and its right singular vector.

    The eigenproblem of the k-by-k Gram matrix ``C^* C`` gives a first
    vector, which one inverse-iteration step on ``C^* C`` then sharpens.
    The returned ``sigma_sq`` is ``||C z||^2`` evaluated directly from ``C``.

    Returns
    -------
    sigma_sq : float
    z : ndarray, unit norm, largest entry real positive
    """
    C = as_complex(C)
    check_finite(C, "matrix")
    if C.ndim != 2 or C.shape[0] < C.shape[1] or C.shape[1] < 1:
        raise ValueError(f"expected n >= k >= 1, got shape {C.shape}")
    G = C.conj().T @ C
    eig = hermitian_eig(G)
    z = eig.eigenvectors[:, 0]
    scale = np.linalg.norm(G)
    if G.shape[0] > 1 and scale > 0.0:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                z1 = scipy.linalg.solve(0.5 * (G + G.conj().T), z,
                                        assume_a="her", check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            z1 = None
        if z1 is not None and np.all(np.isfinite(z1)) and np.linalg.norm(z1) > 0:
            z1 = z1 / np.linalg.norm(z1)
            # keep the step only if it does not increase the residual
            if np.linalg.norm(C @ z1) <= np.linalg.norm(C @ z):
                z = z1
    z = phase_normalize(z / np.linalg.norm(z))
    sigma_sq = float(np.linalg.norm(C @ z) ** 2)
    return sigma_sq, z
