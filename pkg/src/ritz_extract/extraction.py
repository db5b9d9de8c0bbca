"""Rayleigh-Ritz, refined and least-squares-plus-line-search (LLS) extraction.

For a fixed Ritz value ``theta`` everything is expressed through the k-by-k
Gram matrix ``M = V^*(A - theta I)^*(A - theta I)V``:

* the Ritz coefficient vector ``y`` is an eigenvector of ``H = V^* A V``;
* the refined vector minimizes ``u^* M u`` over unit ``u`` (``sigma_sq``);
* the least-squares vector ``m = y + p`` minimizes ``||C(y + p)||`` over
  ``p`` orthogonal to ``y``; with ``x = M^{-1} y`` one has ``M m = K y`` and
  ``K = 1 / (y^* x)``;
* the line search minimizes the Rayleigh quotient of ``M`` over
  ``span{y, p}``, giving ``s = y + tau * p``.

``p`` is the vector written ``(I - yy^*)z`` in the literature and
``znorm_sq = ||p||^2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .dense import (as_complex, general_eig_small, hermitian_eig, phase_normalize,
                    smallest_singular_right, solve_hpd)
from .errors import DegenerateIfOne, DimensionMismatch, NearSingular
from .sparse import CsrMatrix, shifted_block_apply

log = logging.getLogger(__name__)

ZERO_CORRECTION_TOL = 1e-14
TAU_DEGENERATE_TOL = 1e-12
TAU_IMAG_TOL = 1e-8
ORTHOGONAL_ZR_TOL = 1e-10


class Flag(str, Enum):
    EXACT_PAIR = "ExactPair"
    ZERO_CORRECTION = "ZeroCorrection"
    TAU_DEGENERATE = "TauDegenerate"
    ORTHOGONAL_ZR = "OrthogonalZr"

    def __str__(self) -> str:
        return self.value


SELECTION_RULES = ("rightmost", "leftmost", "largest_magnitude")


def _selection_key(rule: str):
    if rule == "rightmost":
        return lambda t: (-t.real, -t.imag)
    if rule == "leftmost":
        return lambda t: (t.real, -t.imag)
    if rule == "largest_magnitude":
        return lambda t: (-abs(t), -t.real, -t.imag)
    raise ValueError(f"unknown selection rule {rule!r}; expected one of {SELECTION_RULES}")


@dataclass(frozen=True)
class RitzPair:
    theta: complex
    y: np.ndarray
    ritz_vector: np.ndarray
    residual_norm_sq: float


@dataclass(frozen=True)
class RefinedResult:
    sigma_sq: float
    z_r: np.ndarray
    refined_vector: np.ndarray


@dataclass(frozen=True)
class LeastSquaresStep:
    """Outcome of the least-squares half of LLS."""
    x: np.ndarray
    m: np.ndarray
    K: float
    K_check: float
    w: np.ndarray
    znorm_sq: float
    flag: Flag | None = None


@dataclass(frozen=True)
class LineSearchStep:
    tau: float
    s: np.ndarray
    rho_s: float
    tau_imag: float
    coeffs: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class LlsResult:
    x: np.ndarray
    K: float
    w: np.ndarray
    znorm_sq: float
    m: np.ndarray
    tau: float
    s: np.ndarray
    rho_s: float
    lls_vector: np.ndarray
    K_check: float = float("nan")
    tau_imag: float = 0.0

    @property
    def p(self) -> np.ndarray:
        """The correction ``(I - yy^*) z = m - y``."""
        return np.sqrt(self.znorm_sq) * self.w


class Bounds(NamedTuple):
    lower: float
    upper: float
    sigma_pred_lo: float
    sigma_pred_hi: float


@dataclass(frozen=True)
class ExtractionReport:
    ritz: RitzPair
    lls: LlsResult
    refined: RefinedResult | None
    bound_lower: float
    bound_upper: float
    sigma_pred_lo: float
    sigma_pred_hi: float
    flags: frozenset = frozenset()
    gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def theta(self) -> complex:
        return self.ritz.theta

    @property
    def sigma_sq(self) -> float:
        return float("nan") if self.refined is None else self.refined.sigma_sq

    @property
    def ratio(self) -> float:
        """``K / sigma_sq`` (NaN without a refined result)."""
        if self.refined is None or self.refined.sigma_sq <= 0.0:
            return float("nan")
        return self.lls.K / self.refined.sigma_sq

    @property
    def lls_residual(self) -> float:
        """``||(A - theta I) u||`` for the unit LLS vector ``u``."""
        return float(np.sqrt(max(self.lls.rho_s, 0.0)))

    def summary(self) -> str:
        f = ",".join(sorted(str(x) for x in self.flags)) or "-"
        lines = [
            f"theta            = {self.theta.real:.12g} {self.theta.imag:+.12g}i",
            f"||r_RR||^2       = {self.ritz.residual_norm_sq:.6e}",
            f"K                = {self.lls.K:.6e}",
            f"||p||^2          = {self.lls.znorm_sq:.6e}",
            f"tau              = {self.lls.tau:.12g}",
            f"rho_s            = {self.lls.rho_s:.6e}",
            f"bounds [L, U]    = [{self.bound_lower:.6g}, {self.bound_upper:.6g}]",
            f"sigma^2 predict  = [{self.sigma_pred_lo:.6e}, {self.sigma_pred_hi:.6e}]",
        ]
        if self.refined is not None:
            lines.append(f"sigma^2 actual   = {self.refined.sigma_sq:.6e}")
            lines.append(f"K / sigma^2      = {self.ratio:.12g}")
        lines.append(f"flags            = {f}")
        return "\n".join(lines)


def _hermitian(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def gram_from_shifted(C: np.ndarray) -> np.ndarray:
    return _hermitian(C.conj().T @ C)


def gram_matrix(A: CsrMatrix, V, theta: complex) -> np.ndarray:
    """``V^*(A - theta I)^*(A - theta I)V`` (Hermitian, k-by-k)."""
    V = as_complex(V)
    if V.ndim != 2 or V.shape[0] != A.n:
        raise DimensionMismatch(f"basis of shape {V.shape} for order {A.n}")
    return gram_from_shifted(shifted_block_apply(A, theta, V))


def _ritz_pairs(V: np.ndarray, AV: np.ndarray, select: str) -> list[RitzPair]:
    H = V.conj().T @ AV
    pairs = general_eig_small(H)
    key = _selection_key(select)
    pairs.sort(key=lambda p: key(p[0]))
    out = []
    for theta, y in pairs:
        Vy = V @ y
        r = AV @ y - theta * Vy
        out.append(RitzPair(theta, y, Vy, float(np.vdot(r, r).real)))
    return out


def rayleigh_ritz(A: CsrMatrix, V, select: str = "rightmost") -> list[RitzPair]:
    """Ritz pairs of ``A`` from the orthonormal basis ``V``, sorted by ``select``."""
    V = as_complex(V)
    if V.ndim != 2 or V.shape[0] != A.n or V.shape[1] < 1:
        raise DimensionMismatch(f"basis of shape {V.shape} for order {A.n}")
    return _ritz_pairs(V, shifted_block_apply(A, 0.0, V), select)


def refined_from_shifted(C: np.ndarray, V: np.ndarray) -> RefinedResult:
    sigma_sq, z = smallest_singular_right(C)
    return RefinedResult(sigma_sq, z, V @ z)


def refined_vector(A: CsrMatrix, V, theta: complex) -> RefinedResult:
    """Unit vector of ``span(V)`` with least residual norm for ``theta``."""
    V = as_complex(V)
    return refined_from_shifted(shifted_block_apply(A, theta, V), V)


def least_squares_step(M: np.ndarray, y: np.ndarray) -> LeastSquaresStep:
    """Least-squares correction from the Gram matrix alone.

    Solves ``M x = y``; then ``K = 1/(y^* x)`` and ``m = y + K (I - yy^*) x``.
    A near-singular ``M`` marks the Ritz pair as numerically exact.
    """
    y = as_complex(y)
    k = len(y)
    zeros = np.zeros(k, dtype=np.complex128)
    r2 = float(np.vdot(y, M @ y).real)
    try:
        x = solve_hpd(M, y)
    except NearSingular:
        return LeastSquaresStep(zeros, y.copy(), r2, r2, zeros, 0.0, Flag.EXACT_PAIR)
    yx = np.vdot(y, x)
    K = float(1.0 / yx.real)
    px = x - y * yx
    p = K * px
    m = y + p
    K_check = float(np.vdot(m, M @ m).real)
    pn = float(np.linalg.norm(p))
    if pn <= ZERO_CORRECTION_TOL or k == 1:
        return LeastSquaresStep(x, y.copy(), K, K_check, zeros, 0.0, Flag.ZERO_CORRECTION)
    return LeastSquaresStep(x, m, K, K_check, p / pn, pn * pn)


def lls_least_squares(A: CsrMatrix, V, theta: complex, y, M=None) -> LeastSquaresStep:
    """Least-squares part of LLS for the Ritz pair ``(theta, Vy)``."""
    if M is None:
        M = gram_matrix(A, V, theta)
    return least_squares_step(M, y)


def lls_line_search(M, y, w, znorm_sq: float) -> LineSearchStep:
    """Minimize the Rayleigh quotient of ``M`` over ``span{y, w}``.

    The minimizer of the 2-by-2 problem ``B^* M B`` with ``B = [y w]`` is
    written ``c1 y + c2 w`` with ``c1`` real positive, so that
    ``s = y + tau * sqrt(znorm_sq) * w`` and ``tau = (c2/c1)/sqrt(znorm_sq)``.
    If ``|c1|`` vanishes the minimizer is orthogonal to ``y``; the step is
    then flagged degenerate and falls back to ``s = m`` (``tau = 1``).
    """
    M = as_complex(M)
    y = as_complex(y)
    w = as_complex(w)
    B = np.column_stack([y, w])
    G = _hermitian(B.conj().T @ M @ B)
    eig = hermitian_eig(G)
    c = eig.eigenvectors[:, 0]
    a = abs(c[0])
    pn = np.sqrt(znorm_sq)
    if a <= TAU_DEGENERATE_TOL or pn == 0.0:
        s = y + pn * w
        rho = float(np.vdot(s, M @ s).real / np.vdot(s, s).real)
        return LineSearchStep(1.0, s, rho, 0.0, c, degenerate=True)
    c = c * (np.conj(c[0]) / a)
    t = c[1] / c[0]
    tau_imag = abs(t.imag) / max(abs(t), np.finfo(float).tiny)
    if tau_imag > TAU_IMAG_TOL:
        log.warning("line-search step has relative imaginary residue %.3e", tau_imag)
    elif tau_imag > 0.0:
        log.debug("dropping imaginary residue %.3e from tau", tau_imag)
    tau = float(t.real / pn)
    s = y + (tau * pn) * w
    rho = float(np.vdot(s, M @ s).real / np.vdot(s, s).real)
    return LineSearchStep(tau, s, rho, tau_imag, c)


def tau_crosscheck(s_unit, y) -> float:
    """``tau^2 ||p||^2`` recovered from the unit LLS coefficient vector alone."""
    s_unit = as_complex(s_unit)
    y = as_complex(y)
    q = s_unit - y * np.vdot(y, s_unit)
    q2 = float(np.vdot(q, q).real)
    if q2 >= 1.0 - 1e-14:
        raise DegenerateIfOne(f"||(I - yy^*) s||^2 = {q2:.17g} is numerically 1")
    return q2 / (1.0 - q2)


def residual_bounds(tau: float, znorm_sq: float, residual_norm_sq_y: float) -> Bounds:
    """Two-sided bound on ``K/sigma^2`` and the implied range of ``sigma^2``.

    ``L = 1 + tau ||p||^2``, ``U = 14 tau^2 ||p||^2 + 1``;
    ``sigma^2`` lies in ``[(tau-1) r^2 / (tau U), r^2 / L]`` with ``r^2`` the
    squared Ritz residual norm.
    """
    L = 1.0 + tau * znorm_sq
    U = 14.0 * tau * tau * znorm_sq + 1.0
    lo = (tau - 1.0) * residual_norm_sq_y / (tau * U) if tau != 0 else 0.0
    hi = residual_norm_sq_y / L
    return Bounds(L, U, max(lo, 0.0), hi)


def extract_from_products(V, AV, select: str = "rightmost", compute_refined: bool = True,
                          which: int = 0) -> ExtractionReport:
    """:func:`extract` with the product ``A V`` supplied by the caller."""
    V = as_complex(V)
    AV = as_complex(AV)
    ritz = _ritz_pairs(V, AV, select)[which]
    theta, y = ritz.theta, ritz.y
    C = AV - theta * V
    M = gram_from_shifted(C)
    flags: set[Flag] = set()

    ls = least_squares_step(M, y)
    if ls.flag is not None:
        flags.add(ls.flag)
    if ls.flag is None:
        line = lls_line_search(M, y, ls.w, ls.znorm_sq)
        if line.degenerate:
            flags.add(Flag.TAU_DEGENERATE)
        tau, s, rho_s, tau_imag = line.tau, line.s, line.rho_s, line.tau_imag
    else:
        tau, s, tau_imag = 1.0, ls.m, 0.0
        rho_s = float(np.vdot(s, M @ s).real / np.vdot(s, s).real)
    Vs = V @ s
    lls = LlsResult(x=ls.x, K=ls.K, w=ls.w, znorm_sq=ls.znorm_sq, m=ls.m, tau=tau, s=s,
                    rho_s=rho_s, lls_vector=Vs / np.linalg.norm(Vs), K_check=ls.K_check,
                    tau_imag=tau_imag)
    b = residual_bounds(tau, ls.znorm_sq, ritz.residual_norm_sq)

    refined = None
    if compute_refined:
        refined = refined_from_shifted(C, V)
        if abs(np.vdot(refined.z_r, y)) <= ORTHOGONAL_ZR_TOL:
            flags.add(Flag.ORTHOGONAL_ZR)
    return ExtractionReport(ritz, lls, refined, b.lower, b.upper, b.sigma_pred_lo,
                            b.sigma_pred_hi, frozenset(flags), M)


def extract(A: CsrMatrix, V, select: str = "rightmost", compute_refined: bool = True,
            which: int = 0) -> ExtractionReport:
    """Run the full Rayleigh-Ritz / LLS / bounds / refined pipeline.

    Parameters
    ----------
    A : CsrMatrix
    V : ndarray (n, k)
        Orthonormal basis of the search space.
    select : str
        Ritz value ordering; the ``which``-th pair after sorting is used.
    compute_refined : bool
        The bounds predict ``sigma^2`` without the refined vector; set to
        False to skip the SVD-like step.
    """
    V = as_complex(V)
    if V.ndim != 2 or V.shape[0] != A.n or V.shape[1] < 1:
        raise DimensionMismatch(f"basis of shape {V.shape} for order {A.n}")
    return extract_from_products(V, shifted_block_apply(A, 0.0, V), select,
                                 compute_refined, which)


__all__ = [
    "Bounds", "ExtractionReport", "Flag", "LeastSquaresStep", "LineSearchStep", "LlsResult",
    "RefinedResult", "RitzPair", "SELECTION_RULES", "extract", "extract_from_products",
    "gram_from_shifted", "gram_matrix", "least_squares_step", "lls_least_squares",
    "lls_line_search", "phase_normalize", "rayleigh_ritz", "refined_from_shifted",
    "refined_vector", "residual_bounds", "tau_crosscheck",
]
