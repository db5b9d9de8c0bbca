"""Outer iterations: Arnoldi with explicit restart, GMRES, Jacobi-Davidson.

Each outer step runs the full extraction on the current search space and
emits one :class:`IterationRecord`.  The next search direction (JD) or
restart vector (Arnoldi) is the LLS vector ``Vs/||Vs||``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .bounds import AlphaContext, alpha_roots
from .dense import as_complex, mgs_against
from .errors import DegenerateTau, StagnationWarning
from .extraction import ExtractionReport, Flag, extract_from_products
from .sparse import CsrMatrix, matvec, shifted_block_apply

log = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-14


# ---------------------------------------------------------------------------
# Arnoldi

@dataclass(frozen=True)
class ArnoldiFactorization:
    """``A V[:, :k] = V Hbar`` with ``V`` orthonormal.

    After a breakdown the last column of ``V`` is absent: ``V`` is n-by-k,
    ``Hbar`` is k-by-k and ``A V = V Hbar`` holds exactly (invariant subspace).
    """
    V: np.ndarray
    Hbar: np.ndarray
    k: int
    breakdown: bool = False

    @classmethod
    def start(cls, v0) -> "ArnoldiFactorization":
        v0 = as_complex(v0)
        nrm = np.linalg.norm(v0)
        if nrm == 0.0:
            raise ValueError("start vector is zero")
        return cls((v0 / nrm)[:, None], np.zeros((1, 0), dtype=np.complex128), 0)

    @property
    def basis(self) -> np.ndarray:
        return self.V[:, :self.k]


def arnoldi_expand(A: CsrMatrix | Callable, fact: ArnoldiFactorization,
                   steps: int) -> ArnoldiFactorization:
    """Extend an Arnoldi factorization by up to ``steps`` columns.

    Modified Gram-Schmidt with one conditional reorthogonalization pass.
    Stops early on breakdown (new direction of norm <= 1e-14 relative).
    """
    apply = (lambda v: matvec(A, v)) if isinstance(A, CsrMatrix) else A
    if fact.breakdown:
        return fact
    n = fact.V.shape[0]
    k0 = fact.k
    kmax = k0 + steps
    V = np.zeros((n, kmax + 1), dtype=np.complex128)
    V[:, :k0 + 1] = fact.V
    H = np.zeros((kmax + 1, kmax), dtype=np.complex128)
    H[:k0 + 1, :k0] = fact.Hbar
    for j in range(k0, kmax):
        w = apply(V[:, j])
        wn = np.linalg.norm(w)
        w, h = mgs_against(V[:, :j + 1], w)
        H[:j + 1, j] = h
        beta = np.linalg.norm(w)
        if beta <= BREAKDOWN_TOL * max(wn, 1.0):
            return ArnoldiFactorization(V[:, :j + 1].copy(), H[:j + 1, :j + 1].copy(),
                                        j + 1, breakdown=True)
        H[j + 1, j] = beta
        V[:, j + 1] = w / beta
    return ArnoldiFactorization(V, H, kmax)


# ---------------------------------------------------------------------------
# GMRES

def gmres(apply: Callable[[np.ndarray], np.ndarray], b, max_iters: int, x0=None):
    """Un-restarted GMRES with Givens rotations.

    Returns ``(x, history)`` where ``history[j]`` is the residual norm after
    ``j`` iterations (``history[0] = ||b - A x0||``).  A breakdown is a lucky
    termination: the Krylov space is invariant and the solve is exact.
    """
    b = as_complex(b)
    n = len(b)
    x0 = np.zeros(n, dtype=np.complex128) if x0 is None else as_complex(x0).copy()
    r0 = b - apply(x0) if np.any(x0) else b.copy()
    beta = float(np.linalg.norm(r0))
    history = [beta]
    if beta == 0.0 or max_iters < 1:
        return x0, history
    m = max_iters
    Q = np.zeros((n, m + 1), dtype=np.complex128)
    R = np.zeros((m + 1, m), dtype=np.complex128)
    cs = np.zeros(m, dtype=np.complex128)
    sn = np.zeros(m, dtype=np.complex128)
    g = np.zeros(m + 1, dtype=np.complex128)
    g[0] = beta
    Q[:, 0] = r0 / beta
    used = 0
    for j in range(m):
        w = apply(Q[:, j])
        wn = np.linalg.norm(w)
        w, h = mgs_against(Q[:, :j + 1], w)
        hn = float(np.linalg.norm(w))
        col = np.zeros(j + 2, dtype=np.complex128)
        col[:j + 1] = h
        col[j + 1] = hn
        for i in range(j):
            t = cs[i] * col[i] + sn[i] * col[i + 1]
            col[i + 1] = -np.conj(sn[i]) * col[i] + np.conj(cs[i]) * col[i + 1]
            col[i] = t
        a, bb = col[j], col[j + 1]
        denom = math.hypot(abs(a), abs(bb))
        if denom == 0.0:
            used = j
            break
        # unitary rotation [[c, s], [-conj(s), conj(c)]] zeroing col[j+1]
        cs[j] = np.conj(a) / denom
        sn[j] = np.conj(bb) / denom
        col[j] = denom
        col[j + 1] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]
        R[:j + 1, j] = col[:j + 1]
        used = j + 1
        history.append(float(abs(g[j + 1])))
        lucky = hn <= BREAKDOWN_TOL * max(wn, 1.0)
        if lucky or abs(g[j + 1]) == 0.0:
            break
        Q[:, j + 1] = w / hn
    if used == 0:
        return x0, history
    c = np.linalg.solve(np.triu(R[:used, :used]), g[:used])
    return x0 + Q[:, :used] @ c, history


# ---------------------------------------------------------------------------
# Solver configuration and traces

METHODS = ("jd", "arnoldi")
INITIALS = ("uniform", "ones", "file", "random")


@dataclass
class SolverConfig:
    method: str = "jd"
    target: str = "rightmost"
    subspace_max: int = 200
    restart_len: int = 10
    gmres_iters: int = 20
    tol: float = 1e-8
    max_outer: int = 200
    initial: str = "uniform"
    initial_path: str | None = None
    compute_refined_every_step: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.initial not in INITIALS:
            raise ValueError(f"initial must be one of {INITIALS}, got {self.initial!r}")
        if self.subspace_max < 2 or self.restart_len < 2 or self.gmres_iters < 1:
            raise ValueError("need subspace_max >= 2, restart_len >= 2, gmres_iters >= 1")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")


def initial_vector(cfg: SolverConfig, n: int) -> np.ndarray:
    """Unit start vector; ``uniform`` and ``ones`` both give ``1/sqrt(n)``."""
    if cfg.initial in ("uniform", "ones"):
        v = np.ones(n, dtype=np.complex128)
    elif cfg.initial == "random":
        v = np.random.default_rng(cfg.seed).standard_normal(n).astype(np.complex128)
    else:
        if not cfg.initial_path:
            raise ValueError("initial=file needs initial_path")
        v = _read_vector(Path(cfg.initial_path))
        if len(v) != n:
            raise ValueError(f"initial vector has length {len(v)}, matrix order is {n}")
    return v / np.linalg.norm(v)


def _read_vector(path: Path) -> np.ndarray:
    """One entry per line: ``re`` or ``re im``; '%' and '#' start comments."""
    vals = []
    for ln in path.read_text().splitlines():
        ln = ln.strip()
        if not ln or ln[0] in "%#":
            continue
        t = ln.split()
        vals.append(complex(float(t[0]), float(t[1]) if len(t) > 1 else 0.0))
    return np.array(vals, dtype=np.complex128)


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    theta: complex
    r2_y: float
    K: float
    rho_s: float
    sigma_sq: float
    tau: float
    znorm_sq: float
    L: float
    U: float
    ratio: float
    sigma_pred_lo: float
    sigma_pred_hi: float
    alpha3: float
    flags: frozenset = frozenset()

    @classmethod
    def from_report(cls, it: int, rep: ExtractionReport) -> "IterationRecord":
        a3 = float("nan")
        if rep.refined is not None and not rep.flags:
            try:
                a3 = alpha_roots(AlphaContext.from_report(rep)).alpha3
            except (DegenerateTau, ZeroDivisionError):
                pass
        return cls(it, rep.theta, rep.ritz.residual_norm_sq, rep.lls.K, rep.lls.rho_s,
                   rep.sigma_sq, rep.lls.tau, rep.lls.znorm_sq, rep.bound_lower,
                   rep.bound_upper, rep.ratio, rep.sigma_pred_lo, rep.sigma_pred_hi, a3,
                   rep.flags)

    def within_bounds(self, rtol: float = 1e-9) -> bool:
        """``L <= K/sigma^2 <= U`` (True when the ratio is unavailable)."""
        if math.isnan(self.ratio):
            return True
        return self.L <= self.ratio * (1 + rtol) and self.ratio <= self.U * (1 + rtol)


@dataclass
class SolverResult:
    converged: bool
    theta: complex
    vector: np.ndarray
    residual_norm: float
    trace: list[IterationRecord] = field(default_factory=list)
    reports: list[ExtractionReport] = field(default_factory=list, repr=False)
    basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def pairs(self) -> list[tuple[complex, np.ndarray]]:
        return [(self.theta, self.vector)] if self.converged else []

    @property
    def iterations(self) -> int:
        return len(self.trace)


# ---------------------------------------------------------------------------
# Jacobi-Davidson

def jd_outer(A: CsrMatrix, cfg: SolverConfig, v0=None, keep_reports: bool = False,
             on_record: Callable[[IterationRecord], None] | None = None) -> SolverResult:
    """Jacobi-Davidson without restart, LLS vector in the correction equation.

    Per step: extract on ``V``; ``u = Vs/||Vs||``; ``r = (A - theta I)u``;
    solve ``(I-uu^*)(A-theta I)(I-uu^*) t = -(I-uu^*) r`` with
    ``cfg.gmres_iters`` GMRES steps from ``t = 0``; append ``t``
    orthonormalized against ``V``.  Converged when ``||r|| <= tol``.
    """
    n = A.n
    v = initial_vector(cfg, n) if v0 is None else as_complex(v0) / np.linalg.norm(v0)
    kmax = min(cfg.subspace_max, n)
    V = np.zeros((n, kmax), dtype=np.complex128)
    AV = np.zeros((n, kmax), dtype=np.complex128)
    V[:, 0] = v
    AV[:, 0] = matvec(A, v)
    k = 1
    res = SolverResult(False, 0j, v, float("inf"))
    for it in range(1, cfg.max_outer + 1):
        rep = extract_from_products(V[:, :k], AV[:, :k], cfg.target,
                                    cfg.compute_refined_every_step)
        rec = IterationRecord.from_report(it, rep)
        res.trace.append(rec)
        if keep_reports:
            res.reports.append(rep)
        if on_record is not None:
            on_record(rec)
        theta = rep.theta
        u = rep.lls.lls_vector
        Vs = V[:, :k] @ rep.lls.s
        nVs = np.linalg.norm(Vs)
        r = (AV[:, :k] @ rep.lls.s - theta * Vs) / nVs
        rn = float(np.linalg.norm(r))
        res.theta, res.vector, res.residual_norm = theta, u, rn
        if rn <= cfg.tol:
            res.converged = True
            break
        if k >= kmax:
            break

        def op(t, u=u, theta=theta):
            t = t - u * np.vdot(u, t)
            q = matvec(A, t) - theta * t
            return q - u * np.vdot(u, q)

        rhs = -(r - u * np.vdot(u, r))
        t, _ = gmres(op, rhs, cfg.gmres_iters)
        t = t - u * np.vdot(u, t)
        new = _expand(V[:, :k], t)
        if new is None:
            warnings.warn(f"JD step {it}: correction vanished after projection; "
                          "expanding with the residual", StagnationWarning, stacklevel=2)
            new = _expand(V[:, :k], r)
            if new is None:
                break
        V[:, k] = new
        AV[:, k] = matvec(A, new)
        k += 1
    res.basis = V[:, :k].copy()
    return res


def _expand(V: np.ndarray, t: np.ndarray) -> np.ndarray | None:
    tn = np.linalg.norm(t)
    if tn == 0.0 or not np.isfinite(tn):
        return None
    w, _ = mgs_against(V, t)
    w, _ = mgs_against(V, w)   # second full pass keeps a 200-column basis orthonormal
    wn = np.linalg.norm(w)
    if wn <= BREAKDOWN_TOL * tn:
        return None
    return w / wn


# ---------------------------------------------------------------------------
# Explicitly restarted Arnoldi

def restarted_arnoldi(A: CsrMatrix, cfg: SolverConfig, v0=None, keep_reports: bool = False,
                      on_record: Callable[[IterationRecord], None] | None = None) -> SolverResult:
    """Arnoldi of fixed length ``cfg.restart_len``, restarted from the LLS vector.

    One record per restart.  On Arnoldi breakdown the basis spans an
    invariant subspace; the extraction on it is final.
    """
    n = A.n
    v = initial_vector(cfg, n) if v0 is None else as_complex(v0) / np.linalg.norm(v0)
    m = min(cfg.restart_len, n)
    res = SolverResult(False, 0j, v, float("inf"))
    for it in range(1, cfg.max_outer + 1):
        fact = arnoldi_expand(A, ArnoldiFactorization.start(v), m)
        V = fact.basis
        AV = shifted_block_apply(A, 0.0, V)
        rep = extract_from_products(V, AV, cfg.target, cfg.compute_refined_every_step)
        rec = IterationRecord.from_report(it, rep)
        res.trace.append(rec)
        if keep_reports:
            res.reports.append(rep)
        if on_record is not None:
            on_record(rec)
        u = rep.lls.lls_vector
        Vs = V @ rep.lls.s
        r = (AV @ rep.lls.s - rep.theta * Vs) / np.linalg.norm(Vs)
        rn = float(np.linalg.norm(r))
        res.theta, res.vector, res.residual_norm = rep.theta, u, rn
        res.basis = V
        if rn <= cfg.tol:
            res.converged = True
            break
        if fact.breakdown:
            log.info("Arnoldi breakdown at restart %d (invariant subspace of dim %d)",
                     it, fact.k)
            res.converged = Flag.EXACT_PAIR in rep.flags
            break
        v = u
    return res


def run_solver(A: CsrMatrix, cfg: SolverConfig, **kw) -> SolverResult:
    if cfg.method == "jd":
        return jd_outer(A, cfg, **kw)
    return restarted_arnoldi(A, cfg, **kw)
