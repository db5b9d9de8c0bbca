"""Roots of the auxiliary functions f and g, and the numeric identity suite.

The auxiliary functions of the step length ``alpha``::

    f(alpha) = (tau - 1)(rho_s - r2_y) + (tau - alpha) rho_s (K - sigma^2)/sigma^2
    g(alpha) = (tau/(tau - alpha) - 1) * z_scale,   z_scale = tau ||p||^2 rho_s

``f`` is affine, so its root ``alpha3``, the root ``alpha6`` of
``f(alpha) = alpha z_scale`` and the root ``alpha7 < tau`` of ``f = g`` all
have closed forms.  ``alpha3 <= tau - 1/14`` is what turns into the upper
bound ``K/sigma^2 <= 14 tau^2 ||p||^2 + 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateIfOne, DegenerateTau, PoleAtTau
from .extraction import ExtractionReport, Flag, tau_crosscheck

EPS = np.finfo(float).eps
#: multiple of eps * ||M||_F added to absolute tolerances (rounding floor)
NOISE_FLOOR = 64.0


class DivisionCase(str, Enum):
    EXTERNAL = "External"
    INTERNAL = "Internal"


@dataclass(frozen=True)
class AlphaContext:
    tau: float
    znorm_sq: float
    rho_s: float
    r2_y: float
    K: float
    sigma_sq: float

    @property
    def z_scale(self) -> float:
        return self.tau * self.znorm_sq * self.rho_s

    @property
    def excess(self) -> float:
        """``(K - sigma^2) / sigma^2``."""
        return (self.K - self.sigma_sq) / self.sigma_sq

    @classmethod
    def from_report(cls, report: ExtractionReport) -> "AlphaContext":
        if report.refined is None:
            raise ValueError("report has no refined result")
        return cls(report.lls.tau, report.lls.znorm_sq, report.lls.rho_s,
                   report.ritz.residual_norm_sq, report.lls.K, report.refined.sigma_sq)


@dataclass(frozen=True)
class AlphaRoots:
    alpha3: float
    alpha6: float
    alpha7: float
    division_case: DivisionCase


def f_eval(alpha: float, ctx: AlphaContext) -> float:
    return ((ctx.tau - 1.0) * (ctx.rho_s - ctx.r2_y)
            + (ctx.tau - alpha) * ctx.rho_s * ctx.excess)


def g_eval(alpha: float, ctx: AlphaContext) -> float:
    if alpha >= ctx.tau - 1e-14:
        raise PoleAtTau(f"g has a pole at tau = {ctx.tau}; got alpha = {alpha}")
    return (ctx.tau / (ctx.tau - alpha) - 1.0) * ctx.z_scale


def alpha_roots(ctx: AlphaContext) -> AlphaRoots:
    """Closed-form roots ``alpha3``, ``alpha6`` and ``alpha7``."""
    tau = ctx.tau
    if not tau > 1.0 + 1e-10:
        raise DegenerateTau(f"tau = {tau!r} is numerically 1")
    z = ctx.z_scale
    if not z > 0.0:
        raise DegenerateTau(f"z_scale = {z!r} must be positive")
    if not ctx.K > ctx.sigma_sq:
        raise DegenerateTau("K must exceed sigma^2")
    f0 = f_eval(0.0, ctx)
    slope = ctx.rho_s * ctx.excess          # f(alpha) = f0 - slope * alpha
    a3 = f0 / slope
    a6 = f0 / (slope + z)
    # (f0 - slope a)(tau - a) = a z  <=>  slope a^2 - (f0 + slope tau + z) a + f0 tau = 0
    b = f0 + slope * tau + z
    c = f0 * tau
    disc = max(b * b - 4.0 * slope * c, 0.0)
    sq = math.sqrt(disc)
    lo = 2.0 * c / (b + sq) if b + sq != 0.0 else 0.0
    hi = (b + sq) / (2.0 * slope)
    cands = [r for r in (lo, hi) if r < tau]
    a7 = min(cands) if cands else lo
    case = DivisionCase.INTERNAL if a7 <= a6 else DivisionCase.EXTERNAL
    return AlphaRoots(a3, a6, a7, case)


def alpha3_internal_closed_form(tau):
    """``alpha3`` as a function of ``tau`` when ``alpha7 = 2 alpha6 - tau``."""
    tau = np.asarray(tau, dtype=float)
    r = np.sqrt(9.0 * tau * tau + 2.0 * tau + 1.0)
    return 2.0 * tau * (tau - 1.0 + r) / (5.0 * tau - 1.0 + r)


def j_matrix(M, y, s, rho_s: float) -> np.ndarray:
    """``(I - yy^*)(M - rho_s I)(I - yy^*)``."""
    M = np.asarray(M, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    k = len(y)
    P = np.eye(k) - np.outer(y, y.conj())
    J = P @ (M - rho_s * np.eye(k)) @ P
    return 0.5 * (J + J.conj().T)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    gating: bool = True


@dataclass
class SuiteResult:
    checks: list[CheckResult] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    roots: AlphaRoots | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    def first_failure(self) -> CheckResult | None:
        for c in self.checks:
            if c.gating and not c.passed:
                return c
        return None

    def __iter__(self):
        return iter(self.checks)


ALL_CHECKS = (
    "E4", "E6", "E8", "E12", "E14", "E15", "equn18r", "equn19r", "s_norm", "K_cross",
    "chain", "tau_ge_1", "obs2", "s2", "s3", "flemsv", "mainSV",
    "alpha3_in_(0,tau)", "SV14", "alpha3_le_tau-1/14", "alpha7_le_alpha3",
    "alpha6_le_alpha7_when_alpha7_le_tau-1", "alpha3_le_tau-1/2_when_alpha7_le_tau-1", "internal_alpha7_eq_2alpha6-tau",
)
NEEDS_CORRECTION = {"E4", "E6", "E8", "E12", "E14", "E15", "equn18r", "equn19r", "s_norm",
                    "K_cross", "obs2", "s2", "s3", "flemsv", "mainSV", "tau_ge_1"}
NEEDS_LINE_SEARCH = {"E8", "E12", "E14", "E15", "equn18r", "equn19r", "obs2", "s3",
                     "flemsv", "mainSV", "tau_ge_1"}
NEEDS_REFINED = {"chain", "s2", "s3", "flemsv", "mainSV"}
ALPHA_CHECKS = {"alpha3_in_(0,tau)", "SV14", "alpha3_le_tau-1/14", "alpha7_le_alpha3",
                "alpha6_le_alpha7_when_alpha7_le_tau-1", "alpha3_le_tau-1/2_when_alpha7_le_tau-1", "internal_alpha7_eq_2alpha6-tau"}


def _skipped_for(report: ExtractionReport) -> set[str]:
    flags = report.flags
    if Flag.EXACT_PAIR in flags:
        return set(ALL_CHECKS)
    skip: set[str] = set()
    if Flag.ZERO_CORRECTION in flags:
        skip |= NEEDS_CORRECTION | ALPHA_CHECKS
    if Flag.TAU_DEGENERATE in flags:
        skip |= NEEDS_LINE_SEARCH | ALPHA_CHECKS
    if report.refined is None:
        skip |= NEEDS_REFINED | ALPHA_CHECKS
    if Flag.ORTHOGONAL_ZR in flags:
        skip |= {"s2", "s3"} | ALPHA_CHECKS
    return skip


def identity_suite(report: ExtractionReport, M=None) -> SuiteResult:
    """Evaluate every identity and inequality on one extraction.

    Each entry carries a scaled residual and its tolerance.  Identities are
    scaled by ``r2_y = ||(A - theta I)Vy||^2``; a rounding floor of
    ``64 eps ||M||_F`` is added to absolute tolerances so near-converged
    instances are judged against what double precision can resolve.
    ``internal_alpha7_eq_2alpha6-tau`` (``alpha7 = 2 alpha6 - tau`` in the internal case) is
    reported but does not gate ``passed``.
    """
    if M is None:
        M = report.gram
    M = np.asarray(M, dtype=np.complex128)
    res = SuiteResult()
    skip = _skipped_for(report)
    res.skipped = [n for n in ALL_CHECKS if n in skip]

    y = report.ritz.y
    lls = report.lls
    r2 = report.ritz.residual_norm_sq
    tau, zn, rho, K = lls.tau, lls.znorm_sq, lls.rho_s, lls.K
    p = lls.p
    s = lls.s
    Mn = float(np.linalg.norm(M))
    floor = NOISE_FLOOR * EPS * Mn
    scale = max(r2, floor)

    def add(name, residual, tol, passed=None, gating=True):
        if name in skip:
            return
        ok = bool(residual <= tol) if passed is None else bool(passed)
        res.checks.append(CheckResult(name, float(residual), float(tol), ok, gating))

    def rel(a, b):
        return abs(a - b) / max(abs(b), np.finfo(float).tiny)

    d2 = float(np.vdot(p, M @ p).real)
    cross = complex(np.vdot(y, M @ p))     # <C p, C y> = (Cy)^*(Cp)

    add("E4", abs(K - (r2 - d2)) / scale, 1e-9 + floor / scale)
    add("E6", max(abs(cross.real + d2), abs(cross.imag)) / scale, 1e-9 + floor / scale)
    add("E8", abs(rho - (r2 - tau * d2)) / scale, 1e-9 + floor / scale)
    if "E12" not in skip:
        J = j_matrix(M, y, s, rho)
        jpp = float(np.vdot(p, J @ p).real)
        add("E12", rel(tau / d2, 1.0 / jpp), 1e-8)
        e = y - s
        add("equn18r", abs(float(np.vdot(e, J @ e).real) - (r2 - rho)) / scale,
            1e-9 + floor / scale)
        k = len(y)
        lhs = (M - rho * np.eye(k)) @ s - (M - r2 * np.eye(k)) @ y - J @ (s - y)
        add("equn19r", float(np.linalg.norm(lhs)) / max(Mn, np.finfo(float).tiny),
            1e-9 + NOISE_FLOOR * EPS * (1.0 + abs(tau)))
    add("E14", abs(rho - (tau - 1.0) / tau * d2 / zn) / scale if zn > 0 else 0.0,
        1e-9 + floor / scale)
    s_norm_sq = float(np.vdot(s, s).real)
    add("E15", abs((tau - 1.0) * (r2 - rho) - rho * s_norm_sq * (1.0 - 1.0 / s_norm_sq))
        / (scale * max(1.0, tau)), 1e-9 + floor / scale)
    add("s_norm", abs(s_norm_sq - (1.0 + tau * tau * zn)) / (1.0 + tau * tau * zn), 1e-12)
    add("K_cross", rel(lls.K_check, K) if K != 0 else 0.0, 1e-10 + floor / scale)
    add("tau_ge_1", max(0.0, 1.0 - tau), 1e-10)
    if "obs2" not in skip:
        s_unit = s / np.sqrt(s_norm_sq)
        try:
            t2 = tau_crosscheck(s_unit, y)
            add("obs2", rel(t2, tau * tau * zn), 1e-8)
        except DegenerateIfOne:
            add("obs2", float("inf"), 1e-8)

    if report.refined is not None:
        sig = report.refined.sigma_sq
        zr = report.refined.z_r
        eps_c = 1e-10 * r2 + floor
        m_norm_sq = float(np.vdot(lls.m, lls.m).real)
        chain = [sig, rho, K / m_norm_sq, K, r2]
        viol = max(max(0.0, chain[i] - chain[i + 1] - eps_c) for i in range(4))
        add("chain", viol / scale, 0.0)
        if sig > 0.0:
            ratio = K / sig
            excess = (K - sig) / sig
            if "s2" not in skip:
                q = complex(np.vdot(zr, p) / np.vdot(zr, y))
                err = abs(q - excess) / max(abs(excess), np.finfo(float).tiny)
                tol = 1e-7 + floor * (2.0 + excess) / (sig * max(excess, np.finfo(float).tiny))
                add("s2", err, tol, passed=err <= tol and q.real > -tol * abs(excess))
            add("s3", max(0.0, tau * zn - excess) / max(1.0, ratio), 1e-9)
            L, U = report.bound_lower, report.bound_upper
            viol = max(0.0, L - ratio * (1 + 1e-9), ratio - U * (1 + 1e-9))
            add("flemsv", viol / max(1.0, ratio), 0.0)
            lo, hi = report.sigma_pred_lo, report.sigma_pred_hi
            viol = max(0.0, lo * (1 - 1e-9) - sig, sig - hi * (1 + 1e-9))
            add("mainSV", viol / max(sig, floor, np.finfo(float).tiny), 0.0)
        else:
            skip |= {"s2", "s3", "flemsv", "mainSV"} | ALPHA_CHECKS
            res.skipped = [n for n in ALL_CHECKS if n in skip]

    if not ALPHA_CHECKS <= skip:
        ctx = AlphaContext.from_report(report)
        try:
            roots = alpha_roots(ctx)
        except DegenerateTau:
            skip |= ALPHA_CHECKS
            res.skipped = [n for n in ALL_CHECKS if n in skip]
            return res
        res.roots = roots
        a3, a6, a7 = roots.alpha3, roots.alpha6, roots.alpha7
        # a3 = 0 exactly when k = 2 (s is then the refined vector): one-sided tolerance
        add("alpha3_in_(0,tau)", max(0.0, -a3, a3 - tau) / tau, 1e-9)
        add("SV14", abs(a3 - 2.0 * tau * a6 / (tau + a6)) / tau, 1e-9)
        add("alpha3_le_tau-1/14", max(0.0, a3 - (tau - 1.0 / 14.0)), 1e-9)
        add("alpha7_le_alpha3", max(0.0, a7 - a3) / tau, 1e-10)
        if a7 <= tau - 1.0:
            add("alpha6_le_alpha7_when_alpha7_le_tau-1", max(0.0, a6 - a7) / tau, 1e-10)
            add("alpha3_le_tau-1/2_when_alpha7_le_tau-1", max(0.0, a3 - (tau - 0.5)), 1e-9)
        if roots.division_case is DivisionCase.INTERNAL:
            add("internal_alpha7_eq_2alpha6-tau", abs(a7 - (2.0 * a6 - tau)) / tau, 1e-8, gating=False)
    return res
