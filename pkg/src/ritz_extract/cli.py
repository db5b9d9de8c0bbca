"""``ritz-extract`` command line: run | verify | plot | extract."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .errors import BadTrace, MatrixMarketError, RitzExtractError
from .experiment import (ExperimentConfig, emit_plot_scripts, format_verify_csv, load_config,
                         run_verify, summarize, verify_table, write_trace)
from .extraction import SELECTION_RULES, extract
from .krylov import (INITIALS, METHODS, ArnoldiFactorization, arnoldi_expand, initial_vector,
                     run_solver)
from .sparse import read_matrix_market

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _load_matrix(path, strict: bool):
    if path is None:
        raise SystemExit(_die("cannot read matrix: no --matrix given", EXIT_IO))
    try:
        return read_matrix_market(path, strict=strict)
    except (OSError, MatrixMarketError) as exc:
        raise SystemExit(_die(f"cannot read matrix {path}: {exc}", EXIT_IO))


def _die(msg: str, code: int) -> int:
    print(f"ritz-extract: {msg}", file=sys.stderr)
    return code


def _solver_overrides(a) -> dict[str, object]:
    return {
        "matrix_path": a.matrix, "method": a.method, "target": a.target,
        "subspace_max": a.subspace_max, "restart_len": a.restart_len,
        "gmres_iters": a.gmres_iters, "tol": a.tol, "max_outer": a.max_outer,
        "initial": a.initial, "initial_path": a.initial_file, "seed": a.seed,
        "output_dir": a.out,
        "compute_refined_every_step": False if a.no_refined else None,
        "emit_plots": True if getattr(a, "plots", False) else None,
        "strict": True if a.strict else None,
    }


def cmd_run(cfg: ExperimentConfig) -> int:
    A = _load_matrix(cfg.matrix_path, cfg.strict)
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _die(f"cannot create output directory {out}: {exc}", EXIT_IO)
    t0 = time.perf_counter()
    res = run_solver(A, cfg.solver)
    elapsed = time.perf_counter() - t0
    trace = out / "trace.csv"
    bad = write_trace(res.trace, trace)
    s = summarize(res.trace)
    print(f"method={cfg.solver.method} n={A.n} nnz={A.nnz} "
          f"iterations={s['iterations']} time={elapsed:.2f}s")
    print(f"converged={res.converged} theta={res.theta.real:.15g}{res.theta.imag:+.15g}i "
          f"residual={res.residual_norm:.3e}")
    if res.converged:
        print(f"convergence iteration={s['iterations']}")
    print(f"max tau={s['max_tau']:.12g}")
    print(f"K/sigma^2 in [{s['ratio_min']:.12g}, {s['ratio_max']:.12g}]")
    print(f"flagged rows={s['flagged']} rows outside [L,U]={bad}")
    print(f"trace: {trace}")
    if cfg.emit_plots:
        for p in emit_plot_scripts(trace, out):
            print(f"plot script: {p}")
    return EXIT_OK


def cmd_verify(n: int, k: int, instances: int, seed: int, select: str = "rightmost",
               out=None, tau_offset: float = 0.0, threads: int | None = None) -> int:
    if not n >= k >= 2:
        return _die(f"need n >= k >= 2, got n={n}, k={k}", EXIT_IO)
    t0 = time.perf_counter()
    outcomes = run_verify(n, k, instances, seed, select, tau_offset, threads)
    elapsed = time.perf_counter() - t0
    print(f"{'check':<40}{'evaluated':>10}{'passed':>8}{'skipped':>8}{'worst res/tol':>15}")
    for name, ev, ok, sk, worst in verify_table(outcomes):
        print(f"{name:<40}{ev:>10}{ok:>8}{sk:>8}{worst:>15.3g}")
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_verify_csv(outcomes))
    print(f"{instances} instances, n={n}, k={k}, seed={seed}, {elapsed:.2f}s")
    for o in outcomes:
        fail = o.suite.first_failure()
        if fail is not None:
            print(f"FAIL: instance {o.index}: check {fail.name} residual "
                  f"{fail.residual:.3e} > tolerance {fail.tolerance:.3e}")
            return EXIT_FAIL
    print("all checks passed")
    return EXIT_OK


def cmd_plot(trace_path, out=None, render: bool = False) -> int:
    try:
        files = emit_plot_scripts(trace_path, out, render=render)
    except BadTrace as exc:
        return _die(str(exc), EXIT_FAIL)
    for p in files:
        print(p)
    return EXIT_OK


def cmd_extract(cfg: ExperimentConfig, k: int) -> int:
    A = _load_matrix(cfg.matrix_path, cfg.strict)
    if not 1 <= k <= A.n:
        return _die(f"need 1 <= k <= n={A.n}, got k={k}", EXIT_FAIL)
    fact = arnoldi_expand(A, ArnoldiFactorization.start(initial_vector(cfg.solver, A.n)), k)
    V = fact.basis
    if V.shape[1] < k:
        print(f"note: Krylov space is invariant at dimension {V.shape[1]}")
    rep = extract(A, V, cfg.solver.target, compute_refined=True)
    print(f"basis dimension  = {V.shape[1]}")
    print(rep.summary())
    return EXIT_OK


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--matrix", help="Matrix Market file (.mtx or .mtx.gz)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--target", choices=SELECTION_RULES)
    p.add_argument("--subspace-max", type=int)
    p.add_argument("--restart-len", type=int)
    p.add_argument("--gmres-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--initial", choices=INITIALS)
    p.add_argument("--initial-file", help="start vector file for --initial file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-refined", action="store_true",
                   help="skip the refined vector (no sigma^2, ratio or alpha3 in the trace)")
    p.add_argument("--strict", action="store_true",
                   help="reject duplicate Matrix Market entries instead of summing them")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ritz-extract",
                                 description="Rayleigh-Ritz, refined and LLS eigenvector "
                                             "extraction experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a solver and write a CSV trace")
    _add_solver_flags(p)
    p.add_argument("--plots", action="store_true", help="also write plot scripts")

    p = sub.add_parser("verify", help="identity suite on seeded random instances")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--target", choices=SELECTION_RULES, default="rightmost")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", help="per-check CSV output file")
    p.add_argument("--inject-tau-error", type=float, default=0.0, help=argparse.SUPPRESS)

    p = sub.add_parser("plot", help="write plot scripts for a trace")
    p.add_argument("trace")
    p.add_argument("--out", help="directory for the scripts (default: next to the trace)")
    p.add_argument("--render", action="store_true", help="also render PNGs with matplotlib")

    p = sub.add_parser("extract", help="one-shot extraction on a k-dimensional Krylov basis")
    _add_solver_flags(p)
    p.add_argument("--k", type=int, default=10)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if a.cmd == "verify":
            return cmd_verify(a.n, a.k, a.instances, a.seed, a.target, a.out,
                              a.inject_tau_error, a.threads)
        if a.cmd == "plot":
            return cmd_plot(a.trace, a.out, a.render)
        try:
            cfg = load_config(a.config, _solver_overrides(a))
        except OSError as exc:
            return _die(f"cannot read config: {exc}", EXIT_IO)
        except ValueError as exc:
            return _die(f"bad configuration: {exc}", EXIT_IO)
        if a.cmd == "run":
            return cmd_run(cfg)
        return cmd_extract(cfg, a.k)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except RitzExtractError as exc:
        return _die(f"{type(exc).__name__}: {exc}", EXIT_FAIL)


if __name__ == "__main__":
    sys.exit(main())
