"""Experiment plumbing: configs, CSV traces, plot scripts, the verify runner."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import SuiteResult, identity_suite
from .dense import orthonormalize
from .errors import BadTrace
from .extraction import ExtractionReport, extract
from .krylov import IterationRecord, SolverConfig
from .sparse import CsrMatrix

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "theta_re", "theta_im", "r2_y", "K", "rho_s", "sigma_sq", "tau",
                 "znorm_sq", "L", "U", "ratio", "sigma_pred_lo", "sigma_pred_hi", "alpha3",
                 "flags")
VERIFY_COLUMNS = ("instance", "check", "residual", "tolerance", "passed", "gating")


@dataclass
class ExperimentConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    matrix_path: str | None = None
    output_dir: str = "out"
    emit_plots: bool = False
    verify: bool = False
    strict: bool = False


_SOLVER_KEYS = {f.name: f.type for f in dataclasses.fields(SolverConfig)}
_EXPERIMENT_KEYS = ("matrix_path", "output_dir", "emit_plots", "verify", "strict")
_ALIASES = {"matrix": "matrix_path", "out": "output_dir", "initial_file": "initial_path",
            "refined": "compute_refined_every_step", "plots": "emit_plots"}


def _coerce(value: str, current):
    if isinstance(current, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        k = k.strip().replace("-", "_")
        out[_ALIASES.get(k, k)] = v.strip()
    return out


def build_config(values: dict[str, object]) -> ExperimentConfig:
    """Apply string or typed overrides on top of the defaults."""
    base_solver = SolverConfig()
    base = ExperimentConfig()
    skw: dict[str, object] = {}
    ekw: dict[str, object] = {}
    for k, v in values.items():
        k = _ALIASES.get(k, k)
        if v is None:
            continue
        if k in _SOLVER_KEYS:
            cur = getattr(base_solver, k)
            skw[k] = _coerce(v, cur) if isinstance(v, str) and cur is not None else v
        elif k in _EXPERIMENT_KEYS:
            cur = getattr(base, k)
            ekw[k] = _coerce(v, cur) if isinstance(v, str) and cur is not None else v
        else:
            raise ValueError(f"unknown config key {k!r}")
    return ExperimentConfig(solver=SolverConfig(**skw), **ekw)


def load_config(path, overrides: dict[str, object] | None = None) -> ExperimentConfig:
    values: dict[str, object] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


# ---------------------------------------------------------------------------
# Traces

def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def flags_str(flags) -> str:
    return "|".join(sorted(str(f) for f in flags))


def trace_rows(records) -> list[list[str]]:
    rows = []
    for r in records:
        rows.append([str(r.iter), _num(r.theta.real), _num(r.theta.imag), _num(r.r2_y),
                     _num(r.K), _num(r.rho_s), _num(r.sigma_sq), _num(r.tau),
                     _num(r.znorm_sq), _num(r.L), _num(r.U), _num(r.ratio),
                     _num(r.sigma_pred_lo), _num(r.sigma_pred_hi), _num(r.alpha3),
                     flags_str(r.flags)])
    return rows


def format_trace(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(trace_rows(records))
    return buf.getvalue()


def write_trace(records, path) -> int:
    """Write the CSV trace; returns the number of unflagged rows outside ``[L, U]``."""
    records = list(records)
    bad = [r.iter for r in records if not r.flags and not r.within_bounds()]
    if bad:
        log.warning("K/sigma^2 outside [L, U] at unflagged iterations %s", bad)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trace(records))
    return len(bad)


def read_trace(path) -> list[dict[str, object]]:
    """Parse a trace CSV back into dicts of floats (``flags`` stays a string)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BadTrace(f"cannot read trace {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise BadTrace(f"{path}: header does not match trace schema")
    if len(rows) == 1:
        raise BadTrace(f"{path}: trace has no rows")
    out = []
    for i, row in enumerate(rows[1:], 2):
        if len(row) != len(TRACE_COLUMNS):
            raise BadTrace(f"{path}:{i}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
        rec: dict[str, object] = {}
        try:
            for name, val in zip(TRACE_COLUMNS, row):
                if name == "flags":
                    rec[name] = val
                elif name == "iter":
                    rec[name] = int(val)
                else:
                    rec[name] = float(val)
        except ValueError as exc:
            raise BadTrace(f"{path}:{i}: {exc}") from exc
        out.append(rec)
    return out


def summarize(records) -> dict[str, object]:
    records = list(records)
    taus = [r.tau for r in records]
    ratios = [r.ratio for r in records if not r.flags and not math.isnan(r.ratio)]
    return {
        "iterations": len(records),
        "max_tau": max(taus) if taus else float("nan"),
        "min_tau": min((r.tau for r in records if not r.flags), default=float("nan")),
        "ratio_min": min(ratios) if ratios else float("nan"),
        "ratio_max": max(ratios) if ratios else float("nan"),
        "flagged": sum(1 for r in records if r.flags),
        "outside_bounds": sum(1 for r in records if not r.flags and not r.within_bounds()),
    }


# ---------------------------------------------------------------------------
# Plot scripts

PLOTS = {
    "znorm_sq": ("Iteration vs ||(I-yy*)z||^2", ["znorm_sq"], True),
    "ratio_bounds": ("Iteration vs K/sigma^2 and its bounds", ["ratio", "L", "U"], False),
    "tau": ("Iteration vs tau", ["tau"], False),
}


def _gnuplot_script(csv_name: str, title: str, cols: list[str], logy: bool) -> str:
    lines = [
        f"# {title}",
        "# Generated from the trace CSV; rows with flags are marked, not dropped.",
        "set datafile separator ','",
        "set datafile missing 'nan'",
        f"set title '{title}'",
        "set xlabel 'iteration'",
        "set key outside",
    ]
    if logy:
        lines.append("set logscale y")
    plots = [f"'{csv_name}' using (column('iter')):(column('{c}')) with lines title '{c}'"
             for c in cols]
    plots.append(f"'{csv_name}' using (column('iter')):"
                 f"(strcol('flags') eq '' ? NaN : column('{cols[0]}')) "
                 "with points pt 6 title 'flagged'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def emit_plot_scripts(trace_path, out_dir=None, render: bool = False) -> list[Path]:
    """Write three gnuplot scripts reading the trace CSV by column name.

    With ``render`` the same figures are also drawn to PNG via matplotlib.
    """
    trace_path = Path(trace_path)
    rows = read_trace(trace_path)
    out_dir = Path(out_dir) if out_dir is not None else trace_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    rel = os.path.relpath(trace_path, out_dir)
    written = []
    for name, (title, cols, logy) in PLOTS.items():
        p = out_dir / f"{name}.gp"
        p.write_text(_gnuplot_script(rel, title, cols, logy), encoding="utf-8")
        written.append(p)
    if render:
        written += _render_png(rows, out_dir)
    return written


def _render_png(rows, out_dir: Path) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    it = np.array([r["iter"] for r in rows])
    flagged = np.array([bool(r["flags"]) for r in rows])
    out = []
    for name, (title, cols, logy) in PLOTS.items():
        fig, ax = plt.subplots(figsize=(8, 2.6))
        for c in cols:
            ax.plot(it, [r[c] for r in rows], label=c)
        y0 = np.array([r[cols[0]] for r in rows])
        if flagged.any():
            ax.plot(it[flagged], y0[flagged], "o", mfc="none", label="flagged")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_title(title)
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        p = out_dir / f"{name}.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        out.append(p)
    return out


# ---------------------------------------------------------------------------
# Random instances and the verify runner

def random_instance(n: int, k: int, seed: int, index: int = 0):
    """Complex Gaussian ``A`` (n-by-n) and a random orthonormal ``V`` (n-by-k).

    The generator is keyed on ``(seed, index)`` so instances do not depend on
    evaluation order.
    """
    rng = np.random.default_rng([seed, index])
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    W = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return CsrMatrix.from_dense(A), orthonormalize(W)


@dataclass
class VerifyOutcome:
    index: int
    report: ExtractionReport
    suite: SuiteResult


def verify_one(n: int, k: int, seed: int, index: int, select: str = "rightmost",
               tau_offset: float = 0.0) -> VerifyOutcome:
    A, V = random_instance(n, k, seed, index)
    rep = extract(A, V, select)
    if tau_offset:
        rep = dataclasses.replace(rep, lls=dataclasses.replace(rep.lls, tau=rep.lls.tau + tau_offset))
    return VerifyOutcome(index, rep, identity_suite(rep))


def thread_cap() -> int:
    raw = os.environ.get("RITZ_EXTRACT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, min(8, os.cpu_count() or 1))


def run_verify(n: int, k: int, instances: int, seed: int, select: str = "rightmost",
               tau_offset: float = 0.0, threads: int | None = None) -> list[VerifyOutcome]:
    """Evaluate ``instances`` seeded random problems; results ordered by index."""
    if not n >= k >= 2:
        raise ValueError(f"need n >= k >= 2, got n={n}, k={k}")
    threads = thread_cap() if threads is None else max(1, threads)
    args = range(instances)
    job = lambda i: verify_one(n, k, seed, i, select, tau_offset)  # noqa: E731
    if threads == 1 or instances <= 1:
        return [job(i) for i in args]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(job, args))


def format_verify_csv(outcomes) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VERIFY_COLUMNS)
    for o in outcomes:
        for c in o.suite.checks:
            w.writerow([o.index, c.name, _num(c.residual), _num(c.tolerance),
                        int(c.passed), int(c.gating)])
        for name in o.suite.skipped:
            w.writerow([o.index, name, "nan", "nan", "skipped", 0])
    return buf.getvalue()


def verify_table(outcomes) -> list[tuple[str, int, int, int, float]]:
    """Per check: (name, evaluated, passed, skipped, worst residual/tolerance)."""
    from .bounds import ALL_CHECKS
    stats = {n: [0, 0, 0, 0.0] for n in ALL_CHECKS}
    for o in outcomes:
        for c in o.suite.checks:
            st = stats[c.name]
            st[0] += 1
            st[1] += int(c.passed)
            if c.tolerance > 0:
                st[3] = max(st[3], c.residual / c.tolerance)
            elif c.residual > 0:
                st[3] = math.inf
        for name in o.suite.skipped:
            stats[name][2] += 1
    return [(n, *v) for n, v in stats.items()]
