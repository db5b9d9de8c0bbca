import logging

import numpy as np
import pytest

from ritz_extract.errors import BadTrace
from ritz_extract.experiment import (TRACE_COLUMNS, build_config, emit_plot_scripts,
                                     format_trace, format_verify_csv, load_config,
                                     parse_config_text, random_instance, read_trace, run_verify,
                                     summarize, write_trace)
from ritz_extract.krylov import IterationRecord, SolverConfig, run_solver
from ritz_extract.sparse import CsrMatrix


def record(i, ratio=1.2, flags=frozenset()):
    return IterationRecord(i, complex(2.0, -0.5), 1.0, 0.5, 0.4, 0.5 / ratio, 1.3, 0.1,
                           1.13, 1.2366, ratio, 0.01, 0.9, 1.2, flags)


def test_config_text_and_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# experiment\nmethod = arnoldi\nrestart-len=12  # comment\n"
                 "matrix = m.mtx\nrefined = false\n")
    cfg = load_config(p, {"tol": 1e-6, "restart_len": None})
    assert cfg.solver.method == "arnoldi" and cfg.solver.restart_len == 12
    assert cfg.solver.tol == 1e-6 and cfg.matrix_path == "m.mtx"
    assert cfg.solver.compute_refined_every_step is False
    with pytest.raises(ValueError):
        parse_config_text("no equals sign")
    with pytest.raises(ValueError):
        build_config({"colour": "blue"})


def test_trace_round_trip(tmp_path):
    recs = [record(1), record(2, flags=frozenset({"ZeroCorrection"})), record(3)]
    p = tmp_path / "t.csv"
    assert write_trace(recs, p) == 0
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.decode().splitlines()[0] == ",".join(TRACE_COLUMNS)
    rows = read_trace(p)
    assert [r["iter"] for r in rows] == [1, 2, 3]
    assert rows[1]["flags"] == "ZeroCorrection"
    assert rows[0]["theta_im"] == -0.5 and rows[0]["ratio"] == 1.2


def test_trace_seventeen_digits():
    r = record(1, ratio=1 / 3)
    assert float(format_trace([r]).splitlines()[1].split(",")[11]) == 1 / 3


def test_write_time_bound_recheck(tmp_path, caplog):
    bad = record(1, ratio=5.0)
    with caplog.at_level(logging.WARNING):
        assert write_trace([bad, record(2)], tmp_path / "t.csv") == 1
    assert "outside [L, U]" in caplog.text
    assert len(read_trace(tmp_path / "t.csv")) == 2


@pytest.mark.parametrize("text", ["", "iter,theta\n1,2\n", ",".join(TRACE_COLUMNS) + "\n"])
def test_bad_traces(tmp_path, text):
    p = tmp_path / "t.csv"
    p.write_text(text)
    with pytest.raises(BadTrace):
        read_trace(p)


def test_plot_scripts(tmp_path):
    recs = [record(i, flags=frozenset({"TauDegenerate"}) if i == 7 else frozenset())
            for i in range(1, 201)]
    p = tmp_path / "trace.csv"
    write_trace(recs, p)
    files = emit_plot_scripts(p)
    assert sorted(f.name for f in files) == ["ratio_bounds.gp", "tau.gp", "znorm_sq.gp"]
    text = {f.name: f.read_text() for f in files}
    assert "set logscale y" in text["znorm_sq.gp"] and "column('znorm_sq')" in text["znorm_sq.gp"]
    assert all(f"column('{c}')" in text["ratio_bounds.gp"] for c in ("ratio", "L", "U"))
    assert all("strcol('flags')" in t for t in text.values())
    with pytest.raises(BadTrace):
        emit_plot_scripts(tmp_path / "missing.csv")


def test_plot_render(tmp_path):
    pytest.importorskip("matplotlib")
    p = tmp_path / "trace.csv"
    write_trace([record(i) for i in range(1, 6)], p)
    pngs = [f for f in emit_plot_scripts(p, render=True) if f.suffix == ".png"]
    assert len(pngs) == 3 and all(f.stat().st_size > 0 for f in pngs)


def test_random_instances_are_keyed():
    A1, V1 = random_instance(20, 4, 7, 3)
    A2, V2 = random_instance(20, 4, 7, 3)
    assert np.array_equal(V1, V2) and np.array_equal(A1.values, A2.values)
    assert np.linalg.norm(V1.conj().T @ V1 - np.eye(4)) <= 1e-13


def test_verify_parallel_deterministic(monkeypatch):
    a = format_verify_csv(run_verify(30, 5, 12, 4, threads=1))
    monkeypatch.setenv("RITZ_EXTRACT_THREADS", "4")
    b = format_verify_csv(run_verify(30, 5, 12, 4))
    assert a == b


def test_verify_tau_hook_names_e8():
    out = run_verify(20, 4, 2, 1, tau_offset=1e-3, threads=1)
    assert out[0].suite.first_failure().name == "E8"


def test_summary_and_solver_trace_determinism():
    rng = np.random.default_rng(2)
    A = CsrMatrix.from_dense(np.diag(np.arange(1.0, 61.0)) + 0.02 * rng.standard_normal((60, 60)))
    cfg = SolverConfig(method="jd", max_outer=40)
    t1 = format_trace(run_solver(A, cfg).trace)
    t2 = format_trace(run_solver(A, cfg).trace)
    assert t1 == t2
    s = summarize(run_solver(A, cfg).trace)
    assert s["iterations"] >= 1 and s["min_tau"] >= 1 - 1e-10
