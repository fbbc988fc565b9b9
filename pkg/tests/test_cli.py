import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import (
    FIT_A_DIAG,
    FIT_A_SUPER,
    FIT_B_DIAG,
    SIM_LAM,
    SIM_MU,
    TABLE_DIAG,
    TABLE_SUPER,
    UNIQUE4_DIAG,
    UNIQUE4_SUPER,
)
from coxian import CoxianParams, build_generator, enumerate_representations, moments, sample_dataset
from coxian.cli import main
from coxian.fitter import FitOptions, select_order
from coxian.io import generator_from_document, model_document, read_durations, write_durations


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def gen_doc(diag, superdiag):
    return {"diag": list(diag), "superdiag": list(superdiag)}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out) if out.strip() else None


@pytest.fixture
def sim_model(tmp_path):
    return write_json(tmp_path / "sim.json", {"lambda": list(SIM_LAM), "mu": list(SIM_MU)})


@pytest.fixture
def table_model(tmp_path):
    return write_json(tmp_path / "table.json", gen_doc(TABLE_DIAG, TABLE_SUPER))


@pytest.fixture
def qa_model(tmp_path):
    return write_json(tmp_path / "qa.json", gen_doc(FIT_A_DIAG, FIT_A_SUPER))


@pytest.fixture
def exp_model(tmp_path):
    return write_json(tmp_path / "exp.json", {"lambda": [], "mu": [0.1]})


# -- simulate -------------------------------------------------------------------------


def test_simulate_writes_deterministic_file(capsys, tmp_path, sim_model):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, doc = run_json(capsys, "--seed", 42, "simulate", sim_model, "--n-obs", 5000, "--out", a)
    assert code == 0
    assert doc["n_obs"] == 5000
    assert doc["theoretical_mean"] == moments(build_generator(CoxianParams(SIM_LAM, SIM_MU)), 1)[0]
    assert run(capsys, "simulate", sim_model, "--n-obs", 5000, "--out", b, "--seed", 42)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert len(lines) == 5000
    data = read_durations(a)
    np.testing.assert_array_equal(data, sample_dataset(CoxianParams(SIM_LAM, SIM_MU), 5000, seed=42))
    assert doc["mean"] == pytest.approx(data.mean(), rel=1e-12)


def test_simulate_rejects_zero_observations(capsys, tmp_path, sim_model):
    code, _, err = run(capsys, "simulate", sim_model, "--n-obs", 0, "--out", tmp_path / "x.csv")
    assert code == 2 and "usage" in err
    assert not (tmp_path / "x.csv").exists()


def test_simulate_malformed_model(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "simulate", bad, "--n-obs", 5, "--out", tmp_path / "x.csv")[0] == 2
    neg = write_json(tmp_path / "neg.json", {"lambda": [-1.0], "mu": [0.1, 0.2]})
    assert run(capsys, "simulate", neg, "--n-obs", 5, "--out", tmp_path / "x.csv")[0] == 2
    missing = write_json(tmp_path / "nomu.json", {"lambda": [1.0]})
    assert run(capsys, "simulate", missing, "--n-obs", 5, "--out", tmp_path / "x.csv")[0] == 2


def test_simulate_io_failure(capsys, tmp_path, sim_model):
    assert run(capsys, "simulate", sim_model, "--n-obs", 5, "--out", tmp_path / "no" / "x.csv")[0] == 1
    assert run(capsys, "simulate", tmp_path / "absent.json", "--n-obs", 5, "--out", tmp_path / "x.csv")[0] == 1


# -- fit -------------------------------------------------------------------------------


def test_fit_exponential(capsys, tmp_path):
    data = sample_dataset(CoxianParams([], [0.25]), 3000, seed=3)
    path = tmp_path / "exp.csv"
    write_durations(path, data)
    code, doc = run_json(capsys, "fit", path, "-n", 1, "--starts", 3)
    assert code == 0 and len(doc) == 1
    assert doc[0]["model"]["mu"][0] == pytest.approx(1 / data.mean(), abs=1e-6)
    assert doc[0]["converged"] and len(doc[0]["standard_errors"]) == 1


def test_fit_example1_modes(capsys, tmp_path, example1_run):
    data, _, _ = example1_run
    path = tmp_path / "ex1.csv"
    write_durations(path, data)
    code, doc = run_json(capsys, "--seed", 42, "fit", path, "-n", 3, "--starts", 10, "--no-se")
    assert code == 0 and len(doc) >= 1
    lls = [m["loglik"] for m in doc]
    assert lls == sorted(lls, reverse=True)
    assert max(lls) - min(lls) < 0.01
    for m in doc:
        assert m["standard_errors"] is None and m["converged"]


def test_fit_header_and_table_format(capsys, tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("duration\n1.5\n2.5\n0.5\n")
    code, out, _ = run(capsys, "--format", "table", "fit", path, "--starts", 2)
    assert code == 0 and "estimate" in out and "mu" in out


@pytest.mark.parametrize("content", ["", "\n\n", "1.0\nabc\n", "1.0\n-2.0\n", "0\n"])
def test_fit_malformed_data(capsys, tmp_path, content):
    path = tmp_path / "d.csv"
    path.write_text(content)
    assert run(capsys, "fit", path)[0] == 2


def test_fit_missing_file(capsys, tmp_path):
    assert run(capsys, "fit", tmp_path / "none.csv")[0] == 1


def test_fit_order_select(capsys, tmp_path):
    path = tmp_path / "exp.csv"
    data = sample_dataset(CoxianParams([], [0.5]), 2000, seed=8)
    write_durations(path, data)
    code, doc = run_json(capsys, "fit", path, "--order-select", 2, "--starts", 3, "--no-se")
    best, table = select_order(data, 2, FitOptions(n_starts=3, seed=0, standard_errors=False))
    assert code == 0 and doc["selected_order"] == best
    assert set(doc["fits"]) == {"1", "2"}
    for n, r in table.items():
        assert doc["fits"][str(n)]["aic"] == r.aic


# -- enumerate -------------------------------------------------------------------------


def _table_rows(out):
    lines = [ln for ln in out.splitlines() if ln.strip()]
    return lines[0].split(), [ln.split() for ln in lines[1:] if not set(ln.strip()) <= set("-+ |")]


def test_enumerate_table_layout(capsys, table_model):
    code, out, _ = run(capsys, "--format", "table", "enumerate", table_model)
    assert code == 0
    header, rows = _table_rows(out)
    assert header == ["r", "V1", "V2", "V3", "b12", "b23", "LoS1", "LoS2", "LoS3"]
    assert len(rows) == 6
    assert [r[0] for r in rows] == [str(k) for k in range(1, 7)]


def test_enumerate_json_matches_library(capsys, table_model, table_gen):
    code, doc = run_json(capsys, "enumerate", table_model)
    assert code == 0
    rs = enumerate_representations(table_gen)
    assert len(doc) == len(rs) == 6
    for d, g, r in zip(doc, rs.generators, rs.perm_indices):
        assert d["metadata"]["perm_index"] == r
        np.testing.assert_array_equal(d["metadata"]["diag"], g.diag)
        np.testing.assert_array_equal(d["lambda"], g.superdiag)


def test_enumerate_four_phase_row_count_matches_library(capsys, tmp_path, unique4):
    path = write_json(tmp_path / "u4.json", gen_doc(UNIQUE4_DIAG, UNIQUE4_SUPER))
    code, out, _ = run(capsys, "--format", "csv", "enumerate", path)
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == len(enumerate_representations(unique4))


def test_enumerate_single_phase(capsys, exp_model):
    code, doc = run_json(capsys, "enumerate", exp_model)
    assert code == 0 and len(doc) == 1 and doc[0]["mu"] == [0.1]


def test_enumerate_order_cap(capsys, monkeypatch, table_model):
    monkeypatch.setenv("COXIAN_MAX_ORDER", "2")
    assert run(capsys, "enumerate", table_model)[0] == 4


def test_enumerate_malformed(capsys, tmp_path):
    path = write_json(tmp_path / "m.json", [1, 2, 3])
    assert run(capsys, "enumerate", path)[0] == 2


# -- check-equiv -----------------------------------------------------------------------


def test_check_equiv_example_pair(capsys, tmp_path, qa_model):
    qb = write_json(tmp_path / "qb.json", gen_doc(FIT_B_DIAG, [0.171, 0.029 / 0.3]))
    code, doc = run_json(capsys, "check-equiv", qa_model, qb)
    assert code == 0 and doc["equivalent"]
    np.testing.assert_allclose(doc["m"][1], [0.7, 0.3, 0.0], atol=5e-3)
    assert np.max(np.abs(np.sum(doc["m"], axis=1) - 1)) <= 1e-10


def test_check_equiv_self(capsys, qa_model):
    code, doc = run_json(capsys, "check-equiv", qa_model, qa_model)
    assert code == 0
    np.testing.assert_array_equal(doc["m"], np.eye(3))


def test_check_equiv_not_equivalent(capsys, qa_model, table_model):
    code, doc = run_json(capsys, "check-equiv", qa_model, table_model)
    assert code == 3 and not doc["equivalent"]
    assert doc["m"] is None and doc["reasons"]


def test_check_equiv_order_mismatch(capsys, qa_model, exp_model):
    assert run(capsys, "check-equiv", qa_model, exp_model)[0] == 2


def test_check_equiv_tolerance_flag(capsys, tmp_path, qa_model):
    qb = write_json(tmp_path / "qb.json", gen_doc(FIT_B_DIAG, [0.170, 0.096]))
    assert run(capsys, "check-equiv", qa_model, qb)[0] == 3
    assert run(capsys, "check-equiv", qa_model, qb, "--tol", "0.05")[0] == 0


def test_enumerate_check_equiv_pipeline(capsys, tmp_path, table_model, qa_model):
    for source in (table_model, qa_model):
        code, docs = run_json(capsys, "enumerate", source)
        assert code == 0
        for k, d in enumerate(docs):
            path = write_json(tmp_path / f"rep{k}.json", d)
            assert run(capsys, "check-equiv", source, path)[0] == 0


# -- summary ---------------------------------------------------------------------------


def test_summary_table1_row1(capsys, tmp_path):
    path = write_json(tmp_path / "t1.json", {"lambda": [0.570, 0.029], "mu": [0.001, 0.143, 0.091]})
    code, doc = run_json(capsys, "summary", path)
    assert code == 0
    np.testing.assert_allclose(doc["los"], [1.75, 5.82, 10.98], atol=0.01)
    assert abs(sum(doc["exit_probs"]) - 1) <= 1e-12
    assert doc["mu1"] == pytest.approx(0.001)


def test_summary_exponential(capsys, exp_model):
    code, doc = run_json(capsys, "summary", exp_model)
    assert code == 0
    assert doc["los"] == [10.0] and doc["exit_probs"] == [1.0]
    assert doc["moments"][0] == pytest.approx(10.0, rel=1e-14)


def test_summary_five_moments(capsys, table_model):
    code, doc = run_json(capsys, "summary", table_model, "-m", 5)
    m = doc["moments"]
    assert code == 0 and len(m) == 5
    assert all(v > 0 for v in m) and all(a < b for a, b in zip(m, m[1:]))


def test_summary_formats(capsys, table_model):
    code, out, _ = run(capsys, "--format", "csv", "summary", table_model)
    assert code == 0 and out.splitlines()[0].startswith("quantity")
    code, out, _ = run(capsys, "summary", table_model, "--format", "table")
    assert code == 0 and "phase 1" in out


def test_summary_rejects_zero_moments(capsys, table_model):
    assert run(capsys, "summary", table_model, "-m", 0)[0] == 2


# -- documents and determinism -----------------------------------------------------


def test_model_document_round_trip_is_lossless(tmp_path, rng):
    for _ in range(50):
        n = int(rng.integers(1, 6))
        p = CoxianParams(rng.uniform(0.01, 3, n - 1), np.append(rng.uniform(0, 1, n - 1), rng.uniform(0.01, 1)))
        text = json.dumps(model_document(p))
        q = generator_from_document(json.loads(text))
        g = build_generator(p)
        np.testing.assert_array_equal(q.diag, g.diag)
        np.testing.assert_array_equal(q.superdiag, g.superdiag)


def test_generator_document_keeps_diagonal_exactly():
    g = generator_from_document(gen_doc(TABLE_DIAG, TABLE_SUPER))
    np.testing.assert_array_equal(g.diag, TABLE_DIAG)
    np.testing.assert_array_equal(g.superdiag, TABLE_SUPER)


def test_commands_are_deterministic(capsys, table_model):
    first = run(capsys, "enumerate", table_model)[1]
    assert run(capsys, "enumerate", table_model)[1] == first


def test_console_script_entry_point(table_model):
    proc = subprocess.run(
        [sys.executable, "-m", "coxian", "summary", table_model], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 3
