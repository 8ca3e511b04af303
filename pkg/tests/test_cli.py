import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qdisturb import cli, data_path
from qdisturb.fixtures import example_A, fixture_documents

FIX = Path(__file__).parent / "fixtures"
EX3 = str(data_path("examples_3x3.json"))
QUBIT = str(data_path("qubit.json"))
D5 = str(data_path("unit_eigenvalue_d5.json"))
KEYS = {"command", "inputs", "value", "decision", "dual_bound", "gap", "status"}


def run(*argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(*argv, capsys):
    code, out, _ = run(*argv, "--json", capsys=capsys)
    rep = json.loads(out)
    assert set(rep) == KEYS
    return code, rep


# ---------------------------------------------------------------- documents


@pytest.mark.parametrize("name", ["examples_3x3.json", "qubit.json", "unit_eigenvalue_d5.json"])
def test_shipped_files_match_generator(name):
    text = Path(str(data_path(name))).read_text()
    assert cli.dumps(fixture_documents()[name], digits=17) == text


@pytest.mark.parametrize("name", ["examples_3x3.json", "qubit.json", "unit_eigenvalue_d5.json"])
def test_round_trip_is_exact(name):
    doc = cli.load(data_path(name))
    again = cli.loads(cli.dumps(doc))
    assert cli.dumps(again, digits=17) == Path(str(data_path(name))).read_text()
    for key in doc.observables:
        for e1, e2 in zip(doc.observables[key].effects, again.observables[key].effects):
            assert np.array_equal(e1, e2)
    for key in doc.instruments:
        assert again.conventions[key] == doc.conventions[key]
        for g1, g2 in zip(doc.instruments[key].kraus, again.instruments[key].kraus):
            for k1, k2 in zip(g1, g2):
                assert np.array_equal(k1, k2)


def test_heisenberg_tag_adjoints_on_load():
    doc = cli.load(EX3)
    assert doc.conventions["I"] == "heisenberg"
    raw = json.loads(Path(EX3).read_text())
    k1 = cli.parse_matrix(raw["instruments"]["I"]["kraus"][0][0], "k")
    assert np.array_equal(doc.instruments["I"].kraus[0][0], k1.conj().T)


def test_fixture_entries_are_17_digit_decimals():
    text = Path(EX3).read_text()
    assert "0.35355339059327379" in text
    doc = cli.load(EX3)
    assert np.abs(np.array(doc.observables["A"].effects) - np.array(example_A().effects)).max() < 1e-16


def test_default_convention_is_schrodinger():
    text = json.dumps({"version": 1, "dimension": 1, "instruments": {"T": {"kraus": [[[[[1, 0]]]]]}}})
    assert cli.loads(text).conventions["T"] == "schrodinger"


@pytest.mark.parametrize(
    "raw, where",
    [
        ({"version": 2, "dimension": 2}, "version"),
        ({"version": 1, "dimension": 0}, "dimension"),
        ({"version": 1, "dimension": 1, "observables": {"A": {"effects": [[[["x", 0]]]]}}}, "observables.A.effects[0][0][0]"),
        ({"version": 1, "dimension": 2, "observables": {"A": [[[[1, 0]]]]}}, "observables.A.effects[0]"),
        ({"version": 1, "dimension": 1, "instruments": {"T": {"convention": "other", "kraus": []}}}, "convention"),
        ({"version": 1, "dimension": 1, "solver": {"tolerance": 1}}, "solver.tolerance"),
        ({"version": 1, "dimension": 1, "observables": {"A": {"effects": [[[[1, 0]]]], "outcomes": ["a", "b"]}}}, "outcomes"),
    ],
)
def test_parse_errors_name_location(raw, where):
    with pytest.raises(cli.InputError, match=where.replace("[", r"\[").replace("]", r"\]")):
        cli.parse_document(raw)


# ----------------------------------------------------------------- validate


def test_validate_paper_fixture(capsys):
    code, out, _ = run("validate", EX3, capsys=capsys)
    assert code == 0
    assert "instrument I (heisenberg): valid" in out


def test_validate_non_normalized(capsys):
    code, out, _ = run("validate", FIX / "non_normalized.json", capsys=capsys)
    assert code == 1
    assert "observable Bad: INVALID" in out
    assert "observable Good: valid" in out


def test_validate_non_hermitian(capsys):
    code, out, _ = run("validate", FIX / "non_hermitian.json", capsys=capsys)
    assert code == 1
    assert "not Hermitian" in out


def test_validate_bad_instrument(capsys):
    code, out, _ = run("validate", FIX / "bad_instrument.json", capsys=capsys)
    assert code == 1
    assert "Leaky" in out


@pytest.mark.parametrize(
    "name, msg",
    [("malformed_row.json", "observables.Z.effects[0][1]"), ("bad_syntax.json", "line 5 column"), ("no_version.json", "version")],
)
def test_input_errors(name, msg, capsys):
    code, out, err = run("validate", FIX / name, capsys=capsys)
    assert code == 2
    assert msg in err


def test_missing_file(capsys):
    code, _, err = run("validate", FIX / "nope.json", capsys=capsys)
    assert code == 2


def test_bad_command_line(capsys):
    assert cli.main(["bogus", QUBIT]) == 2
    assert cli.main(["disturb", QUBIT, "Z"]) == 2
    capsys.readouterr()


# ------------------------------------------------------------------ analyses


def test_disturb_example_pair(capsys):
    code, rep = run_json("disturb", EX3, "A", "B", capsys=capsys)
    assert code == 0
    assert rep["value"] < 1e-7
    assert rep["decision"] is True
    assert rep["status"] == "optimal"


def test_disturb_qubit(capsys):
    code, rep = run_json("disturb", QUBIT, "Z", "X", capsys=capsys)
    assert code == 0
    assert rep["value"] == pytest.approx(0.5, abs=1e-6)
    assert rep["decision"] is False
    assert rep["inputs"] == {"file": QUBIT, "A": "Z", "B": "X"}


def test_disturb_asymmetric_order(capsys):
    code, rep = run_json("disturb", EX3, "B", "A5", capsys=capsys)
    assert code == 0
    assert rep["value"] > 1e-3
    assert rep["decision"] is False
    assert abs(rep["gap"]) < 1e-6


def test_disturb_tol_flag(capsys):
    _, rep = run_json("disturb", EX3, "B", "A5", "--tol", "0.2", capsys=capsys)
    assert rep["decision"] is True


def test_disturb_unknown_name(capsys):
    code, _, err = run("disturb", QUBIT, "Z", "Q", capsys=capsys)
    assert code == 2
    assert "unknown observable 'Q'" in err


def test_disturb_invalid_observable(capsys):
    code, out, _ = run("disturb", FIX / "non_normalized.json", "Good", "Bad", capsys=capsys)
    assert code == 1
    assert "Bad" in out


def test_disturb_solver_failure(capsys):
    code, rep = run_json("disturb", FIX / "solver_limit.json", "Z", "X", capsys=capsys)
    assert code == 3
    assert rep["status"] == "max-iterations"


def test_joint(capsys):
    code, rep = run_json("joint", QUBIT, "Z06", "X06", capsys=capsys)
    assert code == 0 and rep["decision"] is True and rep["value"] > 0
    code, rep = run_json("joint", QUBIT, "Z", "X", capsys=capsys)
    assert code == 0 and rep["decision"] is False


def test_firstkind(capsys):
    code, rep = run_json("firstkind", QUBIT, "T", capsys=capsys)
    assert code == 0 and rep["value"] > 1e-3 and rep["decision"] is False
    code, rep = run_json("firstkind", D5, "A", capsys=capsys)
    assert code == 0 and rep["value"] < 1e-7


def test_repeatable(capsys):
    code, rep = run_json("repeatable", D5, "R", capsys=capsys)
    assert code == 0 and rep["decision"] is True
    code, out, _ = run("repeatable", EX3, "I", capsys=capsys)
    assert code == 0 and "repeatable: no" in out
    code, _, _ = run("repeatable", FIX / "bad_instrument.json", "Leaky", capsys=capsys)
    assert code == 1
    code, _, _ = run("repeatable", EX3, "A", capsys=capsys)
    assert code == 2


def test_fixedpoints(capsys):
    code, out, _ = run("fixedpoints", EX3, "I", "B", capsys=capsys)
    assert code == 0
    assert "B[1] in fix(Ic*): yes" in out and "B[2] in fix(Ic*): yes" in out
    code, rep = run_json("fixedpoints", EX3, "I", "B", capsys=capsys)
    assert rep["value"]["dimension"] >= 2
    assert rep["value"]["dimension"] == rep["value"]["state_dimension"]
    assert max(rep["value"]["membership_residuals"].values()) <= 1e-7


# -------------------------------------------------------------------- verify


def test_certificate_round_trip(tmp_path, capsys):
    cert = tmp_path / "c.json"
    code, rep = run_json("disturb", QUBIT, "Z", "X", "--certificate", cert, capsys=capsys)
    assert code == 0 and cert.exists()
    code, v = run_json("verify", QUBIT, cert, capsys=capsys)
    assert code == 0
    assert v["decision"] is True
    assert v["value"] == pytest.approx(0.5, abs=1e-6)
    assert v["value"] == pytest.approx(rep["dual_bound"], abs=1e-12)
    assert 0 <= v["gap"] < 1e-6
    code, out, _ = run("verify", QUBIT, cert, capsys=capsys)
    assert "primal instrument: feasible" in out


def test_tampered_certificate(tmp_path, capsys):
    cert = tmp_path / "c.json"
    run("disturb", QUBIT, "Z", "X", "--certificate", cert, capsys=capsys)
    raw = json.loads(cert.read_text())
    raw["K"] = [[[[2 * z[0], 2 * z[1]] for z in row] for row in k] for k in raw["K"]]
    cert.write_text(json.dumps(raw))
    code, out, _ = run("verify", QUBIT, cert, capsys=capsys)
    assert code == 1
    assert "constraint (e)" in out


def test_zero_certificate(capsys):
    code, rep = run_json("verify", QUBIT, FIX / "zero_certificate.json", capsys=capsys)
    assert code == 0
    assert rep["value"] <= 0
    assert rep["gap"] is None


def test_certificate_for_wrong_document(tmp_path, capsys):
    code, _, err = run("verify", EX3, FIX / "zero_certificate.json", capsys=capsys)
    assert code == 2


def test_console_script_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "qdisturb.cli", "disturb", QUBIT, "Z", "X", "--json"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert set(json.loads(out.stdout)) == KEYS
