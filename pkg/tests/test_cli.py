import json
import subprocess
import sys

import pytest

from lamperti.chain_model import BirthDeath, Rescaled, SplittableExample
from lamperti.cli import STATS_HEADER, main
from lamperti.specfile import SpecFileError, corpus_paths, dumps, load_spec, spec_from_dict, validate_report

CORPUS = {p.stem: p for p in corpus_paths()}


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


# -- spec files ------------------------------------------------------------


def test_corpus_is_complete():
    expected = {"symmetric_walk", "splittable_sym", "splittable_c05", "splittable_mixed"}
    expected |= {f"lamperti_c{c}" for c in ("0.5", "1", "1.5", "2", "4")}
    assert expected <= CORPUS.keys()
    assert any(k.startswith("rescaled") for k in CORPUS)


def test_corpus_specs_load():
    for path in CORPUS.values():
        spec, doc = load_spec(path)
        assert doc["name"] == path.stem
        assert spec.max_jump <= doc["max_jump"]


def test_load_builds_the_right_chain():
    spec = spec_from_dict({"kind": "rescaled", "max_jump": 14, "k": 2,
                           "inner": {"kind": "splittable_example", "max_jump": 7,
                                     "p_even": "0.5", "p_mod1": "0.5", "p_mod3": "0.5"}})
    assert spec == Rescaled(SplittableExample("0.5", "0.5", "0.5"), 2)
    assert spec_from_dict({"kind": "birth_death", "max_jump": 1, "p": "0.5"}) == BirthDeath("0.5")


def test_unknown_key_is_named():
    with pytest.raises(SpecFileError) as info:
        spec_from_dict({"kind": "birth_death", "max_jump": 1, "p": "0.5", "colour": "red"})
    assert "colour" in str(info.value)


def test_nested_problems_carry_paths():
    with pytest.raises(SpecFileError) as info:
        spec_from_dict({"kind": "rescaled", "max_jump": 2, "k": 2,
                        "inner": {"kind": "birth_death", "max_jump": 1, "p": "0.5", "extra": 1}})
    assert info.value.problems[0].startswith("/inner")


def test_every_expression_error_is_reported():
    with pytest.raises(SpecFileError) as info:
        spec_from_dict({"kind": "splittable_example", "max_jump": 7,
                        "p_even": "y", "p_mod1": "0.5 + + x", "p_mod3": "0.5"})
    problems = info.value.problems
    assert len(problems) == 2
    assert problems[0].startswith("/p_even") and problems[1].startswith("/p_mod1")
    assert "byte 6" in problems[1]


def test_declared_max_jump_must_cover_kernel():
    with pytest.raises(SpecFileError):
        spec_from_dict({"kind": "splittable_example", "max_jump": 4,
                        "p_even": "0.5", "p_mod1": "0.5", "p_mod3": "0.5"})


def test_jump_kernel_spec():
    spec = spec_from_dict(json.loads(CORPUS["lazy_walk_c2"].read_text()))
    assert spec.kind == "jump_kernel"


def test_dumps_nulls_non_finite():
    assert json.loads(dumps({"a": float("nan"), "b": [float("inf"), 1.0]})) == {"a": None, "b": [None, 1.0]}


# -- classify ----------------------------------------------------------------


def test_classify_c2(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, err = run(["classify", CORPUS["lamperti_c2"], "--out", out], capsys)
    assert code == 0
    assert "Transient" in err and "theta=2" in err
    report = json.loads(out.read_text())
    validate_report(report)
    assert report["result"]["headline"] == "Transient"


def test_classify_splittable_to_stdout(capsys):
    code, out, err = run(["classify", CORPUS["splittable_sym"]], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["result"]["headline"] == "Recurrent"
    assert len(report["result"]["decomposition"]["components"]) == 3
    assert "3 components" in err


def test_classify_malformed(tmp_path, capsys):
    bad = tmp_path / "malformed.json"
    bad.write_text(json.dumps({"kind": "birth_death", "max_jump": 1, "p": "0.5", "colour": "red"}))
    code, out, err = run(["classify", bad], capsys)
    assert code == 1 and out == ""
    assert "colour" in err and "malformed.json" in err


def test_classify_inconclusive_exit_code(tmp_path, capsys):
    spec = tmp_path / "edge.json"
    spec.write_text(json.dumps({"kind": "birth_death", "max_jump": 1, "p": "0.5 + 1.03/(4*x)"}))
    code, out, _ = run(["classify", spec], capsys)
    assert code == 2
    assert json.loads(out)["result"]["headline"] == "Inconclusive"


def test_missing_file_and_bad_usage(capsys):
    assert run(["classify", "/nonexistent.json"], capsys)[0] == 1
    assert run(["classify"], capsys)[0] == 1
    assert run(["classify", CORPUS["symmetric_walk"], "--grid", "16:1:3"], capsys)[0] == 1


def test_classify_with_simulation(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code, out, err = run(["classify", CORPUS["lamperti_c4"], "--simulate", "--paths", "50",
                          "--steps", "3000", "--trace", trace], capsys)
    assert code == 0
    report = json.loads(out)
    validate_report(report)
    sim = report["simulation"]
    assert sim["consistency"] == "Consistent"
    assert sim["config"]["n_paths"] == 50
    assert trace.read_text().startswith("path_id,step,state\n")


def test_grid_flag_is_recorded(capsys):
    code, out, _ = run(["classify", CORPUS["lamperti_c1.5"], "--grid", "20:2:10"], capsys)
    assert code == 0
    assert json.loads(out)["config"]["grid"] == [20 * 2**k + k for k in range(10)]


# -- stats -------------------------------------------------------------------


def _rows(text):
    lines = text.splitlines()
    assert lines[0] == ",".join(STATS_HEADER)
    return [dict(zip(STATS_HEADER, line.split(","))) for line in lines[1:] if not line.startswith("#")]


def test_stats_symmetric_walk(capsys):
    code, out, _ = run(["stats", CORPUS["symmetric_walk"], "--grid", "16:2:11"], capsys)
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 11
    assert all(float(r["mu"]) == 0.0 for r in rows)


def test_stats_c2_two_x_mu_constant(capsys):
    _, out, _ = run(["stats", CORPUS["lamperti_c2"]], capsys)
    # mu = U - D cancels about 1/x worth of digits
    assert all(float(r["two_x_mu"]) == pytest.approx(2.0, abs=1e-10) for r in _rows(out))


def test_stats_splittable_is_tagged_by_component(tmp_path, capsys):
    dest = tmp_path / "s.csv"
    code, _, _ = run(["stats", CORPUS["splittable_sym"], "--csv", dest], capsys)
    text = dest.read_text()
    assert code == 0
    assert [line for line in text.splitlines() if line.startswith("#")] == [
        "# component 0 modulus=2 residue=0",
        "# component 1 modulus=4 residue=1",
        "# component 2 modulus=4 residue=3",
    ]
    assert len(_rows(text)) == 36


def test_stats_without_split(capsys):
    _, out, _ = run(["stats", CORPUS["splittable_sym"], "--no-split"], capsys)
    assert "#" not in out
    assert {r["v"] for r in _rows(out)} == {"4.0", "16.0"}


# -- simulate ----------------------------------------------------------------


def test_simulate_is_byte_identical(tmp_path, capsys):
    outs = []
    for i in range(2):
        dest = tmp_path / f"s{i}.json"
        assert run(["simulate", CORPUS["symmetric_walk"], "--seed", "42", "--paths", "100",
                    "--steps", "2000", "--out", dest], capsys)[0] == 0
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1]
    assert "return_fraction" in json.loads(outs[0])["report"]


def test_simulate_trace(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    code, out, _ = run(["simulate", CORPUS["lamperti_c2"], "--paths", "3", "--steps", "10",
                        "--x0", "7", "--r", "2", "--trace", trace], capsys)
    assert code == 0
    lines = trace.read_text().splitlines()
    assert len(lines) == 1 + 3 * 11
    assert json.loads(out)["config"] == {"master_seed": 42, "n_paths": 3, "n_steps": 10, "r": 2, "x0": 7}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lamperti", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "classify" in proc.stdout and "LAMPERTI_LOG" in proc.stdout


def test_help_documents_defaults():
    proc = subprocess.run([sys.executable, "-m", "lamperti", "classify", "--help"], capture_output=True, text=True)
    for text in ("16:2:12", "4096", "--theta-gap", "--strict-prob", "default: 42"):
        assert text in proc.stdout
