import dataclasses
import json
from pathlib import Path

import pytest

from invopt import cli, registry

SYSTEMS = Path(__file__).resolve().parents[1] / "systems"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# --------------------------------------------------------------- synthesize


def test_synthesize_van_der_pol_file(capsys, tmp_path):
    out_json = tmp_path / "r.json"
    code, out, _ = run(capsys, "synthesize", "--system", SYSTEMS / "vanderpol.toml", "--out", out_json)
    assert code == cli.EXIT_OK
    assert "u = -x2" in out.splitlines()
    data = json.loads(out_json.read_text())
    assert data["u"] == "-x2" and data["case"] == "II"


def test_synthesize_auto_picks_case_three_for_unicycle(capsys):
    code, out, _ = run(capsys, "synthesize", "--system", SYSTEMS / "unicycle.toml")
    assert code == 0 and out.startswith("case: III")


def test_synthesize_case_one_on_unfit_system_is_unsupported(capsys, tmp_path):
    p = tmp_path / "s.toml"
    p.write_text('f1 = "x2"\nf2 = "x1"\n[cost]\ncase = "I"\ng = "x1"\nQ2 = "x2^2"\n')
    code, _, err = run(capsys, "synthesize", "--system", p)
    assert code == cli.EXIT_UNSUPPORTED
    assert "f2 not free of x1" in err


def test_synthesize_case_one_file_with_quadrature(capsys):
    code, out, _ = run(capsys, "synthesize", "--system", SYSTEMS / "case1_sqrt.json")
    assert code == 0 and "case: I" in out


def test_example_with_conflicting_case_is_usage_error(capsys):
    code, _, err = run(capsys, "synthesize", "--example", "unicycle", "--case", "II")
    assert code == cli.EXIT_USAGE and "defined for case" in err


@pytest.mark.parametrize(
    "argv",
    [["synthesize"], ["frobnicate"], ["synthesize", "--example", "nope"], ["synthesize", "--system", "missing.toml"],
     ["synthesize", "--example", "unicycle", "--domain", "x1=-1:1"], ["synthesize", "--example", "unicycle", "--case", "IV"],
     ["simulate", "--example", "unicycle"], ["verify", "--example", "unicycle", "--dt", "-1"]],
)
def test_bad_invocations_exit_64(capsys, argv):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(cli.main(argv))
    assert info.value.code == cli.EXIT_USAGE
    capsys.readouterr()


# ------------------------------------------------------------------- verify


def test_verify_pass_and_partial(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--example", "vanderpol")
    assert code == cli.EXIT_OK and out.splitlines()[-1] == "overall: pass"
    code, out, _ = run(capsys, "verify", "--example", "double_integrator")
    assert code == cli.EXIT_OK and out.splitlines()[-1] == "overall: pass"
    report = tmp_path / "rep.json"
    code, out, _ = run(capsys, "verify", "--system", SYSTEMS / "unicycle.toml", "--out", report)
    assert code == cli.EXIT_PARTIAL
    data = json.loads(report.read_text())
    assert data["overall"] == "partial"
    assert [c["status"] for c in data["checks"] if c["id"] == "radially_unbounded"] == ["fail"]


# ----------------------------------------------------------------- simulate


def test_simulate_writes_deterministic_csv_and_svg(capsys, tmp_path):
    paths = []
    for k in range(2):
        csv = tmp_path / f"run{k}" / "di.csv"
        csv.parent.mkdir()
        code, out, _ = run(capsys, "simulate", "--example", "double_integrator", "--x0", "1,0", "--dt", "0.01",
                           "--tmax", "30", "--out", csv, "--stride", "10")
        assert code == 0 and "converged" in out
        paths.append(csv)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    svg = [p.with_suffix(".svg") for p in paths]
    assert svg[0].read_bytes() == svg[1].read_bytes()
    assert svg[0].read_text().startswith("<svg")
    assert paths[0].read_text().splitlines()[0] == "t,x1,x2,u,L,cumcost"


def test_simulate_several_initial_states(capsys, tmp_path):
    csv = tmp_path / "uni.csv"
    code, out, _ = run(capsys, "simulate", "--system", SYSTEMS / "unicycle.toml", "--x0", "0,1", "--x0", "1,0",
                       "--dt", "0.01", "--tmax", "20", "--out", csv)
    assert code == 0 and len(out.splitlines()) == 2
    assert (tmp_path / "uni_1.csv").exists() and (tmp_path / "uni_2.csv").exists()
    assert (tmp_path / "uni.svg").exists()


def test_simulate_wrong_dimension_is_usage_error(capsys):
    code, _, err = run(capsys, "simulate", "--example", "van_der_pol", "--x0", "1,2,3")
    assert code == cli.EXIT_USAGE and "2 finite components" in err


def test_simulate_divergence_exit_code(capsys):
    code, out, err = run(capsys, "simulate", "--example", "cubic_spring", "--x0", "1e3,1e3", "--tmax", "1")
    assert code == cli.EXIT_DIVERGED
    assert "diverged" in out and "diverged" in err


# ----------------------------------------------------------------- examples


def test_examples_list(capsys):
    code, out, _ = run(capsys, "examples", "list")
    assert code == 0
    names = [line.split()[0] for line in out.splitlines()]
    assert names == list(registry.NAMES) and len(names) == 10


def test_examples_run_all_matches_every_entry(capsys):
    code, out, _ = run(capsys, "examples", "run-all")
    assert code == 0
    assert out.splitlines()[-1] == "10/10 match"


def test_examples_run_all_reports_tampered_entry(capsys, monkeypatch):
    entries = list(registry.REGISTRY[:2])
    e = entries[0]
    entries[0] = dataclasses.replace(e, expected={**e.expected, "u": e.expected["u"] + " + x1"})
    monkeypatch.setattr(registry, "REGISTRY", tuple(entries))
    code, out, _ = run(capsys, "examples", "run-all")
    assert code == cli.EXIT_FAIL
    assert out.splitlines()[-1] == "1/2 match"
    assert "u:MISMATCH" in out
    assert "- x1" in out or "+ x1" in out or "~ x1" in out
