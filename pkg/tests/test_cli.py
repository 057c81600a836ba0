import json

import pytest

from dgrre import cli


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("DGRRE_OUTPUT_DIR", str(tmp_path))
    return tmp_path


def test_run_writes_artifacts(outdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"test": "test1", "N": 16, "p": 1, "T": 0.02}))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    d = outdir / "test1_N16_p1"
    for name in ("manifest.json", "report.csv", "summary.json", "energy.csv"):
        assert (d / name).exists()
    assert any((d / "checkpoints").glob("*.csv"))
    header = (d / "report.csv").read_text().splitlines()[0].split(",")
    assert "e_R" in header and "H_R" in header
    m = json.loads((d / "manifest.json").read_text())
    assert m["config"]["N"] == 16 and m["status"] == "ok"


def test_run_is_deterministic(outdir, tmp_path):
    args = ["run", "--test", "test2", "--N", "8", "--p", "2", "--T", "0.01"]
    assert cli.main(args) == 0
    first = {p.name: p.read_bytes() for p in (outdir / "test2_N8_p2").rglob("*") if p.is_file()}
    assert cli.main(args) == 0
    second = {p.name: p.read_bytes() for p in (outdir / "test2_N8_p2").rglob("*") if p.is_file()}
    assert first == second


def test_invalid_config_exit_code(outdir, capsys):
    assert cli.main(["run", "--p", "5"]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "configuration"


def test_unknown_key_rejected(outdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nodes": 3}))
    assert cli.main(["run", "--config", str(cfg)]) == 2


def test_solver_failure_reported(outdir, monkeypatch, capsys):
    import dgrre.solver as solver

    def broken(self, u, v, tau=None):
        raise solver.StepFailure("forced", [1.0])

    monkeypatch.setattr(solver.CrankNicolson, "step", broken)
    assert cli.main(["run", "--test", "test2", "--N", "8", "--T", "0.01"]) == 1
    err = json.loads((outdir / "test2_N8_p1" / "error.json").read_text())
    assert err["error"] == "solver_failure"


def test_converge_tables(outdir, capsys):
    assert cli.main(["converge", "--test", "test2", "--N", "8,16", "--p", "1,2", "--T", "0.01"]) == 0
    d = outdir / "test2_convergence"
    lines = (d / "convergence_p2.csv").read_text().splitlines()
    assert lines[0] == "N,indicator,EOC" and len(lines) == 3
    assert "p = 1" in capsys.readouterr().out


def test_converge_needs_two_levels(outdir):
    assert cli.main(["converge", "--N", "8", "--p", "1"]) == 2


def test_selftest_passes_and_guard_rail(capsys):
    assert cli.main(["selftest"]) == 0
    assert cli.main(["selftest", "--sigma", "0.01"]) == 1
    out = capsys.readouterr().out
    assert "FAIL assembly/coercivity" in out
