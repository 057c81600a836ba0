import json

import numpy as np

from dgrre import io
from dgrre.driver import RunConfig, run_case


def test_blob_hash_matches_git():
    # `printf 'hello\n' | git hash-object --stdin`
    assert io.blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_csv_format(tmp_path):
    p = io.write_csv(tmp_path / "a.csv", ["x", "y"], [[1, 0.5], [2, float("nan")]])
    raw = p.read_bytes()
    assert raw.startswith(b"x,y\r\n1,5.000000000e-01\r\n")
    header, rows = io.read_csv(p)
    assert header == ["x", "y"] and rows[1] == ["2", "nan"]


def test_output_root_precedence(monkeypatch, tmp_path):
    monkeypatch.delenv(io.OUTPUT_ENV, raising=False)
    assert io.output_root("cfg") == io.Path("cfg")
    monkeypatch.setenv(io.OUTPUT_ENV, str(tmp_path))
    assert io.output_root("cfg") == tmp_path
    assert io.output_root("cfg", "flag") == io.Path("flag")


def test_checkpoint_round_trip(tmp_path):
    r = run_case(RunConfig(test="test2", N=8, p=2, T=0.01))
    st = r.trajectory.final
    path = io.write_checkpoint(tmp_path, 3, st, r.disc)
    fields, meta = io.read_checkpoint(path)
    np.testing.assert_array_equal(fields["u"], st.u.coeffs)
    np.testing.assert_array_equal(fields["tau"], st.tau.coeffs)
    assert meta["t"] == st.t and meta["mesh_hash"] == r.disc.mesh.content_hash


def test_manifest_round_trips_config(tmp_path):
    cfg = RunConfig(test="test3", N=16, p=3, sigma=200.0, stride=2)
    path = io.write_json(tmp_path / "m.json", io.manifest(cfg.to_dict()))
    back = json.loads(path.read_text())
    assert RunConfig.from_dict(back["config"]) == cfg
    assert back["config_hash"] == io.config_hash(cfg.to_dict())


def test_json_nonfinite_becomes_null(tmp_path):
    p = io.write_json(tmp_path / "x.json", {"a": float("nan"), "b": np.float64(2.0), "c": np.arange(2)})
    assert json.loads(p.read_text()) == {"a": None, "b": 2.0, "c": [0, 1]}
