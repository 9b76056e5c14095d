import json
import os

import pytest

from fdlyap import verify
from fdlyap.cli import EXIT_FAILED, EXIT_JSON, EXIT_OK, EXIT_PHYSICS, EXIT_SCHEMA, EXIT_USAGE, main
from fdlyap.presets import get_preset


def write(path, obj):
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def test_list_presets(capsys):
    assert main(["list-presets"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("qubit-driftfree", "qubit-drift", "noise-sweep", "drift-sweep"):
        assert name in out


def test_unknown_preset(tmp_path, capsys):
    assert main(["run-preset", "nope", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "qubit-drift" in capsys.readouterr().err


def test_config_errors_map_to_exit_codes(tmp_path):
    cfg = json.loads(json.dumps(get_preset("qubit-driftfree").config))
    out = str(tmp_path / "out")
    assert main(["run-config", write(tmp_path / "a.json", "{oops"), "--out", out]) == EXIT_JSON
    cfg["tau"] = 0
    assert main(["run-config", write(tmp_path / "b.json", cfg), "--out", out]) == EXIT_SCHEMA
    cfg["tau"] = 0.5
    cfg["drift"] = {"matrix": [[0, 1], [0, 0]]}
    assert main(["run-config", write(tmp_path / "c.json", cfg), "--out", out]) == EXIT_PHYSICS


def test_run_preset_writes_outputs(tmp_path):
    out = tmp_path / "fresh" / "dir"
    assert main(["run-preset", "qubit-driftfree", "--steps", "60", "--out", str(out)]) == EXIT_OK
    names = set(os.listdir(out))
    assert {"trajectory.csv", "report.json", "run-metadata.json"} <= names
    assert {"lyapunov.png", "controls.png", "bloch_components.png", "bloch_sphere.png"} <= names
    report = json.loads((out / "report.json").read_text())
    assert report["invariants"]["ok"]


def test_metadata_replay_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run-preset", "qubit-drift", "--steps", "80", "--no-figures", "--out", str(a)]) in (EXIT_OK, EXIT_FAILED)
    main(["run-config", str(a / "run-metadata.json"), "--no-figures", "--out", str(b)])
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_sweep_preset(tmp_path):
    rc = main(["run-preset", "noise-sweep", "--steps", "60", "--out", str(tmp_path)])
    assert rc in (EXIT_OK, EXIT_FAILED)
    assert os.path.exists(tmp_path / "sweep.png")
    assert len([d for d in os.listdir(tmp_path) if os.path.isdir(tmp_path / d)]) == 4


def test_verify_coarse_integrator_fails(tmp_path, monkeypatch, capsys):
    only_c10 = [c for c in verify.Suite.CRITERIA if c[0] == 10]
    monkeypatch.setattr(verify.Suite, "CRITERIA", only_c10)
    assert main(["verify", "--substeps", "1", "--out", str(tmp_path)]) == EXIT_FAILED
    assert "[FAIL] 10" in capsys.readouterr().out
    report = json.loads((tmp_path / "verify-report.json").read_text())
    assert report["passed"] is False
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FDLYAP_OUT", str(tmp_path / "env"))
    assert main(["run-preset", "qubit-signlaw", "--steps", "20", "--no-figures"]) in (EXIT_OK, EXIT_FAILED)
    assert os.path.exists(tmp_path / "env" / "trajectory.csv")


def test_missing_subcommand():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
