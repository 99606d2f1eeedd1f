import subprocess
import sys
from pathlib import Path

import pytest

from hele_shaw_lab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_config_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('kind = "simulate"\n[physics]\neps = -1.0\n')
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "physics.eps (line 3, column 1): must be positive" in err
    assert not (tmp_path / "o").exists()


def test_kind_mismatch_exit_2(tmp_path, capsys):
    assert main(["harnack", "--config", str(CONFIGS / "simulate_planar.toml"),
                 "--out", str(tmp_path)]) == 2
    assert "subcommand" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["deform", "--config", str(tmp_path / "none.toml")]) == 2


def test_bad_threads(tmp_path):
    assert main(["deform", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_deform_default_run(tmp_path, capsys):
    assert main(["deform", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "deform:" in out and "FAIL" not in out
    assert (tmp_path / "manifest.json").is_file()


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("HSLAB_OUTPUT_ROOT", str(tmp_path))
    assert main(["interp"]) == 0
    assert (tmp_path / "interp" / "interp.json").is_file()


def test_underresolved_ladder(tmp_path, capsys):
    code = main(["ladder", "--config", str(CONFIGS / "ladder_underresolved.toml"), "--out", str(tmp_path)])
    assert code == 4
    assert "insufficient rungs" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hele_shaw_lab", "deform", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
