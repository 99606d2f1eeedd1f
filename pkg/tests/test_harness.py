import json
import os
from pathlib import Path

import pytest

from hele_shaw_lab import harness as HN

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# frozen sha256 of the canonical (output-free) config; changes mean defaults moved
GOLDEN_HASHES = {
    "harnack.toml": "35b560fa2f4d06d6218e4b777984c88e167a9dafe13b8c96d3d69d35ebf7f2db",
    "ladder_underresolved.toml": "12c78cd3be0cc110fac2ee2870276ee89bfe9c6c2eca0ad00f2cc3d4dbd46f79",
    "linearize_sweep.toml": "c7ce99c372b14566a93b24db3f4c1e2d9b178cfa7f8115a6be26809562a21e8c",
    "simulate_mode.toml": "5ea6006e5d99583c4ab8287d278aa389cb84552b812f505ac80bda555ed34194",
    "simulate_planar.toml": "beec3734f19edf60353a79f97c3486e39340d3e4d2b727cf97de5b8feeede6ed",
    "supconv.toml": "f2e315a411880e5da5bd4bf377f4ccbb9868682d6aeab7fb8a0b0e678074dec3",
}


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_filled():
    cfg = HN.build_config({"kind": "simulate"})
    assert cfg.data["grid"]["n_x"] == 128
    assert cfg.data["physics"]["schedule"] == [[0, 1], [0.5, 2]]
    assert cfg.data["initial"]["shape"] == "planar"
    assert HN.build_config({"kind": "harnack"}).data["time"]["dt"] == 0.0025


@pytest.mark.parametrize("name", sorted(GOLDEN_HASHES))
def test_shipped_configs_parse_with_golden_hash(name):
    assert HN.parse_config(CONFIGS / name).hash == GOLDEN_HASHES[name]


def test_hash_ignores_output_section():
    a = HN.build_config({"kind": "deform"})
    b = HN.build_config({"kind": "deform", "output": {"dir": "/tmp/x"}})
    assert a.hash == b.hash
    c = HN.build_config({"kind": "deform", "seed": 8})
    assert c.hash != a.hash


def test_negative_eps_reports_line(tmp_path):
    p = write(tmp_path, 'kind = "simulate"\n\n[physics]\neps = -0.1\n')
    with pytest.raises(HN.ConfigError) as exc:
        HN.parse_config(p)
    assert exc.value.violations == ["physics.eps (line 4, column 1): must be positive, got -0.1"]


def test_all_violations_listed(tmp_path):
    p = write(tmp_path, 'kind = "simulate"\nbogus = 1\n[grid]\nn_x = 100\ncolour = "red"\n'
                        '[physics]\neps = [0.1, 0.2]\n[time]\ndt = 0.0\n[nope]\nx = 1\n')
    with pytest.raises(HN.ConfigError) as exc:
        HN.parse_config(p)
    v = "\n".join(exc.value.violations)
    assert "bogus (line 2" in v and "unknown key" in v
    assert "grid.colour (line 5" in v
    assert "grid.n_x (line 4" in v and "power of two" in v
    assert "only accepted by kind" in v
    assert "time.dt (line 9" in v
    assert "unknown section [nope]" in v
    assert len(exc.value.violations) == 6


def test_bad_type_and_kind():
    with pytest.raises(HN.ConfigError, match="bad type"):
        HN.build_config({"kind": "simulate", "grid": {"n_x": "big"}})
    with pytest.raises(HN.ConfigError, match="unknown experiment"):
        HN.build_config({"kind": "teleport"})
    with pytest.raises(HN.ConfigError, match="required"):
        HN.build_config({})


def test_missing_and_malformed_file(tmp_path):
    with pytest.raises(HN.ConfigError, match="not found"):
        HN.parse_config(tmp_path / "absent.toml")
    with pytest.raises(HN.ConfigError):
        HN.parse_config(write(tmp_path, "kind = \n"))


def test_output_resolution(tmp_path, monkeypatch):
    cfg = HN.build_config({"kind": "deform"})
    monkeypatch.setenv(HN.ENV_OUTPUT_ROOT, str(tmp_path / "root"))
    assert HN.resolve_output(cfg, "deform", None) == tmp_path / "root" / "deform"
    assert HN.resolve_output(cfg, "deform", "x") == Path("x")
    cfg2 = HN.build_config({"kind": "deform", "output": {"dir": "cfgdir"}})
    assert HN.resolve_output(cfg2, "deform", None) == Path("cfgdir")
    monkeypatch.delenv(HN.ENV_OUTPUT_ROOT)
    assert HN.resolve_output(cfg, "deform", None) == Path("hslab-out") / "deform"


def _tree(root):
    return sorted(str(p.relative_to(root)) for p in Path(root).rglob("*") if p.is_file())


def test_simulate_planar_run(tmp_path):
    cfg = HN.parse_config(CONFIGS / "simulate_planar.toml")
    code, res, man = HN.execute(cfg, tmp_path)
    assert code == HN.EXIT_OK and man["passed"]
    assert man["config_hash"] == GOLDEN_HASHES["simulate_planar.toml"]
    files = _tree(tmp_path)
    assert "trajectory.csv" in files and "manifest.json" in files
    assert set(files) == set(man["datasets"]) | {"manifest.json"}
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,node,gamma,grad"


def test_numeric_failure_exit_3(tmp_path):
    cfg = HN.build_config({"kind": "simulate", "grid": {"n_x": 32, "n_y": 16},
                           "time": {"dt": 0.5, "T": 1.0}})
    code, _, man = HN.execute(cfg, tmp_path)
    assert code == HN.EXIT_NUMERIC
    assert man["error"].startswith("RunAborted") or "Stability" in man["error"]
    assert json.loads((tmp_path / "manifest.json").read_text())["exit_code"] == 3


def test_underresolved_ladder_exit_4(tmp_path):
    cfg = HN.parse_config(CONFIGS / "ladder_underresolved.toml")
    code, res, man = HN.execute(cfg, tmp_path)
    assert code == HN.EXIT_ASSERT
    assert any("insufficient rungs" in line for line in res.diagnostics + res.warnings
               + [str(v) for v in res.checks])


def test_strict_turns_warning_into_failure(tmp_path):
    raw = {"kind": "linearize", "grid": {"n_x": 32, "n_y": 16}, "physics": {"eps": 0.05},
           "time": {"T": 0.05, "dt": 0.005}}
    cfg = HN.build_config(raw)
    code, res, _ = HN.execute(cfg, tmp_path / "a")
    assert res.warnings and code == HN.EXIT_OK
    code, _, man = HN.execute(cfg, tmp_path / "b", strict=True)
    assert code == HN.EXIT_ASSERT and man["strict"]


def test_writes_stay_inside_output(tmp_path, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    out = tmp_path / "out"
    HN.execute(HN.build_config({"kind": "deform"}), out)
    assert _tree(work) == []
    assert {p.parent for p in out.rglob("*") if p.is_file()} == {out}


def test_out_guard_rejects_escape(tmp_path):
    res = HN.ExperimentResult("x")
    o = HN._Out(tmp_path, res)
    with pytest.raises(ValueError):
        o.path("../evil.csv")


def test_linearize_sweep_small(tmp_path):
    raw = {"kind": "linearize", "grid": {"n_x": 32, "n_y": 16}, "physics": {"eps": [0.1, 0.05, 0.025]},
           "time": {"T": 0.1, "dt": 0.005}}
    code, res, man = HN.execute(HN.build_config(raw), tmp_path, threads=2)
    lines = (tmp_path / "gaps.csv").read_text().splitlines()
    assert len(lines) == 4
    reg = json.loads((tmp_path / "regression.json").read_text())
    assert len(reg["members"]) == 3
    assert sum("slope" in v for v in reg.values() if isinstance(v, dict)) == 1
