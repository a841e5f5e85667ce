import json
from pathlib import Path

import pytest

from impiss import cli

ROOT = Path(__file__).resolve().parents[1]
DEMO = ROOT / "configs" / "demo.json"


def _demo():
    return json.loads(DEMO.read_text())


def test_demo_config_validates(capsys):
    assert cli.main(["validate", str(DEMO)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


@pytest.mark.parametrize("mutate,where", [
    (lambda c: c["tasks"][1].update(system="foo"), "tasks/1/system: undeclared system 'foo'"),
    (lambda c: c["systems"]["halving"].update(sequence="nope"), "systems/halving/sequence"),
    (lambda c: c["tasks"][0].pop("x0"), "tasks/0/x0"),
    (lambda c: c["tasks"][2].update(theorem="thm9"), "tasks/2/theorem"),
    (lambda c: c.update(extra=1), "<root>"),
])
def test_config_errors_name_the_field(mutate, where):
    cfg = _demo()
    mutate(cfg)
    with pytest.raises(cli.ConfigError) as exc:
        cli.validate_config(cfg)
    assert str(exc.value).startswith(where)


def test_invalid_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tasks": [{"task": "simulate", "name": "a", "system": "x"}]}))
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_run_sequential_and_parallel_agree(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(DEMO), "--out", str(a)]) == 0
    assert cli.main(["run", str(DEMO), "--out", str(b), "--parallel"]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        if rel.name != "manifest.json":
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma.pop("created"), mb.pop("created")
    assert ma == mb


def test_unexpected_failure_sets_exit_status(tmp_path):
    cfg = _demo()
    cfg["tasks"] = [t for t in cfg["tasks"] if t["name"] == "thm3_period_half"]
    cfg["tasks"][0]["expect_fail"] = False
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 1


def test_seed_override_recorded(tmp_path):
    cfg = _demo()
    cfg["tasks"] = cfg["tasks"][:1]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o"), "--seed-override", "11"]) == 0
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["root_seed"] == 11


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
    assert cli.main(["example", "harmonic_uib"]) == 0
    assert (tmp_path / "env" / "harmonic_uib" / "uib_table.csv").exists()


def test_failed_reproduction_reports_diff():
    with pytest.raises(cli.AssertionFailed) as exc:
        cli.repro_example("switched_2d", case="b", p_s=0.90)
    assert "expected: holds" in str(exc.value)
