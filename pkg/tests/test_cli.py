import json

import pytest

from blinstab import __version__
from blinstab.cli import main


def test_profile_check_writes_outputs(tmp_path, capsys):
    assert main(["profile-check", "--out", str(tmp_path), "--profile", "exponential"]) == 0
    doc = json.loads((tmp_path / "profile-check.json").read_text())
    assert doc["command"] == "profile-check" and doc["version"] == __version__
    assert doc["passed"] and doc["config"]["profile"]["name"] == "exponential"
    assert (tmp_path / "profile-check.txt").read_text().startswith("profile-check")
    assert "[PASS] profile" in capsys.readouterr().out
    assert not list(tmp_path.glob("*.tmp"))


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["profile-check", "--out", str(a)]) == 0
    assert main(["profile-check", "--out", str(b)]) == 0
    da = json.loads((a / "profile-check.json").read_text())
    db = json.loads((b / "profile-check.json").read_text())
    da["config"].pop("out"), db["config"].pop("out")
    assert da == db


def test_failed_profile_check_exit_1(tmp_path):
    table = tmp_path / "bump.csv"
    rows = ["z,U"] + [f"{z / 10},{(z / 10) * 2.718281828 ** (-z / 10)}" for z in range(0, 200)]
    table.write_text("\n".join(rows) + "\n")
    code = main(["profile-check", "--out", str(tmp_path),
                 "--set", "profile.name=\"table\"", "--set", f"profile.table_path=\"{table}\""])
    assert code == 1
    doc = json.loads((tmp_path / "profile-check.json").read_text())
    assert not doc["passed"]


def test_bad_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"N": "x"}}))
    assert main(["profile-check", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "grid.N" in capsys.readouterr().err
    assert main(["profile-check", "--set", "grid.K=3", "--out", str(tmp_path)]) == 2
    assert main(["profile-check", "--set", "oops", "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "profile-check.json").exists()


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BLINSTAB_OUT", str(tmp_path / "env"))
    assert main(["profile-check"]) == 0
    assert (tmp_path / "env" / "profile-check.json").exists()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def _fake(path, name, checks):
    path.write_text(json.dumps({"command": name, "checks": checks}))


def test_report_aggregates(tmp_path, capsys):
    _fake(tmp_path / "a.json", "a", {"4": {"name": "x", "passed": True, "detail": "fine"},
                                     "profile": {"name": "profile", "passed": True, "detail": ""}})
    _fake(tmp_path / "b.json", "b", {"6": {"name": "y", "passed": False, "detail": "spread"}})
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["report", "--out", str(tmp_path)]) == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    crit = doc["results"]["criteria"]
    assert crit["4"]["status"] == "pass" and crit["4"]["source"] == "a.json"
    assert crit["6"]["status"] == "fail"
    assert crit["1"]["status"] == "missing"
    assert doc["results"]["counts"] == {"pass": 1, "fail": 1, "missing": 10}
    out = capsys.readouterr().out
    assert "[MISSING] criterion  1" in out and "[FAIL   ] criterion  6" in out


def test_report_all_missing_passes(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 0


def test_rayleigh_scan(tmp_path):
    assert main(["rayleigh-scan", "--out", str(tmp_path), "--set", "scan.alphas=[0.3, 1.0]"]) == 0
    head = (tmp_path / "rayleigh-scan.csv").read_text().splitlines()[0]
    assert head == "profile,alpha,n_unstable,max_im_c"
    doc = json.loads((tmp_path / "rayleigh-scan.json").read_text())
    assert doc["checks"]["4"]["passed"]
