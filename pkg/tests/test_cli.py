import json
import subprocess
import sys

import pytest

from hopfkit.cli import main
from hopfkit.continuation import read_branch_csv


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"problem": "example2", "example2": {"nx": 16}, "nt": 4}))
    return str(path)


def test_conditions_report_and_exit_code(tmp_path, small_cfg):
    out = tmp_path / "report.json"
    code = main(["conditions", "--config", small_cfg, "--k-max", "4", "--n-max", "8", "--out", str(out)])
    # (B2) fails for the FitzHugh-Nagumo example, a numerical failure
    assert code == 3
    data = json.loads(out.read_text())
    assert data["pass"]["B2"] is False and data["pass"]["B1"] is True
    assert data["config"]["example2"] == {"nx": 16}
    out2 = tmp_path / "report2.json"
    main(["conditions", "--config", small_cfg, "--k-max", "4", "--n-max", "8", "--out", str(out2)])
    assert out.read_text() == out2.read_text()


def test_branch_rows(tmp_path, small_cfg):
    out = tmp_path / "b.csv"
    ck = tmp_path / "ck"
    code = main(["branch", "--config", small_cfg, "--alpha-max", "0.5", "--steps", "50",
                 "--out", str(out), "--checkpoint-dir", str(ck)])
    assert code == 0
    rows = read_branch_csv(out.read_text())
    assert len(rows) == 51
    assert rows[-1]["alpha"] == 0.5
    assert len(list(ck.iterdir())) == 51


def test_flags_override_config(tmp_path, small_cfg):
    out = tmp_path / "b.csv"
    assert main(["branch", "--config", small_cfg, "--steps", "2", "--out", str(out)]) == 0
    assert len(read_branch_csv(out.read_text())) == 3


@pytest.mark.parametrize("argv", [
    ["branch", "--steps", "0"],
    ["branch", "--alpha-max", "-1"],
    ["conditions", "--problem", "example3"],
    ["frobnicate"],
    ["verify", "--suite", "huge"],
])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert main(["conditions", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"example2": {"nx": 2}}))
    assert main(["conditions", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["conditions", "--config", str(bad)]) == 2
    assert main(["conditions", "--config", str(tmp_path / "missing.json")]) == 2


def test_match_roundtrip(tmp_path, small_cfg):
    ck = tmp_path / "ck"
    assert main(["branch", "--config", small_cfg, "--steps", "5", "--out", str(tmp_path / "b.csv"),
                 "--checkpoint-dir", str(ck)]) == 0
    out = tmp_path / "m.json"
    point = sorted(ck.iterdir())[3]
    assert main(["match", "--config", small_cfg, "--steps", "5", "--checkpoint", str(point),
                 "--out", str(out)]) == 0
    m = json.loads(out.read_text())
    assert m["alpha"] == pytest.approx(0.3, abs=1e-10)
    assert m["distance"] < 1e-8


def test_match_requires_checkpoint(small_cfg):
    assert main(["match", "--config", small_cfg]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "hopfkit", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "conditions" in r.stdout
