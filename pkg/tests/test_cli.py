import json
import subprocess
import sys

import pytest

from hardkernels.cli import main


def test_generate(tmp_path, capsys):
    out = tmp_path / "k.json"
    assert main(["generate", "--d", "3", "--m", "12", "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["d"] == 3 and len(doc["assignment"]) == 12
    low = tmp_path / "l.json"
    assert main(["generate", "--d", "3", "--m", "12", "--lowrank", "--landmarks", "2",
                 "--out", str(low)]) == 0
    assert len(json.loads(low.read_text())["z"]) == 6


def test_run_and_sweep(tmp_path, capsys):
    run_csv = tmp_path / "run.csv"
    assert main(["run", "--d", "8", "--m", "256", "--budget", "16", "--trials", "4",
                 "--out", str(run_csv)]) == 0
    assert len(run_csv.read_text().splitlines()) == 5
    sweep_csv = tmp_path / "sweep.csv"
    assert main(["sweep", "--d", "budget", "--values", "4,8,16,32", "--trials", "3",
                 "--out", str(sweep_csv), "--trials-csv", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "sweep.json").exists()
    assert main(["report", str(tmp_path / "sweep.json")]) == 0
    assert "slope" in capsys.readouterr().out


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "e.cfg"
    cfg.write_text("loss = squared\nregime = soft\nlam = 0.5\nd = 4\ny = 1\ntrials = 2\n")
    assert main(["config", "--config", str(cfg), "--lam", "0.25"]) == 0
    assert "lam = 0.25" in capsys.readouterr().out


def test_verify_exit_code(capsys):
    assert main(["verify", "--only", "identities", "lowrank"]) == 0
    assert "2/2 suites passed" in capsys.readouterr().out


def test_bad_config_exit(tmp_path, capsys):
    assert main(["run", "--loss", "squared", "--regime", "norm", "--out",
                 str(tmp_path / "x.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hardkernels", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("generate", "run", "sweep", "verify", "report"):
        assert sub in proc.stdout
