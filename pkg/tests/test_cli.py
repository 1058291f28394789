import subprocess
import sys

import pytest

from subgoal_irl.cli import main
from subgoal_irl.harness import read_curves

QUICK = "configs/grid8_quick.cfg"


def test_subgoals_verb_prints_cut_states(capsys):
    main(["subgoals", "--env", "grid8_corridor.txt"])
    out = capsys.readouterr().out
    assert "oracle subgoal" in out
    assert "(3, 3)" in out and "(4, 3)" in out


def test_subgoals_verb_carpark(capsys):
    main(["subgoals", "--env", "carpark20x16.cfg", "--env-kind", "carpark"])
    out = capsys.readouterr().out
    assert "oracle subgoal" in out


def test_train_then_evaluate(tmp_path, capsys):
    main(["train", "--config", QUICK, "--method", "hiirl", "--seed", "0",
          "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert "trained hiirl" in out
    ck = tmp_path / "hiirl_s0.ck"
    assert ck.exists()
    log_lines = (tmp_path / "hiirl_s0.log").read_text().strip().split("\n")
    assert log_lines[0] == "iteration,residual_inf,theta_f_norm,lambda,wall_clock"
    assert len(log_lines) > 1
    main(["evaluate", "--config", QUICK, "--checkpoint", str(ck)])
    out = capsys.readouterr().out
    assert "mean_steps=" in out


def test_compare_and_export(tmp_path, capsys):
    main(["compare", "--config", QUICK, "--method", "maxent",
          "--out-dir", str(tmp_path)])
    capsys.readouterr()
    points = read_curves(tmp_path / "curves.csv")
    assert {p.method for p in points} == {"maxent"}
    (tmp_path / "curves.csv").unlink()
    main(["export-curves", "--out-dir", str(tmp_path)])
    assert read_curves(tmp_path / "curves.csv") == points


def test_bad_config_exits_with_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("version 1\nenv nope.txt\nmethods dagger\n")
    with pytest.raises(SystemExit):
        main(["compare", "--config", str(bad), "--out-dir", str(tmp_path)])


def test_console_script_is_installed():
    proc = subprocess.run([sys.executable, "-m", "subgoal_irl.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "compare" in proc.stdout and "serve" in proc.stdout
