"""End-to-end command-line checks."""

import json

from abstain_al import load_dataset
from abstain_al.cli import main
from abstain_al.oracle import format_instance, random_finite_belief

import numpy as np


def test_synth_writes_loadable_dataset(tmp_path, capsys):
    out = tmp_path / "data.txt"
    code = main(
        ["synth", "--out", str(out), "--n", "30", "--dim", "4", "--seed", "3",
         "--redundant", "5"]
    )
    assert code == 0
    dataset = load_dataset(out)
    assert len(dataset) == 35
    assert dataset.num_redundant == 5
    assert "wrote 35 examples" in capsys.readouterr().out


def test_certify_reports_and_passes(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = main(
        ["certify", "--pool", "3", "--budget", "2", "--trials", "10",
         "--seed", "5", "--out", str(report_path)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "0 bound violations" in out
    report = json.loads(report_path.read_text())
    assert report["all_passed"]
    assert len(report["results"]) == 10


def test_run_grid_from_config(tmp_path, capsys):
    main(["synth", "--out", str(tmp_path / "train.txt"), "--n", "30", "--dim", "3",
          "--seed", "0"])
    main(["synth", "--out", str(tmp_path / "test.txt"), "--n", "10", "--dim", "3",
          "--seed", "1"])
    (tmp_path / "exp.cfg").write_text(
        "train = train.txt\ntest = test.txt\npolicies = alg\n"
        "scenario = stochastic\nfractions = 0.4\nbudget = 3\nseeds = 0\n",
        encoding="utf-8",
    )
    code = main(["run", "--config", str(tmp_path / "exp.cfg")])
    assert code == 0
    assert (tmp_path / "results" / "results.csv").exists()
    assert "results.csv" in capsys.readouterr().out


def test_demo_finite_prints_trace(tmp_path, capsys):
    belief = random_finite_belief(np.random.default_rng(2))
    instance = tmp_path / "instance.txt"
    instance.write_text(format_instance(belief), encoding="utf-8")
    code = main(["demo-finite", "--instance", str(instance), "--budget", "2",
                 "--seed", "4"])
    assert code == 0
    out = capsys.readouterr().out
    assert "query 0" in out
    assert "final hypothesis weights" in out


def test_errors_exit_nonzero(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "missing.cfg")])
    assert code == 2
    assert "error:" in capsys.readouterr().err
