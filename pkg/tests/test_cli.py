import json
import subprocess
import sys


from corrint.cli import main


def run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "corrint.cli", *args],
        capture_output=True, text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "e1-nonconvexity" in out
    assert len(out) == 12


def test_run_bundled_pass(capsys):
    assert main(["run", "--bundled", "walsh-orthogonality"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True
    assert report["checks"][0]["kind"] == "walsh-orthogonality"


def test_run_writes_report_and_csv(tmp_path, capsys):
    code = main([
        "lemma-bound", "--meshes", "3..4", "--trials", "20",
        "--out", str(tmp_path), "--emit-plot-data",
    ])
    capsys.readouterr()
    assert code == 0
    report = json.loads((tmp_path / "lemma-bound.json").read_text())
    assert report["pass"] is True
    csvs = list(tmp_path.glob("*.csv"))
    assert len(csvs) == 1
    header = csvs[0].read_text().splitlines()[0]
    assert header.startswith("mesh,")


def test_malformed_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 1, "name": "x",\n  "checks": [}')
    code, out, err = run_cli(["run", str(bad)])
    assert code == 2
    assert "line" in err and "column" in err


def test_unknown_kind_exit_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "schema": 1, "name": "x", "seed": 0,
        "checks": [{"kind": "no-such-check"}],
    }))
    code, out, err = run_cli(["run", str(cfg)])
    assert code == 2


def test_capacity_exit_3(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "schema": 1, "name": "x", "seed": 0,
        "checks": [{"kind": "necessity-gap", "k": 2, "gamma": "0",
                    "N": 2, "L": 3, "cap": 10}],
    }))
    code, out, err = run_cli(["run", str(cfg)])
    assert code == 3
    assert "6561" in err


def test_verdict_failure_exit_1(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "schema": 1, "name": "x", "seed": 0,
        "checks": [{"kind": "uhc-decay", "k": 2, "gamma": "0", "N": 2,
                    "L": 2, "final_tol": 0.0}],
    }))
    code = main(["run", str(cfg)])
    capsys.readouterr()
    assert code == 1


def test_reports_are_byte_identical(tmp_path):
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        code, out, err = run_cli([
            "run", "--bundled", "rcd-mixture", "--out", str(d),
        ])
        assert code == 0
        outs.append((d / "rcd-mixture.json").read_bytes())
    assert outs[0] == outs[1]


def test_game_equilibrium_subcommand(capsys):
    code = main(["game-equilibrium", "--k", "2", "--gamma", "0", "--L", "3"])
    out = capsys.readouterr().out
    assert code == 0
    report = json.loads(out)
    chk = report["checks"][0]
    assert chk["partition_masses"] == ["1/3", "1/3", "1/3"]
    assert chk["residual"] < 1e-9


def test_game_equilibrium_config_file(tmp_path, capsys):
    cfg = tmp_path / "game.json"
    cfg.write_text(json.dumps({
        "mode": "br_iterate", "k": 2, "gamma": "0", "L": 3, "N": 2,
        "refinement": 3, "externality": "integral", "tol": 1e-9,
        "max_iter": 50, "seed": 0,
    }))
    code = main(["game-equilibrium", "--config", str(cfg)])
    out = capsys.readouterr().out
    assert code == 0
    assert json.loads(out)["pass"] is True


def test_necessity_demo_coincide(capsys):
    code = main(["necessity-demo", "--k", "2", "--L", "3", "--coincide"])
    out = capsys.readouterr().out
    assert code == 0
    chk = json.loads(out)["checks"][0]
    assert chk["midpoint_present"] is False
    assert chk["midpoint_gap"] > 1e-9


def test_convexity_demo_small(capsys):
    # a truncated series still reports its gaps but cannot meet the
    # full-depth final tolerance, so the verdict exit code is 1
    code = main([
        "convexity-demo", "--levels", "1..3", "--samples", "32",
    ])
    out = capsys.readouterr().out
    assert code == 1
    chk = json.loads(out)["checks"][0]
    assert len(chk["series"]) == 3
    assert chk["monotone"] is True
