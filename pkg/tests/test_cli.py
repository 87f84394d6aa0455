import json
import subprocess
import sys

import pytest

from illiq.cli import EXIT_INPUT, EXIT_OK, run


@pytest.fixture
def cli(tmp_path, fixtures_dir):
    def call(*args):
        out = tmp_path / "report.json"
        argv = [a.replace("@", str(fixtures_dir) + "/") for a in args]
        code = run([*argv, "--out", str(out)])
        report = json.loads(out.read_text()) if code == EXIT_OK else None
        return code, report
    return call


def _strip_time(text):
    doc = json.loads(text)
    doc["solver_stats"].pop("wall_time")
    return doc


def test_check_na_finds_the_dominant_asset_witness(cli):
    code, rep = cli("check-na", "--model", "@frictionless_dominant.json")
    assert code == 0
    assert rep["results"]["holds"] is False
    assert rep["certificates"]["witness"] is not None
    assert rep["solver_stats"]["lp_count"] >= 1


def test_superhedge_call_on_binomial(cli):
    code, rep = cli("superhedge", "--model", "@binomial.json", "--claim", "@call.json", "--numeraire", "0")
    assert code == 0
    assert rep["results"]["alpha"] == pytest.approx(1 / 3, abs=1e-6)
    assert rep["results"]["robust_no_scalable_arbitrage"] is True


def test_integer_node_ids(cli):
    code, rep = cli("superhedge", "--model", "@bid_ask_binomial.json", "--claim", "@call_int_ids.json")
    assert code == 0
    assert rep["results"]["alpha"] == pytest.approx(17 / 24, abs=1e-6)


def test_missing_probability_mass_is_an_input_error(cli, capsys):
    code, _ = cli("check-na", "--model", "@missing_prob.json")
    assert code == EXIT_INPUT
    assert "child-probability sum" in capsys.readouterr().err


def test_malformed_json_reports_position(cli, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"d": 2,\n  "tree": [}\n')
    code, _ = cli("check-na", "--model", str(bad))
    assert code == EXIT_INPUT
    assert "line 2, column" in capsys.readouterr().err


def test_missing_file_is_an_input_error(cli, tmp_path):
    code, _ = cli("check-na", "--model", str(tmp_path / "nope.json"))
    assert code == EXIT_INPUT


def test_reports_are_deterministic(tmp_path, fixtures_dir):
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert run(["check-rnsa", "--model", str(fixtures_dir / "currency.json"), "--out", str(out)]) == 0
        texts.append(_strip_time(out.read_text()))
    assert texts[0] == texts[1]


@pytest.mark.parametrize("args", [
    ("check-na", "--model", "@frictionless_dominant.json"),
    ("check-rna", "--model", "@bid_ask_binomial.json"),
    ("check-rnsa", "--model", "@currency.json"),
    ("find-cps", "--model", "@binomial.json"),
    ("superhedge", "--model", "@binomial.json", "--claim", "@call.json"),
    ("dual-bound", "--model", "@binomial.json", "--claim", "@call.json"),
])
def test_verify_rechecks_certificates_without_lps(cli, tmp_path, args):
    code, rep = cli(*args)
    assert code == 0
    saved = tmp_path / "saved.json"
    saved.write_text(json.dumps(rep))
    code, ver = cli("verify", "--report", str(saved))
    assert code == 0
    assert ver["results"]["valid"] is True, ver["results"]["problems"]
    assert ver["results"]["checked"]


def test_verify_spots_a_tampered_hedge(cli, tmp_path):
    _, rep = cli("superhedge", "--model", "@binomial.json", "--claim", "@call.json")
    rep["certificates"]["premium"]["root"][0] -= 0.05
    saved = tmp_path / "saved.json"
    saved.write_text(json.dumps(rep))
    code, ver = cli("verify", "--report", str(saved))
    assert code == 0
    assert ver["results"]["valid"] is False


def test_csv_output(tmp_path, fixtures_dir):
    csv_path = tmp_path / "r.csv"
    run(["superhedge", "--model", str(fixtures_dir / "binomial.json"), "--claim", str(fixtures_dir / "call.json"),
         "--out", str(tmp_path / "r.json"), "--csv", str(csv_path)])
    rows = dict(line.split(",", 1) for line in csv_path.read_text().splitlines()[1:])
    assert float(rows["alpha"]) == pytest.approx(1 / 3, abs=1e-6)


def test_geometry_commands(cli):
    code, rep = cli("geometry", "polar", "--model", "@bid_ask_binomial.json", "--node", "0")
    assert code == 0 and len(rep["results"]["A"]) >= 2
    code, rep = cli("geometry", "lineality", "--model", "@binomial.json")
    assert rep["results"]["dimension"] == 1
    code, rep = cli("geometry", "recession", "--model", "@currency.json", "--node", "up")
    assert code == 0
    code, _ = cli("geometry", "polar", "--model", "@binomial.json", "--node", "nowhere")
    assert code == EXIT_INPUT


def test_oracle_commands(cli):
    code, rep = cli("oracle", "superhedge", "--model", "@binomial.json", "--claim", "@call.json",
                    "--grid-step", "1e-3", "--grid-radius", "3")
    assert code == 0 and rep["results"]["alpha"] == pytest.approx(1 / 3, abs=2e-3)
    code, rep = cli("oracle", "intervals", "--model", "@bid_ask_binomial.json", "--strict")
    assert code == 0 and rep["results"]["feasible"] is True
    code, rep = cli("oracle", "polar", "--model", "@bid_ask_binomial.json", "--samples", "2000")
    assert code == 0 and rep["results"]["agrees"] is True
    code, _ = cli("oracle", "intervals", "--model", "@binomial.json")
    assert code == EXIT_INPUT


def test_lp_tolerance_from_environment(tmp_path, fixtures_dir):
    out = tmp_path / "r.json"
    cmd = [sys.executable, "-m", "illiq.cli", "superhedge", "--model", str(fixtures_dir / "binomial.json"),
           "--claim", str(fixtures_dir / "call.json"), "--out", str(out)]
    proc = subprocess.run(cmd, env={"ILLIQ_LP_TOL": "1e-8", "PATH": ""}, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["results"]["alpha"] == pytest.approx(1 / 3, abs=1e-6)
    bad = subprocess.run(cmd, env={"ILLIQ_LP_TOL": "abc", "PATH": ""}, capture_output=True, text=True)
    assert bad.returncode == EXIT_INPUT
