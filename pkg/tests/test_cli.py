import json
import subprocess
import sys

import pytest

from gaussgme import cli
from gaussgme.moments import Family
from gaussgme.scan import Detector, DetectorResult, ScanRecord


def run(*argv):
    return cli.main(list(argv))


def test_families_lists_every_family(capsys):
    assert run("families") == 0
    out = capsys.readouterr().out
    for name in ("vac", "smsv", "thermal", "coherent", "noisy_ghz"):
        assert name in out


def test_check_writes_json(tmp_path):
    path = tmp_path / "c.json"
    assert run("check", "--family", "vac", "--r", "0.5", "--d-max", "2", "-o", str(path)) == 0
    data = json.loads(path.read_text())
    names = [res["detector"] for res in data["results"]]
    assert "fdw_qutrit" not in names and "fdw_qubit" in names


def test_scan1d_outputs(tmp_path):
    csv_path, svg_path, json_path = tmp_path / "s.csv", tmp_path / "s.svg", tmp_path / "s.json"
    code = run("scan1d", "--family", "vac", "--r-min", "0.1", "--r-max", "0.3", "--r-step", "0.1",
               "--detectors", "ppt_full_insep,ineq_eq10", "-o", str(csv_path), "--svg", str(svg_path),
               "--json", str(json_path))
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("family,r,second_param") and len(lines) == 7
    assert svg_path.read_text().startswith("<?xml")
    assert len(json.loads(json_path.read_text())["records"]) == 3


def test_bad_bracket_exits_2(capsys):
    code = run("bisect", "--family", "vac", "--detector", "ineq_eq10", "--lo", "0.3", "--hi", "0.4")
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_bisect_success(capsys):
    assert run("bisect", "--family", "vac", "--detector", "ineq_eq10", "--lo", "0.2", "--hi", "0.4",
               "--tol", "1e-3") == 0
    data = json.loads(capsys.readouterr().out)
    assert abs(data["estimate"] - 0.2848) < 2e-3


def test_missing_and_invalid_settings_exit_2():
    assert run("check", "--family", "vac") == 2
    assert run("check", "--family", "vac", "--r", "0.5", "--d-max", "5") == 2
    assert run("check", "--family", "coherent", "--r", "0.5") == 2
    assert run("check", "--family", "vac", "--r", "-1") == 2
    assert run("check", "--family", "vac", "--r", "0.5", "--detectors", "fdw_ququart", "--d-max", "3") == 2


def test_config_twins_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nfamily = vac\nr = 0.5\ndetectors = ppt_full_insep\nd-max = 2\n")
    assert run("check", "--config", str(cfg)) == 0
    first = json.loads(capsys.readouterr().out)
    assert first["params"]["r"] == 0.5 and len(first["results"]) == 1
    assert run("check", "--config", str(cfg), "--r", "1.3") == 0
    second = json.loads(capsys.readouterr().out)
    assert second["params"]["r"] == 1.3 and second["results"][0]["verdict"] is False


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("family = vac\nbogus = 1\n")
    assert run("check", "--config", str(cfg), "--r", "0.5") == 2


def test_solver_errors_exit_3(monkeypatch, capsys):
    def broken(family, params, specs, method):
        res = DetectorResult(Detector.FDW_QUBIT, None, float("nan"), float("nan"), float("nan"), 0.0,
                             "solver_error", "forced")
        return ScanRecord(Family.VAC, dict(params), (res,), {}, ())

    monkeypatch.setattr(cli, "evaluate_point", broken)
    assert run("check", "--family", "vac", "--r", "0.5") == 3


def test_workers_env_var(monkeypatch):
    monkeypatch.setenv("GAUSSGME_WORKERS", "3")
    args = cli.build_parser().parse_args(["families"])
    assert cli.resolve(args)["workers"] == 3
    args = cli.build_parser().parse_args(["families", "--workers", "1"])
    assert cli.resolve(args)["workers"] == 1


def test_reproduce_coarse_run(tmp_path):
    code = run("reproduce", "fig6", "--out-dir", str(tmp_path), "--r-step", "1.0", "--s-step", "0.25",
               "--tol", "0.05")
    assert code == 0
    for ext in ("csv", "json", "svg"):
        assert (tmp_path / f"fig6.{ext}").stat().st_size > 0


def test_reproduce_rejects_unknown_figure():
    with pytest.raises(SystemExit) as exc:
        run("reproduce", "fig99")
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gaussgme", "families"], capture_output=True, text=True)
    assert proc.returncode == 0 and "noisy_ghz" in proc.stdout
