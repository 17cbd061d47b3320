import io

import pytest

from su11 import cli, scenarios


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("SU11_THREADS", raising=False)
    monkeypatch.delenv("SU11_OUT", raising=False)


def write(tmp_path, text, name="case.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv):
    buf = io.StringIO()
    return cli.main(argv, stream=buf), buf.getvalue()


def test_run_writes_csv_and_plot(tmp_path):
    cfg = write(tmp_path, 'scenario = "fringe-scan"\n[grid]\npoints = 32\n')
    code, out = run(["run", cfg, "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_OK
    assert (tmp_path / "o" / "fringe-scan.csv").exists()
    assert (tmp_path / "o" / "fringe-scan.plot.py").exists()
    assert "wrote" in out


def test_env_defaults(tmp_path, monkeypatch):
    cfg = write(tmp_path, 'scenario = "external-loss-scan"\n')
    monkeypatch.setenv("SU11_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("SU11_THREADS", "2")
    assert run(["run", cfg])[0] == cli.EXIT_OK
    assert (tmp_path / "env" / "external-loss-scan.csv").exists()
    monkeypatch.setenv("SU11_THREADS", "two")
    assert run(["run", cfg])[0] == cli.EXIT_CONFIG
    monkeypatch.setenv("SU11_THREADS", "0")
    assert run(["run", cfg])[0] == cli.EXIT_CONFIG


def test_config_errors(tmp_path, capsys):
    assert run(["run", str(tmp_path / "missing.toml")])[0] == cli.EXIT_CONFIG
    bad = write(tmp_path, 'scenario = "fringe-scan"\n[grid]\npoints = 1\n')
    assert run(["run", bad])[0] == cli.EXIT_CONFIG
    assert "case.toml:3" in capsys.readouterr().err
    assert run(["frobnicate"])[0] == cli.EXIT_CONFIG
    assert run(["check", "mc", "--samples", "10"])[0] == cli.EXIT_CONFIG
    assert run(["check", "mc", "--seed", "-1"])[0] == cli.EXIT_CONFIG
    assert run(["run", bad, "--threads", "0"])[0] == cli.EXIT_CONFIG


def test_check_suites(tmp_path):
    code, out = run(["check", "formulary", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert (tmp_path / "formulary-check.csv").exists()
    code, out = run(["check", "mc", "--samples", "200000", "--seed", "3"])
    assert code == cli.EXIT_OK and "mc-check" in out


def test_validation_failure_exit_code(monkeypatch):
    def failing(*args, **kwargs):
        return scenarios.ScenarioResult("formulary-check", ["status"], [["fail"]], False, {})
    monkeypatch.setattr(scenarios, "run_formulary_check", failing)
    code, out = run(["check", "formulary"])
    assert code == cli.EXIT_VALIDATION
    assert "FAIL" in out


def test_internal_error_exit_code(monkeypatch, tmp_path):
    def boom(*args, **kwargs):
        raise RuntimeError("boom")
    monkeypatch.setattr(scenarios, "run_scenario", boom)
    cfg = write(tmp_path, 'scenario = "fringe-scan"\n')
    assert run(["run", cfg])[0] == cli.EXIT_INTERNAL
