import re

import pytest

from sgacs.cli import main
from sgacs.scenarios import bundle_digest, shipped_configs

RESULT = re.compile(r"^RESULT (background|metric|evolve|fock|figure1|validate|run) (pass|fail) (\d+)$")


def result_line(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    m = RESULT.match(out[-1])
    assert m, out[-1]
    return m.group(1), m.group(2)


@pytest.fixture(scope="module")
def cfg():
    return shipped_configs()


def test_missing_config_exits_one(capsys, tmp_path):
    code = main(["validate", "--config", str(tmp_path / "missing.cfg")])
    assert code == 1
    assert result_line(capsys) == ("validate", "fail")


def test_missing_config_message_names_path(capsys, tmp_path):
    main(["validate", "--config", str(tmp_path / "missing.cfg")])
    assert "missing.cfg" in capsys.readouterr().err


def test_figure_bundle(capsys, tmp_path):
    out = tmp_path / "fig1b"
    assert main(["figure1", "--set", "figure.w=1", "--out", str(out)]) == 0
    assert result_line(capsys) == ("figure1", "pass")
    for name in ("magnitude.pgm", "quiver.csv", "ergomask.pgm"):
        assert (out / name).is_file()


def test_run_twice_gives_identical_bundles(capsys, tmp_path, cfg):
    args = ["run", "--config", str(cfg["uniform_kink"]), "--set", "solver.steps=300", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert bundle_digest(tmp_path / "a") == bundle_digest(tmp_path / "b")
    assert "config.scenario.seed = 7" in (tmp_path / "a" / "manifest.txt").read_text()


def test_non_empty_output_needs_force(capsys, tmp_path):
    out = tmp_path / "f"
    assert main(["fock", "--set", "states.alpha=1.5", "--out", str(out)]) == 0
    (out / "stale.txt").write_text("old")
    assert main(["fock", "--set", "states.alpha=1.5", "--out", str(out)]) == 1
    assert "--force" in capsys.readouterr().err
    assert main(["fock", "--set", "states.alpha=1.5", "--out", str(out), "--force"]) == 0
    assert not (out / "stale.txt").exists()
    assert (out / "expectations.csv").read_text().startswith("observable,re,im\n")


def test_unknown_key_exits_one(capsys, tmp_path, cfg):
    assert main(["run", "--config", str(cfg["uniform_kink"]), "--set", "grid.bogus=1",
                 "--out", str(tmp_path / "x")]) == 1
    assert not (tmp_path / "x").exists()


def test_numerical_failure_writes_diagnostics(capsys, tmp_path, cfg):
    out = tmp_path / "e"
    code = main(["evolve", "--config", str(cfg["uniform_kink"]), "--set", "solver.dt=5", "--out", str(out)])
    assert code == 2
    assert result_line(capsys) == ("evolve", "fail")
    assert "CflError" in (out / "diagnostics.txt").read_text()


def test_failed_validation_exits_one(capsys, tmp_path, cfg):
    code = main(["validate", "--config", str(cfg["uniform_kink"]), "--set", "scenario.kT=1",
                 "--out", str(tmp_path / "v")])
    assert code == 1
    assert "temperature" in (tmp_path / "v" / "validation.csv").read_text()


def test_output_root_from_environment(capsys, tmp_path, monkeypatch, cfg):
    monkeypatch.setenv("SGACS_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["metric", "--config", str(cfg["planes_josephson"])]) == 0
    assert (tmp_path / "root" / "planes_josephson" / "metric" / "gup00.grid").is_file()
    assert not (tmp_path / "root" / "planes_josephson" / "planes.csv").exists()


def test_background_subcommand(capsys, tmp_path, cfg):
    assert main(["background", "--config", str(cfg["thomas_fermi"]), "--out", str(tmp_path / "tf")]) == 0
    assert (tmp_path / "tf" / "background" / "n_H0.grid").is_file()


def test_config_required(capsys):
    assert main(["run"]) == 1
    assert result_line(capsys) == ("run", "fail")


def test_fock_needs_alpha(capsys, tmp_path):
    assert main(["fock", "--out", str(tmp_path / "f")]) == 1
