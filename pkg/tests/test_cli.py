import signal

import pytest

from perclab.cli import ExitCode, main
from perclab.config_manager import ConfigManager
from perclab.config_models import ExperimentConfig, RunSection
from perclab.experiments import run, run_experiment
from perclab.output import read_plot_data
from perclab.runner import SampleRunner
from perclab.selftest import SUITES, run_selftest


@pytest.fixture(autouse=True)
def restore_signals():
    saved = {sig: signal.getsignal(sig) for sig in (signal.SIGINT, signal.SIGTERM)}
    yield
    for sig, handler in saved.items():
        signal.signal(sig, handler)


@pytest.fixture
def dense_config(tmp_path):
    path = tmp_path / "dense.ini"
    path.write_text(
        f"[run]\nexperiment = dense\nseed = 3\noutput = {tmp_path / 'out' / 'dense'}\nworkers = 1\n"
        "[dense]\ndelta = 0.5\nR = 2\nn = 2\n"
    )
    return path


def test_run_writes_result_files(dense_config, tmp_path):
    config = ConfigManager(dense_config).config
    result = run(config, SampleRunner(1))
    out = tmp_path / "out"
    csv_lines = (out / "dense.csv").read_text().splitlines()
    assert csv_lines[0] == "master_seed,experiment_tag,n,delta,R,value,stderr,failure_bound"
    assert csv_lines[1].startswith("3,dense/R=2,2,0.5,2.0,")
    assert len(result.rows) == 1
    assert len(read_plot_data(out / "dense.dat")) == 1
    # the metadata echo loads back into the same configuration
    assert ConfigManager(out / "dense.meta").config == config


def test_run_is_reproducible(dense_config):
    config = ConfigManager(dense_config).config
    first = run_experiment(config, SampleRunner(1))
    second = run_experiment(config, SampleRunner(1))
    assert first.rows == second.rows


@pytest.mark.parametrize(
    "experiment, params, n_rows",
    [
        ("crossing", {"p": [0.2, 0.8], "rho1": 2, "rho2": 1, "n": 2}, 2),
        ("arm", {"R": [2, 3], "n": 2}, 2),
        ("f_j", {"R": [2], "n": 2, "inner_trials": 1}, 1),
        ("nested", {"R": [1], "n_env": 2, "n_color": 2}, 1),
        ("corr-length", {"p": [1.0], "R_grid": [1, 2], "n": 2}, 1),
        ("theta", {"p": 0.5, "R": [2, 3], "n": 2}, 2),
        ("quasi-mult", {"triples": [[1, 2, 3]], "n": 2}, 1),
        ("exponent-fit", {"p": 1.0, "R": [4, 5, 6], "n": 1}, 3),
        ("russo", {"R": [1], "dp": 0.1, "n": 2}, 1),
        ("revealment", {"R": [2], "n": 2}, 1),
        ("fkg", {"R": 2, "n": 2}, 1),
        ("bk", {"R": 2, "n_env": 1, "n_color": 2}, 1),
        ("dense", {"delta": 0.5, "R": [2, 3], "n": 2}, 2),
        ("pivgrid", {"R": 1, "n": 1}, 1),
    ],
)
def test_experiment_rows_match_header(experiment, params, n_rows):
    config = ExperimentConfig(run=RunSection(experiment=experiment), params=params)
    result = run_experiment(config, SampleRunner(1))
    assert len(result.rows) == n_rows
    assert all(len(row) == len(result.header) for row in result.rows)
    assert len(result.row_wall_seconds) == n_rows


def test_cli_success(dense_config, tmp_path, capsys):
    assert main(["dense", "--config", str(dense_config)]) == ExitCode.SUCCESS
    out = capsys.readouterr().out
    assert out.splitlines()[-1] == f"output\t{tmp_path / 'out' / 'dense'}"
    assert (tmp_path / "out" / "dense.csv").exists()


def test_cli_overrides(dense_config, tmp_path):
    target = tmp_path / "other"
    assert main(["dense", "-c", str(dense_config), "--out", str(target), "--seed", "9"]) == 0
    assert (tmp_path / "other.csv").read_text().splitlines()[1].startswith("9,")


def test_cli_invalid_input(dense_config):
    assert main(["dense"]) == ExitCode.INVALID_INPUT
    assert main(["dense", "-c", str(dense_config), "--workers", "0"]) == ExitCode.INVALID_INPUT
    assert main(["arm", "-c", str(dense_config)]) == ExitCode.INVALID_INPUT
    assert main(["dense", "-c", "/nonexistent/dense.ini"]) == ExitCode.INVALID_INPUT


def test_cli_rejects_unknown_experiment():
    with pytest.raises(SystemExit):
        main(["percolate"])


def test_cocircular_suite(seed):
    passed, detail = SUITES["cocircular-delaunay"](1, 0.05, seed, SampleRunner(1))
    assert passed, detail


def test_raster_suite(seed):
    passed, detail = SUITES["raster-oracle"](1, 0.1, seed, SampleRunner(1))
    assert passed, detail
    assert detail.endswith("samples agree with the raster oracle")


@pytest.mark.slow
def test_selftest(seed):
    results = run_selftest(4, 0.05, seed, SampleRunner(2))
    assert [r.name for r in results] == list(SUITES)
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]
