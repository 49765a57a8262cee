"""Unit tests for the main CLI module."""

import json

import pytest
from click.testing import CliRunner

from histreg import __version__
from histreg.cli import main as cli
from histreg.cli.main import main
from histreg.core.histcore import histogram_new
from histreg.core.histcore import to_quantile
from histreg.exceptions import MaxIterationsExceeded
from histreg.io.dataset import dump_dataset

SMALL = """{
  "schema": 1,
  "variables": ["Y", "X"],
  "units": [
    {"label": "a", "values": {
      "Y": {"bins": [[0, 1], [1, 3]], "weights": [0.5, 0.5]},
      "X": {"bins": [[2, 4]], "weights": [1.0]}}},
    {"label": "b", "values": {
      "Y": {"bins": [[1, 2]], "weights": [1.0]},
      "X": {"bins": [[3, 4], [4, 6]], "weights": [0.25, 0.75]}}},
    {"label": "c", "values": {
      "Y": {"bins": [[2, 5]], "weights": [1.0]},
      "X": {"bins": [[1, 2], [2, 2.5]], "weights": [0.5, 0.5]}}}
  ]
}
"""

SIMULATION = """true_params: a2_b1_g-1
dist_specs:
  - family: uniform
linearity: high
m: 6
microdata_n: 200
replications: 3
base_seed: 7
"""


def as_quantile_function(predicted: dict):
    return to_quantile(histogram_new(predicted["bins"], predicted["weights"]))


@pytest.fixture
def runner(monkeypatch):
    for name in ("HISTREG_CONFIG", "HISTREG_THREADS", "HISTREG_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return CliRunner(mix_stderr=False)


@pytest.fixture
def hematocrit_file(tmp_path, hematocrit):
    path = tmp_path / "hematocrit.json"
    dump_dataset(hematocrit, path)
    return path


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(SMALL)
    return path


@pytest.mark.unit
class TestMainCLI:
    """Global options."""

    def test_version_option(self, runner):
        """The version option prints the package version."""
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.stdout

    def test_help_lists_commands(self, runner):
        """Every subcommand is listed in the help."""
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for command in ("fit", "predict", "distance", "simulate", "validate", "compare"):
            assert command in result.stdout

    def test_bad_config(self, runner, tmp_path, small_file):
        """An invalid configuration file is an input error."""
        path = tmp_path / "bad.ini"
        path.write_text("[solver]\ntol = fast\n")
        result = runner.invoke(main, ["--config", str(path), "validate", "--data", str(small_file)])
        assert result.exit_code == 2
        assert "tol" in result.stderr


@pytest.mark.unit
class TestFitCommand:
    """histreg fit."""

    def test_hematocrit(self, runner, hematocrit_file):
        """The hematocrit fit writes a fit report on stdout."""
        result = runner.invoke(
            main,
            ["fit", "--data", str(hematocrit_file), "--response", "hematocrit", "--predictors", "hemoglobin"],
        )
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["kind"] == "fit"
        assert report["coefficients"]["alphas"][0] == pytest.approx(3.5598, abs=5e-3)
        assert report["coefficients"]["betas"][0] == pytest.approx(0.4128, abs=5e-3)
        assert report["coefficients"]["gamma"] == pytest.approx(-1.953, abs=5e-3)
        assert [unit["label"] for unit in report["units"]] == [f"u{j}" for j in range(1, 11)]
        assert "Omega" in result.stderr

    def test_out_file(self, runner, hematocrit_file, tmp_path):
        """With --out the report goes to the file and stdout stays empty."""
        out = tmp_path / "fit.json"
        result = runner.invoke(
            main,
            [
                "fit",
                "--data",
                str(hematocrit_file),
                "--response",
                "hematocrit",
                "--predictors",
                "hemoglobin",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.stderr
        assert result.stdout == ""
        assert json.loads(out.read_text())["response"] == "hematocrit"

    def test_response_equals_predictor(self, runner, small_file):
        """Regressing a variable on itself fits perfectly."""
        result = runner.invoke(main, ["fit", "--data", str(small_file), "--response", "X", "--predictors", "X"])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["omega"] == pytest.approx(1.0, abs=1e-9)

    def test_equiprobable(self, runner, small_file):
        """Requantized values share an equal-weight partition."""
        result = runner.invoke(
            main,
            ["fit", "--data", str(small_file), "--response", "Y", "--predictors", "X", "--equiprobable", "4"],
        )
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["partition"] == pytest.approx([0.25, 0.5, 0.75, 1.0])

    def test_unknown_variable(self, runner, small_file):
        """A missing variable exits with 2 and names the variable."""
        result = runner.invoke(
            main, ["fit", "--data", str(small_file), "--response", "Y", "--predictors", "Z"]
        )
        assert result.exit_code == 2
        assert "'Z'" in result.stderr
        assert result.stdout == ""

    def test_invalid_file(self, runner, tmp_path):
        """Parse errors exit with 2 and carry the line."""
        path = tmp_path / "bad.json"
        path.write_text(SMALL.replace('"weights": [1.0]}}},', '"weights": [1.0]}}}', 1))
        result = runner.invoke(main, ["fit", "--data", str(path), "--response", "Y", "--predictors", "X"])
        assert result.exit_code == 2
        assert "line" in result.stderr

    def test_numerical_failure(self, runner, small_file, monkeypatch):
        """Solver failures exit with 3."""

        def failing_fit(*args, **kwargs):
            raise MaxIterationsExceeded("no convergence after 0 iterations")

        monkeypatch.setattr(cli, "fit", failing_fit)
        result = runner.invoke(main, ["fit", "--data", str(small_file), "--response", "Y", "--predictors", "X"])
        assert result.exit_code == 3
        assert "MaxIterationsExceeded" in result.stderr

    def test_leave_out(self, runner, hematocrit_file):
        """A left-out unit is predicted but not used for fitting."""
        result = runner.invoke(
            main,
            [
                "fit",
                "--data",
                str(hematocrit_file),
                "--response",
                "hematocrit",
                "--predictors",
                "hemoglobin",
                "--leave-out",
                "u10",
            ],
        )
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert len(report["units"]) == 9
        assert report["held_out"]["label"] == "u10"
        assert report["held_out"]["rmse"] > 0


@pytest.mark.unit
class TestPredictCommand:
    """histreg predict."""

    def test_round_trip(self, runner, hematocrit_file, tmp_path):
        """Predicting the training data repeats the fitted histograms."""
        model = tmp_path / "fit.json"
        args = ["--data", str(hematocrit_file), "--response", "hematocrit", "--predictors", "hemoglobin"]
        assert runner.invoke(main, ["fit", *args, "--out", str(model)]).exit_code == 0
        result = runner.invoke(main, ["predict", "--model", str(model), "--data", str(hematocrit_file)])
        assert result.exit_code == 0, result.stderr
        predicted = json.loads(result.stdout)
        fitted = json.loads(model.read_text())
        assert predicted["kind"] == "prediction"
        for a, b in zip(predicted["units"], fitted["units"]):
            assert a["label"] == b["label"]
            assert as_quantile_function(a["predicted"]).allclose(
                as_quantile_function(b["predicted"]), atol=1e-9
            )
            assert a["rmse"] == pytest.approx(b["rmse"])

    def test_identity_model(self, runner, small_file, tmp_path):
        """alpha 1, beta 0, gamma 0 echoes the predictor."""
        model = tmp_path / "identity.json"
        model.write_text(
            json.dumps(
                {
                    "schema": 1,
                    "kind": "fit",
                    "response": "Y",
                    "predictors": ["X"],
                    "partition": [1.0],
                    "coefficients": {"alphas": [1.0], "betas": [0.0], "gamma": 0.0},
                    "omega": 1.0,
                    "se": 0.0,
                    "kkt_residual": 0.0,
                    "iterations": 0,
                    "regularized": False,
                    "rmse_m": 0.0,
                    "rmse_l": 0.0,
                    "rmse_u": 0.0,
                    "units": [],
                }
            )
        )
        result = runner.invoke(main, ["predict", "--model", str(model), "--data", str(small_file)])
        assert result.exit_code == 0, result.stderr
        units = json.loads(result.stdout)["units"]
        observed = histogram_new([(3, 4), (4, 6)], [0.25, 0.75])
        assert as_quantile_function(units[1]["predicted"]).allclose(to_quantile(observed))
        assert units[1]["rmse"] > 0

    def test_schema_mismatch(self, runner, hematocrit_file, small_file, tmp_path):
        """Data without the model's predictors exits with 2."""
        model = tmp_path / "fit.json"
        args = ["--data", str(hematocrit_file), "--response", "hematocrit", "--predictors", "hemoglobin"]
        assert runner.invoke(main, ["fit", *args, "--out", str(model)]).exit_code == 0
        result = runner.invoke(main, ["predict", "--model", str(model), "--data", str(small_file)])
        assert result.exit_code == 2
        assert "hemoglobin" in result.stderr

    def test_not_a_fit_report(self, runner, small_file):
        """A dataset is not a model."""
        result = runner.invoke(main, ["predict", "--model", str(small_file), "--data", str(small_file)])
        assert result.exit_code == 2


@pytest.mark.unit
class TestDistanceCommand:
    """histreg distance."""

    def test_identity(self, runner, small_file):
        """A unit is at distance zero from itself."""
        result = runner.invoke(
            main, ["distance", "--data", str(small_file), "--var", "X", "--unit-a", "a", "--unit-b", "a"]
        )
        assert result.exit_code == 0
        assert float(result.stdout) == 0.0

    def test_metrics(self, runner, small_file):
        """X(a) = U(2, 4) against X(b) gives the closed-form distances."""
        base = ["distance", "--data", str(small_file), "--var", "X", "--unit-a", "a", "--unit-b", "b"]
        mallows = runner.invoke(main, base)
        wasserstein = runner.invoke(main, [*base, "--metric", "wasserstein"])
        assert mallows.exit_code == 0 and wasserstein.exit_code == 0
        # Q_b - Q_a is 1 + 2t on [0, .25] and 4/3 + 2t/3 on [.25, 1]
        assert float(wasserstein.stdout) == pytest.approx(13 / 8, rel=1e-10)
        assert float(mallows.stdout) == pytest.approx((65 / 24) ** 0.5, rel=1e-10)

    def test_unknown_unit(self, runner, small_file):
        """An unknown label exits with 2."""
        result = runner.invoke(
            main, ["distance", "--data", str(small_file), "--var", "X", "--unit-a", "a", "--unit-b", "z"]
        )
        assert result.exit_code == 2
        assert "'z'" in result.stderr


@pytest.mark.unit
class TestSimulateCommand:
    """histreg simulate."""

    def test_summary(self, runner, tmp_path):
        """The summary echoes the configuration and seed."""
        config = tmp_path / "sim.yaml"
        config.write_text(SIMULATION)
        result = runner.invoke(main, ["simulate", "--config", str(config), "--threads", "1"])
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["kind"] == "simulation"
        assert report["seed"] == 7
        assert report["replications"] == 3
        assert report["config"]["m"] == 6
        assert set(report["parameters"]) == {"alpha_1", "beta_1", "gamma"}

    def test_repeatable(self, runner, tmp_path):
        """Two runs with the same seed write identical files."""
        config = tmp_path / "sim.yaml"
        config.write_text(SIMULATION)
        outputs = []
        for name in ("one.json", "two.json"):
            out = tmp_path / name
            args = ["simulate", "--config", str(config), "--replications", "1", "--threads", "1"]
            result = runner.invoke(main, [*args, "--out", str(out)])
            assert result.exit_code == 0, result.stderr
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        assert json.loads(outputs[0])["replications"] == 1

    def test_bad_config(self, runner, tmp_path):
        """Unknown families exit with 2."""
        config = tmp_path / "sim.yaml"
        config.write_text(SIMULATION.replace("uniform", "gamma"))
        result = runner.invoke(main, ["simulate", "--config", str(config)])
        assert result.exit_code == 2


@pytest.mark.unit
class TestValidateCommand:
    """histreg validate."""

    def test_clean(self, runner, small_file):
        """A clean file reports no issues."""
        result = runner.invoke(main, ["validate", "--data", str(small_file)])
        assert result.exit_code == 0
        assert "0 issues" in result.stdout

    def test_weight_sum(self, runner, tmp_path):
        """Weights summing to 0.9 are named with their unit and variable."""
        path = tmp_path / "bad.json"
        path.write_text(SMALL.replace("[0.5, 0.5]},", "[0.4, 0.5]},", 1))
        result = runner.invoke(main, ["validate", "--data", str(path)])
        assert result.exit_code == 2
        assert "weights sum to" in result.stdout
        assert "unit 'a' / variable 'Y'" in result.stdout

    def test_negative_width(self, runner, tmp_path):
        """A bin with lower > upper is named."""
        path = tmp_path / "bad.json"
        path.write_text(SMALL.replace("[[2, 5]]", "[[5, 2]]"))
        result = runner.invoke(main, ["validate", "--data", str(path)])
        assert result.exit_code == 2
        assert "greater than upper bound" in result.stdout


@pytest.mark.unit
class TestCompareCommand:
    """histreg compare."""

    def test_scores(self, runner, hematocrit_file, tmp_path):
        """DSD and both baselines are scored and written as JSON."""
        out = tmp_path / "scores.json"
        result = runner.invoke(
            main,
            [
                "compare",
                "--data",
                str(hematocrit_file),
                "--response",
                "hematocrit",
                "--predictor",
                "hemoglobin",
                "--bd",
                "-2.157,3.161",
                "--vi",
                "-2.157,3.161,3.918",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.stderr
        assert "DSD" in result.stdout
        scores = json.loads(out.read_text())
        assert [score["model"] for score in scores] == ["DSD", "BD", "VI"]
        assert scores[0]["rmse_m"] == pytest.approx(0.8946, abs=0.02)

    def test_bad_coefficients(self, runner, hematocrit_file):
        """Coefficient lists of the wrong length are usage errors."""
        result = runner.invoke(
            main,
            [
                "compare",
                "--data",
                str(hematocrit_file),
                "--response",
                "hematocrit",
                "--predictor",
                "hemoglobin",
                "--bd",
                "1,2,3",
            ],
        )
        assert result.exit_code == 2
        assert "--bd" in result.stderr
