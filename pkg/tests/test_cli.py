"""
Tests for the command line front end.

This test file verifies that:
1. Runs exit with 0 on success, 1 on invalid configuration and 2 on solver failure
2. Reports embed the resolved configuration and are byte-identical across repeated runs
3. Config files are merged with flags, flags taking precedence
4. Sweeps write one CSV row per value and record failed rows without failing the run
5. Field dumps are written on request
"""

import json
import os

import pytest


@pytest.fixture
def kernel_file(tmp_path):
    path = tmp_path / "gaussian.json"
    path.write_text(json.dumps({"kind": "gaussian"}))
    return str(path)


def _read(path):
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


DUALITY_ARGS = ["duality", "--symbol", "bessel:1.0", "--r", "4", "--dim", "1", "--n", "64", "--L", "16"]


class TestExitCodes:
    """Tests for the 0 / 1 / 2 exit-code contract."""

    def test_power_smoke_run(self, tmp_path, kernel_file):
        """power writes energy, predicted_energy and weak_residual."""
        from nonlocal_maxwell.cli import main

        out = str(tmp_path / "r.json")
        args = ["power", "--q", "1.5", "--kernel", kernel_file, "--n", "16", "--L", "4", "--tol", "1e-8", "--out", out]
        assert main(args) == 0
        report = _read(out)
        assert {"energy", "predicted_energy", "weak_residual"} <= set(report)
        assert report["config"]["grid"] == {"dim": 3, "n": 16, "L": 4.0}
        assert report["status"] == "ok"

    def test_minimizer_for_gaussian_kernel_is_a_solver_failure(self, tmp_path, kernel_file):
        """The gaussian kernel has no plateau, so its infimum is not attained."""
        from nonlocal_maxwell.cli import main

        out = str(tmp_path / "r.json")
        assert main(["kerr", "--kernel", kernel_file, "--minimizer", "--n", "16", "--L", "2", "--out", out]) == 2
        report = _read(out)
        assert report["status"] == "failed"
        assert "not attained" in report["error"]

    def test_missing_kernel_is_a_config_error(self):
        """power without --kernel exits with 1."""
        from nonlocal_maxwell.cli import main

        assert main(["power", "--q", "1.5", "--n", "16"]) == 1

    @pytest.mark.parametrize(
        "args",
        [
            ["power", "--q", "1.5", "--kernel", "gaussian", "--bogus"],
            ["power", "--kernel", "gaussian", "--n", "many"],
            ["frobnicate"],
            [],
        ],
    )
    def test_usage_errors_are_config_errors(self, args):
        """argparse failures share exit code 1."""
        from nonlocal_maxwell.cli import main

        assert main(args) == 1

    def test_malformed_kernel_file(self, tmp_path):
        """A JSON syntax error exits with 1 and names the line."""
        from nonlocal_maxwell.cli import load_json, main
        from nonlocal_maxwell.errors import InvalidConfigError

        path = tmp_path / "broken.json"
        path.write_text('{\n  "kind": gaussian\n}\n')
        assert main(["power", "--kernel", str(path), "--n", "16"]) == 1
        with pytest.raises(InvalidConfigError, match=r"broken\.json:2:"):
            load_json(str(path))

    def test_out_of_range_parameters(self):
        """Supercritical duality exponents and q = 2 ground states exit with 1."""
        from nonlocal_maxwell.cli import main

        assert main(["duality", "--dim", "3", "--n", "16", "--r", "7"]) == 1
        assert main(["power", "--q", "2", "--kernel", "gaussian", "--n", "16"]) == 1

    def test_invalid_thread_count(self, monkeypatch):
        """A non-integer thread count is a config error."""
        from nonlocal_maxwell.cli import THREADS_ENV, main

        monkeypatch.setenv(THREADS_ENV, "lots")
        assert main(DUALITY_ARGS) == 1


class TestReports:
    """Tests for report contents and provenance."""

    def test_duality_report(self, tmp_path):
        """The correspondence, the identity gaps and the power-pair check are reported."""
        from nonlocal_maxwell.cli import main

        out = str(tmp_path / "d.json")
        assert main(DUALITY_ARGS + ["--out", out]) == 0
        report = _read(out)
        assert report["energy_gap"] <= 1e-6
        assert report["legendre"]["legendre"] <= 1e-12
        assert report["config"]["symbol"] == {"form": "bessel", "s": 1.0}

    def test_repeated_runs_are_byte_identical(self, tmp_path):
        """Same config and seed, same bytes."""
        from nonlocal_maxwell.cli import main

        out = str(tmp_path / "d.json")
        contents = []
        for _ in range(2):
            assert main(DUALITY_ARGS + ["--seed", "7", "--out", out]) == 0
            with open(out, "rb") as handle:
                contents.append(handle.read())
        assert contents[0] == contents[1]
        assert b"created_at" not in contents[0]

    def test_timestamp_flag(self, tmp_path):
        """--timestamp adds created_at."""
        from nonlocal_maxwell.cli import main

        out = str(tmp_path / "d.json")
        assert main(DUALITY_ARGS + ["--timestamp", "--out", out]) == 0
        assert "created_at" in _read(out)

    def test_flags_override_the_config_file(self, tmp_path):
        """--r beats params.r from the file; the file grid is kept."""
        from nonlocal_maxwell.cli import main

        config = tmp_path / "run.json"
        config.write_text(
            json.dumps({"command": "duality", "grid": {"dim": 1, "n": 64, "L": 16.0}, "params": {"r": 3.0}})
        )
        out = str(tmp_path / "d.json")
        assert main(["duality", "--config", str(config), "--r", "4", "--out", out]) == 0
        report = _read(out)
        assert report["config"]["params"]["r"] == 4.0
        assert report["config"]["grid"]["n"] == 64

    def test_config_for_another_command_is_rejected(self, tmp_path):
        """A kerr config cannot drive duality."""
        from nonlocal_maxwell.cli import main

        config = tmp_path / "run.json"
        config.write_text(json.dumps({"command": "kerr"}))
        assert main(["duality", "--config", str(config)]) == 1

    def test_field_dumps(self, tmp_path):
        """u_star and v_star are written with sidecars."""
        from nonlocal_maxwell.cli import main

        dumps = tmp_path / "fields"
        assert main(DUALITY_ARGS + ["--dump-fields", str(dumps), "--out", str(tmp_path / "d.json")]) == 0
        for name in ("u_star_s.bin", "u_star_s.json", "v_star_s.bin", "v_star_s.json"):
            assert os.path.exists(dumps / name), f"missing {name}"


class TestSweeps:
    """Tests for CSV sweeps."""

    def test_shrinking_sweep_records_failed_rows(self, tmp_path, kernel_file):
        """n = 20 violates the resolution guard; the other rows succeed and the run exits 0."""
        from nonlocal_maxwell.cli import main
        from nonlocal_maxwell.utils import read_csv

        out = str(tmp_path / "k.json")
        args = ["kerr", "--kernel", kernel_file, "--shrink", "1,2,4,20", "--potential", "gaussian:0.6"]
        assert main(args + ["--n", "32", "--L", "2", "--out", out]) == 0
        rows = read_csv(str(tmp_path / "k.csv"))
        assert [row["status"] for row in rows[:3]] == ["ok", "ok", "ok"]
        assert rows[3]["status"].startswith("error")
        assert list(rows[0]) == ["n", "I_L", "I_NL", "quotient", "bound", "gap", "l2_norm", "status"]

    def test_sigma_refinement_sweep(self, tmp_path):
        """Two widths give two rows, an observed order and the extrapolated energy."""
        from nonlocal_maxwell.cli import main
        from nonlocal_maxwell.utils import read_csv

        out = str(tmp_path / "l.json")
        csv_path = str(tmp_path / "sweep.csv")
        assert main(["local", "--q", "2", "--sigmas", "0.2,0.1", "--out", out, "--csv", csv_path]) == 0
        rows = read_csv(csv_path)
        assert len(rows) == 2
        assert rows[0]["observed_order"] == "" and rows[1]["observed_order"] != ""
        assert "extrapolated_I" in _read(out)

    def test_supercritical_sweep(self, tmp_path):
        """q = 3 writes one row per index."""
        from nonlocal_maxwell.cli import main
        from nonlocal_maxwell.utils import read_csv

        out = str(tmp_path / "s.json")
        args = ["power", "--q", "3", "--supercritical", "1,2", "--kernel", "gaussian", "--n", "32", "--L", "2"]
        assert main(args + ["--out", out]) == 0
        rows = read_csv(str(tmp_path / "s.csv"))
        assert [row["n"] for row in rows] == ["1", "2"]

    def test_empty_axis_is_a_config_error(self):
        """An empty sweep exits with 1."""
        from nonlocal_maxwell.cli import main

        assert main(["local", "--sigmas", ""]) == 1


class TestRunConfig:
    """Tests for RunConfig validation."""

    def test_unknown_fields_are_rejected(self):
        """Unknown top-level, parameter and solver fields raise."""
        from nonlocal_maxwell.cli import RunConfig
        from nonlocal_maxwell.errors import InvalidConfigError

        base = {"command": "duality", "grid": {"dim": 1, "n": 64, "L": 16.0}}
        for extra in ({"colour": "red"}, {"params": {"q": 2}}, {"solver": {"speed": 3}}):
            with pytest.raises(InvalidConfigError):
                RunConfig.from_dict({**base, **extra})

    def test_seed_must_be_unsigned(self):
        """Negative seeds raise."""
        from nonlocal_maxwell.cli import RunConfig
        from nonlocal_maxwell.errors import InvalidConfigError

        with pytest.raises(InvalidConfigError):
            RunConfig(command="duality", grid={"dim": 1, "n": 64, "L": 16.0}, seed=-1)

    def test_round_trip_through_the_report_block(self):
        """to_dict feeds back into from_dict."""
        from nonlocal_maxwell.cli import RunConfig

        config = RunConfig.from_dict(
            {
                "command": "kerr",
                "grid": {"dim": 3, "n": 32, "L": 2.0},
                "kernel": {"kind": "gaussian"},
                "params": {"shrink": "1,2"},
            }
        )
        assert config.params["shrink"] == [1.0, 2.0]
        assert RunConfig.from_dict(config.to_dict()) == config


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
