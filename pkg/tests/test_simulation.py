"""Tests for end-to-end simulation runs and parameter sweeps."""

import json
import os
import tempfile

import numpy as np
import pytest
import yaml

from routh_dirac.config import RunConfig
from routh_dirac.errors import CollisionSingularity
from routh_dirac.simulation import SimulationRunner, check_trajectory_file, sibling_path
from routh_dirac.sweep import SweepExecutor, parse_grid, template_path
from routh_dirac.systems import make_cyclic_linear

SUMMARY_KEYS = {
    "system",
    "mu",
    "mode",
    "h",
    "T",
    "max_momentum_drift",
    "max_energy_drift",
    "max_dirac_residual",
    "newton_stats",
    "rank_defects",
}


class TestSimulationRunner:
    """Tests for SimulationRunner class."""

    def setup_method(self):
        self.temp_dir = tempfile.mkdtemp()
        self.runner = SimulationRunner()

    def config(self, **kwargs) -> RunConfig:
        settings = {"system": "cyclic-linear", "mu": [1.0], "h": 1e-2, "T": 0.5, "newton_tol": 1e-12}
        settings.update(kwargs)
        return RunConfig(**settings)

    def path(self, name: str) -> str:
        return os.path.join(self.temp_dir, name)

    def test_full_run_writes_files(self):
        """Test the natural CSV and the summary JSON."""
        out, summary = self.path("run.csv"), self.path("summary.json")
        outcome = self.runner.run(self.config(out=out, summary=summary))

        with open(out) as f:
            assert f.readline().strip() == "t,x,y,v_x,v_y,p_x,p_y"
            assert len(f.readlines()) == 51
        with open(summary) as f:
            data = json.load(f)
        assert set(data) == SUMMARY_KEYS
        assert data["mode"] == "full"
        assert data["mu"] == [1.0]
        assert data["max_momentum_drift"] == outcome.summary["max_momentum_drift"]
        assert data["newton_stats"]["steps"] == 50

    def test_both_modes(self):
        """Test that mode both reports the full/reduced gap and writes the reduced file."""
        out = self.path("both.csv")
        outcome = self.runner.run(self.config(mode="both", out=out))
        assert outcome.summary["mode"] == "both"
        assert outcome.summary["full_reduced_gap"] < 1e-6
        assert set(outcome.trajectories) == {"full", "reduced"}
        reduced_file = sibling_path(out, "reduced")
        assert reduced_file.exists()
        with open(reduced_file) as f:
            assert f.readline().strip() == "t,x,v_x,vhat_y,p_x"

    def test_reduced_mode_writes_natural_and_sibling(self):
        """Test that non-full runs write the natural file plus their own layout."""
        out = self.path("reduced.csv")
        self.runner.run(self.config(mode="reduced", out=out))
        with open(out) as f:
            assert f.readline().strip() == "t,x,y,v_x,v_y,p_x,p_y"
        assert sibling_path(out, "reduced").exists()

    def test_check_dirac(self):
        """Test re-evaluating the Dirac residual from the written file."""
        outcome = self.runner.run(self.config(out=self.path("checked.csv"), check_dirac=True))
        assert outcome.verified
        assert outcome.dirac_file_residual < 1e-6

    def test_check_dirac_without_out(self, caplog):
        """Test that the file check is skipped without an output path."""
        outcome = self.runner.run(self.config(T=0.1, check_dirac=True))
        assert outcome.dirac_file_residual is None
        assert "needs --out" in caplog.text

    def test_deterministic_output(self):
        """Test that identical runs write identical bytes."""
        first, second = self.path("a.csv"), self.path("b.csv")
        self.runner.run(self.config(out=first))
        self.runner.run(self.config(out=second))
        with open(first, "rb") as f, open(second, "rb") as g:
            assert f.read() == g.read()

    def test_default_mu_from_initial_data(self, caplog):
        """Test that mu falls back to the momentum of the initial data."""
        with caplog.at_level("INFO"):
            outcome = self.runner.run(self.config(mu=None, T=0.1))
        assert outcome.summary["mu"] == [1.0]
        assert "Momentum level computed from initial data" in caplog.text

    def test_mu_length(self):
        """Test that mu must have one entry per symmetry direction."""
        with pytest.raises(ValueError, match="mu has length 2"):
            self.runner.run(self.config(mu=[1.0, 2.0]))

    def test_system_without_initial_data(self):
        """Test that algebra-only fixtures cannot be simulated."""
        with pytest.raises(ValueError, match="no initial data"):
            self.runner.run(self.config(system="so3", mu=None))

    def test_collision_is_stamped_at_start(self):
        """Test that a collision in the initial data is reported at t=0."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
            yaml.dump({"family": "vortices", "initial": {"q": [1.0, 1.0, 0.0, 0.0]}}, f)
            f.flush()

            with pytest.raises(CollisionSingularity) as excinfo:
                self.runner.run(self.config(system=f.name, mu=None))
        assert excinfo.value.time == 0.0
        assert "(at t=0)" in str(excinfo.value)


class TestTrajectoryFileCheck:
    """Tests for check_trajectory_file and sibling paths."""

    def setup_method(self):
        self.temp_dir = tempfile.mkdtemp()

    def test_sibling_path(self):
        """Test the tagged file name next to the main output."""
        assert sibling_path("out/run.csv", "reduced").name == "run.reduced.csv"
        assert sibling_path("run", "m_mu").name == "run.m_mu.csv"

    def test_column_mismatch(self):
        """Test that the file must be in the system's natural layout."""
        path = os.path.join(self.temp_dir, "bad.csv")
        with open(path, "w") as f:
            f.write("t,a,b\n0,1,2\n")
        with pytest.raises(ValueError, match="has columns"):
            check_trajectory_file(make_cyclic_linear(), [1.0], path)

    def test_corrupted_row(self):
        """Test that a tampered sample shows up in the residual."""
        path = os.path.join(self.temp_dir, "run.csv")
        runner = SimulationRunner()
        runner.run(RunConfig(system="cyclic-linear", mu=[1.0], h=1e-2, T=0.1, newton_tol=1e-12, out=path))
        clean = check_trajectory_file(make_cyclic_linear(), [1.0], path)
        assert np.max(clean) < 1e-6

        with open(path) as f:
            lines = f.readlines()
        fields = lines[5].strip().split(",")
        fields[1] = str(float(fields[1]) + 0.1)
        lines[5] = ",".join(fields) + "\n"
        with open(path, "w") as f:
            f.writelines(lines)
        assert np.max(check_trajectory_file(make_cyclic_linear(), [1.0], path)) > 1e-3


class TestSweepGrid:
    """Tests for grid parsing and path templates."""

    def test_linspace(self):
        """Test the start:stop:count form."""
        assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]

    def test_list(self):
        """Test the comma-separated form."""
        assert parse_grid("1e-2, 5e-3,2.5e-3") == [1e-2, 5e-3, 2.5e-3]

    def test_invalid(self):
        """Test malformed grids."""
        with pytest.raises(ValueError, match="start:stop:count"):
            parse_grid("1:2")
        with pytest.raises(ValueError, match="positive count"):
            parse_grid("0:1:0")
        with pytest.raises(ValueError, match="Invalid grid"):
            parse_grid("1,two")

    def test_template_path(self):
        """Test index substitution in output paths."""
        assert template_path(None, 1) is None
        assert template_path("out_{index}.csv", 4) == "out_4.csv"
        assert template_path("out.csv", 3) == "out_3.csv"


class TestSweepExecutor:
    """Tests for SweepExecutor class."""

    def setup_method(self):
        self.temp_dir = tempfile.mkdtemp()
        self.base = RunConfig(system="cyclic-linear", mu=[1.0], h=1e-2, T=0.1, newton_tol=1e-12)

    def test_validation(self):
        """Test empty grids and worker counts."""
        with pytest.raises(ValueError, match="at least one grid value"):
            SweepExecutor(self.base, "h", [])
        with pytest.raises(ValueError, match="at least one worker"):
            SweepExecutor(self.base, "h", [1e-2], workers=0)

    def test_config_for(self):
        """Test where each kind of parameter lands."""
        assert SweepExecutor(self.base, "h", [2e-2]).config_for(0, 2e-2).h == 2e-2
        assert SweepExecutor(self.base, "mu", [2.0]).config_for(0, 2.0).mu == [2.0]
        config = SweepExecutor(self.base, "mass", [3.0]).config_for(0, 3.0)
        assert config.params == {"mass": 3.0}
        assert self.base.params == {}
        assert config.summary is None

    def test_execute(self):
        """Test a concurrent sweep with templated outputs."""
        out = os.path.join(self.temp_dir, "run_{index}.csv")
        base = RunConfig(system="cyclic-linear", mu=[1.0], h=1e-2, T=0.1, newton_tol=1e-12, out=out)
        executor = SweepExecutor(base, "h", [1e-2, 2e-2], workers=2)
        rows = executor.execute()

        assert [row["index"] for row in rows] == [0, 1]
        assert [row["h"] for row in rows] == [1e-2, 2e-2]
        assert rows[1]["newton_stats"]["steps"] == 5
        assert executor.success
        assert os.path.exists(os.path.join(self.temp_dir, "run_0.csv"))
        assert os.path.exists(os.path.join(self.temp_dir, "run_1.csv"))

    def test_failed_run_becomes_error_row(self, caplog):
        """Test that one failing value does not stop the sweep."""
        executor = SweepExecutor(self.base, "T", [0.1, -1.0])
        rows = executor.execute()
        assert "error" not in rows[0]
        assert rows[1]["error"].startswith("ValueError: Final time T must be positive")
        assert not executor.success
        assert "Sweep run 1 (T=-1.0) failed" in caplog.text
