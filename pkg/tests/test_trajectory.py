"""Tests for Trajectory containers and their files."""

import json
import os
import tempfile

import numpy as np
import pytest

from routh_dirac.trajectory import Trajectory, write_summary

LABELS = ["x", "y", "v_x", "v_y", "p_x", "p_y"]


def make_trajectory(count: int = 3) -> Trajectory:
    times = np.arange(count) * 0.1
    states = np.array([[t, -t / 3, 1.0, -0.5, 1.5 - t, 1.0] for t in times])
    return Trajectory(
        times=times,
        states=states,
        labels=LABELS,
        mode="full",
        mu=[1.0],
        momentum_drift=[0.0, 1e-12, 3e-12][:count],
        newton_iterations=[0, 2, 3][:count],
    )


class TestTrajectory:
    """Tests for Trajectory validation and accessors."""

    def test_unknown_mode(self):
        """Test that the mode must be known."""
        with pytest.raises(ValueError, match="Unknown trajectory mode"):
            Trajectory(times=[0.0], states=[[0.0]], labels=["x"], mode="other", mu=[])

    def test_times_must_increase(self):
        """Test that times must be strictly increasing."""
        with pytest.raises(ValueError, match="strictly increasing"):
            Trajectory(times=[0.0, 0.0], states=[[0.0], [1.0]], labels=["x"], mode="full", mu=[])

    def test_width_mismatch(self):
        """Test that states and labels must agree."""
        with pytest.raises(ValueError, match="does not match"):
            Trajectory(times=[0.0], states=[[0.0, 1.0]], labels=["x"], mode="full", mu=[])

    def test_column(self):
        """Test column lookup by label."""
        traj = make_trajectory()
        np.testing.assert_allclose(traj.column("v_y"), [-0.5, -0.5, -0.5])
        with pytest.raises(KeyError):
            traj.column("z")

    def test_diagnostics_default_to_zero(self):
        """Test that missing diagnostics are zero columns."""
        traj = make_trajectory()
        np.testing.assert_array_equal(traj.energy_drift, np.zeros(3))
        assert traj.step_size == pytest.approx(0.1)

    def test_summary_keys(self):
        """Test the fixed key set of the summary record."""
        summary = make_trajectory().summary("cyclic-linear", 0.1, 0.2)
        assert set(summary) == {
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
        assert summary["max_momentum_drift"] == 3e-12
        assert summary["newton_stats"] == {
            "steps": 2,
            "total_iterations": 5,
            "max_iterations": 3,
            "mean_iterations": 2.5,
        }


class TestTrajectoryFiles:
    """Tests for CSV and JSON output."""

    def setup_method(self):
        self.temp_dir = tempfile.mkdtemp()

    def test_csv_round_trip_is_exact(self):
        """Test that 17 significant digits preserve every float."""
        traj = make_trajectory()
        path = os.path.join(self.temp_dir, "run.csv")
        traj.write_csv(path)
        with open(path) as f:
            assert f.readline().strip() == "t," + ",".join(LABELS)
        loaded = Trajectory.read_csv(path, mu=[1.0])
        np.testing.assert_array_equal(loaded.times, traj.times)
        np.testing.assert_array_equal(loaded.states, traj.states)
        assert loaded.labels == LABELS

    def test_natural_without_samples(self):
        """Test that natural output needs natural samples."""
        with pytest.raises(ValueError, match="no natural-layout"):
            make_trajectory().write_csv(os.path.join(self.temp_dir, "n.csv"), natural=True)

    def test_read_missing_file(self):
        """Test loading a non-existent file."""
        with pytest.raises(FileNotFoundError, match="Trajectory file not found"):
            Trajectory.read_csv(os.path.join(self.temp_dir, "missing.csv"))

    def test_read_bad_header(self):
        """Test that the header must start with t."""
        path = os.path.join(self.temp_dir, "bad.csv")
        with open(path, "w") as f:
            f.write("time,x\n0,1\n")
        with pytest.raises(ValueError, match="'t,' header"):
            Trajectory.read_csv(path)

    def test_write_summary(self):
        """Test that summaries are written as JSON."""
        path = os.path.join(self.temp_dir, "summary.json")
        write_summary(path, [{"index": 0}, {"index": 1}])
        with open(path) as f:
            assert json.load(f) == [{"index": 0}, {"index": 1}]
