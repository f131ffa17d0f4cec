"""Tests for system config files and run configuration."""

import json
import tempfile

import numpy as np
import pytest
import yaml

from routh_dirac.config import RunConfig, SystemConfigParser, resolve_system


def write_yaml(data) -> str:
    with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
        yaml.dump(data, f)
        f.flush()
        return f.name


class TestRunConfig:
    """Tests for RunConfig validation."""

    def test_defaults(self):
        """Test the default run settings."""
        run = RunConfig(system="cyclic-linear")
        assert run.mode == "full"
        assert run.h == 1e-3
        assert run.T == 1.0
        assert run.params == {}

    def test_invalid_step(self):
        """Test that h must be positive."""
        with pytest.raises(ValueError, match="Step size h must be positive"):
            RunConfig(system="cyclic-linear", h=-1e-3)

    def test_invalid_horizon(self):
        """Test that T must be positive."""
        with pytest.raises(ValueError, match="Final time T must be positive"):
            RunConfig(system="cyclic-linear", T=0.0)

    def test_invalid_mode(self):
        """Test that the mode must be a known run mode."""
        with pytest.raises(ValueError, match="Unknown mode 'fast'"):
            RunConfig(system="cyclic-linear", mode="fast")


class TestSystemConfigParser:
    """Tests for SystemConfigParser class."""

    def test_load_system_success(self):
        """Test successful system loading."""
        path = write_yaml({"family": "cyclic-linear", "potential": "x^2", "mu": [1.0]})
        config = SystemConfigParser().load_system(path)
        assert config.system.label == "cyclic-linear"
        assert config.system.parameters["potential"] == "x^2"
        np.testing.assert_array_equal(config.mu, [1.0])
        assert config.source == path

    def test_load_system_scalar_mu(self):
        """Test that a scalar mu is accepted for k = 1."""
        path = write_yaml({"family": "central-force", "mu": 2.0, "params": {"mass": 2.0}})
        config = SystemConfigParser().load_system(path)
        np.testing.assert_array_equal(config.mu, [2.0])
        assert config.system.parameters["mass"] == 2.0

    def test_load_system_json(self):
        """Test that JSON config files load through the YAML parser."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
            json.dump({"family": "affine"}, f)
            f.flush()
            config = SystemConfigParser().load_system(f.name)
        assert config.system.label == "affine"
        assert config.mu is None

    def test_overrides_win(self):
        """Test that command-line parameters override the file."""
        path = write_yaml({"family": "scalar-fields", "params": {"m2": 2.0}})
        config = SystemConfigParser().load_system(path, {"m2": 3.0})
        assert config.system.parameters["m2"] == 3.0

    def test_extra_constraints_and_split(self):
        """Test declared constraints, a split override and initial data."""
        path = write_yaml(
            {
                "family": "scalar-fields",
                "params": {"constraints": False},
                "extra_constraints": ["x1", "y1 + v_y1"],
                "initial": {"q": [0.0, 0.0, 1.0, 1.0, 0.0, 0.0], "v": [0.0, 0.0, 0.0, 0.0, 0.5, 0.5]},
            }
        )
        system = SystemConfigParser().load_system(path).system
        assert [c.name for c in system.extra_constraints] == ["x1", "y1 + v_y1"]
        np.testing.assert_array_equal(system.initial.v, [0.0, 0.0, 0.0, 0.0, 0.5, 0.5])

        path = write_yaml({"family": "so3", "mu_split": {"A": [2], "I": [0, 1]}})
        sym = SystemConfigParser().load_system(path).system.sym
        assert sym.split.A == (2,)
        assert sym.dims.k_mu == 1

    def test_load_system_file_not_found(self):
        """Test error when the config file doesn't exist."""
        with pytest.raises(FileNotFoundError, match="System config file not found"):
            SystemConfigParser().load_system("nonexistent.yaml")

    def test_load_system_invalid_yaml(self):
        """Test error when YAML is invalid."""
        with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
            f.write("invalid: yaml: content:\n  - bad indentation")
            f.flush()

            with pytest.raises(ValueError, match="Invalid YAML"):
                SystemConfigParser().load_system(f.name)

    def test_load_system_not_dict(self):
        """Test error when YAML is not a mapping."""
        path = write_yaml(["not", "a", "dict"])
        with pytest.raises(ValueError, match="must contain a YAML object"):
            SystemConfigParser().load_system(path)

    def test_load_system_missing_family(self):
        """Test error when the family is missing."""
        path = write_yaml({"params": {}})
        with pytest.raises(ValueError, match="must have a 'family' field"):
            SystemConfigParser().load_system(path)

    def test_load_system_unknown_key(self):
        """Test error on keys outside the schema."""
        path = write_yaml({"family": "cyclic-linear", "steps": 3})
        with pytest.raises(ValueError, match="Unknown system config keys"):
            SystemConfigParser().load_system(path)

    def test_load_system_constraints_not_list(self):
        """Test error when extra_constraints is a string."""
        path = write_yaml({"family": "cyclic-linear", "extra_constraints": "x"})
        with pytest.raises(ValueError, match="must be a list"):
            SystemConfigParser().load_system(path)

    def test_load_system_bad_split(self):
        """Test error when mu_split has foreign keys."""
        path = write_yaml({"family": "so3", "mu_split": {"A": [2], "B": [0]}})
        with pytest.raises(ValueError, match="'mu_split' must be a mapping"):
            SystemConfigParser().load_system(path)

    def test_load_system_unknown_family(self):
        """Test that build errors name the file."""
        path = write_yaml({"family": "pendulum"})
        with pytest.raises(ValueError, match="Error building system"):
            SystemConfigParser().load_system(path)

    def test_load_system_bad_potential(self):
        """Test that a malformed potential is reported as a build error."""
        path = write_yaml({"family": "central-force", "potential": "r^"})
        with pytest.raises(ValueError, match="Error building system"):
            SystemConfigParser().load_system(path)

    def test_load_system_mu_length(self):
        """Test error when mu does not match k."""
        path = write_yaml({"family": "affine", "mu": [1.0]})
        with pytest.raises(ValueError, match="mu in"):
            SystemConfigParser().load_system(path)


class TestResolveSystem:
    """Tests for resolve_system."""

    def test_builtin(self):
        """Test that built-in names bypass the file loader."""
        config = resolve_system("central-force", {"mass": 3.0})
        assert config.system.parameters["mass"] == 3.0
        assert config.mu is None

    def test_path(self):
        """Test that other names are loaded as files."""
        path = write_yaml({"family": "vortices", "params": {"gamma": [1.0, 2.0, -0.5]}})
        config = resolve_system(path)
        assert config.system.dims.n == 6
