"""Tests for the property suites."""

import numpy as np

from routh_dirac.checks import CheckResult, PropertyChecker, run_checks
from routh_dirac.systems import make_cyclic_linear, make_scalar_fields, make_so3_fixture


def by_name(results, fragment):
    return [r for r in results if fragment in r.name]


class TestCheckResult:
    """Tests for CheckResult formatting."""

    def test_pass(self):
        """Test the PASS line."""
        result = CheckResult("pairing", True, 1e-15, 1e-12)
        assert str(result) == "[PASS] pairing: max violation 1.000e-15 (tolerance 1e-12)"

    def test_fail_with_detail(self):
        """Test the FAIL line with a detail suffix."""
        result = CheckResult("adapted split", False, 1.0, 0.0, detail="bad split")
        assert str(result).startswith("[FAIL] adapted split")
        assert str(result).endswith(" - bad split")


class TestPropertyChecker:
    """Tests for PropertyChecker class."""

    def test_cyclic_linear_passes(self):
        """Test that every suite passes on the cyclic example."""
        results = run_checks(make_cyclic_linear(), mu=[1.0], points=20)
        failed = [str(r) for r in results if not r.passed]
        assert failed == []
        assert len(by_name(results, "identity")) == 4

    def test_default_mu(self):
        """Test that mu defaults to the initial data's momentum."""
        checker = PropertyChecker(make_scalar_fields(), points=5)
        np.testing.assert_allclose(checker.mu, [1.4, 1.6])

    def test_scalar_field_identities(self):
        """Test the Routhian derivative identities on the field model."""
        checker = PropertyChecker(make_scalar_fields(), seed=7, points=20)
        results = checker.derivative_identities()
        assert len(results) == 4
        assert all(r.passed for r in results)

    def test_same_seed_same_results(self):
        """Test that a seed fixes every sampled point."""
        first = PropertyChecker(make_scalar_fields(), seed=3, points=10).dual_vs_fd()
        second = PropertyChecker(make_scalar_fields(), seed=3, points=10).dual_vs_fd()
        assert first.max_violation == second.max_violation

    def test_so3_skips_frame_suites(self):
        """Test that algebra-only fixtures skip brackets and identities."""
        results = run_checks(make_so3_fixture(), points=5)
        assert by_name(results, "bracket") == []
        assert by_name(results, "identity") == []
        (split,) = by_name(results, "adapted split")
        assert split.passed
        (kernel,) = by_name(results, "kernel")
        assert kernel.passed

    def test_misadapted_so3(self):
        """Test that a split with A not fixing mu is reported."""
        results = run_checks(make_so3_fixture(a_indices=(0,)), points=5)
        (split,) = by_name(results, "adapted split")
        assert not split.passed
        assert "C^c_Ab mu_c = 0" in split.detail
        kernel = [r for r in results if "kernel" in r.name]
        assert kernel and not any(r.passed for r in kernel)
