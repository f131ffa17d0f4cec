"""Tests for symmetry data, frames, curvature and adapted splits."""

import numpy as np
import pytest

from routh_dirac.errors import InvalidSplit, InvarianceViolation
from routh_dirac.frames import Dims, anholonomity
from routh_dirac.symmetry import (
    Split,
    SymmetrySetup,
    body_frame,
    connection_mu,
    curvature,
    hat_frame,
    jacobi_violation,
    momentum_map,
    moving_frame,
    validate_splitting,
)
from routh_dirac.systems import make_affine_fixture, make_cyclic_linear, make_so3_fixture


def line_bundle(lam, analytic_B=None) -> SymmetrySetup:
    """R acting on theta over the base (x1, x2) with connection coefficients lam(q)."""
    return SymmetrySetup(
        dims=Dims(n=3, k=1, m=2, k_mu=1),
        C=np.zeros((1, 1, 1)),
        K=lambda q: np.eye(1),
        Ad=lambda theta: np.eye(1),
        Lambda=lam,
        mu=[1.0],
        split=Split(A=(0,), I=()),
        analytic_B=analytic_B,
    )


class TestSymmetrySetup:
    """Tests for SymmetrySetup validation."""

    def test_split_overlap(self):
        """Test that A and I must be disjoint."""
        with pytest.raises(ValueError, match="overlap"):
            Split(A=(0, 1), I=(1,))

    def test_structure_constants_not_antisymmetric(self):
        """Test that C must be antisymmetric in the lower indices."""
        c = np.zeros((2, 2, 2))
        c[1, 0, 1] = 1.0
        with pytest.raises(ValueError, match="antisymmetric"):
            SymmetrySetup(
                dims=Dims(n=2, k=2, m=0, k_mu=0),
                C=c,
                K=lambda q: np.eye(2),
                Ad=lambda theta: np.eye(2),
                Lambda=lambda q: np.zeros((2, 0)),
                mu=np.zeros(2),
                split=Split(A=(), I=(0, 1)),
            )

    def test_mu_length(self):
        """Test that mu must have k entries."""
        with pytest.raises(ValueError, match="Momentum level"):
            make_so3_fixture().sym.with_mu([1.0, 0.0])

    def test_jacobi_of_so3(self):
        """Test that so(3) satisfies the Jacobi identity."""
        assert jacobi_violation(make_so3_fixture().sym.C) == 0.0

    def test_jacobi_violation_detected(self):
        """Test that an antisymmetric non-Lie bracket violates Jacobi."""
        c = np.zeros((3, 3, 3))
        c[0, 0, 1], c[0, 1, 0] = 1.0, -1.0
        c[1, 1, 2], c[1, 2, 1] = 1.0, -1.0
        assert jacobi_violation(c) > 0.0

    def test_with_split_updates_dims(self):
        """Test that changing the split updates k_mu."""
        sym = make_so3_fixture().sym.with_split((), (0, 1, 2))
        assert sym.dims.k_mu == 0
        assert sym.split.I == (0, 1, 2)


class TestFrames:
    """Tests for the moving and body-fixed frames."""

    def test_affine_group_block(self):
        """Test that the moving frame's group block of R is -C."""
        system = make_affine_fixture()
        r = anholonomity(moving_frame(system.sym), [1.3, 0.4])
        np.testing.assert_allclose(r, -system.sym.C, atol=1e-14)
        assert r[1, 0, 1] == pytest.approx(-1.0)

    def test_affine_body_frame(self):
        """Test Lmat = K Ad at q = (2, 0.5)."""
        system = make_affine_fixture()
        lmat, adj = body_frame(system.sym, [2.0, 0.5])
        np.testing.assert_allclose(adj, [[1.0, 0.0], [-0.5, 2.0]])
        np.testing.assert_allclose(lmat, [[2.0, 0.0], [0.0, 2.0]])

    def test_hat_frame_group_block(self):
        """Test that the body frame columns are K Ad."""
        system = make_affine_fixture()
        from routh_dirac.frames import eval_frame

        z, _ = eval_frame(hat_frame(system.sym), [2.0, 0.5])
        np.testing.assert_allclose(z, [[2.0, 0.0], [0.0, 2.0]])

    def test_connection_rows(self):
        """Test that the A rows of a trivial connection vanish."""
        system = make_cyclic_linear()
        np.testing.assert_array_equal(connection_mu(system.sym, [0.3, 0.1]), [[0.0]])


class TestCurvature:
    """Tests for curvature and the invariance of the horizontal frame."""

    def test_heisenberg_connection(self):
        """Test B for the connection d theta + x1 d x2."""
        sym = line_bundle(lambda q: np.array([[0.0, q[0]]], dtype=object))
        b, bhat = curvature(sym, [0.4, -0.2, 0.7])
        expected = np.zeros((1, 2, 2))
        expected[0, 0, 1] = -1.0
        expected[0, 1, 0] = 1.0
        np.testing.assert_allclose(b, expected, atol=1e-14)
        np.testing.assert_allclose(bhat, b, atol=1e-14)

    def test_analytic_curvature_skips_moving_frame(self):
        """Test that verify=False returns the analytic B."""
        sym = line_bundle(
            lambda q: np.array([[0.0, q[0]]], dtype=object),
            analytic_B=lambda q: np.array([[[0.0, -1.0], [1.0, 0.0]]]),
        )
        b, _ = curvature(sym, [0.0, 0.0, 0.0], verify=False)
        assert b[0, 0, 1] == -1.0

    def test_connection_depending_on_group(self):
        """Test that a theta-dependent connection is rejected."""
        sym = line_bundle(lambda q: np.array([[q[2], 0.0]], dtype=object))
        with pytest.raises(InvarianceViolation):
            curvature(sym, [0.1, 0.2, 0.5])

    def test_abelian_fixtures_are_flat(self):
        """Test zero curvature for cyclic coordinates."""
        b, _ = curvature(make_cyclic_linear().sym, [0.3, 0.7])
        np.testing.assert_array_equal(b, np.zeros((1, 1, 1)))


class TestMomentumMap:
    """Tests for the momentum map."""

    def test_cyclic_linear(self):
        """Test p~ = v_x for L = vx^2 + vx vy - V."""
        system = make_cyclic_linear()
        np.testing.assert_allclose(momentum_map(system, [0.2, 0.0], [1.0, 0.5]), [1.0])

    def test_affine(self):
        """Test p~ at the identity of the affine group."""
        system = make_affine_fixture()
        np.testing.assert_allclose(momentum_map(system, [1.0, 0.0], [0.3, 0.5]), [0.3, 0.5])


class TestSplitting:
    """Tests for adapted split validation."""

    def test_adapted_so3_split(self):
        """Test that A = {3} is adapted to mu = (0, 0, 1)."""
        report = validate_splitting(make_so3_fixture().sym)
        assert report.passed
        assert set(report.violations) == {"subalgebra", "isotropy", "complement_invariance", "jacobi"}

    def test_misadapted_so3_split(self):
        """Test that A = {1} is rejected for mu = (0, 0, 1)."""
        sym = make_so3_fixture(a_indices=(0,)).sym
        with pytest.raises(InvalidSplit) as excinfo:
            validate_splitting(sym)
        assert excinfo.value.identity == "C^c_Ab mu_c = 0"
        assert excinfo.value.violation == pytest.approx(1.0)

    def test_abelian_split(self):
        """Test that any split of an Abelian algebra is adapted."""
        assert validate_splitting(make_cyclic_linear().sym).passed
