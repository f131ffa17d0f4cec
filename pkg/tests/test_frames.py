"""Tests for frames, quasi-coordinates and anholonomity."""

import numpy as np
import pytest

from routh_dirac.errors import DerivativeMismatch, SingularFrame
from routh_dirac.frames import (
    Dims,
    Frame,
    PontryaginPoint,
    QuasiPoint,
    anholonomity,
    coordinate_frame,
    eval_frame,
    from_quasi,
    implicit_quasi_residual,
    lagrangian_gradient,
    lift_derivatives,
    lu_inverse,
    lu_solve,
    to_quasi,
)
from routh_dirac.systems import make_cyclic_linear


def skew_z(q):
    """Columns d/dx and x d/dy."""
    return np.array([[1.0, 0.0], [0.0, q[0]]], dtype=object)


def skew_frame(**kwargs) -> Frame:
    return Frame(dims=Dims(n=2, k=0, m=2, k_mu=0), Z=skew_z, label="skew", **kwargs)


class TestDims:
    """Tests for Dims validation."""

    def test_inconsistent(self):
        """Test that n must equal m + k."""
        with pytest.raises(ValueError, match="Inconsistent dimensions"):
            Dims(n=3, k=1, m=1, k_mu=0)

    def test_isotropy_too_large(self):
        """Test that k_mu cannot exceed k."""
        with pytest.raises(ValueError, match="exceeds"):
            Dims(n=2, k=1, m=1, k_mu=2)


class TestLinearAlgebra:
    """Tests for the pivoted LU helpers."""

    def test_lu_solve_with_pivoting(self):
        """Test a solve that needs a row exchange."""
        x = lu_solve([[0.0, 2.0], [1.0, 1.0]], [2.0, 3.0])
        np.testing.assert_allclose(x, [2.0, 1.0])

    def test_lu_inverse(self):
        """Test the inverse of a 2x2 matrix."""
        inv = lu_inverse(np.array([[2.0, 1.0], [1.0, 1.0]]))
        np.testing.assert_allclose(inv, [[1.0, -1.0], [-1.0, 2.0]])

    def test_singular_matrix(self):
        """Test that a singular matrix raises SingularFrame."""
        with pytest.raises(SingularFrame, match="singular"):
            lu_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


class TestQuasiCoordinates:
    """Tests for quasi-velocities and quasi-momenta."""

    def test_identity_frame(self):
        """Test that the coordinate frame leaves v and p unchanged."""
        pt = PontryaginPoint(q=[0.1, 0.2], v=[1.0, 2.0], p=[3.0, 4.0])
        qp = to_quasi(coordinate_frame(2), pt)
        np.testing.assert_array_equal(qp.vq, pt.v)
        np.testing.assert_array_equal(qp.pq, pt.p)

    def test_skew_frame(self):
        """Test vq = W v and pq = Z^T p for the x d/dy frame at x=2."""
        pt = PontryaginPoint(q=[2.0, 0.0], v=[0.0, 1.0], p=[0.0, 1.0])
        qp = to_quasi(skew_frame(), pt)
        np.testing.assert_allclose(qp.vq, [0.0, 0.5])
        np.testing.assert_allclose(qp.pq, [0.0, 2.0])
        assert qp.pq @ qp.vq == pytest.approx(pt.p @ pt.v)

    def test_round_trip(self):
        """Test that from_quasi inverts to_quasi."""
        frame = skew_frame()
        rng = np.random.default_rng(1)
        for _ in range(100):
            q = np.array([rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)])
            pt = PontryaginPoint(q=q, v=rng.normal(size=2), p=rng.normal(size=2))
            back = from_quasi(frame, to_quasi(frame, pt))
            np.testing.assert_allclose(back.v, pt.v, atol=1e-12)
            np.testing.assert_allclose(back.p, pt.p, atol=1e-12)

    def test_point_length_mismatch(self):
        """Test that point components must have equal length."""
        with pytest.raises(ValueError, match="differ in length"):
            PontryaginPoint(q=[0.0], v=[0.0, 1.0], p=[0.0])
        with pytest.raises(ValueError):
            QuasiPoint(q=[0.0], vq=[0.0], pq=[0.0, 1.0])

    def test_singular_frame(self):
        """Test that the frame is rejected where x d/dy vanishes."""
        with pytest.raises(SingularFrame):
            eval_frame(skew_frame(), [0.0, 1.0])


class TestAnholonomity:
    """Tests for the object of anholonomity."""

    def test_skew_frame_coefficients(self):
        """Test [d/dx, x d/dy] = (1/x) Z_2 at x=2."""
        r = anholonomity(skew_frame(), [2.0, 0.3])
        expected = np.zeros((2, 2, 2))
        expected[1, 0, 1] = 0.5
        expected[1, 1, 0] = -0.5
        np.testing.assert_allclose(r, expected, atol=1e-14)

    def test_antisymmetry_is_exact(self):
        """Test that R is antisymmetric in its lower indices as computed."""
        r = anholonomity(skew_frame(), [1.7, -0.4])
        assert np.array_equal(r, -r.transpose(0, 2, 1))

    def test_coordinate_frame_is_holonomic(self):
        """Test that the coordinate frame has vanishing R."""
        r = anholonomity(coordinate_frame(3), [0.1, 0.2, 0.3])
        assert np.all(r == 0.0)

    def test_analytic_disagreement(self):
        """Test that a wrong analytic R is reported."""
        frame = skew_frame(analytic_R=lambda q: np.zeros((2, 2, 2)))
        with pytest.raises(DerivativeMismatch) as excinfo:
            anholonomity(frame, [2.0, 0.0])
        assert excinfo.value.max_difference == pytest.approx(0.5)


class TestLifts:
    """Tests for complete and vertical lifts."""

    def setup_method(self):
        self.system = make_cyclic_linear()

    def test_coordinate_frame_gives_partials(self):
        """Test that lifts of the coordinate frame are the partial derivatives."""
        zc, zv = lift_derivatives(coordinate_frame(2), self.system.lagrangian, [0.5, 0.0], [1.0, 0.0])
        dl_dq, dl_dv = lagrangian_gradient(self.system.lagrangian, [0.5, 0.0], [1.0, 0.0])
        np.testing.assert_allclose(zc, dl_dq)
        np.testing.assert_allclose(zv, [2.0, 1.0])
        np.testing.assert_allclose(zv, dl_dv)

    def test_implicit_quasi_residual_vanishes(self):
        """Test the quasi-coordinate EL rows at a consistent jet."""
        qp = QuasiPoint(q=[0.0, 0.0], vq=[1.0, 0.0], pq=[2.0, 1.0])
        residual = implicit_quasi_residual(
            coordinate_frame(2), self.system.lagrangian, qp, dq=[1.0, 0.0], dpq=[0.0, 0.0]
        )
        np.testing.assert_allclose(residual, np.zeros(6), atol=1e-14)
