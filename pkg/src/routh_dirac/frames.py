"""Anholonomic frames on a single coordinate chart."""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Tuple

import numpy as np

from .autodiff import gradient, is_dual_array, matrix_derivative, value
from .errors import DerivativeMismatch, SingularFrame

PIVOT_TOL = 1e-12
INVERSE_TOL = 1e-10
DET_TOL = 1e-12

logger = logging.getLogger("routh_dirac.frames")


@dataclass(frozen=True)
class Dims:
    """Index ranges: n = m + k, with k_mu of the k group directions in the isotropy algebra."""

    n: int
    k: int
    m: int
    k_mu: int

    def __post_init__(self):
        if min(self.n, self.k, self.m, self.k_mu) < 0:
            raise ValueError(f"Dimensions must be nonnegative: {self}")
        if self.n != self.m + self.k:
            raise ValueError(f"Inconsistent dimensions: n={self.n} != m + k = {self.m + self.k}")
        if self.k_mu > self.k:
            raise ValueError(f"Isotropy dimension k_mu={self.k_mu} exceeds k={self.k}")


def _vector(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


@dataclass(frozen=True)
class PontryaginPoint:
    """Point (q, v, p) of TQ + T*Q in natural chart coordinates."""

    q: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in ("q", "v", "p"):
            object.__setattr__(self, name, _vector(getattr(self, name)))
        if not len(self.q) == len(self.v) == len(self.p):
            raise ValueError(
                f"Point components differ in length: {len(self.q)}, {len(self.v)}, {len(self.p)}"
            )


@dataclass(frozen=True)
class QuasiPoint:
    """Point with velocity and momentum expressed in a frame."""

    q: np.ndarray
    vq: np.ndarray
    pq: np.ndarray

    def __post_init__(self):
        for name in ("q", "vq", "pq"):
            object.__setattr__(self, name, _vector(getattr(self, name)))
        if not len(self.q) == len(self.vq) == len(self.pq):
            raise ValueError("Quasi point components differ in length")


MatrixFn = Callable[[np.ndarray], Any]


@dataclass(frozen=True)
class Frame:
    """Frame {Z_alpha}: column alpha of Z(q) holds the components Z^beta_alpha.

    ``W`` defaults to the LU inverse of ``Z``; both must accept dual-number
    coordinates so their derivatives can be taken.
    """

    dims: Dims
    Z: MatrixFn
    W: Optional[MatrixFn] = None
    analytic_R: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tolerance: float = 1e-6
    label: str = "frame"

    def inverse_fn(self, q: np.ndarray) -> Any:
        if self.W is not None:
            return self.W(q)
        return lu_inverse(np.asarray(self.Z(q), dtype=object))


def coordinate_frame(n: int) -> Frame:
    """Holonomic frame {d/dq^alpha}."""
    identity = np.eye(n)
    return Frame(
        dims=Dims(n=n, k=0, m=n, k_mu=0),
        Z=lambda q: identity,
        W=lambda q: identity,
        analytic_R=lambda q: np.zeros((n, n, n)),
        label="coordinate",
    )


# linear algebra over float or dual entries ----------------------------------


def lu_factor(matrix: Any) -> Tuple[np.ndarray, list]:
    """Partial-pivot Doolittle factorization, packed in one array."""
    a = np.array(matrix, dtype=object, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"Square matrix required, got shape {a.shape}")
    n = a.shape[0]
    perm = list(range(n))
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(value(a[r, col])))
        if abs(value(a[pivot, col])) < PIVOT_TOL:
            raise SingularFrame(f"Matrix is singular (pivot {abs(value(a[pivot, col])):.3e} in column {col})")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            perm[col], perm[pivot] = perm[pivot], perm[col]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col] = factor
            for j in range(col + 1, n):
                a[row, j] = a[row, j] - factor * a[col, j]
    return a, perm


def lu_solve(matrix: Any, rhs: Any) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` for a vector or a matrix of right-hand sides."""
    lu, perm = lu_factor(matrix)
    b = np.array(rhs, dtype=object)
    squeeze = b.ndim == 1
    if squeeze:
        b = b.reshape(-1, 1)
    n = lu.shape[0]
    x = b[perm].copy()
    for i in range(n):
        for j in range(i):
            x[i] = x[i] - lu[i, j] * x[j]
    for i in reversed(range(n)):
        for j in range(i + 1, n):
            x[i] = x[i] - lu[i, j] * x[j]
        x[i] = x[i] / lu[i, i]
    if squeeze:
        x = x[:, 0]
    return _compact(x)


def lu_inverse(matrix: Any) -> np.ndarray:
    n = np.asarray(matrix, dtype=object).shape[0]
    return lu_solve(matrix, np.eye(n))


def _compact(array: np.ndarray) -> np.ndarray:
    """Return a float array when no entry carries a perturbation."""
    if is_dual_array(array):
        return array
    return np.asarray(array, dtype=float)


# operations -------------------------------------------------------------------


def eval_frame(frame: Frame, q: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate Z(q) and W(q) as float matrices and check Z W = I."""
    q = _vector(q)
    if not np.all(np.isfinite(q)):
        raise ValueError(f"Non-finite coordinates: {q}")
    z = np.asarray(value(np.asarray(frame.Z(q), dtype=object)), dtype=float)
    if abs(np.linalg.det(z)) < DET_TOL:
        raise SingularFrame(f"{frame.label} frame is singular at q={q}")
    w = np.asarray(value(np.asarray(frame.inverse_fn(q), dtype=object)), dtype=float)
    error = np.max(np.abs(z @ w - np.eye(len(q)))) if len(q) else 0.0
    if error > INVERSE_TOL:
        raise SingularFrame(f"{frame.label} frame inverse check failed at q={q} (error {error:.3e})")
    return z, w


def anholonomity(frame: Frame, q: Any, tolerance: Optional[float] = None) -> np.ndarray:
    """Coefficients R[alpha, beta, gamma] with [Z_beta, Z_gamma] = R^alpha_beta,gamma Z_alpha."""
    q = _vector(q)
    tol = frame.tolerance if tolerance is None else tolerance
    z, w = eval_frame(frame, q)
    _, dz = matrix_derivative(frame.Z, q)
    _, dw = matrix_derivative(frame.inverse_fn, q)

    # Z^t_b W^a_d dZ^d_g/dq^t - (b <-> g)
    first = np.einsum("tb,ad,dgt->abg", z, w, dz)
    r = first - first.transpose(0, 2, 1)

    # -(Z^t_b dW^a_d/dq^t Z^d_g - (b <-> g))
    second = np.einsum("tb,adt,dg->abg", z, dw, z)
    r_check = -(second - second.transpose(0, 2, 1))

    mismatch = float(np.max(np.abs(r - r_check))) if r.size else 0.0
    if mismatch > tol:
        raise DerivativeMismatch(
            f"Anholonomity formulas disagree for {frame.label} frame at q={q}", mismatch
        )
    if frame.analytic_R is not None:
        analytic = np.asarray(frame.analytic_R(q), dtype=float)
        mismatch = float(np.max(np.abs(r - analytic))) if r.size else 0.0
        if mismatch > tol:
            raise DerivativeMismatch(
                f"Analytic anholonomity of {frame.label} frame disagrees at q={q}", mismatch
            )
    return r


def to_quasi(frame: Frame, pt: PontryaginPoint) -> QuasiPoint:
    z, w = eval_frame(frame, pt.q)
    return QuasiPoint(q=pt.q, vq=w @ pt.v, pq=z.T @ pt.p)


def from_quasi(frame: Frame, qp: QuasiPoint) -> PontryaginPoint:
    z, w = eval_frame(frame, qp.q)
    return PontryaginPoint(q=qp.q, v=z @ qp.vq, p=w.T @ qp.pq)


def lagrangian_gradient(L: Callable, q: Any, v: Any) -> Tuple[np.ndarray, np.ndarray]:
    """(dL/dq, dL/dv) from one dual-number sweep."""
    q = _vector(q)
    v = _vector(v)
    n = len(q)
    _, grad = gradient(lambda z: L(z[:n], z[n:]), np.concatenate([q, v]))
    return grad[:n], grad[n:]


def lift_derivatives(frame: Frame, L: Callable, q: Any, v: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Complete and vertical lifts of the frame fields applied to L.

    ZV[a] = Z^b_a dL/dv^b and ZC[a] = Z^b_a dL/dq^b + dZ^b_a/dq^g v^g dL/dv^b.
    """
    q = _vector(q)
    v = _vector(v)
    dl_dq, dl_dv = lagrangian_gradient(L, q, v)
    z, dz = matrix_derivative(frame.Z, q)
    zv = z.T @ dl_dv
    zc = z.T @ dl_dq + np.einsum("bag,g,b->a", dz, v, dl_dv)
    return zc, zv


def implicit_quasi_residual(
    frame: Frame, L: Callable, qp: QuasiPoint, dq: Any, dpq: Any
) -> np.ndarray:
    """Implicit Euler-Lagrange equations in quasi-velocities and quasi-momenta.

    Rows (vq - W dq, pq - Z^V(L), dpq - Z^C(L)).
    """
    z, w = eval_frame(frame, qp.q)
    v = z @ qp.vq
    zc, zv = lift_derivatives(frame, L, qp.q, v)
    return np.concatenate([qp.vq - w @ _vector(dq), qp.pq - zv, _vector(dpq) - zc])
