"""Presymplectic two-forms, energy differentials and Dirac membership residuals.

Every Dirac structure used here is the graph of a (pre)symplectic form, so a
pair (tangent, covector) belongs to it exactly when

    covector(w) = Omega(tangent, w)   for every basis direction w,

and ``dirac_membership`` returns ``covector - M^T tangent`` for the matrix M of
the form. The three levels are the Pontryagin bundle (q, v, p), the momentum
level M_mu in the basis (dx, E~, dv, dv~, dp) and its quotient in hat
coordinates.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .autodiff import matrix_derivative
from .frames import Frame, PontryaginPoint, anholonomity, eval_frame, lagrangian_gradient, lu_solve
from .routh import (
    FullQuasiState,
    LagrangianSystem,
    ReducedState,
    assemble_q,
    group_quasi_velocity,
    lambda_matrix,
    natural_velocity,
    routhian_derivatives,
)
from .symmetry import as_matrix, body_frame, curvature

ANTISYMMETRY_TOL = 1e-12
KERNEL_TOL = 1e-10

PONTRYAGIN_BASIS = "(dq, dv, dp)"
LEVEL_BASIS = "(dx, E~, dv, dv~, dp)"
QUASI_BASIS = "(W, dpq)"

logger = logging.getLogger("routh_dirac.dirac")


@dataclass(frozen=True)
class TwoFormAtPoint:
    """Antisymmetric matrix M with Omega(u, w) = u^T M w."""

    matrix: np.ndarray
    basis_label: str

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Two-form matrix must be square, got shape {matrix.shape}")
        if matrix.size and np.max(np.abs(matrix + matrix.T)) > ANTISYMMETRY_TOL:
            raise ValueError(f"Two-form in basis {self.basis_label} is not antisymmetric")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, u: Sequence[float], w: Sequence[float]) -> float:
        return float(np.asarray(u, dtype=float) @ self.matrix @ np.asarray(w, dtype=float))


@dataclass(frozen=True)
class EnergyDifferentialAtPoint:
    components: np.ndarray
    basis_label: str

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float).ravel())


def dirac_membership(
    form: TwoFormAtPoint, tangent: Sequence[float], covector: Sequence[float]
) -> np.ndarray:
    """covector - Omega(tangent, .) componentwise; zero iff the pair lies in the graph."""
    tangent = np.asarray(tangent, dtype=float).ravel()
    covector = np.asarray(covector, dtype=float).ravel()
    if not len(tangent) == len(covector) == form.dimension:
        raise ValueError(
            f"Tangent ({len(tangent)}) and covector ({len(covector)}) must match "
            f"the form dimension {form.dimension}"
        )
    return covector - form.matrix.T @ tangent


def kernel_basis(form: TwoFormAtPoint, rcond: float = KERNEL_TOL) -> List[np.ndarray]:
    """Orthonormal basis of the numerical null space of the form."""
    if form.dimension == 0:
        return []
    basis = null_space(form.matrix, rcond=rcond)
    return [basis[:, j] for j in range(basis.shape[1])]


def principal_angles(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> np.ndarray:
    """Principal angles between span(first) and span(second), largest first."""
    a = np.column_stack(first) if len(first) else None
    b = np.column_stack(second) if len(second) else None
    if a is None or b is None:
        return np.zeros(0)
    return subspace_angles(a, b)


# Pontryagin bundle -------------------------------------------------------------


def generalized_energy(system: LagrangianSystem, pt: PontryaginPoint) -> float:
    """E_L(q, v, p) = p . v - L(q, v)."""
    return float(pt.p @ pt.v - system.lagrangian(pt.q, pt.v))


def omega_pontryagin(n: int) -> TwoFormAtPoint:
    """dq ^ dp pulled back to TQ + T*Q; the dv block is zero."""
    matrix = np.zeros((3 * n, 3 * n))
    matrix[:n, 2 * n :] = np.eye(n)
    matrix[2 * n :, :n] = -np.eye(n)
    return TwoFormAtPoint(matrix, PONTRYAGIN_BASIS)


def d_energy_full(system: LagrangianSystem, pt: PontryaginPoint) -> EnergyDifferentialAtPoint:
    dl_dq, dl_dv = lagrangian_gradient(system.lagrangian, pt.q, pt.v)
    return EnergyDifferentialAtPoint(np.concatenate([-dl_dq, pt.p - dl_dv, pt.v]), PONTRYAGIN_BASIS)


def dirac_residual_full(
    system: LagrangianSystem, pt: PontryaginPoint, tangent: Tuple[Sequence[float], ...]
) -> np.ndarray:
    """(alpha + dp, beta, gamma - dq) for dE_L = (alpha, beta, gamma)."""
    dq, dv, dp = (np.asarray(part, dtype=float).ravel() for part in tangent)
    n = len(pt.q)
    form = omega_pontryagin(n)
    return dirac_membership(form, np.concatenate([dq, dv, dp]), d_energy_full(system, pt).components)


# momentum level M_mu -----------------------------------------------------------


def omega_mu(system: LagrangianSystem, mu: Sequence[float], q: Sequence[float]) -> TwoFormAtPoint:
    """dx ^ dp + 1/2 mu_a (B^a_ij dx^i ^ dx^j - C^a_bc E~^b ^ E~^c) on M_mu."""
    m, k = system.dims.m, system.dims.k
    mu = np.asarray(mu, dtype=float)
    b, _ = curvature(system.sym, q, verify=False)
    size = 3 * m + 2 * k
    matrix = np.zeros((size, size))
    p0 = 2 * m + 2 * k
    matrix[:m, p0:] = np.eye(m)
    matrix[p0:, :m] = -np.eye(m)
    if k:
        if m:
            matrix[:m, :m] = np.einsum("a,aij->ij", mu, b)
        matrix[m : m + k, m : m + k] = -np.einsum("a,abc->bc", mu, system.sym.C)
    return TwoFormAtPoint(matrix, LEVEL_BASIS)


def d_energy_mu(
    system: LagrangianSystem, mu: Sequence[float], s: FullQuasiState
) -> EnergyDifferentialAtPoint:
    """dE_mu for E_mu = p_i v^i - R^mu, components along (X_i, E~_b, dv, dv~, dp)."""
    sym = system.sym
    mu = np.asarray(mu, dtype=float)
    vnat = natural_velocity(sym, s.q, s.v, s.vtilde)
    xc, xv, _, ev = routhian_derivatives(system, mu, s.q, vnat)
    b, _ = curvature(sym, s.q, verify=False)
    along_x = xc + np.einsum("a,aij,j->i", ev, b, s.v) if b.size else xc
    # E~_b^C(R) = -mu_c C^c_bd v~^d
    along_group = np.einsum("a,abc,c->b", mu + ev, sym.C, s.vtilde) if sym.dims.k else np.zeros(0)
    components = np.concatenate([-along_x, along_group, s.p - xv, -ev, s.v])
    return EnergyDifferentialAtPoint(components, LEVEL_BASIS)


def level_tangent(system: LagrangianSystem, s: FullQuasiState, sdot: FullQuasiState) -> np.ndarray:
    """Tangent (xdot, u~, vdot, v~dot, pdot) of a jet on M_mu."""
    m = system.dims.m
    utilde = group_quasi_velocity(system.sym, s.q, sdot.q)
    return np.concatenate([sdot.q[:m], np.asarray(utilde, dtype=float), sdot.v, sdot.vtilde, sdot.p])


def level_membership(
    system: LagrangianSystem, mu: Sequence[float], s: FullQuasiState, sdot: FullQuasiState
) -> np.ndarray:
    """Graph residual dE_mu - Omega_mu(cdot, .) in the basis (dx, E~, dv, dv~, dp)."""
    form = omega_mu(system, mu, s.q)
    return dirac_membership(form, level_tangent(system, s, sdot), d_energy_mu(system, mu, s).components)


def restricted_dirac_residual(
    system: LagrangianSystem, mu: Sequence[float], s: FullQuasiState, sdot: FullQuasiState
) -> np.ndarray:
    """(mu_a C^a_bc (v~^c - u~^c), E~^V(R), v - xdot, X^V(R) - p, pdot - X^C(R) + mu_a B^a_ij v^j)."""
    sym = system.sym
    m = sym.dims.m
    mu = np.asarray(mu, dtype=float)
    vnat = natural_velocity(sym, s.q, s.v, s.vtilde)
    xc, xv, _, ev = routhian_derivatives(system, mu, s.q, vnat)
    utilde = np.asarray(group_quasi_velocity(sym, s.q, sdot.q), dtype=float)
    b, _ = curvature(sym, s.q, verify=False)
    if sym.dims.k:
        group_block = np.einsum("a,abc,c->b", mu, sym.C, s.vtilde - utilde)
    else:
        group_block = np.zeros(0)
    gyro = np.einsum("aij,a,j->i", b, mu, s.v) if b.size else np.zeros(m)
    return np.concatenate([group_block, ev, s.v - sdot.q[:m], xv - s.p, sdot.p - xc + gyro])


# reduced space -----------------------------------------------------------------


def reduced_dirac_residual(
    system: LagrangianSystem,
    mu: Sequence[float],
    r: ReducedState,
    rdot: ReducedState,
    thetaA=None,
) -> np.ndarray:
    """Routh-Dirac membership on M_mu / G_mu in hat coordinates.

    Rows (mu_a C^a_KJ (v^^J - u^^J), pdot - dR/dx + Lambda^I dR/dtheta^I + mu_a B^a_ij xdot^j,
    p - dR/dv, dR/dv^, v - xdot). The hat velocity u^ of the base curve
    takes its A components from v^, the kernel directions of the form.
    """
    sym = system.sym
    m, k = sym.dims.m, sym.dims.k
    mu = np.asarray(mu, dtype=float)
    a_idx, i_idx = list(sym.split.A), list(sym.split.I)
    q = assemble_q(sym, r.x, r.thetaI, thetaA)
    lmat, adj = body_frame(sym, q)
    lam = lambda_matrix(sym, q)
    vnat = natural_velocity(sym, q, r.v, adj @ r.vhat)
    xc, xv, _, ev = routhian_derivatives(system, mu, q, vnat)
    b, bhat = curvature(sym, q, verify=False)
    dr_dvhat = adj.T @ ev

    group_block = np.zeros(len(i_idx))
    if i_idx:
        rhs = rdot.thetaI + lam[i_idx, :] @ rdot.x - lmat[np.ix_(i_idx, a_idx)] @ r.vhat[a_idx]
        uhat_i = lu_solve(lmat[np.ix_(i_idx, i_idx)], rhs)
        c_ij = np.einsum("a,akj->kj", mu, sym.C[:, i_idx, :][:, :, i_idx])
        group_block = c_ij @ (r.vhat[i_idx] - uhat_i)

    dr_dx = xc + np.einsum("aij,j,a->i", bhat, r.v, dr_dvhat) if k and m else xc
    gyro = np.einsum("aij,a,j->i", b, mu, rdot.x) if b.size else np.zeros(m)
    return np.concatenate([group_block, rdot.p - dr_dx + gyro, r.p - xv, dr_dvhat, r.v - rdot.x])


# quasi-coordinate oracle -------------------------------------------------------


def omega_quasi(frame: Frame, q: Sequence[float], pq: Sequence[float]) -> TwoFormAtPoint:
    """W^a ^ dpq_a + 1/2 R^a_bc pq_a W^b ^ W^c in the basis (W, dpq)."""
    q = np.asarray(q, dtype=float)
    pq = np.asarray(pq, dtype=float)
    n = len(q)
    r = anholonomity(frame, q)
    matrix = np.zeros((2 * n, 2 * n))
    matrix[:n, :n] = np.einsum("abc,a->bc", r, pq)
    matrix[:n, n:] = np.eye(n)
    matrix[n:, :n] = -np.eye(n)
    return TwoFormAtPoint(matrix, QUASI_BASIS)


def canonical_in_frame(frame: Frame, q: Sequence[float], pq: Sequence[float]) -> TwoFormAtPoint:
    """Canonical dq ^ dp expressed in the basis (W, dpq) through p = W^T pq."""
    q = np.asarray(q, dtype=float)
    pq = np.asarray(pq, dtype=float)
    n = len(q)
    z, w = eval_frame(frame, q)
    _, dw = matrix_derivative(frame.inverse_fn, q)
    dp_dq = np.einsum("adt,a->dt", dw, pq)
    jac = np.block([[np.eye(n), np.zeros((n, n))], [dp_dq, w.T]])
    canonical = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    pulled = jac.T @ canonical @ jac
    change = np.block([[z, np.zeros((n, n))], [np.zeros((n, n)), np.eye(n)]])
    matrix = change.T @ pulled @ change
    # symmetrize away rounding before the antisymmetry check
    return TwoFormAtPoint((matrix - matrix.T) / 2, QUASI_BASIS)


# equivariant momentum map ------------------------------------------------------


def momentum_map_membership(system: LagrangianSystem, q: Sequence[float], p: Sequence[float]) -> float:
    """Largest graph residual of (cotangent lift of E~_a, d p~_a) over all a on T*Q."""
    sym = system.sym
    m, k, n = sym.dims.m, sym.dims.k, sym.dims.n
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if k == 0:
        return 0.0
    kmat, dk = matrix_derivative(lambda z: as_matrix(sym.K(z), (k, k)), q)
    canonical = TwoFormAtPoint(
        np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]]), "(dq, dp)"
    )
    worst = 0.0
    for a in range(k):
        generator = np.zeros(n)
        generator[m:] = kmat[:, a]
        d_generator = np.zeros((n, n))
        d_generator[m:, :] = dk[:, a, :]
        # J_a = K^b_a p_(theta b)
        d_momentum = np.concatenate([dk[:, a, :].T @ p[m:], generator])
        lift = np.concatenate([generator, -d_generator.T @ p])
        worst = max(worst, float(np.max(np.abs(dirac_membership(canonical, lift, d_momentum)))))
    return worst
