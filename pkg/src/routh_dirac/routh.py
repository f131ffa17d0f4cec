"""Generalized Routhian and the residual forms of the implicit equations of motion.

Every residual function returns a flat float vector that vanishes exactly on
solutions, so the same functions serve the integrator (as DAE rows) and the
verification suites (as membership tests).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import hessian, value
from .errors import InvarianceViolation, NotGRegular
from .frames import Dims, PontryaginPoint, eval_frame, lagrangian_gradient, lift_derivatives, lu_solve
from .symmetry import SymmetrySetup, as_matrix, body_frame, curvature, moving_frame

INVARIANCE_TOL = 1e-8
RANK_TOL = 1e-10
GROUP_VELOCITY_TOL = 1e-12

logger = logging.getLogger("routh_dirac.routh")

Lagrangian = Callable[[Any, Any], Any]
Sampler = Callable[[np.random.Generator], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Constraint:
    """Named scalar constraint g(q, v, p) = 0 declared by the user."""

    name: str
    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], Any]

    def __call__(self, q, v, p) -> float:
        return float(value(self.fn(q, v, p)))


@dataclass(frozen=True)
class InitialData:
    """Natural-coordinate guess plus the names held fixed by consistent initialization."""

    q: np.ndarray
    v: np.ndarray
    fixed: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).ravel())
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).ravel())
        object.__setattr__(self, "fixed", tuple(self.fixed))


def _uniform_sampler(n: int) -> Sampler:
    def sample(rng: np.random.Generator):
        return rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, n)

    return sample


@dataclass(frozen=True)
class LagrangianSystem:
    """A G-invariant Lagrangian on U x G with its symmetry data."""

    dims: Dims
    lagrangian: Lagrangian
    sym: SymmetrySetup
    coordinates: Tuple[str, ...] = ()
    extra_constraints: Tuple[Constraint, ...] = ()
    label: str = "system"
    sampler: Optional[Sampler] = None
    initial: Optional[InitialData] = None
    parameters: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dims != self.sym.dims:
            raise ValueError(f"System dims {self.dims} differ from symmetry dims {self.sym.dims}")
        names = tuple(self.coordinates) or tuple(f"q{i}" for i in range(self.dims.n))
        if len(names) != self.dims.n:
            raise ValueError(f"Expected {self.dims.n} coordinate names, got {len(names)}")
        object.__setattr__(self, "coordinates", names)
        object.__setattr__(self, "extra_constraints", tuple(self.extra_constraints))

    @property
    def L(self) -> Lagrangian:
        return self.lagrangian

    def sample(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        sampler = self.sampler or _uniform_sampler(self.dims.n)
        q, v = sampler(rng)
        return np.asarray(q, dtype=float), np.asarray(v, dtype=float)


def validate_system(system: LagrangianSystem, samples: int = 100, seed: int = 0) -> float:
    """Check E~_a^C(L) = 0 at seeded random points; return the largest violation."""
    m = system.dims.m
    frame = moving_frame(system.sym)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        q, v = system.sample(rng)
        zc, _ = lift_derivatives(frame, system.lagrangian, q, v)
        if zc.size > m:
            worst = max(worst, float(np.max(np.abs(zc[m:]))))
    if worst > INVARIANCE_TOL:
        raise InvarianceViolation(
            f"Lagrangian of {system.label} is not invariant: max |E~^C(L)| = {worst:.3e}"
        )
    logger.debug(f"{system.label}: invariance check passed ({worst:.3e} over {samples} points)")
    return worst


# state containers --------------------------------------------------------------


def _vec(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


class _StateMixin:
    _fields: Tuple[str, ...] = ()

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, name) for name in self._fields])

    @classmethod
    def sizes(cls, dims: Dims) -> List[int]:
        raise NotImplementedError

    @classmethod
    def from_vector(cls, vector: Any, dims: Dims):
        vector = _vec(vector)
        sizes = cls.sizes(dims)
        if len(vector) != sum(sizes):
            raise ValueError(f"{cls.__name__} expects {sum(sizes)} entries, got {len(vector)}")
        parts = np.split(vector, np.cumsum(sizes)[:-1])
        return cls(*parts)


@dataclass(frozen=True)
class FullQuasiState(_StateMixin):
    """(q, v^i, v~^a, p_i, p~_a); on the momentum level p~ is pinned to mu."""

    q: np.ndarray
    v: np.ndarray
    vtilde: np.ndarray
    p: np.ndarray
    ptilde: np.ndarray
    _fields = ("q", "v", "vtilde", "p", "ptilde")

    def __post_init__(self):
        for name in self._fields:
            object.__setattr__(self, name, _vec(getattr(self, name)))

    @classmethod
    def sizes(cls, dims: Dims) -> List[int]:
        return [dims.n, dims.m, dims.k, dims.m, dims.k]


@dataclass(frozen=True)
class ReducedState(_StateMixin):
    """([q]_{G_mu}, v^i, v^^a, p_i) with [q] given by (x, theta^I)."""

    x: np.ndarray
    thetaI: np.ndarray
    v: np.ndarray
    vhat: np.ndarray
    p: np.ndarray
    _fields = ("x", "thetaI", "v", "vhat", "p")

    def __post_init__(self):
        for name in self._fields:
            object.__setattr__(self, name, _vec(getattr(self, name)))

    @classmethod
    def sizes(cls, dims: Dims) -> List[int]:
        return [dims.m, dims.k - dims.k_mu, dims.m, dims.k, dims.m]


@dataclass(frozen=True)
class ClassicalState(_StateMixin):
    """(x, theta^I, v^i, pi_i) for the classical Routh equations in momentum form."""

    x: np.ndarray
    thetaI: np.ndarray
    v: np.ndarray
    p: np.ndarray
    _fields = ("x", "thetaI", "v", "p")

    def __post_init__(self):
        for name in self._fields:
            object.__setattr__(self, name, _vec(getattr(self, name)))

    @classmethod
    def sizes(cls, dims: Dims) -> List[int]:
        return [dims.m, dims.k - dims.k_mu, dims.m, dims.m]


# coordinate helpers ------------------------------------------------------------


def assemble_q(
    sym: SymmetrySetup, x: Any, thetaI: Any, thetaA: Optional[Any] = None
) -> np.ndarray:
    """Natural coordinates from (x, theta^I, theta^A); theta^A defaults to 0."""
    m, n = sym.dims.m, sym.dims.n
    q = np.zeros(n)
    q[:m] = _vec(x)
    if sym.split.I:
        q[[m + i for i in sym.split.I]] = _vec(thetaI)
    if sym.split.A and thetaA is not None:
        q[[m + a for a in sym.split.A]] = _vec(thetaA)
    return q


def split_q(sym: SymmetrySetup, q: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = sym.dims.m
    q = _vec(q)
    theta = q[m:]
    return q[:m], theta[list(sym.split.I)], theta[list(sym.split.A)]


def lambda_matrix(sym: SymmetrySetup, q: Any) -> np.ndarray:
    m, k = sym.dims.m, sym.dims.k
    return np.asarray(value(as_matrix(sym.Lambda(_vec(q)), (k, m))), dtype=float)


def k_matrix(sym: SymmetrySetup, q: Any) -> np.ndarray:
    k = sym.dims.k
    return np.asarray(value(as_matrix(sym.K(_vec(q)), (k, k))), dtype=float)


def group_quasi_velocity(sym: SymmetrySetup, q: Any, v: Any) -> np.ndarray:
    """v~ = K^-1 (v_theta + Lambda v_x); entries may be dual numbers."""
    m, k = sym.dims.m, sym.dims.k
    if k == 0:
        return np.zeros(0)
    kmat = as_matrix(sym.K(q), (k, k))
    lam = as_matrix(sym.Lambda(q), (k, m))
    v = np.asarray(v, dtype=object) if not isinstance(v, np.ndarray) else v
    rhs = v[m:] + np.dot(lam, v[:m]) if m else v[m:]
    return lu_solve(kmat, rhs)


def natural_velocity(sym: SymmetrySetup, q: Any, v: Any, vtilde: Any) -> np.ndarray:
    """Natural velocity Z (v, v~) of the moving frame."""
    m = sym.dims.m
    kmat = k_matrix(sym, q)
    lam = lambda_matrix(sym, q)
    v = _vec(v)
    return np.concatenate([v, kmat @ _vec(vtilde) - lam @ v if m else kmat @ _vec(vtilde)])


# Routhian ----------------------------------------------------------------------


def routhian_fn(system: LagrangianSystem, mu: Sequence[float]) -> Lagrangian:
    """R^mu as a function of natural (q, v) that accepts dual numbers."""
    sym = system.sym
    k = sym.dims.k
    mu = [float(x) for x in np.asarray(mu, dtype=float).ravel()]
    if len(mu) != k:
        raise ValueError(f"Momentum level has length {len(mu)}, expected k={k}")

    def r(q, v):
        lval = system.lagrangian(q, v)
        if k == 0 or not any(mu):
            return lval
        vtilde = group_quasi_velocity(sym, q, v)
        pairing = mu[0] * vtilde[0]
        for a in range(1, k):
            pairing = pairing + mu[a] * vtilde[a]
        return lval - pairing

    return r


def routhian(system: LagrangianSystem, mu: Sequence[float], q: Any, v: Any) -> float:
    """R^mu = L(q, v) - mu_a v~^a."""
    return float(value(routhian_fn(system, mu)(_vec(q), _vec(v))))


def routhian_derivatives(
    system: LagrangianSystem, mu: Sequence[float], q: Any, v: Any
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(X^C(R), X^V(R), E~^C(R), E~^V(R)) from the moving-frame lifts."""
    m = system.dims.m
    zc, zv = lift_derivatives(moving_frame(system.sym), routhian_fn(system, mu), q, v)
    return zc[:m], zv[:m], zc[m:], zv[m:]


# residuals ---------------------------------------------------------------------


def implicit_el_residual(system: LagrangianSystem, pt: PontryaginPoint, dq: Any, dp: Any) -> np.ndarray:
    """(dq - v, p - dL/dv, dp - dL/dq)."""
    dl_dq, dl_dv = lagrangian_gradient(system.lagrangian, pt.q, pt.v)
    return np.concatenate([_vec(dq) - pt.v, pt.p - dl_dv, _vec(dp) - dl_dq])


def _gyroscopic(b: np.ndarray, mu: np.ndarray, xdot: np.ndarray) -> np.ndarray:
    if b.size == 0:
        return np.zeros(b.shape[1] if b.ndim == 3 else 0)
    return np.einsum("aij,a,j->i", b, mu, xdot)


def implicit_lr_residual(
    system: LagrangianSystem, mu: Sequence[float], s: FullQuasiState, sdot: FullQuasiState
) -> np.ndarray:
    """Implicit Lagrange-Routh rows.

    (v~ - u~, E~^V(R), p~ - mu, v - xdot, X^V(R) - p, pdot - X^C(R) + mu_a B^a_ij v^j)
    with u~ = K^-1 (theta_dot + Lambda xdot).
    """
    sym = system.sym
    m = sym.dims.m
    mu = _vec(mu)
    vnat = natural_velocity(sym, s.q, s.v, s.vtilde)
    xc, xv, _, ev = routhian_derivatives(system, mu, s.q, vnat)
    utilde = group_quasi_velocity(sym, s.q, sdot.q)
    b, _ = curvature(sym, s.q, verify=False)
    return np.concatenate(
        [
            s.vtilde - _vec(utilde),
            ev,
            s.ptilde - mu,
            s.v - sdot.q[:m],
            xv - s.p,
            sdot.p - xc + _gyroscopic(b, mu, s.v),
        ]
    )


def reduced_lr_residual(
    system: LagrangianSystem,
    mu: Sequence[float],
    r: ReducedState,
    rdot: ReducedState,
    thetaA: Optional[Any] = None,
) -> np.ndarray:
    """Reduced implicit Lagrange-Routh rows on M_mu / G_mu.

    (xdot - v, thetaI_dot - v^^a L^I_a + xdot^i Lambda^I_i,
     pdot - dR/dx + Lambda^I dR/dtheta^I + mu_a B^a_ij xdot^j, p - dR/dv, dR/dv^)
    with the reduced partials obtained through the body-fixed frame. The
    representative theta^A defaults to 0.
    """
    sym = system.sym
    mu = _vec(mu)
    i_idx = list(sym.split.I)
    q = assemble_q(sym, r.x, r.thetaI, thetaA)
    lmat, adj = body_frame(sym, q)
    lam = lambda_matrix(sym, q)
    vnat = natural_velocity(sym, q, r.v, adj @ r.vhat)
    xc, xv, _, ev = routhian_derivatives(system, mu, q, vnat)
    b, bhat = curvature(sym, q, verify=False)

    dr_dvhat = adj.T @ ev
    # dR/dx - Lambda^I dR/dtheta^I = X^C(R) + Bhat^a_ij v^j dR/dv^_a
    dr_dx = xc + _gyroscopic(bhat, dr_dvhat, r.v)
    theta_rate = lmat[i_idx, :] @ r.vhat - lam[i_idx, :] @ rdot.x
    return np.concatenate(
        [
            rdot.x - r.v,
            rdot.thetaI - theta_rate,
            rdot.p - dr_dx + _gyroscopic(b, mu, rdot.x),
            r.p - xv,
            dr_dvhat,
        ]
    )


# regular case ------------------------------------------------------------------


def check_g_regular(system: LagrangianSystem, q: Any, v: Any) -> Tuple[int, np.ndarray]:
    """Rank and matrix of the group-velocity Hessian E~^V_a(E~^V_b(L))."""
    m, k = system.dims.m, system.dims.k
    q = _vec(q)
    if k == 0:
        return 0, np.zeros((0, 0))
    _, _, hess = hessian(lambda vv: system.lagrangian(q, vv), _vec(v))
    kmat = k_matrix(system.sym, q)
    g = kmat.T @ hess[m:, m:] @ kmat
    singular = np.linalg.svd(g, compute_uv=False)
    largest = float(singular.max()) if singular.size else 0.0
    rank = int(np.sum(singular > RANK_TOL * largest)) if largest > 0 else 0
    return rank, g


def solve_group_velocity(
    system: LagrangianSystem,
    mu: Sequence[float],
    q: Any,
    v_shape: Any,
    tol: float = GROUP_VELOCITY_TOL,
) -> np.ndarray:
    """Solve E~^V_a(L)(q, v, v~) = mu_a for v~, starting from v~ = 0."""
    from .solver import NewtonConfig, NewtonSolver

    sym = system.sym
    m, k = sym.dims.m, sym.dims.k
    mu = _vec(mu)
    q = _vec(q)
    v_shape = _vec(v_shape)
    kmat = k_matrix(sym, q)

    def momentum_gap(vtilde):
        vnat = natural_velocity(sym, q, v_shape, vtilde)
        _, dl_dv = lagrangian_gradient(system.lagrangian, q, vnat)
        return kmat.T @ dl_dv[m:] - mu

    def group_hessian(vtilde):
        rank, g = check_g_regular(system, q, natural_velocity(sym, q, v_shape, vtilde))
        if rank < k:
            raise NotGRegular(rank, k)
        return g

    solver = NewtonSolver(NewtonConfig(tol=tol))
    result = solver.solve(momentum_gap, np.zeros(k), jac=group_hessian, label="group velocity")
    return result.x


def classical_routhian(system: LagrangianSystem, mu: Sequence[float], q: Any, v_shape: Any) -> float:
    """R-bar^mu(q, v) = R^mu evaluated on the solved momentum level."""
    vtilde = solve_group_velocity(system, mu, q, v_shape)
    return routhian(system, mu, q, natural_velocity(system.sym, q, v_shape, vtilde))


def classical_routh_residual(
    system: LagrangianSystem,
    mu: Sequence[float],
    c: ClassicalState,
    cdot: ClassicalState,
    thetaA: Optional[Any] = None,
) -> np.ndarray:
    """Classical Routh equations with the gyroscopic term, in momentum form.

    (xdot - v, thetaI_dot - K^I_b v~^b + Lambda^I_i xdot^i,
     pi_dot - X^C(R-bar) + mu_a B^a_ij xdot^j, pi - X^V(R-bar))
    where v~ solves the momentum equation and the partials of R-bar equal
    those of R^mu there.
    """
    sym = system.sym
    mu = _vec(mu)
    i_idx = list(sym.split.I)
    q = assemble_q(sym, c.x, c.thetaI, thetaA)
    vtilde = solve_group_velocity(system, mu, q, c.v)
    vnat = natural_velocity(sym, q, c.v, vtilde)
    xc, xv, _, _ = routhian_derivatives(system, mu, q, vnat)
    b, _ = curvature(sym, q, verify=False)
    kmat = k_matrix(sym, q)
    lam = lambda_matrix(sym, q)
    theta_rate = kmat[i_idx, :] @ vtilde - lam[i_idx, :] @ cdot.x
    return np.concatenate(
        [
            cdot.x - c.v,
            cdot.thetaI - theta_rate,
            cdot.p - xc + _gyroscopic(b, mu, cdot.x),
            c.p - xv,
        ]
    )


# reconstruction ----------------------------------------------------------------


def reduced_to_natural(
    system: LagrangianSystem, mu: Sequence[float], r: ReducedState, thetaA: Any
) -> np.ndarray:
    """Natural (q, v, p) of a reduced state at the group representative theta^A."""
    sym = system.sym
    q = assemble_q(sym, r.x, r.thetaI, thetaA)
    _, adj = body_frame(sym, q)
    vnat = natural_velocity(sym, q, r.v, adj @ r.vhat)
    _, w = eval_frame(moving_frame(sym), q)
    pnat = w.T @ np.concatenate([r.p, _vec(mu)])
    return np.concatenate([q, vnat, pnat])


def reconstruct(
    system: LagrangianSystem,
    mu: Sequence[float],
    reduced_traj,
    thetaA0: Sequence[float],
    newton_tol: float = 1e-12,
    diagnose: bool = True,
):
    """Integrate theta^A_dot = v^^a L^A_a - xdot^i Lambda^A_i along a reduced trajectory.

    The same implicit-midpoint rule and step size as the reduced run are used;
    p~ is set to mu. Returns a trajectory in the natural (q, v, p) layout with
    full-system diagnostics unless ``diagnose`` is off.
    """
    from .integrator import diagnose_full, natural_labels
    from .solver import NewtonConfig, NewtonSolver
    from .trajectory import Trajectory

    sym = system.sym
    dims = sym.dims
    a_idx = list(sym.split.A)
    times = np.asarray(reduced_traj.times, dtype=float)
    if len(times) > 2:
        steps = np.diff(times)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
            raise ValueError("Reconstruction needs a uniformly sampled reduced trajectory")
    thetaA = _vec(thetaA0)
    if len(thetaA) != dims.k_mu:
        raise ValueError(f"thetaA0 has length {len(thetaA)}, expected k_mu={dims.k_mu}")

    states = [ReducedState.from_vector(row, dims) for row in reduced_traj.states]
    solver = NewtonSolver(NewtonConfig(tol=newton_tol))
    rows = []
    for index, r0 in enumerate(states):
        rows.append(reduced_to_natural(system, mu, r0, thetaA))
        if index + 1 == len(states) or not a_idx:
            continue
        r1 = states[index + 1]
        h = times[index + 1] - times[index]
        xdot = (r1.x - r0.x) / h
        x_mid = (r0.x + r1.x) / 2
        thetaI_mid = (r0.thetaI + r1.thetaI) / 2
        vhat_mid = (r0.vhat + r1.vhat) / 2
        start = thetaA.copy()

        def midpoint_gap(thetaA1, start=start):
            q_mid = assemble_q(sym, x_mid, thetaI_mid, (start + thetaA1) / 2)
            lmat, _ = body_frame(sym, q_mid)
            lam = lambda_matrix(sym, q_mid)
            rate = lmat[a_idx, :] @ vhat_mid - lam[a_idx, :] @ xdot
            return thetaA1 - start - h * rate

        thetaA = solver.solve(midpoint_gap, start, label="reconstruction").x

    natural = np.array(rows).reshape(len(rows), 3 * dims.n)
    traj = Trajectory(
        times=times,
        states=natural,
        labels=natural_labels(system),
        mode="full",
        mu=_vec(mu),
    )
    logger.debug(f"Reconstructed {len(times)} samples of {system.label}")
    return diagnose_full(system, mu, traj) if diagnose else traj

