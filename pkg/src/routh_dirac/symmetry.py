"""Group action data, moving and body-fixed frames, curvature and momentum maps."""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .autodiff import value
from .errors import InvalidSplit, InvarianceViolation, SingularFrame
from .frames import DET_TOL, Dims, Frame, anholonomity, lagrangian_gradient, lu_inverse

SPLIT_TOL = 1e-12
BRACKET_TOL = 1e-8

logger = logging.getLogger("routh_dirac.symmetry")


@dataclass(frozen=True)
class Split:
    """Adapted basis {E_A, E_I}: A spans the isotropy algebra, I a complement."""

    A: Tuple[int, ...]
    I: Tuple[int, ...]  # noqa: E741

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(int(a) for a in self.A))
        object.__setattr__(self, "I", tuple(int(i) for i in self.I))
        if set(self.A) & set(self.I):
            raise ValueError(f"Split index sets overlap: A={self.A}, I={self.I}")


@dataclass(frozen=True)
class SymmetrySetup:
    """Structure constants and coefficient functions of a product bundle U x G.

    ``C[c, a, b]`` is C^c_ab with [E_a, E_b] = C^c_ab E_c. ``K(q)[b, a]`` is K^b_a,
    ``Ad(theta)[b, a]`` is A^b_a and ``Lambda(q)[a, i]`` is Lambda^a_i. ``K``,
    ``Ad`` and ``Lambda`` must accept dual-number coordinates.
    """

    dims: Dims
    C: np.ndarray
    K: Callable[[Any], Any]
    Ad: Callable[[Any], Any]
    Lambda: Callable[[Any], Any]
    mu: np.ndarray
    split: Split
    analytic_B: Optional[Callable[[Any], np.ndarray]] = None
    label: str = "symmetry"
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        k = self.dims.k
        c = np.asarray(self.C, dtype=float)
        if c.shape != (k, k, k):
            raise ValueError(f"Structure constants must have shape {(k, k, k)}, got {c.shape}")
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).ravel())
        if len(self.mu) != k:
            raise ValueError(f"Momentum level has length {len(self.mu)}, expected k={k}")
        if k and np.max(np.abs(c + c.transpose(0, 2, 1))) > SPLIT_TOL:
            raise ValueError("Structure constants are not antisymmetric in their lower indices")
        jacobi = jacobi_violation(c)
        if jacobi > SPLIT_TOL:
            raise ValueError(f"Structure constants violate the Jacobi identity ({jacobi:.3e})")
        if len(self.split.A) != self.dims.k_mu or len(self.split.I) != k - self.dims.k_mu:
            raise ValueError(
                f"Split sizes ({len(self.split.A)}, {len(self.split.I)}) do not match "
                f"(k_mu, k - k_mu) = ({self.dims.k_mu}, {k - self.dims.k_mu})"
            )
        if sorted(self.split.A + self.split.I) != list(range(k)):
            raise ValueError(f"Split must partition range({k}): A={self.split.A}, I={self.split.I}")

    def with_mu(self, mu: Sequence[float]) -> "SymmetrySetup":
        return replace(self, mu=np.asarray(mu, dtype=float))

    def with_split(self, a_indices: Sequence[int], i_indices: Sequence[int]) -> "SymmetrySetup":
        dims = replace(self.dims, k_mu=len(a_indices))
        return replace(self, dims=dims, split=Split(A=tuple(a_indices), I=tuple(i_indices)))


def jacobi_violation(c: np.ndarray) -> float:
    """Largest |[[E_a,E_b],E_c] + cyclic| component."""
    if c.size == 0:
        return 0.0
    # C^e_ab C^d_ec + C^e_bc C^d_ea + C^e_ca C^d_eb
    t = np.einsum("eab,dec->dabc", c, c)
    total = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(total)))


def as_matrix(x: Any, shape: Tuple[int, int]) -> np.ndarray:
    out = np.asarray(x, dtype=object)
    if out.size == 0:
        return np.zeros(shape, dtype=object)
    return out.reshape(shape)


def _frame_matrix(sym: SymmetrySetup, q: Any, group_block: Any) -> np.ndarray:
    """[[I_m, 0], [-Lambda(q), group_block]] as an object array."""
    m, k, n = sym.dims.m, sym.dims.k, sym.dims.n
    z = np.zeros((n, n), dtype=object)
    for i in range(m):
        z[i, i] = 1.0
    lam = as_matrix(sym.Lambda(q), (k, m))
    z[m:, :m] = -lam
    z[m:, m:] = as_matrix(group_block, (k, k))
    return z


def moving_frame(sym: SymmetrySetup) -> Frame:
    """Frame {X_i, E~_a}: X_i = d/dx^i - Lambda^a_i d/dtheta^a, E~_a = K^b_a d/dtheta^b."""
    m, k, n = sym.dims.m, sym.dims.k, sym.dims.n

    def z_fn(q):
        return _frame_matrix(sym, q, sym.K(q))

    def w_fn(q):
        k_inv = lu_inverse(as_matrix(sym.K(q), (k, k)))
        lam = as_matrix(sym.Lambda(q), (k, m))
        w = np.zeros((n, n), dtype=object)
        for i in range(m):
            w[i, i] = 1.0
        w[m:, :m] = np.dot(k_inv, lam)
        w[m:, m:] = k_inv
        return w

    analytic_r = None
    if sym.analytic_B is not None:

        def analytic_r(q):
            r = np.zeros((n, n, n))
            r[m:, :m, :m] = np.asarray(sym.analytic_B(q), dtype=float).reshape(k, m, m)
            r[m:, m:, m:] = -sym.C
            return r

    return Frame(dims=sym.dims, Z=z_fn, W=w_fn, analytic_R=analytic_r, label="moving")


def group_coordinates(sym: SymmetrySetup, q: Any) -> Any:
    return q[sym.dims.m :]


def hat_frame(sym: SymmetrySetup) -> Frame:
    """Frame {X_i, E^_a} with E^_a = A^b_a E~_b (body-fixed twist of the generators)."""
    k = sym.dims.k

    def z_fn(q):
        kmat = as_matrix(sym.K(q), (k, k))
        adj = as_matrix(sym.Ad(group_coordinates(sym, q)), (k, k))
        return _frame_matrix(sym, q, np.dot(kmat, adj))

    return Frame(dims=sym.dims, Z=z_fn, label="body")


def body_frame(sym: SymmetrySetup, q: Any) -> Tuple[np.ndarray, np.ndarray]:
    """(Lmat, A) with A = Ad(g(q)) and Lmat = K(q) A."""
    k = sym.dims.k
    q = np.asarray(q, dtype=float)
    adj = np.asarray(value(as_matrix(sym.Ad(group_coordinates(sym, q)), (k, k))), dtype=float)
    if k and abs(np.linalg.det(adj)) < DET_TOL:
        raise SingularFrame(f"Adjoint matrix is singular at q={q}")
    kmat = np.asarray(value(as_matrix(sym.K(q), (k, k))), dtype=float)
    return kmat @ adj, adj


def curvature(
    sym: SymmetrySetup, q: Any, verify: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """Curvature B[a, i, j] of the connection and its body-frame version Bhat = A^-1 B.

    With ``verify=False`` and an analytic B available, the moving-frame
    computation is skipped.
    """
    m, k = sym.dims.m, sym.dims.k
    q = np.asarray(q, dtype=float)
    _, adj = body_frame(sym, q)
    if not verify and sym.analytic_B is not None:
        b = np.asarray(sym.analytic_B(q), dtype=float).reshape(k, m, m)
    else:
        r = anholonomity(moving_frame(sym), q)
        mixed = np.concatenate([r[:, :m, m:].ravel(), r[:, m:, :m].ravel(), r[:m, :m, :m].ravel()])
        worst = float(np.max(np.abs(mixed))) if mixed.size else 0.0
        if worst > BRACKET_TOL:
            raise InvarianceViolation(
                f"Moving frame brackets [X_i, E~_a] or the horizontal part of [X_i, X_j] "
                f"do not vanish at q={q} (max {worst:.3e})"
            )
        b = r[m:, :m, :m]
    bhat = np.einsum("ab,bij->aij", lu_inverse(adj), b) if k else b
    return b, bhat


def momentum_map(system, q: Any, v: Any) -> np.ndarray:
    """p~_a = K^b_a dL/dv^(theta^b)."""
    sym = system.sym
    m, k = sym.dims.m, sym.dims.k
    q = np.asarray(q, dtype=float)
    _, dl_dv = lagrangian_gradient(system.lagrangian, q, v)
    kmat = np.asarray(value(as_matrix(sym.K(q), (k, k))), dtype=float)
    return kmat.T @ dl_dv[m:]


def connection_mu(sym: SymmetrySetup, q: Any) -> np.ndarray:
    """A-rows of Lambda(q)."""
    m, k = sym.dims.m, sym.dims.k
    lam = np.asarray(value(as_matrix(sym.Lambda(np.asarray(q, dtype=float)), (k, m))), dtype=float)
    return lam[list(sym.split.A), :]


@dataclass
class SplitReport:
    """Largest violation of each structure identity of an adapted split."""

    violations: Dict[str, float]

    @property
    def passed(self) -> bool:
        return all(v <= SPLIT_TOL for v in self.violations.values())


def validate_splitting(sym: SymmetrySetup, mu: Optional[Sequence[float]] = None) -> SplitReport:
    """Check C^J_AB = 0, C^c_Ab mu_c = 0, C^C_AI = 0 and the Jacobi identity."""
    c = sym.C
    mu_vec = sym.mu if mu is None else np.asarray(mu, dtype=float)
    a_idx, i_idx = list(sym.split.A), list(sym.split.I)
    k = sym.dims.k

    def worst(block: np.ndarray, identity: str, index_sets) -> float:
        if block.size == 0:
            return 0.0
        flat = int(np.argmax(np.abs(block)))
        violation = float(np.abs(block).ravel()[flat])
        if violation > SPLIT_TOL:
            position = np.unravel_index(flat, block.shape)
            indices = [index_sets[d][position[d]] for d in range(len(position))]
            raise InvalidSplit(identity, indices, violation)
        return violation

    report = {}
    # subalgebra: [E_A, E_B] has no complement component
    report["subalgebra"] = worst(
        c[np.ix_(i_idx, a_idx, a_idx)], "C^J_AB = 0", [i_idx, a_idx, a_idx]
    )
    # isotropy: mu is fixed by the coadjoint action of the A directions
    report["isotropy"] = worst(
        np.einsum("cab,c->ab", c[:, a_idx, :], mu_vec), "C^c_Ab mu_c = 0", [a_idx, list(range(k))]
    )
    # the complement is invariant under the isotropy directions
    report["complement_invariance"] = worst(
        c[np.ix_(a_idx, a_idx, i_idx)], "C^C_AI = 0", [a_idx, a_idx, i_idx]
    )
    jacobi = jacobi_violation(c)
    if jacobi > SPLIT_TOL:
        raise InvalidSplit("Jacobi identity", [], jacobi)
    report["jacobi"] = jacobi
    logger.debug(f"Split A={sym.split.A} I={sym.split.I} validated: {report}")
    return SplitReport(violations=report)
