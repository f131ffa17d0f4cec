"""Fixed-step implicit integration of the residual systems.

Differential rows are discretized at the midpoint, algebraic rows are enforced at
the new endpoint, and the stacked system is solved by damped Gauss-Newton. The
same split rule turns any continuous residual into a discrete one, which is how
the Dirac residuals are re-evaluated along a finished run.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import null_space

from .autodiff import hessian
from .dirac import (
    dirac_residual_full,
    generalized_energy,
    reduced_dirac_residual,
    restricted_dirac_residual,
)
from .errors import Inconsistent, NewtonDiverged, RankDeficientWarning, RouthDiracError, SingularJacobian
from .frames import PontryaginPoint, eval_frame, lagrangian_gradient, lu_solve
from .routh import (
    ClassicalState,
    FullQuasiState,
    InitialData,
    LagrangianSystem,
    ReducedState,
    assemble_q,
    classical_routh_residual,
    group_quasi_velocity,
    implicit_el_residual,
    implicit_lr_residual,
    natural_velocity,
    reduced_lr_residual,
    reduced_to_natural,
    solve_group_velocity,
    split_q,
)
from .solver import NewtonConfig, NewtonSolver, forward_difference_jacobian, left_null_basis, numerical_rank
from .symmetry import body_frame, momentum_map, moving_frame
from .trajectory import MODES, Trajectory

NULL_ROW_TOL = 1e-8
PINNED_ROW_TOL = 1e-12

logger = logging.getLogger("routh_dirac.integrator")


@dataclass
class StepConfig:
    h: float
    newton_tol: float = 1e-10
    max_iters: int = 50
    damping_min: float = 2.0**-16
    mode: str = "full"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"Step size must be positive, got {self.h}")
        if not self.newton_tol > 0:
            raise ValueError(f"Newton tolerance must be positive, got {self.newton_tol}")
        if self.mode not in MODES:
            raise ValueError(f"Unknown mode '{self.mode}', expected one of {MODES}")

    def newton_config(self) -> NewtonConfig:
        return NewtonConfig(tol=self.newton_tol, max_iters=self.max_iters, damping_min=self.damping_min)


@dataclass
class InitResult:
    """Consistent state in the mode layout with the constraint Jacobian diagnosis."""

    state: np.ndarray
    labels: List[str]
    rank_defect: int
    null_basis: np.ndarray
    row_names: List[str]
    residual_norm: float


# labels ------------------------------------------------------------------------


def natural_labels(system: LagrangianSystem) -> List[str]:
    names = list(system.coordinates)
    return names + [f"v_{c}" for c in names] + [f"p_{c}" for c in names]


def _group_names(system: LagrangianSystem) -> List[str]:
    return list(system.coordinates[system.dims.m :])


def _position_names(system: LagrangianSystem) -> List[str]:
    return list(system.coordinates[: system.dims.m])


def state_labels(system: LagrangianSystem, mode: str) -> List[str]:
    x_names = _position_names(system)
    group = _group_names(system)
    i_names = [group[i] for i in system.sym.split.I]
    if mode == "full":
        return natural_labels(system)
    if mode == "m_mu":
        return (
            list(system.coordinates)
            + [f"v_{c}" for c in x_names]
            + [f"vt_{c}" for c in group]
            + [f"p_{c}" for c in x_names]
            + [f"pt_{c}" for c in group]
        )
    if mode == "reduced":
        return (
            x_names
            + i_names
            + [f"v_{c}" for c in x_names]
            + [f"vhat_{c}" for c in group]
            + [f"p_{c}" for c in x_names]
        )
    if mode == "classical":
        return x_names + i_names + [f"v_{c}" for c in x_names] + [f"p_{c}" for c in x_names]
    raise ValueError(f"Unknown mode '{mode}', expected one of {MODES}")


# mode adapters -----------------------------------------------------------------


class _Mode:
    """Residual rows of one equation system with their algebraic/differential split."""

    name = ""

    def __init__(self, system: LagrangianSystem, mu: Sequence[float]):
        self.system = system
        self.mu = np.asarray(mu, dtype=float).ravel()
        if len(self.mu) != system.dims.k:
            raise ValueError(f"mu has length {len(self.mu)}, expected k={system.dims.k}")
        self.labels = state_labels(system, self.name)
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    # subclasses provide these
    def rows(self, y: np.ndarray, ydot: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dirac(self, y: np.ndarray, ydot: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_natural(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def from_natural(self, q: np.ndarray, v: np.ndarray, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    row_kinds: List[bool] = []
    row_names: List[str] = []
    dirac_kinds: List[bool] = []

    @property
    def size(self) -> int:
        return len(self.labels)

    def constraint_values(self, y: np.ndarray) -> np.ndarray:
        constraints = self.system.extra_constraints
        if not constraints:
            return np.zeros(0)
        n = self.system.dims.n
        natural = self.to_natural(y)
        q, v, p = natural[:n], natural[n : 2 * n], natural[2 * n :]
        return np.array([c(q, v, p) for c in constraints])

    def residual(self, y: np.ndarray, ydot: np.ndarray) -> np.ndarray:
        return np.concatenate([self.rows(y, ydot), self.constraint_values(y)])

    @property
    def alg_mask(self) -> np.ndarray:
        return np.array(list(self.row_kinds) + [True] * len(self.system.extra_constraints), dtype=bool)

    @property
    def residual_names(self) -> List[str]:
        return list(self.row_names) + [c.name for c in self.system.extra_constraints]

    def fixed_mask(self, names: Iterable[str]) -> np.ndarray:
        names = set(names)
        mask = []
        for label in self.labels:
            natural = label
            for prefix in ("vt_", "vhat_"):
                if label.startswith(prefix):
                    natural = "v_" + label[len(prefix) :]
            mask.append(label in names or natural in names)
        return np.array(mask, dtype=bool)

    def algebraic(self, y: np.ndarray) -> Tuple[np.ndarray, List[str]]:
        values = self.residual(y, np.zeros_like(y))[self.alg_mask]
        names = [name for name, alg in zip(self.residual_names, self.alg_mask) if alg]
        return values, names


class FullMode(_Mode):
    name = "full"

    def __init__(self, system, mu):
        super().__init__(system, mu)
        coords = list(system.coordinates)
        n = system.dims.n
        self.row_kinds = [False] * n + [True] * n + [False] * n
        self.row_names = [f"dq_{c}" for c in coords] + [f"p_{c}" for c in coords] + [f"dp_{c}" for c in coords]
        self.dirac_kinds = [False] * n + [True] * n + [False] * n

    def _split(self, y):
        n = self.system.dims.n
        return y[:n], y[n : 2 * n], y[2 * n :]

    def rows(self, y, ydot):
        q, v, p = self._split(y)
        dq, _, dp = self._split(ydot)
        return implicit_el_residual(self.system, PontryaginPoint(q, v, p), dq, dp)

    def dirac(self, y, ydot):
        q, v, p = self._split(y)
        return dirac_residual_full(self.system, PontryaginPoint(q, v, p), self._split(ydot))

    def to_natural(self, y):
        return np.asarray(y, dtype=float)

    def from_natural(self, q, v, p):
        return np.concatenate([q, v, p])

    def algebraic(self, y):
        values, names = super().algebraic(y)
        sym = self.system.sym
        m = sym.dims.m
        if sym.dims.k == 0:
            return values, names
        q, _, p = self._split(y)
        # p~ = K^T p_theta
        z, _ = eval_frame(moving_frame(sym), q)
        ptilde = (z.T @ p)[m:]
        pin = [f"momentum_{c}" for c in _group_names(self.system)]
        return np.concatenate([values, ptilde - self.mu]), names + pin


class MomentumLevelMode(_Mode):
    name = "m_mu"

    def __init__(self, system, mu):
        super().__init__(system, mu)
        m, k = system.dims.m, system.dims.k
        x_names, group = _position_names(system), _group_names(system)
        self.row_kinds = [False] * k + [True] * k + [True] * k + [False] * m + [True] * m + [False] * m
        self.row_names = (
            [f"ut_{c}" for c in group]
            + [f"EV_{c}" for c in group]
            + [f"pt_{c}" for c in group]
            + [f"dx_{c}" for c in x_names]
            + [f"p_{c}" for c in x_names]
            + [f"dp_{c}" for c in x_names]
        )
        self.dirac_kinds = [False] * k + [True] * k + [False] * m + [True] * m + [False] * m

    def rows(self, y, ydot):
        dims = self.system.dims
        return implicit_lr_residual(
            self.system, self.mu, FullQuasiState.from_vector(y, dims), FullQuasiState.from_vector(ydot, dims)
        )

    def dirac(self, y, ydot):
        dims = self.system.dims
        return restricted_dirac_residual(
            self.system, self.mu, FullQuasiState.from_vector(y, dims), FullQuasiState.from_vector(ydot, dims)
        )

    def to_natural(self, y):
        sym = self.system.sym
        s = FullQuasiState.from_vector(y, sym.dims)
        vnat = natural_velocity(sym, s.q, s.v, s.vtilde)
        _, w = eval_frame(moving_frame(sym), s.q)
        return np.concatenate([s.q, vnat, w.T @ np.concatenate([s.p, s.ptilde])])

    def from_natural(self, q, v, p):
        sym = self.system.sym
        m = sym.dims.m
        z, _ = eval_frame(moving_frame(sym), q)
        pq = z.T @ p
        vtilde = np.asarray(group_quasi_velocity(sym, q, v), dtype=float)
        return FullQuasiState(q, v[:m], vtilde, pq[:m], pq[m:]).to_vector()


class ReducedMode(_Mode):
    name = "reduced"

    def __init__(self, system, mu):
        super().__init__(system, mu)
        m, k, k_mu = system.dims.m, system.dims.k, system.dims.k_mu
        x_names, group = _position_names(system), _group_names(system)
        i_names = [group[i] for i in system.sym.split.I]
        self.row_kinds = [False] * m + [False] * (k - k_mu) + [False] * m + [True] * m + [True] * k
        self.row_names = (
            [f"dx_{c}" for c in x_names]
            + [f"dtheta_{c}" for c in i_names]
            + [f"dp_{c}" for c in x_names]
            + [f"p_{c}" for c in x_names]
            + [f"dR_dvhat_{c}" for c in group]
        )
        self.dirac_kinds = [False] * (k - k_mu) + [False] * m + [True] * m + [True] * k + [False] * m

    def rows(self, y, ydot):
        dims = self.system.dims
        return reduced_lr_residual(
            self.system, self.mu, ReducedState.from_vector(y, dims), ReducedState.from_vector(ydot, dims)
        )

    def dirac(self, y, ydot):
        dims = self.system.dims
        return reduced_dirac_residual(
            self.system, self.mu, ReducedState.from_vector(y, dims), ReducedState.from_vector(ydot, dims)
        )

    def to_natural(self, y, thetaA=None):
        dims = self.system.dims
        thetaA = np.zeros(dims.k_mu) if thetaA is None else thetaA
        return reduced_to_natural(self.system, self.mu, ReducedState.from_vector(y, dims), thetaA)

    def from_natural(self, q, v, p):
        sym = self.system.sym
        m = sym.dims.m
        x, thetaI, _ = split_q(sym, q)
        _, adj = body_frame(sym, q)
        vtilde = np.asarray(group_quasi_velocity(sym, q, v), dtype=float)
        vhat = lu_solve(adj, vtilde) if sym.dims.k else vtilde
        z, _ = eval_frame(moving_frame(sym), q)
        return ReducedState(x, thetaI, v[:m], vhat, (z.T @ p)[:m]).to_vector()


class ClassicalMode(_Mode):
    name = "classical"

    def __init__(self, system, mu):
        super().__init__(system, mu)
        m, k, k_mu = system.dims.m, system.dims.k, system.dims.k_mu
        x_names, group = _position_names(system), _group_names(system)
        i_names = [group[i] for i in system.sym.split.I]
        self.row_kinds = [False] * m + [False] * (k - k_mu) + [False] * m + [True] * m
        self.row_names = (
            [f"dx_{c}" for c in x_names]
            + [f"dtheta_{c}" for c in i_names]
            + [f"dp_{c}" for c in x_names]
            + [f"p_{c}" for c in x_names]
        )
        self._reduced = ReducedMode(system, mu)
        self.dirac_kinds = self._reduced.dirac_kinds

    def rows(self, y, ydot):
        dims = self.system.dims
        return classical_routh_residual(
            self.system, self.mu, ClassicalState.from_vector(y, dims), ClassicalState.from_vector(ydot, dims)
        )

    def to_reduced(self, y: np.ndarray) -> np.ndarray:
        sym = self.system.sym
        c = ClassicalState.from_vector(y, sym.dims)
        q = assemble_q(sym, c.x, c.thetaI)
        vtilde = solve_group_velocity(self.system, self.mu, q, c.v)
        _, adj = body_frame(sym, q)
        vhat = lu_solve(adj, vtilde) if sym.dims.k else vtilde
        return ReducedState(c.x, c.thetaI, c.v, vhat, c.p).to_vector()

    def dirac(self, y, ydot):
        dims = self.system.dims
        cdot = ClassicalState.from_vector(ydot, dims)
        rdot = ReducedState(cdot.x, cdot.thetaI, cdot.v, np.zeros(dims.k), cdot.p).to_vector()
        return self._reduced.dirac(self.to_reduced(y), rdot)

    def to_natural(self, y, thetaA=None):
        return self._reduced.to_natural(self.to_reduced(y), thetaA)

    def from_natural(self, q, v, p):
        sym = self.system.sym
        m = sym.dims.m
        x, thetaI, _ = split_q(sym, q)
        z, _ = eval_frame(moving_frame(sym), q)
        return ClassicalState(x, thetaI, v[:m], (z.T @ p)[:m]).to_vector()


_MODE_CLASSES = {"full": FullMode, "m_mu": MomentumLevelMode, "reduced": ReducedMode, "classical": ClassicalMode}


def make_mode(system: LagrangianSystem, mu: Sequence[float], mode: str) -> _Mode:
    if mode not in _MODE_CLASSES:
        raise ValueError(f"Unknown mode '{mode}', expected one of {MODES}")
    return _MODE_CLASSES[mode](system, mu)


# discrete residual -------------------------------------------------------------


def split_jet(
    fn, alg_mask: np.ndarray, y0: np.ndarray, y1: np.ndarray, h: float
) -> np.ndarray:
    """Rows of fn at the discrete jet: algebraic rows at y1, the rest at the midpoint."""
    rate = (y1 - y0) / h
    end = fn(y1, rate)
    if np.all(alg_mask):
        return end
    mid = fn((y0 + y1) / 2, rate)
    return np.where(alg_mask, end, mid)


class Stepper:
    """One integration run: a mode adapter and a Newton solver with a reused matrix."""

    def __init__(self, system: LagrangianSystem, mu: Sequence[float], cfg: StepConfig):
        self.system = system
        self.cfg = cfg
        self.model = make_mode(system, mu, cfg.mode)
        self.solver = NewtonSolver(cfg.newton_config())
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def advance(self, y0: np.ndarray):
        h = self.cfg.h
        mask = self.model.alg_mask

        def discrete(y1):
            return split_jet(self.model.residual, mask, y0, y1, h)

        return self.solver.solve(discrete, y0, label=f"{self.model.name} step")


def _as_vector(state: Any) -> np.ndarray:
    if hasattr(state, "to_vector"):
        return state.to_vector()
    return np.asarray(state, dtype=float).ravel()


def step(system: LagrangianSystem, mu: Sequence[float], state: Any, cfg: StepConfig) -> np.ndarray:
    """Advance one step of size cfg.h; returns the new state in the mode layout."""
    return Stepper(system, mu, cfg).advance(_as_vector(state)).x


# consistent initialization -----------------------------------------------------


def _rref(matrix: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, List[int]]:
    a = np.array(matrix, dtype=float)
    rows, cols = a.shape
    pivots: List[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        p = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[p, c]) < tol:
            continue
        a[[r, p]] = a[[p, r]]
        a[r] = a[r] / a[r, c]
        for i in range(rows):
            if i != r:
                a[i] = a[i] - a[i, c] * a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def _tangency_correction(
    system: LagrangianSystem, q: np.ndarray, v: np.ndarray, fixed: Sequence[str], tol: float
) -> np.ndarray:
    """Make the primary constraint p = dL/dv tangent along the kernel of d2L/dv2.

    For w in that kernel the condition is w . (dL/dq - d2L/dvdq v) = 0; the
    velocity components at the kernel pivots are solved for, all others stay.
    """
    n = system.dims.n
    coords = list(system.coordinates)
    _, _, h_vv = hessian(lambda vv: system.lagrangian(q, vv), v)
    kernel = null_space(h_vv, rcond=1e-10) if n else np.zeros((0, 0))
    if kernel.size == 0:
        return v
    basis, pivots = _rref(kernel.T)

    def sigma(vv):
        _, grad, hess = hessian(lambda z: system.lagrangian(z[:n], z[n:]), np.concatenate([q, vv]))
        return basis @ (grad[:n] - hess[n:, :n] @ vv)

    values = sigma(v)
    if np.max(np.abs(values)) < tol:
        return v
    free = np.zeros(n, dtype=bool)
    for p in pivots:
        free[p] = f"v_{coords[p]}" not in fixed
    corrected = v
    if free.any():
        try:
            corrected = NewtonSolver(NewtonConfig(tol=tol)).solve(sigma, v, fixed=~free, label="tangency").x
        except (NewtonDiverged, SingularJacobian) as e:
            logger.debug(f"Tangency correction failed: {e}")
        values = sigma(corrected)
    bad = [i for i, value in enumerate(values) if abs(value) >= tol]
    if bad:
        rows = [f"({coords[pivots[i]]}, p_{coords[pivots[i]]})" for i in bad]
        raise Inconsistent(
            "Primary constraint is not preserved along degenerate velocity directions",
            float(np.max(np.abs(values))),
            rows,
        )
    logger.info(f"Corrected velocities along {len(pivots)} degenerate direction(s)")
    return corrected


def _constraining_rows(jac: np.ndarray, names: Sequence[str], declared: Sequence[str]) -> np.ndarray:
    """Mask of the algebraic rows that constrain the free variables.

    A row with no dependence on the free variables is settled by the fixed
    data. A momentum pin inside the span of the mode's own rows restates a
    conjugate-momentum row.
    """
    if jac.shape[1] == 0:
        return np.zeros(len(names), dtype=bool)
    scale = max(1.0, float(np.max(np.abs(jac)))) if jac.size else 1.0
    keep = np.max(np.abs(jac), axis=1) > PINNED_ROW_TOL * scale
    pins = [i for i, name in enumerate(names) if name.startswith("momentum_") and keep[i]]
    base = [i for i, name in enumerate(names) if keep[i] and i not in pins and name not in declared]
    base_rank = numerical_rank(jac[base], 1e-8) if base else 0
    for i in pins:
        if numerical_rank(jac[base + [i]], 1e-8) == base_rank:
            keep[i] = False
    return keep


def consistent_init(
    system: LagrangianSystem,
    mu: Sequence[float],
    guess: Union[InitialData, np.ndarray, Any, None] = None,
    mode: str = "full",
    fixed: Optional[Sequence[str]] = None,
    tol: float = 1e-10,
) -> InitResult:
    """Project a guess onto the algebraic rows of ``mode`` (plus extra constraints).

    ``fixed`` holds natural names (``x``, ``v_y``, ...) kept at their guessed
    values; positions are fixed by default. Raises Inconsistent when the
    projection cannot reach ``tol``; a rank-deficient constraint Jacobian with
    a converged residual is reported through RankDeficientWarning.
    """
    model = make_mode(system, mu, mode)
    n = system.dims.n
    if guess is None:
        guess = system.initial
    if guess is None:
        raise ValueError(f"No initial guess given and {system.label} has no default initial data")
    if isinstance(guess, InitialData):
        q, v = guess.q, guess.v
        if fixed is None and guess.fixed:
            fixed = guess.fixed
    else:
        natural = model.to_natural(_as_vector(guess))
        q, v = natural[:n], natural[n : 2 * n]
    if fixed is None:
        fixed = list(system.coordinates)
    fixed = list(fixed)

    v = _tangency_correction(system, q, v, fixed, tol)
    _, p = lagrangian_gradient(system.lagrangian, q, v)
    y0 = model.from_natural(q, v, p)
    mask = model.fixed_mask(fixed)

    def constraint_rows(y):
        return model.algebraic(y)[0]

    try:
        result = NewtonSolver(NewtonConfig(tol=tol)).solve(constraint_rows, y0, fixed=mask, label="initialization")
    except (NewtonDiverged, SingularJacobian) as e:
        values, names = model.algebraic(y0)
        offending = [name for name, value in zip(names, values) if abs(value) >= tol]
        raise Inconsistent(
            f"Cannot satisfy the algebraic rows of {system.label} in mode {mode}",
            float(np.max(np.abs(values))) if values.size else 0.0,
            offending,
        ) from e

    state = result.x
    values, names = model.algebraic(state)

    free = ~mask
    if values.size and free.any():

        def restricted(z):
            trial = state.copy()
            trial[free] = z
            return constraint_rows(trial)

        jac = forward_difference_jacobian(restricted, state[free])
    else:
        jac = np.zeros((len(values), 0))
    keep = _constraining_rows(jac, names, [c.name for c in system.extra_constraints])
    jac, names = jac[keep], [name for name, kept in zip(names, keep) if kept]
    rank_defect = len(names) - numerical_rank(jac, 1e-8)
    null_basis = np.zeros((len(names), 0))
    involved: List[str] = []
    if rank_defect > 0:
        null_basis = left_null_basis(jac, 1e-8) if jac.size else np.eye(len(names))
        involved = [names[i] for i in range(len(names)) if np.max(np.abs(null_basis[i])) > NULL_ROW_TOL]
        warning = RankDeficientWarning(rank_defect, null_basis, involved)
        logger.warning(str(warning))
        warnings.warn(warning, stacklevel=2)
    logger.debug(f"Consistent initial state for {system.label} ({mode}): {dict(zip(model.labels, state))}")
    return InitResult(
        state=state,
        labels=list(model.labels),
        rank_defect=max(rank_defect, 0),
        null_basis=null_basis,
        row_names=involved,
        residual_norm=result.residual_norm,
    )


# diagnostics -------------------------------------------------------------------


def _natural_diagnostics(
    system: LagrangianSystem, mu: np.ndarray, natural: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    n, k = system.dims.n, system.dims.k
    count = len(natural)
    momentum = np.zeros(count)
    energy = np.zeros(count)
    for i, row in enumerate(natural):
        q, v, p = row[:n], row[n : 2 * n], row[2 * n :]
        if k:
            momentum[i] = float(np.max(np.abs(momentum_map(system, q, v) - mu)))
        energy[i] = generalized_energy(system, PontryaginPoint(q, v, p))
    return momentum, np.abs(energy - energy[0]) if count else energy


def _dirac_along(model: _Mode, states: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.zeros(len(states))
    mask = np.asarray(model.dirac_kinds, dtype=bool)
    for i in range(1, len(states)):
        h = times[i] - times[i - 1]
        rows = split_jet(model.dirac, mask, states[i - 1], states[i], h)
        out[i] = float(np.max(np.abs(rows))) if rows.size else 0.0
    return out


def diagnose_full(system: LagrangianSystem, mu: Sequence[float], traj: Trajectory) -> Trajectory:
    """Momentum, energy and full Dirac diagnostics of a natural-layout trajectory."""
    mu = np.asarray(mu, dtype=float).ravel()
    natural = traj.natural if traj.natural is not None else traj.states
    momentum, energy = _natural_diagnostics(system, mu, natural)
    dirac = _dirac_along(FullMode(system, mu), natural, traj.times)
    return Trajectory(
        times=traj.times,
        states=traj.states,
        labels=traj.labels,
        mode=traj.mode,
        mu=mu,
        natural=natural,
        natural_labels=natural_labels(system),
        momentum_drift=momentum,
        energy_drift=energy,
        dirac_residual=dirac,
        newton_iterations=traj.newton_iterations,
        rank_defect=traj.rank_defect,
    )


def shared_coordinates(system: LagrangianSystem, traj: Trajectory) -> np.ndarray:
    """(x, theta^I, v^i, p_i) per sample, read from the natural layout."""
    sym = system.sym
    n, m = sym.dims.n, sym.dims.m
    natural = traj.natural if traj.natural is not None else traj.states
    frame = moving_frame(sym)
    rows = []
    for row in natural:
        q, v, p = row[:n], row[n : 2 * n], row[2 * n :]
        x, thetaI, _ = split_q(sym, q)
        z, _ = eval_frame(frame, q)
        rows.append(np.concatenate([x, thetaI, v[:m], (z.T @ p)[:m]]))
    return np.array(rows)


# integration -------------------------------------------------------------------


def integrate(
    system: LagrangianSystem,
    mu: Sequence[float],
    state0: Any,
    cfg: StepConfig,
    T: float,
    thetaA0: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Step from t=0 to T; errors carry the failure time and the partial trajectory."""
    from .routh import reconstruct

    if not T > 0:
        raise ValueError(f"Final time must be positive, got {T}")
    mu = np.asarray(mu, dtype=float).ravel()
    stepper = Stepper(system, mu, cfg)
    model = stepper.model
    steps = int(round(T / cfg.h))
    if steps < 1 or abs(steps * cfg.h - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a whole number of steps of h={cfg.h}")
    times = np.arange(steps + 1) * cfg.h
    y = _as_vector(state0)
    if len(y) != model.size:
        raise ValueError(f"Initial state has {len(y)} entries, mode {cfg.mode} expects {model.size}")
    logger.info(
        f"Integrating {system.label} in mode {cfg.mode}: h={cfg.h}, T={T}, mu={mu.tolist()}, "
        f"newton_tol={cfg.newton_tol}"
    )

    states = [y]
    iterations = [0]
    defects = [0]
    for index in range(1, steps + 1):
        try:
            result = stepper.advance(y)
        except RouthDiracError as e:
            e.time = float(times[index - 1])
            e.trajectory = Trajectory(
                times=times[:index],
                states=np.array(states),
                labels=model.labels,
                mode=cfg.mode,
                mu=mu,
                newton_iterations=iterations,
                rank_defect=defects,
            )
            logger.error(f"Step {index} of {system.label} failed at t={e.time:.6g}: {e}")
            raise
        y = result.x
        states.append(y)
        iterations.append(result.iterations)
        defects.append(result.rank_defect)
        if result.rank_defect:
            logger.debug(f"t={times[index]:.6g}: Newton matrix rank defect {result.rank_defect}")

    states_arr = np.array(states)
    traj = Trajectory(
        times=times,
        states=states_arr,
        labels=model.labels,
        mode=cfg.mode,
        mu=mu,
        newton_iterations=iterations,
        rank_defect=defects,
    )
    if max(defects):
        logger.warning(f"Newton matrices of {system.label} were rank deficient (max defect {max(defects)})")

    if cfg.mode == "full":
        natural = states_arr
    elif cfg.mode == "m_mu":
        natural = np.array([model.to_natural(row) for row in states_arr])
    else:
        thetaA = np.zeros(system.dims.k_mu) if thetaA0 is None else np.asarray(thetaA0, dtype=float)
        reduced_states = (
            states_arr if cfg.mode == "reduced" else np.array([model.to_reduced(row) for row in states_arr])
        )
        reduced = Trajectory(
            times=times, states=reduced_states, labels=state_labels(system, "reduced"), mode="reduced", mu=mu
        )
        natural = reconstruct(system, mu, reduced, thetaA, diagnose=False).states

    momentum, energy = _natural_diagnostics(system, mu, natural)
    traj.natural = natural
    traj.natural_labels = natural_labels(system)
    traj.momentum_drift = momentum
    traj.energy_drift = energy
    traj.dirac_residual = _dirac_along(model, states_arr, times)
    logger.info(
        f"Finished {system.label}: max momentum drift {np.max(momentum):.3e}, "
        f"max energy drift {np.max(energy):.3e}, max Dirac residual {np.max(traj.dirac_residual):.3e}"
    )
    return traj
