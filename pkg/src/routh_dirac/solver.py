"""Damped Gauss-Newton for stacked, possibly rank-deficient residual systems."""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space, qr, solve_triangular
from scipy.optimize import approx_fprime

from .errors import NewtonDiverged, PotentialDomainError, SingularFrame, SingularJacobian

RANK_TOL = 1e-10

Residual = Callable[[np.ndarray], np.ndarray]


@dataclass
class NewtonConfig:
    tol: float = 1e-10
    max_iters: int = 50
    damping_min: float = 2.0**-16
    refresh_ratio: float = 0.25
    reuse_jacobian: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"Newton tolerance must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not 0 < self.damping_min <= 1:
            raise ValueError(f"damping_min must lie in (0, 1], got {self.damping_min}")


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    rank_defect: int
    jacobian: Optional[np.ndarray] = None


def rank_revealing_solve(
    jac: np.ndarray, rhs: np.ndarray, rank_tol: float = RANK_TOL
) -> Tuple[np.ndarray, int]:
    """Minimum-norm solution of jac @ x = rhs in the numerical range of jac.

    Column-pivoted QR reveals the rank r (|R_ii| > rank_tol |R_00|); the
    leading r rows of R are then inverted through a QR factorization of their
    transpose, which gives the minimum-norm step.
    """
    rows, cols = jac.shape
    step = np.zeros(cols)
    if rows == 0 or cols == 0:
        return step, 0
    q, r, perm = qr(jac, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return step, 0
    rank = int(np.sum(diag > rank_tol * diag[0]))
    r_lead = r[:rank, :]
    c = q[:, :rank].T @ rhs
    q2, r2 = qr(r_lead.T, mode="economic")
    y = q2 @ solve_triangular(r2, c, trans="T")
    step[perm] = y
    return step, rank


def numerical_rank(jac: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    if jac.size == 0:
        return 0
    _, r, _ = qr(jac, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return 0
    return int(np.sum(diag > rank_tol * diag[0]))


def left_null_basis(jac: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the left null space of jac."""
    if jac.shape[0] == 0:
        return np.zeros((0, 0))
    if jac.shape[1] == 0:
        return np.eye(jac.shape[0])
    return null_space(jac.T, rcond=rank_tol)


def forward_difference_jacobian(fun: Residual, x: np.ndarray) -> np.ndarray:
    """Forward differences with step sqrt(eps) * max(1, |x_i|)."""
    steps = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(x))
    jac = approx_fprime(x, fun, steps)
    return np.atleast_2d(np.asarray(jac, dtype=float)).reshape(-1, len(x))


class NewtonSolver:
    """Newton iteration on a stacked residual with a reusable iteration matrix.

    Without an exact Jacobian callable the iteration matrix is built by forward
    differences and kept across calls until the contraction ratio exceeds
    ``refresh_ratio`` or a line search fails with a stale matrix.
    """

    def __init__(self, config: Optional[NewtonConfig] = None):
        self.config = config or NewtonConfig()
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self._jacobian: Optional[np.ndarray] = None
        self.evaluations = 0
        self.refreshes = 0

    def reset(self):
        self._jacobian = None

    @staticmethod
    def _error(residual: np.ndarray) -> float:
        return float(np.max(np.abs(residual))) if residual.size else 0.0

    def _iteration_matrix(
        self, fun: Residual, x: np.ndarray, free: np.ndarray, jac: Optional[Callable]
    ) -> np.ndarray:
        if jac is not None:
            return np.atleast_2d(np.asarray(jac(x), dtype=float))[:, free]

        def restricted(z):
            trial = x.copy()
            trial[free] = z
            return fun(trial)

        self.refreshes += 1
        return forward_difference_jacobian(restricted, x[free])

    def _line_search(
        self, fun: Residual, x: np.ndarray, fx: np.ndarray, free: np.ndarray, step: np.ndarray
    ) -> Tuple[bool, np.ndarray, np.ndarray]:
        base = float(np.linalg.norm(fx))
        damping = 1.0
        while damping >= self.config.damping_min:
            trial = x.copy()
            trial[free] += damping * step
            try:
                f_trial = np.asarray(fun(trial), dtype=float)
                self.evaluations += 1
            except (PotentialDomainError, SingularFrame) as e:
                self.logger.debug(f"Trial point rejected at damping {damping:.3g}: {e}")
                damping /= 2
                continue
            if np.all(np.isfinite(f_trial)) and np.linalg.norm(f_trial) < base:
                return True, trial, f_trial
            damping /= 2
        return False, x, fx

    def solve(
        self,
        fun: Residual,
        x0: Sequence[float],
        fixed: Optional[Sequence[bool]] = None,
        jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        label: str = "system",
    ) -> NewtonResult:
        """Drive ``fun`` below ``tol`` (max-abs) from ``x0``; ``fixed`` columns stay put."""
        cfg = self.config
        x = np.asarray(x0, dtype=float).copy()
        free = np.ones(len(x), dtype=bool) if fixed is None else ~np.asarray(fixed, dtype=bool)
        fx = np.asarray(fun(x), dtype=float)
        self.evaluations += 1
        error = self._error(fx)
        iterations = 0
        rank_defect = 0
        reuse = cfg.reuse_jacobian and jac is None

        while error >= cfg.tol:
            if iterations >= cfg.max_iters:
                raise NewtonDiverged(f"Newton iteration for {label} did not converge", error, iterations)
            n_free = int(np.sum(free))
            fresh = not (reuse and self._jacobian is not None and self._jacobian.shape == (len(fx), n_free))
            matrix = self._iteration_matrix(fun, x, free, jac) if fresh else self._jacobian
            while True:
                step, rank = rank_revealing_solve(matrix, -fx)
                rank_defect = min(matrix.shape) - rank
                accepted, x_new, f_new = self._line_search(fun, x, fx, free, step)
                if accepted or fresh:
                    break
                self.logger.debug(f"{label}: stale iteration matrix, refreshing")
                matrix = self._iteration_matrix(fun, x, free, jac)
                fresh = True
            if not accepted:
                if rank_defect:
                    raise SingularJacobian(
                        f"No damped Newton step reduces the residual of {label}",
                        rank_defect,
                        error,
                    )
                raise NewtonDiverged(f"Line search failed for {label}", error, iterations)

            new_error = self._error(f_new)
            ratio = new_error / error if error > 0 else 0.0
            self._jacobian = matrix if reuse and ratio <= cfg.refresh_ratio else None
            self.logger.debug(
                f"{label}: iteration {iterations + 1} residual {new_error:.3e} "
                f"(ratio {ratio:.3g}, rank defect {rank_defect})"
            )
            x, fx, error = x_new, f_new, new_error
            iterations += 1

        return NewtonResult(
            x=x,
            iterations=iterations,
            residual_norm=error,
            rank_defect=rank_defect,
            jacobian=self._jacobian,
        )
