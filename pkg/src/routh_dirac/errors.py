"""Exception hierarchy for routh-dirac."""

from typing import Iterable, List, Optional, Sequence

import numpy as np


class RouthDiracError(Exception):
    """Base class for numerical and model errors.

    The integrator stamps ``time`` (and the partial ``trajectory``) on errors
    raised while stepping so callers can report where a run stopped.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self.time: Optional[float] = None
        self.trajectory = None

    def __str__(self) -> str:
        base = super().__str__()
        if self.time is not None:
            return f"{base} (at t={self.time:.6g})"
        return base


class SingularFrame(RouthDiracError):
    """Frame matrix (or a block of it) is not invertible at the evaluated point."""


class DerivativeMismatch(RouthDiracError):
    """Two independent derivative computations disagree beyond tolerance."""

    def __init__(self, message: str, max_difference: float):
        super().__init__(message)
        self.max_difference = max_difference


class InvarianceViolation(RouthDiracError, ValueError):
    """The Lagrangian or the horizontal frame is not invariant under the symmetry."""


class InvalidSplit(RouthDiracError, ValueError):
    """The adapted basis split of the Lie algebra violates a structure identity."""

    def __init__(self, identity: str, indices: Sequence[int], violation: float):
        super().__init__(
            f"Split violates {identity} at indices {tuple(indices)} (|value| = {violation:.3e})"
        )
        self.identity = identity
        self.indices = tuple(indices)
        self.violation = violation


class NotGRegular(RouthDiracError):
    """The group-velocity Hessian of the Lagrangian is rank deficient."""

    def __init__(self, rank: int, k: int):
        super().__init__(f"Lagrangian is not G-regular: Hessian rank {rank} < {k}")
        self.rank = rank
        self.k = k


class NewtonDiverged(RouthDiracError):
    """Newton iteration failed to reach tolerance."""

    def __init__(self, message: str, residual_norm: float, iterations: int):
        super().__init__(f"{message} (last residual norm {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobian(RouthDiracError):
    """Rank-deficient Newton matrix and no damped step reduces the residual."""

    def __init__(self, message: str, rank_defect: int, residual_norm: float):
        super().__init__(f"{message} (rank defect {rank_defect}, residual norm {residual_norm:.3e})")
        self.rank_defect = rank_defect
        self.residual_norm = residual_norm


class Inconsistent(RouthDiracError):
    """Constraints cannot be satisfied from the given guess."""

    def __init__(self, message: str, residual_norm: float, rows: Iterable[str] = ()):
        self.rows: List[str] = list(rows)
        detail = f"; offending rows: {', '.join(self.rows)}" if self.rows else ""
        super().__init__(f"{message} (residual norm {residual_norm:.3e}){detail}")
        self.residual_norm = residual_norm


class CollisionSingularity(RouthDiracError):
    """Two point vortices came closer than the collision threshold."""

    def __init__(self, first: int, second: int, distance: float):
        super().__init__(
            f"Vortices {first} and {second} collided (distance {distance:.3e})"
        )
        self.pair = (first, second)
        self.distance = distance


class PotentialDomainError(RouthDiracError, ValueError):
    """Expression evaluated outside the real domain of one of its functions."""


class ParseError(RouthDiracError, ValueError):
    """Malformed potential expression."""

    def __init__(self, message: str, offset: int, expected: Iterable[str]):
        self.offset = offset
        self.expected = frozenset(expected)
        expected_text = ", ".join(sorted(self.expected)) if self.expected else "end of input"
        super().__init__(f"{message} at offset {offset} (expected one of: {expected_text})")


class RankDeficientWarning(UserWarning):
    """Constraint Jacobian lost rank although the residual converged."""

    def __init__(self, rank_defect: int, null_basis: np.ndarray, rows: Sequence[str] = ()):
        self.rank_defect = rank_defect
        self.null_basis = null_basis
        self.rows = list(rows)
        detail = f" involving rows {', '.join(self.rows)}" if self.rows else ""
        super().__init__(f"Constraint Jacobian rank defect {rank_defect}{detail}")
