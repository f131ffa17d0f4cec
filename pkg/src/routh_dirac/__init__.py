"""routh-dirac: implicit Lagrange-Routh and Routh-Dirac simulation of mechanical systems with symmetry."""

__version__ = "0.1.0"

from .checks import run_checks
from .cli import main
from .integrator import consistent_init, integrate
from .systems import build_system

__all__ = ["build_system", "consistent_init", "integrate", "main", "run_checks"]
