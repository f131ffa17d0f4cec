"""Forward-mode differentiation with dual numbers.

A :class:`Dual` carries a real part and a vector of first-order
perturbations. The real part may itself be a Dual, which gives exact second
derivatives (dual-over-dual) without a separate hyper-dual type. Central finite
differences are provided only as an independent cross-check.
"""

import math
from typing import Any, Callable, Sequence, Tuple

import numpy as np

from .errors import PotentialDomainError

_FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


class Dual:
    """Dual number ``real + eps . e`` with an arbitrary-length epsilon vector."""

    __slots__ = ("real", "eps")
    # numpy must hand mixed expressions back to the Dual operators
    __array_ufunc__ = None

    def __init__(self, real: Any, eps: Any):
        self.real = real
        self.eps = np.asarray(eps) if not isinstance(eps, np.ndarray) else eps

    def __repr__(self) -> str:
        return f"Dual({self.real!r}, {self.eps!r})"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.eps + other.eps)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda o: self + o, other)
        return Dual(self.real + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real - other.real, self.eps - other.eps)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda o: self - o, other)
        return Dual(self.real - other, self.eps)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return _elementwise(lambda o: o - self, other)
        return Dual(other - self.real, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real * other.real, self.eps * other.real + other.eps * self.real)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda o: self * o, other)
        return Dual(self.real * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if value(other) == 0:
                raise PotentialDomainError("Division by zero")
            quotient = self.real / other.real
            return Dual(quotient, (self.eps - other.eps * quotient) / other.real)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda o: self / o, other)
        if other == 0:
            raise PotentialDomainError("Division by zero")
        return Dual(self.real / other, self.eps / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return _elementwise(lambda o: o / self, other)
        if value(self) == 0:
            raise PotentialDomainError("Division by zero")
        quotient = other / self.real
        return Dual(quotient, -self.eps * (quotient / self.real))

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            return exp(exponent * log(self))
        if isinstance(exponent, np.ndarray):
            return _elementwise(lambda o: self**o, exponent)
        return power(self, exponent)

    def __rpow__(self, base):
        if isinstance(base, np.ndarray):
            return _elementwise(lambda o: o**self, base)
        return power(base, self)

    def __neg__(self):
        return Dual(-self.real, -self.eps)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if value(self) < 0 else self

    # comparisons act on the innermost real part ----------------------------

    def __lt__(self, other):
        return value(self) < value(other)

    def __le__(self, other):
        return value(self) <= value(other)

    def __gt__(self, other):
        return value(self) > value(other)

    def __ge__(self, other):
        return value(self) >= value(other)


def _elementwise(fn: Callable[[Any], Any], array: np.ndarray) -> np.ndarray:
    out = np.empty(array.shape, dtype=object)
    for index, item in np.ndenumerate(array):
        out[index] = fn(item)
    return out


def value(x: Any) -> Any:
    """Strip every perturbation level; works on scalars and arrays."""
    if isinstance(x, Dual):
        return value(x.real)
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.array([value(item) for item in x.ravel()], dtype=float).reshape(x.shape)
    return x


def is_dual_array(array: Any) -> bool:
    """True if any entry of ``array`` carries a perturbation."""
    if isinstance(array, Dual):
        return True
    items = np.asarray(array, dtype=object).ravel()
    return any(isinstance(item, Dual) for item in items)


def _check_positive(x: Any, name: str) -> None:
    if value(x) <= 0:
        raise PotentialDomainError(f"{name} of non-positive argument {value(x)!r}")


# elementary functions -------------------------------------------------------


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.real), x.eps * cos(x.real))
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.real), x.eps * -sin(x.real))
    return math.cos(x)


def tan(x):
    return sin(x) / cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.real)
        return Dual(e, x.eps * e)
    return math.exp(x)


def log(x):
    _check_positive(x, "ln")
    if isinstance(x, Dual):
        return Dual(log(x.real), x.eps / x.real)
    return math.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        _check_positive(x, "sqrt")
        root = sqrt(x.real)
        return Dual(root, x.eps / (2 * root))
    if x < 0:
        raise PotentialDomainError(f"sqrt of negative argument {x!r}")
    return math.sqrt(x)


def atan2(y, x):
    if isinstance(y, Dual) or isinstance(x, Dual):
        yr, xr = _real(y), _real(x)
        r2 = xr * xr + yr * yr
        if value(r2) == 0:
            raise PotentialDomainError("atan2 at the origin")
        return Dual(atan2(yr, xr), (_eps(y) * xr - _eps(x) * yr) / r2)
    return math.atan2(y, x)


def _real(x):
    return x.real if isinstance(x, Dual) else x


def _eps(x):
    return x.eps if isinstance(x, Dual) else 0.0


def power(base, exponent):
    """``base ** exponent`` restricted to the real domain."""
    if isinstance(exponent, Dual):
        if isinstance(base, Dual):
            return exp(exponent * log(base))
        _check_positive(base, "power base")
        return exp(exponent * math.log(base))
    integral = float(exponent).is_integer()
    if not integral and value(base) < 0:
        raise PotentialDomainError(f"Non-integer power {exponent!r} of negative base")
    if isinstance(base, Dual):
        if exponent == 0:
            return Dual(power(base.real, 0), base.eps * 0.0)
        if value(base) == 0 and exponent < 1:
            raise PotentialDomainError(f"Power {exponent!r} is not differentiable at zero")
        exponent_value = int(exponent) if integral else exponent
        return Dual(
            power(base.real, exponent_value),
            base.eps * (exponent_value * power(base.real, exponent_value - 1)),
        )
    if value(base) == 0 and exponent < 0:
        raise PotentialDomainError("Negative power of zero")
    if integral:
        return base ** int(exponent)
    return base**exponent


# derivative drivers ---------------------------------------------------------


def seed(x: Sequence[Any]) -> np.ndarray:
    """Independent first-order perturbations for every entry of ``x``."""
    x = np.asarray(x, dtype=object).ravel()
    n = len(x)
    identity = np.eye(n)
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = Dual(x[i], identity[i])
    return out


def split(y: Any, n: int) -> Tuple[Any, np.ndarray]:
    """Return ``(real part, derivative vector)`` of a function output."""
    if isinstance(y, Dual):
        return y.real, y.eps
    return y, np.zeros(n)


def gradient(f: Callable[[np.ndarray], Any], x: Sequence[float]) -> Tuple[float, np.ndarray]:
    """Value and gradient of a scalar function at ``x``."""
    x = np.asarray(x, dtype=float)
    y = f(seed(x))
    real, eps = split(y, len(x))
    return float(real), np.asarray(eps, dtype=float)


def jacobian(f: Callable[[np.ndarray], Any], x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Value and Jacobian of a vector function at ``x``."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    ys = np.asarray(f(seed(x)), dtype=object).ravel()
    values = np.zeros(len(ys))
    jac = np.zeros((len(ys), n))
    for i, y in enumerate(ys):
        real, eps = split(y, n)
        values[i] = real
        jac[i] = eps
    return values, jac


def hessian(f: Callable[[np.ndarray], Any], x: Sequence[float]) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of a scalar function (dual over dual)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    identity = np.eye(n)
    inner = seed(x)
    outer = np.empty(n, dtype=object)
    for i in range(n):
        outer[i] = Dual(inner[i], identity[i])
    y = f(outer)
    if not isinstance(y, Dual):
        return float(y), np.zeros(n), np.zeros((n, n))
    real, grad = split(y.real, n)
    hess = np.zeros((n, n))
    for j, entry in enumerate(np.asarray(y.eps, dtype=object)):
        if isinstance(entry, Dual):
            hess[j] = np.asarray(entry.eps, dtype=float)
    return float(real), np.asarray(grad, dtype=float), hess


def matrix_derivative(
    fn: Callable[[np.ndarray], Any], q: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray]:
    """Value ``M[i, j]`` and derivative ``dM[i, j, k] = dM_ij / dq_k``."""
    q = np.asarray(q, dtype=float)
    n = len(q)
    matrix = np.asarray(fn(seed(q)), dtype=object)
    values = np.zeros(matrix.shape)
    deriv = np.zeros(matrix.shape + (n,))
    for index, entry in np.ndenumerate(matrix):
        real, eps = split(entry, n)
        values[index] = real
        deriv[index] = eps
    return values, deriv


def fd_gradient(f: Callable[[np.ndarray], float], x: Sequence[float]) -> np.ndarray:
    """Central finite-difference gradient, step cbrt(eps) * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros(len(x))
    for i in range(len(x)):
        step = _FD_STEP * max(1.0, abs(x[i]))
        forward = x.copy()
        backward = x.copy()
        forward[i] += step
        backward[i] -= step
        grad[i] = (f(forward) - f(backward)) / (forward[i] - backward[i])
    return grad
