"""Built-in mechanical systems and the family registry used by config files."""

import logging
import math
from dataclasses import replace
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from . import autodiff
from .errors import CollisionSingularity, PotentialDomainError
from .frames import Dims
from .parser import PotentialExpr, parse_potential, univariate
from .routh import Constraint, InitialData, LagrangianSystem, validate_system
from .symmetry import Split, SymmetrySetup, momentum_map

COLLISION_TOL = 1e-8

logger = logging.getLogger("routh_dirac.systems")

Potential = Union[str, PotentialExpr]


def _potential(potential: Potential, name: str) -> PotentialExpr:
    expr = parse_potential(potential) if isinstance(potential, str) else potential
    return univariate(expr, name)


def _abelian_setup(dims: Dims, label: str, a_indices: Sequence[int], i_indices: Sequence[int]) -> SymmetrySetup:
    """Cyclic coordinates: K = I, Ad = I, trivial connection, zero curvature."""
    k, m = dims.k, dims.m
    return SymmetrySetup(
        dims=dims,
        C=np.zeros((k, k, k)),
        K=lambda q: np.eye(k),
        Ad=lambda theta: np.eye(k),
        Lambda=lambda q: np.zeros((k, m)),
        mu=np.zeros(k),
        split=Split(A=tuple(a_indices), I=tuple(i_indices)),
        analytic_B=lambda q: np.zeros((k, m, m)),
        label=label,
    )


def _box_sampler(low: Sequence[float], high: Sequence[float], speed: float = 1.0):
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def sample(rng: np.random.Generator):
        return rng.uniform(low, high), rng.uniform(-speed, speed, len(low))

    return sample


def _finish(system: LagrangianSystem) -> LagrangianSystem:
    validate_system(system)
    logger.debug(f"Built {system.label} with dims {system.dims}")
    return system


# mechanical examples ---------------------------------------------------------


def make_cyclic_linear(V: Potential = "x^2/2") -> LagrangianSystem:
    """L = vx^2 + vx vy - V(x) on (x, y); y is cyclic."""
    expr = _potential(V, "x")

    def lagrangian(q, v):
        return v[0] * v[0] + v[0] * v[1] - expr.evaluate({"x": q[0]})

    dims = Dims(n=2, k=1, m=1, k_mu=1)
    return _finish(
        LagrangianSystem(
            dims=dims,
            lagrangian=lagrangian,
            sym=_abelian_setup(dims, "R acting on y", (0,), ()),
            coordinates=("x", "y"),
            label="cyclic-linear",
            sampler=_box_sampler([-1.0, -1.0], [1.0, 1.0]),
            initial=InitialData(q=[0.0, 0.0], v=[1.0, 0.0], fixed=("x", "y", "v_y")),
            parameters={"potential": str(expr)},
        )
    )


def make_point_vortices(
    gamma: Sequence[float] = (1.0, 1.0),
    initial_q: Optional[Sequence[float]] = None,
) -> LagrangianSystem:
    """N point vortices in polar/relative-angle coordinates (rho_1..rho_N, phi_2..phi_N, phi_1).

    theta_1 = phi_1 and theta_k = phi_k + phi_1; the S^1 symmetry translates phi_1.
    """
    gamma = [float(g) for g in gamma]
    count = len(gamma)
    if count < 2:
        raise ValueError(f"Point vortex model needs at least two vortices, got {count}")
    if any(g == 0 for g in gamma):
        raise ValueError(f"Vortex strengths must be nonzero, got {gamma}")

    def angles(q):
        phi1 = q[2 * count - 1]
        return [phi1] + [q[count + j] + phi1 for j in range(count - 1)]

    def lagrangian(q, v):
        rho = q[:count]
        theta = angles(q)
        theta_dot = angles(v)
        kinetic = 0.0
        for k in range(count):
            kinetic = kinetic + gamma[k] * rho[k] * rho[k] * theta_dot[k]
        interaction = 0.0
        for k in range(count):
            for n in range(k + 1, count):
                d2 = rho[k] * rho[k] + rho[n] * rho[n] - 2 * rho[k] * rho[n] * autodiff.cos(theta[k] - theta[n])
                distance = math.sqrt(max(float(autodiff.value(d2)), 0.0))
                if distance < COLLISION_TOL:
                    raise CollisionSingularity(k, n, distance)
                # ln|z_k - z_n| = ln(d2) / 2, counted for both orderings
                interaction = interaction + gamma[k] * gamma[n] * autodiff.log(d2) / 2
        return kinetic - interaction

    coordinates = tuple(
        [f"rho{k + 1}" for k in range(count)] + [f"phi{k + 1}" for k in range(1, count)] + ["phi1"]
    )
    m = 2 * count - 1
    dims = Dims(n=2 * count, k=1, m=m, k_mu=1)
    if initial_q is None:
        spread = [2 * math.pi * k / count for k in range(1, count)]
        initial_q = [1.0] * count + spread + [0.0]
    low = [0.5] * count + [-math.pi] * count
    high = [1.5] * count + [math.pi] * count
    return _finish(
        LagrangianSystem(
            dims=dims,
            lagrangian=lagrangian,
            sym=_abelian_setup(dims, "S^1 rotations", (0,), ()),
            coordinates=coordinates,
            label="vortices",
            sampler=_box_sampler(low, high),
            initial=InitialData(q=initial_q, v=np.zeros(2 * count), fixed=coordinates),
            parameters={"gamma": gamma},
        )
    )


def make_scalar_fields(m2: float = 1.0, m3: float = 1.0, constraints: bool = True) -> LagrangianSystem:
    """Degenerate two-field model on (x1, y1, r, rho, theta, phi) with a T^2 symmetry."""
    if not (m2 > 0 and m3 > 0):
        raise ValueError(f"Field masses must be positive, got m2={m2}, m3={m3}")

    def lagrangian(q, v):
        x1, y1, r, rho = q[0], q[1], q[2], q[3]
        vr, vrho, vtheta, vphi = v[2], v[3], v[4], v[5]
        return (
            m2 * (vr * vr + r * r * vtheta * vtheta)
            + m3 * (vrho * vrho + rho * rho * vphi * vphi)
            + r * r * vtheta
            + rho * rho * vphi
            - r * r
            - rho * rho
            - (x1 * x1 + y1 * y1)
        )

    extra = ()
    if constraints:
        extra = (
            Constraint("x1", lambda q, v, p: q[0]),
            Constraint("y1", lambda q, v, p: q[1]),
        )
    dims = Dims(n=6, k=2, m=4, k_mu=2)
    return _finish(
        LagrangianSystem(
            dims=dims,
            lagrangian=lagrangian,
            sym=_abelian_setup(dims, "T^2 phase rotations", (0, 1), ()),
            coordinates=("x1", "y1", "r", "rho", "theta", "phi"),
            extra_constraints=extra,
            label="scalar-fields",
            sampler=_box_sampler([-1, -1, 0.5, 0.5, -math.pi, -math.pi], [1, 1, 1.5, 1.5, math.pi, math.pi]),
            initial=InitialData(
                q=[0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
                v=[0.0, 0.0, 0.1, -0.1, 0.2, 0.3],
                fixed=("x1", "y1", "r", "rho", "theta", "phi", "v_x1", "v_y1", "v_r", "v_rho"),
            ),
            parameters={"m2": m2, "m3": m3, "constraints": constraints},
        )
    )


def make_central_force(mass: float = 1.0, V: Potential = "r^2/2") -> LagrangianSystem:
    """L = mass (vr^2 + r^2 vtheta^2) / 2 - V(r); G-regular for r > 0."""
    if not mass > 0:
        raise ValueError(f"Mass must be positive, got {mass}")
    expr = _potential(V, "r")

    def lagrangian(q, v):
        r = q[0]
        if autodiff.value(r) <= 0:
            raise PotentialDomainError(f"Central force radius must be positive, got {autodiff.value(r)}")
        return 0.5 * mass * (v[0] * v[0] + r * r * v[1] * v[1]) - expr.evaluate({"r": r})

    dims = Dims(n=2, k=1, m=1, k_mu=1)
    return _finish(
        LagrangianSystem(
            dims=dims,
            lagrangian=lagrangian,
            sym=_abelian_setup(dims, "S^1 rotations", (0,), ()),
            coordinates=("r", "theta"),
            label="central-force",
            sampler=_box_sampler([0.5, -math.pi], [2.0, math.pi]),
            initial=InitialData(q=[1.0, 0.0], v=[0.0, 1.0], fixed=("r", "theta", "v_r")),
            parameters={"mass": mass, "potential": str(expr)},
        )
    )


# non-Abelian fixtures ----------------------------------------------------------


def make_affine_fixture() -> LagrangianSystem:
    """Affine group of the line acting on the half plane (a, b), a > 0.

    E1 is the dilation a d/da + b d/db, E2 the translation d/db; the
    hyperbolic Lagrangian (va^2 + vb^2) / (2 a^2) is invariant.
    """
    c = np.zeros((2, 2, 2))
    c[1, 0, 1] = 1.0
    c[1, 1, 0] = -1.0

    def k_fn(q):
        a, b = q[0], q[1]
        return np.array([[a, 0.0], [b, 1.0]], dtype=object)

    def ad_fn(theta):
        a, b = theta[0], theta[1]
        return np.array([[1.0, 0.0], [-b, a]], dtype=object)

    def lagrangian(q, v):
        a = q[0]
        if autodiff.value(a) <= 0:
            raise PotentialDomainError(f"Affine fixture needs a > 0, got {autodiff.value(a)}")
        return 0.5 * (v[0] * v[0] + v[1] * v[1]) / (a * a)

    dims = Dims(n=2, k=2, m=0, k_mu=0)
    sym = SymmetrySetup(
        dims=dims,
        C=c,
        K=k_fn,
        Ad=ad_fn,
        Lambda=lambda q: np.zeros((2, 0)),
        mu=np.zeros(2),
        split=Split(A=(), I=(0, 1)),
        analytic_B=lambda q: np.zeros((2, 0, 0)),
        label="ax+b",
    )
    return _finish(
        LagrangianSystem(
            dims=dims,
            lagrangian=lagrangian,
            sym=sym,
            coordinates=("a", "b"),
            label="affine",
            sampler=_box_sampler([0.5, -1.0], [2.0, 1.0]),
            initial=InitialData(q=[1.0, 0.0], v=[0.3, 0.5], fixed=("a", "b", "v_a", "v_b")),
        )
    )


def make_so3_fixture(
    mu: Sequence[float] = (0.0, 0.0, 1.0), a_indices: Sequence[int] = (2,)
) -> LagrangianSystem:
    """so(3) structure constants with a zero Lagrangian; only the algebra is exercised."""
    c = np.zeros((3, 3, 3))
    for a, b, d in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[d, a, b] = 1.0
        c[d, b, a] = -1.0
    a_indices = tuple(int(a) for a in a_indices)
    i_indices = tuple(i for i in range(3) if i not in a_indices)
    dims = Dims(n=3, k=3, m=0, k_mu=len(a_indices))
    sym = SymmetrySetup(
        dims=dims,
        C=c,
        K=lambda q: np.eye(3),
        Ad=lambda theta: np.eye(3),
        Lambda=lambda q: np.zeros((3, 0)),
        mu=np.asarray(mu, dtype=float),
        split=Split(A=a_indices, I=i_indices),
        analytic_B=lambda q: np.zeros((3, 0, 0)),
        label="so(3)",
        metadata={"algebraic": True},
    )
    return LagrangianSystem(
        dims=dims,
        lagrangian=lambda q, v: 0.0,
        sym=sym,
        coordinates=("e1", "e2", "e3"),
        label="so3",
        parameters={"mu": list(mu), "A": list(a_indices)},
    )


# registry ----------------------------------------------------------------------


def _cyclic(params: Mapping[str, Any], potential: Optional[str]) -> LagrangianSystem:
    return make_cyclic_linear(potential or params.get("potential", "x^2/2"))


def _central(params: Mapping[str, Any], potential: Optional[str]) -> LagrangianSystem:
    return make_central_force(float(params.get("mass", 1.0)), potential or params.get("potential", "r^2/2"))


def _scalar(params: Mapping[str, Any], potential: Optional[str]) -> LagrangianSystem:
    return make_scalar_fields(
        float(params.get("m2", 1.0)), float(params.get("m3", 1.0)), bool(params.get("constraints", True))
    )


def _vortices(params: Mapping[str, Any], potential: Optional[str]) -> LagrangianSystem:
    gamma = params.get("gamma", (1.0, 1.0))
    if isinstance(gamma, (int, float)):
        gamma = [float(gamma)] * int(params.get("count", 2))
    return make_point_vortices(gamma)


def _affine(params: Mapping[str, Any], potential: Optional[str]) -> LagrangianSystem:
    return make_affine_fixture()


def _so3(params: Mapping[str, Any], potential: Optional[str]) -> LagrangianSystem:
    a_indices = [int(a) for a in np.atleast_1d(params.get("A", (2,)))]
    return make_so3_fixture(np.atleast_1d(params.get("mu", (0.0, 0.0, 1.0))), a_indices)


FAMILIES: Dict[str, Callable[[Mapping[str, Any], Optional[str]], LagrangianSystem]] = {
    "cyclic-linear": _cyclic,
    "central-force": _central,
    "scalar-fields": _scalar,
    "vortices": _vortices,
    "affine": _affine,
    "so3": _so3,
}


def expression_constraint(text: str, coordinates: Sequence[str]) -> Constraint:
    """Constraint g(q, v, p) = 0 from an expression over ``x``, ``v_x`` and ``p_x`` names."""
    expr = parse_potential(text)
    names = list(coordinates)
    known = set(names) | {f"v_{c}" for c in names} | {f"p_{c}" for c in names}
    unknown = [v for v in expr.variables if v not in known]
    if unknown:
        raise ValueError(f"Constraint '{text}' uses unknown variables {unknown}")

    def fn(q, v, p):
        env: Dict[str, Any] = {}
        for i, c in enumerate(names):
            env[c] = q[i]
            env[f"v_{c}"] = v[i]
            env[f"p_{c}"] = p[i]
        return expr.evaluate(env)

    return Constraint(text, fn)


def build_system(
    family: str,
    params: Optional[Mapping[str, Any]] = None,
    potential: Optional[str] = None,
    extra_constraints: Sequence[str] = (),
    split: Optional[Mapping[str, Sequence[int]]] = None,
    initial: Optional[Mapping[str, Any]] = None,
) -> LagrangianSystem:
    """Instantiate a registered family and apply config-file overrides."""
    if family not in FAMILIES:
        raise ValueError(f"Unknown system family '{family}', expected one of {sorted(FAMILIES)}")
    system = FAMILIES[family](dict(params or {}), potential)
    if extra_constraints:
        added = tuple(expression_constraint(text, system.coordinates) for text in extra_constraints)
        system = replace(system, extra_constraints=system.extra_constraints + added)
    if split:
        sym = system.sym.with_split(split.get("A", ()), split.get("I", ()))
        system = replace(system, dims=sym.dims, sym=sym)
    if initial:
        base = system.initial
        system = replace(
            system,
            initial=InitialData(
                q=initial.get("q", base.q if base else None),
                v=initial.get("v", base.v if base else None),
                fixed=initial.get("fixed", base.fixed if base else ()),
            ),
        )
        if len(system.initial.q) != system.dims.n or len(system.initial.v) != system.dims.n:
            raise ValueError(f"Initial data for {family} must have {system.dims.n} entries per vector")
    return system


def default_mu(system: LagrangianSystem) -> np.ndarray:
    """Momentum level of the system's default initial data."""
    if system.initial is None:
        return np.asarray(system.sym.mu, dtype=float)
    return momentum_map(system, system.initial.q, system.initial.v)
