"""System config files and run configuration."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .routh import LagrangianSystem
from .systems import FAMILIES, build_system

RUN_MODES = ("full", "reduced", "both", "m_mu", "classical")

SYSTEM_KEYS = ("family", "params", "potential", "extra_constraints", "mu_split", "initial", "mu")


@dataclass
class SystemConfig:
    """A resolved system plus the momentum level its config file asks for, if any."""

    system: LagrangianSystem
    mu: Optional[np.ndarray] = None
    source: str = ""


@dataclass
class RunConfig:
    system: str
    mu: Optional[List[float]] = None
    mode: str = "full"
    h: float = 1e-3
    T: float = 1.0
    out: Optional[str] = None
    summary: Optional[str] = None
    seed: int = 0
    check_dirac: bool = False
    newton_tol: float = 1e-10
    max_iters: int = 50
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"Step size h must be positive, got {self.h}")
        if not self.T > 0:
            raise ValueError(f"Final time T must be positive, got {self.T}")
        if self.mode not in RUN_MODES:
            raise ValueError(f"Unknown mode '{self.mode}', expected one of {RUN_MODES}")
        if not self.newton_tol > 0:
            raise ValueError(f"Newton tolerance must be positive, got {self.newton_tol}")


class SystemConfigParser:
    """Loads YAML (or JSON) system config files.

    Schema: ``family`` (built-in name), ``params`` (family keyword values),
    ``potential`` (expression string), ``extra_constraints`` (expressions in
    coordinate, ``v_<name>`` and ``p_<name>`` variables), ``mu_split``
    ({A: [...], I: [...]}), ``initial`` ({q, v, fixed}) and ``mu``.
    """

    def __init__(self):
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def load_system(self, config_path: str, overrides: Optional[Dict[str, Any]] = None) -> SystemConfig:
        data = self._load_yaml_file(config_path)
        self._validate_structure(data)
        params = dict(data.get("params") or {})
        params.update(overrides or {})
        try:
            system = build_system(
                data["family"],
                params=params,
                potential=data.get("potential"),
                extra_constraints=data.get("extra_constraints") or (),
                split=data.get("mu_split"),
                initial=data.get("initial"),
            )
        except (ValueError, KeyError, TypeError) as e:
            raise ValueError(f"Error building system from {config_path}: {e}") from e
        mu = data.get("mu")
        mu_vec = None if mu is None else np.atleast_1d(np.asarray(mu, dtype=float))
        if mu_vec is not None and len(mu_vec) != system.dims.k:
            raise ValueError(f"mu in {config_path} has length {len(mu_vec)}, system has k={system.dims.k}")
        self.logger.info(f"Loaded {system.label} from {config_path}")
        return SystemConfig(system=system, mu=mu_vec, source=str(config_path))

    def _load_yaml_file(self, config_path: str) -> Dict[str, Any]:
        config_file = Path(config_path)

        if not config_file.exists():
            raise FileNotFoundError(f"System config file not found: {config_path}")

        try:
            with open(config_file, "r", encoding="utf-8") as f:
                return yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid YAML in system config: {e}") from e

    def _validate_structure(self, data: Any) -> None:
        if not isinstance(data, dict):
            raise ValueError("System config must contain a YAML object")
        if "family" not in data:
            raise ValueError("System config must have a 'family' field")
        unknown = [key for key in data if key not in SYSTEM_KEYS]
        if unknown:
            raise ValueError(f"Unknown system config keys {unknown}, expected a subset of {list(SYSTEM_KEYS)}")
        if data.get("extra_constraints") is not None and not isinstance(data["extra_constraints"], list):
            raise ValueError("'extra_constraints' must be a list of expression strings")
        split = data.get("mu_split")
        if split is not None and (not isinstance(split, dict) or set(split) - {"A", "I"}):
            raise ValueError("'mu_split' must be a mapping with keys A and I")


def resolve_system(name_or_path: str, params: Optional[Dict[str, Any]] = None) -> SystemConfig:
    """A built-in family name or a path to a system config file."""
    if name_or_path in FAMILIES:
        return SystemConfig(system=build_system(name_or_path, params=params or {}), source=name_or_path)
    return SystemConfigParser().load_system(name_or_path, params)
