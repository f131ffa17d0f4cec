"""Sampled solutions with per-sample diagnostics, and their CSV / JSON files."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger("routh_dirac.trajectory")

MODES = ("full", "m_mu", "reduced", "classical")
DIAGNOSTICS = ("momentum_drift", "energy_drift", "dirac_residual", "newton_iterations", "rank_defect")

PathLike = Union[str, Path]


def _column(values: Optional[Sequence[float]], length: int, dtype=float) -> np.ndarray:
    if values is None:
        return np.zeros(length, dtype=dtype)
    out = np.asarray(values, dtype=dtype).ravel()
    if len(out) != length:
        raise ValueError(f"Diagnostic has {len(out)} samples, expected {length}")
    return out


@dataclass
class Trajectory:
    """Times, states in the layout of ``mode`` and the diagnostics of every sample.

    ``natural`` holds the same samples in the (q, v, p) layout when the run
    produced them.
    """

    times: np.ndarray
    states: np.ndarray
    labels: List[str]
    mode: str
    mu: np.ndarray
    natural: Optional[np.ndarray] = None
    natural_labels: List[str] = field(default_factory=list)
    momentum_drift: Optional[np.ndarray] = None
    energy_drift: Optional[np.ndarray] = None
    dirac_residual: Optional[np.ndarray] = None
    newton_iterations: Optional[np.ndarray] = None
    rank_defect: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        count = len(self.times)
        self.states = np.asarray(self.states, dtype=float).reshape(count, -1) if count else np.zeros(
            (0, len(self.labels))
        )
        self.labels = list(self.labels)
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        if self.mode not in MODES:
            raise ValueError(f"Unknown trajectory mode '{self.mode}', expected one of {MODES}")
        if count > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")
        if self.states.shape[1] != len(self.labels):
            raise ValueError(
                f"State width {self.states.shape[1]} does not match {len(self.labels)} labels"
            )
        if self.natural is not None:
            self.natural = np.asarray(self.natural, dtype=float).reshape(count, -1)
            self.natural_labels = list(self.natural_labels)
            if self.natural.shape[1] != len(self.natural_labels):
                raise ValueError("Natural layout width does not match its labels")
        self.momentum_drift = _column(self.momentum_drift, count)
        self.energy_drift = _column(self.energy_drift, count)
        self.dirac_residual = _column(self.dirac_residual, count)
        self.newton_iterations = _column(self.newton_iterations, count, dtype=int)
        self.rank_defect = _column(self.rank_defect, count, dtype=int)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def step_size(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def column(self, label: str) -> np.ndarray:
        if label in self.labels:
            return self.states[:, self.labels.index(label)]
        if self.natural is not None and label in self.natural_labels:
            return self.natural[:, self.natural_labels.index(label)]
        raise KeyError(f"Trajectory has no column '{label}'")

    def newton_stats(self) -> Dict[str, Any]:
        steps = self.newton_iterations[1:] if len(self) > 1 else self.newton_iterations
        if steps.size == 0:
            return {"steps": 0, "total_iterations": 0, "max_iterations": 0, "mean_iterations": 0.0}
        return {
            "steps": int(steps.size),
            "total_iterations": int(steps.sum()),
            "max_iterations": int(steps.max()),
            "mean_iterations": float(steps.mean()),
        }

    def summary(self, system: str, h: float, T: float) -> Dict[str, Any]:
        """Summary record with the fixed key set of the summary file."""
        return {
            "system": system,
            "mu": [float(x) for x in self.mu],
            "mode": self.mode,
            "h": float(h),
            "T": float(T),
            "max_momentum_drift": _max(self.momentum_drift),
            "max_energy_drift": _max(self.energy_drift),
            "max_dirac_residual": _max(self.dirac_residual),
            "newton_stats": self.newton_stats(),
            "rank_defects": int(np.max(self.rank_defect)) if len(self) else 0,
        }

    def write_csv(self, path: PathLike, natural: bool = False) -> Path:
        """Header ``t,<labels>``; every float printed with 17 significant digits."""
        if natural:
            if self.natural is None:
                raise ValueError("Trajectory carries no natural-layout samples")
            labels, data = self.natural_labels, self.natural
        else:
            labels, data = self.labels, self.states
        path = Path(path)
        table = np.column_stack([self.times, data]) if len(self) else np.zeros((0, len(labels) + 1))
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(",".join(["t"] + list(labels)) + "\n")
            for row in table:
                f.write(",".join("%.17g" % x for x in row) + "\n")
        logger.debug(f"Wrote {len(self)} samples to {path}")
        return path

    @classmethod
    def read_csv(cls, path: PathLike, mode: str = "full", mu: Sequence[float] = ()) -> "Trajectory":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Trajectory file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
        if not header or header[0] != "t":
            raise ValueError(f"Trajectory file {path} must start with a 't,' header")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            data = np.zeros((0, len(header)))
        if data.shape[1] != len(header):
            raise ValueError(f"Trajectory file {path} has {data.shape[1]} columns, header names {len(header)}")
        return cls(times=data[:, 0], states=data[:, 1:], labels=header[1:], mode=mode, mu=mu)


def _max(values: np.ndarray) -> float:
    return float(np.max(values)) if len(values) else 0.0


def write_summary(path: PathLike, summary: Union[Dict[str, Any], List[Dict[str, Any]]]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    return path
