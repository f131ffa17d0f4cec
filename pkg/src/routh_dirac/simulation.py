"""One simulation run: resolve the system, initialize, integrate and write outputs."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import RunConfig, resolve_system
from .errors import RouthDiracError
from .integrator import StepConfig, consistent_init, diagnose_full, integrate, natural_labels, shared_coordinates
from .routh import LagrangianSystem, split_q
from .systems import default_mu
from .trajectory import Trajectory, write_summary

DIRAC_FILE_TOL = 1e-6


@dataclass
class RunOutcome:
    summary: Dict[str, Any]
    trajectories: Dict[str, Trajectory] = field(default_factory=dict)
    verified: bool = True
    dirac_file_residual: Optional[float] = None


def sibling_path(path: str, tag: str) -> Path:
    """``out.csv`` -> ``out.<tag>.csv``."""
    p = Path(path)
    return p.with_name(f"{p.stem}.{tag}{p.suffix or '.csv'}")


def check_trajectory_file(system: LagrangianSystem, mu: Sequence[float], path: str) -> np.ndarray:
    """Dirac residual of every step of a natural-layout trajectory file."""
    traj = Trajectory.read_csv(path, mode="full", mu=mu)
    expected = natural_labels(system)
    if traj.labels != expected:
        raise ValueError(f"Trajectory file {path} has columns {traj.labels}, expected {expected}")
    return diagnose_full(system, mu, traj).dirac_residual


class SimulationRunner:
    """Runs a RunConfig end to end; shared by ``simulate`` and ``sweep``."""

    def __init__(self):
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def resolve_mu(self, run: RunConfig, system: LagrangianSystem, config_mu: Optional[np.ndarray]) -> np.ndarray:
        if run.mu is not None:
            mu = np.atleast_1d(np.asarray(run.mu, dtype=float))
        elif config_mu is not None:
            mu = config_mu
        else:
            mu = default_mu(system)
            self.logger.info(f"Momentum level computed from initial data: {mu.tolist()}")
        if len(mu) != system.dims.k:
            raise ValueError(f"mu has length {len(mu)}, {system.label} has k={system.dims.k}")
        return mu

    def integrate_mode(self, system: LagrangianSystem, mu: np.ndarray, run: RunConfig, mode: str) -> Trajectory:
        try:
            init = consistent_init(system, mu, system.initial, mode=mode, tol=run.newton_tol)
        except RouthDiracError as e:
            if e.time is None:
                e.time = 0.0
            raise
        _, _, theta_a0 = split_q(system.sym, system.initial.q)
        cfg = StepConfig(h=run.h, newton_tol=run.newton_tol, max_iters=run.max_iters, mode=mode)
        traj = integrate(system, mu, init.state, cfg, run.T, thetaA0=theta_a0)
        if init.rank_defect:
            traj.rank_defect[0] = init.rank_defect
        return traj

    def run(self, run: RunConfig) -> RunOutcome:
        resolved = resolve_system(run.system, run.params)
        system = resolved.system
        if system.initial is None:
            raise ValueError(f"System {system.label} has no initial data to integrate from")
        try:
            mu = self.resolve_mu(run, system, resolved.mu)
        except RouthDiracError as e:
            e.time = 0.0
            raise
        modes: List[str] = ["full", "reduced"] if run.mode == "both" else [run.mode]
        self.logger.info(f"Simulating {system.label}: mode={run.mode}, mu={mu.tolist()}, h={run.h}, T={run.T}")

        trajectories = {mode: self.integrate_mode(system, mu, run, mode) for mode in modes}
        main = trajectories[modes[0]]
        summary = main.summary(system.label, run.h, run.T)
        if run.mode == "both":
            reduced = trajectories["reduced"]
            gap = float(np.max(np.abs(shared_coordinates(system, main) - shared_coordinates(system, reduced))))
            summary["mode"] = "both"
            for key in ("max_momentum_drift", "max_energy_drift", "max_dirac_residual"):
                summary[key] = max(summary[key], reduced.summary(system.label, run.h, run.T)[key])
            summary["rank_defects"] = max(summary["rank_defects"], int(np.max(reduced.rank_defect)))
            summary["full_reduced_gap"] = gap
            self.logger.info(f"Full/reduced sup-norm gap in shared coordinates: {gap:.3e}")

        outcome = RunOutcome(summary=summary, trajectories=trajectories)
        if run.out:
            main.write_csv(run.out, natural=True)
            for mode in modes:
                if mode != "full":
                    trajectories[mode].write_csv(sibling_path(run.out, mode))
            self.logger.info(f"Wrote trajectory to {run.out}")
            if run.check_dirac:
                residual = check_trajectory_file(system, mu, run.out)
                outcome.dirac_file_residual = float(np.max(residual))
                outcome.verified = outcome.dirac_file_residual <= DIRAC_FILE_TOL
                level = logging.INFO if outcome.verified else logging.ERROR
                self.logger.log(
                    level, f"Dirac residual re-evaluated from {run.out}: {outcome.dirac_file_residual:.3e}"
                )
        elif run.check_dirac:
            self.logger.warning("--check-dirac needs --out; skipping the file check")
        if run.summary:
            write_summary(run.summary, summary)
            self.logger.info(f"Wrote summary to {run.summary}")
        return outcome
