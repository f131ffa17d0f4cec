"""Parameter sweeps: one simulation per grid value on worker threads."""

import logging
import queue
import threading
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import RunConfig
from .errors import RouthDiracError
from .simulation import SimulationRunner

RUN_FIELDS = ("h", "T", "newton_tol")


def parse_grid(text: str) -> List[float]:
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"Grid '{text}' must look like start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError(f"Grid '{text}' needs a positive count")
        return [float(x) for x in np.linspace(start, stop, count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ValueError(f"Invalid grid '{text}': {e}") from e


def template_path(path: Optional[str], index: int) -> Optional[str]:
    """Fill ``{index}`` in ``path``; without a placeholder the index is appended to the stem."""
    if not path:
        return None
    if "{index}" in path:
        return path.format(index=index)
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{index}{p.suffix}"))


class SweepExecutor:
    """Runs the grid concurrently; each run owns its templated output files."""

    def __init__(self, base: RunConfig, parameter: str, values: Sequence[float], workers: int = 1):
        if not values:
            raise ValueError("Sweep needs at least one grid value")
        if workers < 1:
            raise ValueError(f"Sweep needs at least one worker, got {workers}")
        self.base = base
        self.parameter = parameter
        self.values = list(values)
        self.workers = workers
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.stop_event = threading.Event()
        self.worker_threads: List[threading.Thread] = []
        self.rows: Dict[int, Dict[str, Any]] = {}
        self._lock = threading.Lock()

    def config_for(self, index: int, value: float) -> RunConfig:
        changes: Dict[str, Any] = {
            "out": template_path(self.base.out, index),
            "summary": None,
        }
        if self.parameter in RUN_FIELDS:
            changes[self.parameter] = value
        elif self.parameter == "mu":
            changes["mu"] = [value]
        else:
            params = dict(self.base.params)
            params[self.parameter] = value
            changes["params"] = params
        return replace(self.base, **changes)

    def _run_one(self, runner: SimulationRunner, index: int, value: float) -> Dict[str, Any]:
        row: Dict[str, Any] = {"index": index, "parameter": self.parameter, "value": value}
        try:
            outcome = runner.run(self.config_for(index, value))
            row.update(outcome.summary)
            if not outcome.verified:
                row["error"] = "Dirac residual check failed"
        except (RouthDiracError, ValueError) as e:
            at = f" at t={e.time:.6g}" if getattr(e, "time", None) is not None else ""
            self.logger.error(f"Sweep run {index} ({self.parameter}={value}) failed{at}: {e}")
            row["error"] = f"{e.__class__.__name__}: {e}"
        return row

    def execute(self) -> List[Dict[str, Any]]:
        """Run every grid value; rows come back ordered by index."""
        start = datetime.now(timezone.utc)
        self.logger.info(
            f"Starting sweep over {self.parameter} with {len(self.values)} values on {self.workers} worker(s)"
        )
        pending: "queue.Queue[int]" = queue.Queue()
        for index in range(len(self.values)):
            pending.put(index)

        def worker():
            runner = SimulationRunner()
            while not self.stop_event.is_set():
                try:
                    index = pending.get_nowait()
                except queue.Empty:
                    return
                row = self._run_one(runner, index, self.values[index])
                with self._lock:
                    self.rows[index] = row

        for number in range(min(self.workers, len(self.values))):
            thread = threading.Thread(target=worker, name=f"Sweep-{number + 1}")
            thread.daemon = True
            self.worker_threads.append(thread)
            thread.start()

        try:
            for thread in self.worker_threads:
                thread.join()
        except KeyboardInterrupt:
            self.logger.warning("Sweep interrupted by user")
            self.stop_event.set()
            for thread in self.worker_threads:
                thread.join(timeout=2)

        elapsed = (datetime.now(timezone.utc) - start).total_seconds()
        failed = sum(1 for row in self.rows.values() if "error" in row)
        self.logger.info(f"Sweep finished in {elapsed:.1f}s: {len(self.rows)} run(s), {failed} failed")
        return [self.rows[i] for i in sorted(self.rows)]

    @property
    def success(self) -> bool:
        return len(self.rows) == len(self.values) and all("error" not in row for row in self.rows.values())
