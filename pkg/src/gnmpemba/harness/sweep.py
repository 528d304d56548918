"""Run independent jobs over a list of points on a process pool."""

from __future__ import annotations

import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

WORKERS_ENV = "GNMPEMBA_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def point_seed(master_seed: int, index: int) -> int:
    """Deterministic 63-bit seed for point ``index``."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 32 | int(state[1])) & (2**63 - 1))


@dataclass
class SweepResult:
    results: list[Any]
    failures: dict[int, str] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _call(job, point, seed):
    try:
        return True, job(point, seed)
    except Exception as exc:  # isolated per point
        return False, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"


def sweep_executor(
    points: Sequence[Any],
    job: Callable[[Any, int], Any],
    workers: int | None = None,
    master_seed: int = 0,
) -> SweepResult:
    """Apply ``job(point, seed)`` to every point; results keep input order.

    A failing point leaves ``None`` in its slot and an entry in
    ``failures``; the others still run. With ``workers > 1`` the job must
    be picklable.
    """
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError("workers must be >= 1")
    seeds = [point_seed(master_seed, i) for i in range(len(points))]
    if workers == 1 or len(points) <= 1:
        outcomes = [_call(job, p, s) for p, s in zip(points, seeds)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_call, job, p, s) for p, s in zip(points, seeds)]
            outcomes = [f.result() for f in futures]
    res = SweepResult(results=[], seeds=seeds)
    for i, (ok, value) in enumerate(outcomes):
        if ok:
            res.results.append(value)
        else:
            log.error("point %d failed: %s", i, value.splitlines()[0])
            res.results.append(None)
            res.failures[i] = value
    return res
