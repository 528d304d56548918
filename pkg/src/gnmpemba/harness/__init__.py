"""Command line, configuration, output files and parallel sweeps."""

from .sweep import SweepResult, default_workers, point_seed, sweep_executor

__all__ = ["SweepResult", "default_workers", "point_seed", "sweep_executor"]
