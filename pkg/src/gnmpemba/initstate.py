"""Initial correlation matrices: stirred random half-filled states and thermal steady states."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    ModelParams,
    SpectralDecomposition,
    build_hamiltonian,
    diagonalize,
    fermi,
    self_consistent_sigma,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RandomInitSpec:
    epsilon: float = 0.05
    seed: int = 0
    filling: float = 0.5

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if not 0 < self.filling < 1:
            raise ValueError(f"filling must lie in (0, 1), got {self.filling}")


@dataclass
class SteadyStateResult:
    theta: np.ndarray
    sigma: np.ndarray
    converged: bool
    effort: float
    method: str
    seed: int | None = None
    residual: float = np.nan
    info: dict = field(default_factory=dict)


def _random_hermitian(L: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    x[np.diag_indices(L)] = rng.standard_normal(L)
    a = 0.5 * (x + x.conj().T)
    return a / np.max(np.abs(np.linalg.eigvalsh(a)))


def random_half_filled_theta(L: int, spec: RandomInitSpec | None = None, *, epsilon: float | None = None) -> np.ndarray:
    """Random 0/1 occupation pattern conjugated by ``U = exp(i eps A)``.

    ``epsilon=0`` may be passed as a keyword to get the bare diagonal
    pattern (used in tests); ``RandomInitSpec`` itself forbids it.
    """
    spec = spec or RandomInitSpec()
    n_occ = L * spec.filling
    if abs(n_occ - round(n_occ)) > 1e-12:
        raise ValueError(f"L * filling = {n_occ} is not an integer")
    eps = spec.epsilon if epsilon is None else epsilon
    rng = np.random.default_rng(spec.seed)

    d = np.zeros(L)
    d[: int(round(n_occ))] = 1.0
    d = rng.permutation(d)
    a = _random_hermitian(L, rng)
    if eps == 0:
        return np.diag(d).astype(complex)

    w, v = np.linalg.eigh(a)
    u = (v * np.exp(1j * eps * w)) @ v.conj().T
    theta = u.conj().T @ (d[:, None] * u)
    return 0.5 * (theta + theta.conj().T)


def thermal_theta_at_fixed_h(spectral: SpectralDecomposition, kBT: float) -> np.ndarray:
    """``theta_th = sum_n f(eps_n) conj(u_{n,j}) u_{n,j'}``."""
    u = spectral.u
    f = fermi(spectral.eps, kBT)
    theta = u.conj().T @ (f[:, None] * u)
    if np.iscomplexobj(theta):
        theta = 0.5 * (theta + theta.conj().T)
    return theta


def thermal_theta(params: ModelParams, sigma) -> np.ndarray:
    return thermal_theta_at_fixed_h(diagonalize(build_hamiltonian(params, sigma)), params.kBT)


def fixed_point_steady_state(
    params: ModelParams,
    sigma0=None,
    *,
    mixing: float = 0.3,
    tol: float = 1e-8,
    max_iter: int = 20000,
    seed: int = 0,
) -> SteadyStateResult:
    """Iterate ``theta <- theta_th(h(sigma))``, ``sigma <- (1-a) sigma + a sigma(theta)``."""
    if sigma0 is None:
        rng = np.random.default_rng(seed)
        theta0 = random_half_filled_theta(params.L, RandomInitSpec(seed=seed))
        sigma = self_consistent_sigma(theta0, params.g) + 0.1 * params.g**2 * rng.standard_normal(params.L)
    else:
        sigma = np.array(sigma0, dtype=float)
    diff = np.inf
    for it in range(1, max_iter + 1):
        theta = thermal_theta(params, sigma)
        new = self_consistent_sigma(theta, params.g)
        diff = float(np.max(np.abs(new - sigma)))
        sigma = (1 - mixing) * sigma + mixing * new
        if diff < tol:
            break
    theta = thermal_theta(params, sigma)
    converged = diff < tol
    if not converged:
        log.warning("fixed point not converged at %s after %d iterations (residual %.2e)", params.point, it, diff)
    return SteadyStateResult(
        theta=theta.astype(complex),
        sigma=self_consistent_sigma(theta, params.g),
        converged=converged,
        effort=it,
        method="fixed-point",
        seed=seed,
        residual=diff,
    )


def solve_steady_state(
    params: ModelParams,
    strategy: str = "dynamics",
    seeds: Sequence[int] = (0,),
    *,
    config=None,
    init: RandomInitSpec | None = None,
    **fixed_point_kw,
) -> list[SteadyStateResult]:
    """Steady state at ``params``, one result per seed.

    ``dynamics`` evolves a stirred random half-filled state until the
    displacement field stops moving; ``fixed-point`` iterates the thermal
    self-consistency map directly.
    """
    from .evolution import EvolutionConfig, evolve

    results = []
    for seed in seeds:
        if strategy == "fixed-point":
            results.append(fixed_point_steady_state(params, seed=seed, **fixed_point_kw))
            continue
        if strategy != "dynamics":
            raise ValueError(f"unknown strategy {strategy!r}")
        if params.gamma <= 0:
            raise ValueError("the dynamics strategy needs gamma > 0")
        cfg = config or EvolutionConfig(t_max=20000.0, stop_at_steady=True)
        spec = init or RandomInitSpec()
        spec = RandomInitSpec(epsilon=spec.epsilon, seed=seed, filling=spec.filling)
        theta0 = random_half_filled_theta(params.L, spec)
        rec = evolve(theta0, params, cfg)
        theta = rec.final_theta
        sigma = self_consistent_sigma(theta, params.g)
        residual = float(np.max(np.abs(self_consistent_sigma(thermal_theta(params, sigma), params.g) - sigma)))
        if not rec.steady:
            log.warning("no steady state at %s (seed %d) within t=%g", params.point, seed, rec.final_time)
        results.append(
            SteadyStateResult(
                theta=theta,
                sigma=sigma,
                converged=rec.steady,
                effort=rec.final_time,
                method="dynamics",
                seed=seed,
                residual=residual,
            )
        )
    return results
