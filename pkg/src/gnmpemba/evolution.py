"""Time evolution of the correlation matrix ``theta_{j,j'} = <c_j^dagger c_j'>``.

The equation of motion is

    d theta/dt = i (h theta - theta h) + D[theta],

with ``h = h(sigma(theta))`` rebuilt from the current state (self-consistent
mean field) and the thermal-bath dissipator ``D`` written either as the
explicit double sum over modes and sites or in the closed form
``-gamma (theta - theta_th(h))``. Integration is classical fixed-step RK4.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .initstate import thermal_theta_at_fixed_h
from .model import (
    DimensionError,
    ModelParams,
    SpectralDecomposition,
    build_hamiltonian,
    decompose_order_parameter,
    diagonalize,
    fermi,
    self_consistent_sigma,
)

log = logging.getLogger(__name__)

REDIAG_MODES = ("per-stage", "per-step")
DISSIPATOR_MODES = ("matrix", "explicit-sum")


class InvariantViolation(RuntimeError):
    """The correlation matrix left its physical domain."""


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 0.05
    t_max: float = 1000.0
    snapshot_stride: int = 20
    steady_tol: float = 1e-8
    steady_window: float = 10.0
    stop_at_steady: bool = False
    rediag_mode: str = "per-stage"
    dissipator_mode: str = "matrix"
    check_every: int = 100
    bound_tol: float = 1e-6
    theta_stride: int = 0  # keep full theta every n steps; 0 disables

    def __post_init__(self):
        if not 0 < self.dt <= 0.1:
            raise ValueError(f"dt must lie in (0, 0.1], got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.rediag_mode not in REDIAG_MODES:
            raise ValueError(f"rediag_mode must be one of {REDIAG_MODES}")
        if self.dissipator_mode not in DISSIPATOR_MODES:
            raise ValueError(f"dissipator_mode must be one of {DISSIPATOR_MODES}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def replace(self, **kw) -> "EvolutionConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class Observers:
    """What to sample besides sigma and the harmonic spectrum.

    ``theta_in`` enables the forward fidelity and the trace distance to the
    initial state, ``theta_eq`` the backward fidelity.
    """

    theta_in: np.ndarray | None = None
    theta_eq: np.ndarray | None = None
    trace_distance: bool = True


@dataclass
class TrajectoryRecord:
    params: ModelParams
    times: np.ndarray
    sigma_series: np.ndarray
    mhat_series: np.ndarray  # (n_samples, L), columns ordered as ``nu``
    nu: np.ndarray
    distance_series: dict[str, np.ndarray] = field(default_factory=dict)
    theta_checkpoints: dict[float, np.ndarray] = field(default_factory=dict)
    theta_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta_series: list = field(default_factory=list)
    final_theta: np.ndarray | None = None
    final_time: float = 0.0
    steady: bool = False

    def __len__(self):
        return len(self.times)

    @property
    def deltaJ_series(self) -> np.ndarray:
        return self.sigma_series.mean(axis=1) if len(self) else np.zeros(0)

    def harmonic_series(self, nu_max: int = 10) -> tuple[np.ndarray, np.ndarray]:
        sel = np.abs(self.nu) <= nu_max
        return self.nu[sel], self.mhat_series[:, sel]

    def checkpoint(self, t: float) -> np.ndarray:
        for key, theta in self.theta_checkpoints.items():
            if abs(key - t) < 1e-9:
                return theta
        raise KeyError(f"no checkpoint at t={t}")


# --------------------------------------------------------------------------
# right-hand side


def coherent_term(theta: np.ndarray, sigma: np.ndarray, J: float) -> np.ndarray:
    """Four-term nearest-neighbour form of ``i (h theta - theta h)``.

    The ``-mu`` diagonal of ``h`` commutes with ``theta`` and drops out.
    """
    t = J + sigma
    t_prev = np.roll(t, 1)  # J + sigma_{j-1}
    h_theta = -(t_prev[:, None] * np.roll(theta, 1, axis=0)) - t[:, None] * np.roll(theta, -1, axis=0)
    theta_h = -(np.roll(theta, 1, axis=1) * t_prev[None, :]) - np.roll(theta, -1, axis=1) * t[None, :]
    return 1j * (h_theta - theta_h)


def _coherent_term_hermitian(theta: np.ndarray, sigma: np.ndarray, J: float) -> np.ndarray:
    # theta Hermitian, h real symmetric  =>  theta h = (h theta)^dagger
    t = J + sigma
    h_theta = np.roll(theta, 1, axis=0)
    h_theta *= np.roll(t, 1)[:, None]
    h_theta += t[:, None] * np.roll(theta, -1, axis=0)
    return 1j * (h_theta.conj().T - h_theta)


def coherent_term_dense(theta: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``i (h^T theta - theta h^T)`` with a dense ``h``."""
    ht = h.T
    return 1j * (ht @ theta - theta @ ht)


def dissipator_matrix(theta: np.ndarray, spectral: SpectralDecomposition, gamma: float, kBT: float) -> np.ndarray:
    return -gamma * (theta - thermal_theta_at_fixed_h(spectral, kBT))


def dissipator_explicit_sum(theta: np.ndarray, spectral: SpectralDecomposition, gamma: float, kBT: float) -> np.ndarray:
    """Double sum over modes ``e`` and sites ``r``, term by term."""
    u = spectral.u
    uc = u.conj()
    f = fermi(spectral.eps, kBT)
    one_f = 1.0 - f
    compl = np.eye(theta.shape[0]) - theta
    es = dict(optimize=True)
    # -(1-f) u_{e,r} u*_{e,j} theta_{r,j'}
    t1 = np.einsum("e,er,ej,rk->jk", one_f, u, uc, theta, **es)
    # -(1-f) u_{e,j'} u*_{e,r} theta_{j,r}
    t2 = np.einsum("e,ek,er,jr->jk", one_f, u, uc, theta, **es)
    # f u*_{e,r} u_{e,j'} [delta_{r,j} - theta_{j,r}]
    t3 = np.einsum("e,er,ek,jr->jk", f, uc, u, compl, **es)
    # f u*_{e,j} u_{e,r} [delta_{j',r} - theta_{r,j'}]
    t4 = np.einsum("e,ej,er,rk->jk", f, uc, u, compl, **es)
    return 0.5 * gamma * (-t1 - t2 + t3 + t4)


def rhs(
    theta: np.ndarray,
    params: ModelParams,
    *,
    sigma: np.ndarray | None = None,
    spectral: SpectralDecomposition | None = None,
    thermal: np.ndarray | None = None,
    dissipator_mode: str = "matrix",
) -> np.ndarray:
    """``d theta / dt``.

    ``sigma`` freezes the displacement field; by default it is recomputed
    from ``theta``. ``spectral`` reuses a given eigendecomposition for the
    bath instead of diagonalizing ``h(sigma)``, and ``thermal`` a given
    ``theta_th`` (matrix mode only).
    """
    if theta.shape != (params.L, params.L):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({params.L}, {params.L})")
    if sigma is None:
        sigma = self_consistent_sigma(theta, params.g)
    out = _coherent_term_hermitian(theta, sigma, params.J)
    if params.gamma == 0:
        return out
    if thermal is not None and dissipator_mode == "matrix":
        return out - params.gamma * (theta - thermal)
    if spectral is None:
        spectral = diagonalize(build_hamiltonian(params, sigma))
    if dissipator_mode == "matrix":
        out += dissipator_matrix(theta, spectral, params.gamma, params.kBT)
    elif dissipator_mode == "explicit-sum":
        out += dissipator_explicit_sum(theta, spectral, params.gamma, params.kBT)
    else:
        raise ValueError(f"unknown dissipator_mode {dissipator_mode!r}")
    return out


# --------------------------------------------------------------------------
# stepping


def check_bounds(theta: np.ndarray, tol: float = 1e-6) -> None:
    herm = float(np.max(np.abs(theta - theta.conj().T)))
    if herm > 1e-8:
        raise InvariantViolation(f"theta not Hermitian (max deviation {herm:.2e})")
    w = np.linalg.eigvalsh(theta)
    if w[0] < -tol or w[-1] > 1 + tol:
        raise InvariantViolation(
            f"occupations left [0, 1]: min {w[0]:.3e}, max {w[-1]:.3e}; try a smaller dt"
        )


def step(
    theta: np.ndarray,
    params: ModelParams,
    config: EvolutionConfig,
    *,
    sigma_frozen: np.ndarray | None = None,
    spectral: SpectralDecomposition | None = None,
    check: bool = True,
) -> np.ndarray:
    """One RK4 step of size ``config.dt`` followed by re-Hermitization.

    With a frozen field the eigendecomposition is fixed; otherwise it is
    recomputed at every stage (``per-stage``) or once from the step's start
    state (``per-step``). A ``spectral`` passed in is used as is.
    """
    dt = config.dt
    mode = config.dissipator_mode
    if spectral is None and params.gamma > 0:
        if sigma_frozen is not None:
            spectral = diagonalize(build_hamiltonian(params, sigma_frozen))
        elif config.rediag_mode == "per-step":
            spectral = diagonalize(build_hamiltonian(params, self_consistent_sigma(theta, params.g)))

    thermal = None
    if spectral is not None and mode == "matrix":
        thermal = thermal_theta_at_fixed_h(spectral, params.kBT)

    def f(x):
        return rhs(x, params, sigma=sigma_frozen, spectral=spectral, thermal=thermal, dissipator_mode=mode)

    k1 = f(theta)
    k2 = f(theta + 0.5 * dt * k1)
    k3 = f(theta + 0.5 * dt * k2)
    k4 = f(theta + dt * k3)
    new = theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new = 0.5 * (new + new.conj().T)
    if check:
        check_bounds(new, config.bound_tol)
    return new


# --------------------------------------------------------------------------
# trajectories


def harmonics_of_sigma(sigma: np.ndarray) -> np.ndarray:
    from .observables import harmonics

    return harmonics(decompose_order_parameter(sigma).m).mhat


def evolve(
    theta0: np.ndarray,
    params: ModelParams,
    config: EvolutionConfig | None = None,
    observers: Observers | None = None,
    *,
    sigma_frozen: np.ndarray | None = None,
    checkpoint_times=(),
    t0: float = 0.0,
) -> TrajectoryRecord:
    """Integrate from ``theta0`` until ``t0 + t_max`` or a steady state.

    Steady means ``max_j |sigma_j(t) - sigma_j(t - steady_window)| <
    steady_tol``; it only stops the run when ``config.stop_at_steady``. With
    a frozen field, or at ``g = 0``, the bond profile ``2 Re theta_{j,j+1}``
    is monitored instead.
    Checkpoint times are measured from ``t0`` and snapped to the step grid.
    """
    from .observables import fidelity, trace_distance_corr

    config = config or EvolutionConfig()
    observers = observers or Observers()
    L = params.L
    theta = np.array(theta0, dtype=complex)
    if theta.shape != (L, L):
        raise DimensionError(f"theta0 has shape {theta.shape}, expected ({L}, {L})")
    theta = 0.5 * (theta + theta.conj().T)

    dt = config.dt
    n_steps = config.n_steps
    spectral_fixed = None
    if sigma_frozen is not None:
        sigma_frozen = np.asarray(sigma_frozen, dtype=float)
        if params.gamma > 0:
            spectral_fixed = diagonalize(build_hamiltonian(params, sigma_frozen))

    def field_of(th):
        return sigma_frozen if sigma_frozen is not None else self_consistent_sigma(th, params.g)

    def monitored(th):
        # a frozen or identically zero field says nothing; watch the bonds instead
        if sigma_frozen is not None or params.g == 0:
            return self_consistent_sigma(th, 1.0)
        return field_of(th)

    ckpt_steps = {int(round(t / dt)): float(t) for t in checkpoint_times}
    window_steps = max(1, int(round(config.steady_window / dt)))

    times, sigmas, mhats = [], [], []
    dists: dict[str, list] = {}
    if observers.theta_in is not None:
        dists["F_fw"] = []
        if observers.trace_distance:
            dists["D_T"] = []
    if observers.theta_eq is not None:
        dists["F_bw"] = []
    theta_times, theta_series, checkpoints = [], [], {}

    def sample(n, th):
        s = field_of(th)
        times.append(t0 + n * dt)
        sigmas.append(s.copy())
        mhats.append(harmonics_of_sigma(s))
        if observers.theta_in is not None:
            dists["F_fw"].append(fidelity(th, observers.theta_in))
            if observers.trace_distance:
                dists["D_T"].append(trace_distance_corr(th, observers.theta_in))
        if observers.theta_eq is not None:
            dists["F_bw"].append(fidelity(th, observers.theta_eq))

    sigma_prev = monitored(theta)
    steady = False
    n = 0
    sample(0, theta)
    if 0 in ckpt_steps:
        checkpoints[ckpt_steps[0]] = theta.copy()
    if config.theta_stride:
        theta_times.append(t0)
        theta_series.append(theta.copy())

    while n < n_steps:
        check = (n + 1) % config.check_every == 0
        theta = step(theta, params, config, sigma_frozen=sigma_frozen, spectral=spectral_fixed, check=check)
        n += 1
        if n % config.snapshot_stride == 0:
            sample(n, theta)
        if n in ckpt_steps:
            checkpoints[ckpt_steps[n]] = theta.copy()
        if config.theta_stride and n % config.theta_stride == 0:
            theta_times.append(t0 + n * dt)
            theta_series.append(theta.copy())
        if n % window_steps == 0:
            s = monitored(theta)
            moved = float(np.max(np.abs(s - sigma_prev)))
            sigma_prev = s
            steady = moved < config.steady_tol
            if steady and config.stop_at_steady:
                break
        if n % 20000 == 0:
            log.info("t=%.1f at %s", t0 + n * dt, params.point)

    if n % config.snapshot_stride:
        sample(n, theta)
    check_bounds(theta, config.bound_tol)

    return TrajectoryRecord(
        params=params,
        times=np.array(times),
        sigma_series=np.array(sigmas).reshape(len(times), L),
        mhat_series=np.array(mhats).reshape(len(times), L),
        nu=np.arange(-L // 2, L // 2),
        distance_series={k: np.array(v) for k, v in dists.items()},
        theta_checkpoints=checkpoints,
        theta_times=np.array(theta_times),
        theta_series=theta_series,
        final_theta=theta,
        final_time=t0 + n * dt,
        steady=steady,
    )


def oracle_small_L(theta0, sigma_frozen, params: ModelParams, t_grid, **kw) -> np.ndarray:
    """Exact many-body reference for ``theta(t)`` at frozen field; see :mod:`gnmpemba.oracle`."""
    from .oracle import oracle_theta_series

    return oracle_theta_series(theta0, sigma_frozen, params, t_grid, **kw)


# --------------------------------------------------------------------------
# checkpoint files

_MAGIC = b"GNTH"
_VERSION = 1
_HEADER = struct.Struct("<4sIId")


def save_checkpoint(path, theta: np.ndarray, t: float) -> Path:
    """Binary checkpoint: header (magic, version, L, time) then row-major (re, im) float64 pairs."""
    path = Path(path)
    theta = np.asarray(theta, dtype=np.complex128)
    L = theta.shape[0]
    payload = np.ascontiguousarray(theta).view(np.float64).astype("<f8", copy=False)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, L, float(t)))
        fh.write(payload.tobytes())
    tmp.replace(path)
    return path


def load_checkpoint(path) -> tuple[np.ndarray, float]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, L, t = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * L * L:
        raise ValueError(f"{path}: expected {2 * L * L} floats, found {body.size}")
    theta = body.astype(np.float64).view(np.complex128).reshape(L, L).copy()
    return theta, t
