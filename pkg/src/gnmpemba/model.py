"""Single-particle lattice model: Hamiltonian, spectrum, mean-field field and order parameter.

Sites are 0-based, ``j = 0 .. L-1``, with periodic wrap. Bond ``j`` connects
sites ``j`` and ``j+1 (mod L)`` and carries hopping ``-(J + sigma_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class DimensionError(ValueError):
    """Array shapes inconsistent with the lattice size."""


@dataclass(frozen=True)
class ModelParams:
    """One point in control space.

    Energies are in units of ``J`` (``J = 1`` by convention); ``g`` enters
    only through ``g**2``.
    """

    L: int = 100
    J: float = 1.0
    mu: float = 0.0
    g: float = 1.1
    gamma: float = 0.01
    kBT: float = 0.05

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 4 or self.L % 2:
            raise ValueError(f"L must be an even integer >= 4, got {self.L}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if not self.kBT > 0:
            raise ValueError(f"kBT must be positive, got {self.kBT}")

    def with_point(self, mu: float, g: float) -> "ModelParams":
        """Same bath and lattice, different ``(mu, g)``."""
        return ModelParams(L=self.L, J=self.J, mu=mu, g=g, gamma=self.gamma, kBT=self.kBT)

    @property
    def point(self) -> tuple[float, float]:
        return (self.mu, self.g)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of ``h`` with ``h = u^dagger diag(eps) u``.

    Row ``n`` of ``u`` holds the mode coefficients ``u_{n,j}``, so the
    annihilator of mode ``n`` is ``Gamma_n = sum_j conj(u_{n,j}) c_j``.
    """

    eps: np.ndarray
    u: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.u.conj().T @ (self.eps[:, None] * self.u)

    def occupations(self, kBT: float) -> np.ndarray:
        return fermi(self.eps, kBT)


@dataclass(frozen=True)
class OrderParameterProfile:
    deltaJ: float
    m: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.deltaJ + stagger(len(self.m)) * self.m


def stagger(L: int) -> np.ndarray:
    """The sign pattern ``(-1)**j``."""
    return 1.0 - 2.0 * (np.arange(L) % 2)


def fermi(eps, kBT: float):
    """Fermi function ``1/(1 + exp(eps/kBT))``.

    Evaluated as a logistic sigmoid, which saturates instead of overflowing
    for large ``|eps|/kBT``.
    """
    if not kBT > 0:
        raise ValueError(f"kBT must be positive, got {kBT}")
    return expit(-np.asarray(eps, dtype=float) / kBT)


def _check_field(params: ModelParams, sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (params.L,):
        raise DimensionError(f"sigma has shape {sigma.shape}, expected ({params.L},)")
    if not np.all(np.isfinite(sigma)):
        raise ValueError("sigma contains non-finite entries")
    return sigma


def build_hamiltonian(params: ModelParams, sigma) -> np.ndarray:
    """Real symmetric single-particle Hamiltonian ``h`` for field ``sigma``.

    The c-number ``sum sigma_j**2 / (2 g**2)`` is left out; it never
    affects the dynamics.
    """
    sigma = _check_field(params, sigma)
    L = params.L
    j = np.arange(L)
    h = np.zeros((L, L))
    h[j, j] = -params.mu
    h[j, (j + 1) % L] = -(params.J + sigma)
    h[(j + 1) % L, j] = -(params.J + sigma)
    return h


def diagonalize(h: np.ndarray) -> SpectralDecomposition:
    """Ascending eigenvalues and mode rows of a real symmetric (or Hermitian) ``h``."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"h must be square, got shape {h.shape}")
    if not np.allclose(h, h.conj().T, atol=1e-12, rtol=0):
        raise ValueError("h is not Hermitian")
    try:
        eps, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"eigensolver did not converge: {exc}") from exc
    return SpectralDecomposition(eps=eps, u=vecs.conj().T)


def bond_expectation(theta: np.ndarray) -> np.ndarray:
    """``theta_{j,j+1}`` with periodic wrap."""
    L = theta.shape[0]
    j = np.arange(L)
    return theta[j, (j + 1) % L]


def self_consistent_sigma(theta: np.ndarray, g: float) -> np.ndarray:
    """Mean-field displacement ``sigma_j = g^2 (theta_{j,j+1} + theta_{j+1,j})``."""
    theta = np.asarray(theta)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise DimensionError(f"theta must be square, got shape {theta.shape}")
    return 2.0 * g * g * bond_expectation(theta).real


def decompose_order_parameter(sigma) -> OrderParameterProfile:
    """Split ``sigma_j = deltaJ + (-1)**j m_j`` with ``deltaJ`` the spatial mean."""
    sigma = np.asarray(sigma, dtype=float)
    L = len(sigma)
    if L % 2:
        raise ValueError("staggered order parameter needs an even number of sites")
    deltaJ = float(sigma.mean())
    return OrderParameterProfile(deltaJ=deltaJ, m=stagger(L) * (sigma - deltaJ))
