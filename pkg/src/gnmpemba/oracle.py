"""Exact many-body Lindblad evolution for small rings at frozen mean field.

States live in the ``2**L`` occupation basis; basis index ``s`` has site
``j`` occupied iff bit ``j`` of ``s`` is set (site 0 least significant), and
``c_j`` carries the Jordan-Wigner string over sites ``k < j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .model import ModelParams, build_hamiltonian, diagonalize, fermi

MAX_SITES = 6


@lru_cache(maxsize=None)
def annihilators(L: int) -> tuple[np.ndarray, ...]:
    """Dense ``c_0 .. c_{L-1}`` on the ``2**L`` Fock space."""
    if L > MAX_SITES:
        raise ValueError(f"many-body oracle limited to L <= {MAX_SITES}, got {L}")
    dim = 1 << L
    ops = []
    for j in range(L):
        c = np.zeros((dim, dim))
        below = (1 << j) - 1
        for s in range(dim):
            if s >> j & 1:
                c[s ^ (1 << j), s] = (-1) ** bin(s & below).count("1")
        c.setflags(write=False)
        ops.append(c)
    return tuple(ops)


def quadratic_operator(h: np.ndarray) -> np.ndarray:
    """``sum_ab h_ab c_a^dagger c_b``."""
    c = annihilators(h.shape[0])
    L = len(c)
    return sum(h[a, b] * (c[a].T @ c[b]) for a in range(L) for b in range(L) if h[a, b] != 0)


def mode_annihilators(u: np.ndarray) -> list[np.ndarray]:
    """``Gamma_n = sum_j conj(u_{n,j}) c_j`` for every mode row of ``u``."""
    c = annihilators(u.shape[1])
    return [sum(np.conj(u[n, j]) * c[j] for j in range(len(c))) for n in range(u.shape[0])]


def _lindblad_term(g: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A X B) = kron(A, B.T) vec(X)
    eye = np.eye(g.shape[0])
    gdg = g.conj().T @ g
    return np.kron(g, g.conj()) - 0.5 * np.kron(gdg, eye) - 0.5 * np.kron(eye, gdg.T)


def build_liouvillian(h: np.ndarray, params: ModelParams) -> np.ndarray:
    """Dense ``4**L`` generator acting on row-major ``vec(rho)``.

    Coherent part ``-i[H, .]`` plus, per mode, ``gamma (1-f) D[Gamma]`` and
    ``gamma f D[Gamma^dagger]``.
    """
    L = h.shape[0]
    if L > MAX_SITES:
        raise ValueError(f"many-body oracle limited to L <= {MAX_SITES}, got {L}")
    H = quadratic_operator(h)
    eye = np.eye(H.shape[0])
    gen = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    if params.gamma > 0:
        spec = diagonalize(h)
        f = fermi(spec.eps, params.kBT)
        for gam_op, fn in zip(mode_annihilators(spec.u), f):
            gen = gen + params.gamma * ((1.0 - fn) * _lindblad_term(gam_op) + fn * _lindblad_term(gam_op.conj().T))
    return gen


def gaussian_density_matrix(theta: np.ndarray) -> np.ndarray:
    """Number-conserving Gaussian state with ``Tr[rho c_j^dagger c_k] = theta_jk``."""
    theta = 0.5 * (theta + theta.conj().T)
    L = theta.shape[0]
    n, v = np.linalg.eigh(theta.T)
    c = annihilators(L)
    dim = 1 << L
    rho = np.eye(dim, dtype=complex)
    for a in range(L):
        b = sum(np.conj(v[k, a]) * c[k] for k in range(L))
        num = b.conj().T @ b
        rho = rho @ (n[a] * num + (1.0 - n[a]) * (np.eye(dim) - num))
    return 0.5 * (rho + rho.conj().T)


def correlation_matrix(rho: np.ndarray) -> np.ndarray:
    c = annihilators(int(np.log2(rho.shape[0])))
    L = len(c)
    theta = np.empty((L, L), dtype=complex)
    for j in range(L):
        for k in range(L):
            theta[j, k] = np.trace(rho @ c[j].T @ c[k])
    return theta


def quartic_moment(rho: np.ndarray, a: int, b: int, c_: int, d: int) -> complex:
    """``<c_a^dagger c_b^dagger c_c c_d>``."""
    c = annihilators(int(np.log2(rho.shape[0])))
    return complex(np.trace(rho @ c[a].T @ c[b].T @ c[c_] @ c[d]))


@dataclass
class ManyBodyRun:
    times: np.ndarray
    thetas: np.ndarray
    fidelities: np.ndarray | None
    traces: np.ndarray


def evolve_many_body(
    rho0: np.ndarray,
    generator: np.ndarray,
    t_grid,
    *,
    rho_ref: np.ndarray | None = None,
    method: str = "expm",
    dt: float = 0.005,
    trace_tol: float = 1e-6,
) -> ManyBodyRun:
    """Propagate ``vec(rho)`` to each time in ``t_grid`` (ascending, starting anywhere >= 0).

    ``method='expm'`` applies exact propagators between grid points;
    ``method='rk4'`` takes fixed RK4 substeps of at most ``dt``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    dim = rho0.shape[0]
    vec = np.asarray(rho0, dtype=complex).reshape(-1).copy()
    thetas, fids, traces = [], [], []
    t_now = 0.0
    cache: dict[float, np.ndarray] = {}
    for t in t_grid:
        span = t - t_now
        if span < -1e-12:
            raise ValueError("t_grid must be ascending and non-negative")
        if span > 0:
            if method == "expm":
                key = round(span, 12)
                if key not in cache:
                    cache[key] = expm(generator * span)
                vec = cache[key] @ vec
            elif method == "rk4":
                n = max(1, int(np.ceil(span / dt - 1e-9)))
                hstep = span / n
                for _ in range(n):
                    k1 = generator @ vec
                    k2 = generator @ (vec + 0.5 * hstep * k1)
                    k3 = generator @ (vec + 0.5 * hstep * k2)
                    k4 = generator @ (vec + hstep * k3)
                    vec = vec + hstep / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                raise ValueError(f"unknown method {method!r}")
        t_now = t
        rho = vec.reshape(dim, dim)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > trace_tol:
            raise RuntimeError(f"trace drifted to {tr:.10f} at t={t}")
        traces.append(tr)
        thetas.append(correlation_matrix(rho))
        if rho_ref is not None:
            fids.append(np.trace(rho @ rho_ref).real)
    return ManyBodyRun(
        times=t_grid,
        thetas=np.array(thetas),
        fidelities=np.array(fids) if rho_ref is not None else None,
        traces=np.array(traces),
    )


def oracle_theta_series(theta0, sigma_frozen, params: ModelParams, t_grid, **kw) -> np.ndarray:
    """``theta(t)`` on ``t_grid`` from the exact many-body Lindblad equation."""
    if params.L > MAX_SITES:
        raise ValueError(f"many-body oracle limited to L <= {MAX_SITES}, got {params.L}")
    h = build_hamiltonian(params, sigma_frozen)
    run = evolve_many_body(gaussian_density_matrix(np.asarray(theta0)), build_liouvillian(h, params), t_grid, **kw)
    return run.thetas
