"""Diagnostics of order-parameter and correlation-matrix trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: returned by :func:`relaxation_time` when the threshold is never reached
NOT_RELAXED = float("inf")


@dataclass(frozen=True)
class HarmonicSpectrum:
    nu: np.ndarray
    mhat: np.ndarray

    def at(self, nu: int) -> complex:
        return self.mhat[np.searchsorted(self.nu, nu)]

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.mhat)


def harmonics(m) -> HarmonicSpectrum:
    """``mhat(nu) = (1/L) sum_j exp(-2 pi i nu j / L) m_j`` for ``nu = -L/2 .. L/2-1``.

    Sites run from ``j = 0``; a shifted origin only rotates phases.
    """
    m = np.asarray(m)
    L = m.shape[-1]
    mhat = np.fft.fftshift(np.fft.fft(m, axis=-1), axes=-1) / L
    return HarmonicSpectrum(nu=np.arange(-L // 2, L // 2), mhat=mhat)


def dominant_harmonic(mhat, nu=None) -> tuple[int, float]:
    """The ``nu >= 0`` with the largest pair weight ``|mhat(nu)| + |mhat(-nu)|``.

    Returns ``(nu, amplitude)`` with amplitude the larger modulus of the pair.
    Ties go to the smaller ``nu``.
    """
    mhat = np.asarray(mhat)
    L = mhat.shape[-1]
    if nu is None:
        nu = np.arange(-L // 2, L // 2)
    a = np.abs(mhat)
    idx = {int(n): i for i, n in enumerate(nu)}
    best, best_w, best_amp = 0, -1.0, 0.0
    for n in range(0, L // 2 + 1):
        ip, im = idx.get(n), idx.get(-n)
        pair = [a[i] for i in {ip, im} if i is not None]
        if not pair:
            continue
        w = sum(pair)
        if w > best_w + 1e-15:
            best, best_w, best_amp = n, w, max(pair)
    return best, float(best_amp)


def lattice_images(m_profile) -> np.ndarray:
    """All ``2L`` images of a staggered profile under lattice translations and reflection.

    A shift of the displacement field by ``s`` sites maps ``m_j -> (-1)^s m_{j-s}``;
    the bond reflection ``sigma_j -> sigma_{-j-1}`` maps ``m_j -> -m_{-j-1}``.
    """
    m = np.asarray(m_profile, dtype=float)
    L = len(m)
    reflected = -m[(-np.arange(L) - 1) % L]
    out = []
    for base in (m, reflected):
        for s in range(L):
            out.append((-1) ** s * np.roll(base, s))
    return np.array(out)


def sliding_distance(mhat_t, mhat_eq, oversample: int = 8, newton_steps: int = 4) -> np.ndarray:
    """Distance from each spectrum in ``mhat_t`` to the nearest slid copy of ``mhat_eq``.

    Copies are ``+-exp(-i nu phi) mhat_eq`` and the same built from
    ``conj(mhat_eq)`` (the reflected profile), for continuous ``phi``.
    This contains all ``2L`` lattice images and also the continuous phase
    of a modulated state. The overlap ``Re sum conj(x) b exp(-i nu phi)``
    is maximised on an FFT grid of ``oversample * L`` phases, then polished
    with Newton steps.
    """
    x = np.atleast_2d(np.asarray(mhat_t, dtype=complex))
    b = np.asarray(mhat_eq, dtype=complex)
    L = b.size
    nu = np.arange(-L // 2, L // 2)
    N = oversample * L
    base = np.sum(np.abs(x) ** 2, axis=1) + np.sum(np.abs(b) ** 2)
    best = np.full(x.shape[0], -np.inf)
    for target in (b, b.conj()):
        c = x.conj() * target  # (n, L)
        grid = np.zeros((x.shape[0], N), dtype=complex)
        grid[:, nu % N] = c
        g = np.fft.fft(grid, axis=1)  # sum_nu c_nu exp(-2 pi i nu k / N)
        for sign in (1.0, -1.0):
            vals = sign * g.real
            k = np.argmax(vals, axis=1)
            phi = 2 * np.pi * k / N
            for _ in range(newton_steps):
                e = np.exp(-1j * np.outer(phi, nu))
                d1 = sign * np.real(np.sum(c * (-1j * nu) * e, axis=1))
                d2 = sign * np.real(np.sum(c * (-(nu**2)) * e, axis=1))
                step = np.where(d2 < 0, -d1 / np.where(d2 < 0, d2, 1.0), 0.0)
                phi = phi + np.clip(step, -2 * np.pi / N, 2 * np.pi / N)
            polished = sign * np.real(np.sum(c * np.exp(-1j * np.outer(phi, nu)), axis=1))
            best = np.maximum(best, np.maximum(vals[np.arange(len(k)), k], polished))
    return np.sqrt(np.maximum(base - 2 * best, 0.0))


def order_distance(mhat_t, mhat_eq, mhat_0=None, normalized: bool = True, align_images=None, slide: bool = False):
    """Order-parameter distance ``sqrt(sum_nu |mhat(nu,t) - mhat_eq(nu)|^2)``.

    ``mhat_t`` may be one spectrum or a stack ``(n_times, L)``. With
    ``normalized`` the result is divided by the same quantity for
    ``mhat_0``. ``align_images`` (spectra of the lattice images of the
    target, see :func:`lattice_images`) replaces the single target by the
    nearest image at every time; ``slide`` goes further and minimises over
    continuous phase shifts of the target (:func:`sliding_distance`).
    """
    mt = np.atleast_2d(np.asarray(mhat_t))
    single = np.asarray(mhat_t).ndim == 1

    def dist(x):
        x = np.atleast_2d(x)
        if slide:
            return sliding_distance(x, mhat_eq)
        if align_images is None:
            return np.sqrt(np.sum(np.abs(x - np.asarray(mhat_eq)) ** 2, axis=-1))
        imgs = np.asarray(align_images)
        d2 = np.sum(np.abs(x[:, None, :] - imgs[None, :, :]) ** 2, axis=-1)
        return np.sqrt(d2.min(axis=1))

    d = dist(mt)
    if normalized:
        if mhat_0 is None:
            raise ValueError("normalized distance needs the t=0 spectrum")
        d0 = float(dist(np.asarray(mhat_0))[0])
        if d0 == 0.0:
            raise ValueError("initial spectrum equals the target; normalized distance undefined")
        d = d / d0
    return float(d[0]) if single else d


def euclidean_param_distance(p_in, p_eq) -> float:
    p_in = np.asarray(p_in, dtype=float)
    p_eq = np.asarray(p_eq, dtype=float)
    if p_in.shape != p_eq.shape:
        raise ValueError("parameter tuples differ in length")
    return float(np.sqrt(np.sum(np.abs(p_in - p_eq) ** 2)))


def fidelity(theta_t: np.ndarray, theta_ref: np.ndarray, *, tol: float = 1e-8) -> float:
    """Gaussian-state overlap ``Tr[rho rho_ref] = det(1 - theta - theta_ref + 2 theta theta_ref)``."""
    theta_t = np.asarray(theta_t)
    theta_ref = np.asarray(theta_ref)
    if theta_t.shape != theta_ref.shape:
        raise ValueError("correlation matrices differ in shape")
    eye = np.eye(theta_t.shape[0])
    val = np.linalg.det(eye - theta_t - theta_ref + 2.0 * theta_t @ theta_ref)
    if abs(np.imag(val)) > tol:
        raise ValueError(f"fidelity has imaginary part {np.imag(val):.3e}")
    re = float(np.real(val))
    if re < -tol or re > 1 + tol:
        raise ValueError(f"fidelity {re:.3e} outside [0, 1]")
    return min(max(re, 0.0), 1.0)


def trace_distance_corr(theta1: np.ndarray, theta2: np.ndarray) -> float:
    """``(1/2) Tr |theta1 - theta2|``."""
    diff = np.asarray(theta1) - np.asarray(theta2)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def upper_envelope(values) -> np.ndarray:
    """``env[i] = max(values[i:])``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty series")
    return np.maximum.accumulate(v[::-1])[::-1]


def relaxation_time(times, envelope, threshold: float, scale: str = "linear") -> float:
    """First time the envelope reaches ``threshold``, interpolated between samples.

    ``scale='log'`` interpolates ``log(envelope)`` linearly instead. Returns
    :data:`NOT_RELAXED` when the threshold is never reached.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    t = np.asarray(times, dtype=float)
    e = np.asarray(envelope, dtype=float)
    below = np.nonzero(e <= threshold)[0]
    if below.size == 0:
        return NOT_RELAXED
    i = int(below[0])
    if i == 0:
        return float(t[0])
    e0, e1 = e[i - 1], e[i]
    if scale == "log" and e1 > 0:
        x0, x1, xt = np.log(e0), np.log(e1), np.log(threshold)
    elif scale in ("linear", "log"):
        x0, x1, xt = e0, e1, threshold
    else:
        raise ValueError(f"unknown scale {scale!r}")
    frac = (x0 - xt) / (x0 - x1) if x0 != x1 else 1.0
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


@dataclass(frozen=True)
class DPTConfig:
    meta_rel: float = 0.25
    revival_rel: float = 0.5
    dp_floor: float = 1e-3
    min_window: float = 20.0
    jump_band: tuple[float, float] = (0.5, 1.5)


@dataclass
class DPTReport:
    has_dpt: bool
    t_star: float | None = None
    window: tuple[float, float] | None = None
    final_nu: int | None = None
    final_amplitude: float = 0.0
    fbw_jump_time: float | None = None
    ambiguous: bool = False

    @property
    def window_duration(self) -> float:
        return 0.0 if self.window is None else self.window[1] - self.window[0]

    def to_dict(self) -> dict:
        return {
            "has_dpt": self.has_dpt,
            "t_star": self.t_star,
            "window": list(self.window) if self.window else None,
            "window_duration": self.window_duration,
            "final_nu": self.final_nu,
            "final_amplitude": self.final_amplitude,
            "fbw_jump_time": self.fbw_jump_time,
            "ambiguous": self.ambiguous,
        }


def _longest_run(mask: np.ndarray) -> tuple[int, int] | None:
    best, start, best_len = None, None, 0
    for i, b in enumerate(np.append(mask, False)):
        if b and start is None:
            start = i
        elif not b and start is not None:
            if i - start > best_len:
                best, best_len = (start, i - 1), i - start
            start = None
    return best


def detect_dpt(times, mhat_series, f_bw_times=None, f_bw=None, config: DPTConfig | None = None) -> DPTReport:
    """Locate a metastable window and the revival time ``t_star``.

    The window is the longest stretch where every harmonic stays below
    ``meta_rel`` times the final largest modulus; ``t_star`` is the first
    later time where the final dominant harmonic reaches ``revival_rel`` of
    its final modulus. A final state below ``dp_floor`` is disordered and
    never counts as a DPT.
    """
    cfg = config or DPTConfig()
    t = np.asarray(times, dtype=float)
    mh = np.abs(np.asarray(mhat_series))
    L = mh.shape[1]
    nu = np.arange(-L // 2, L // 2)
    final = mh[-1]
    if final.max() < cfg.dp_floor:
        return DPTReport(has_dpt=False)

    final_nu, amp = dominant_harmonic(final, nu)
    report = DPTReport(has_dpt=False, final_nu=final_nu, final_amplitude=amp)
    run = _longest_run(mh.max(axis=1) < cfg.meta_rel * final.max())
    if run is None:
        return report
    i0, i1 = run
    if t[i1] - t[i0] < cfg.min_window:
        return report
    cols = [np.searchsorted(nu, final_nu), np.searchsorted(nu, -final_nu)]
    track = mh[:, cols].max(axis=1)
    later = np.nonzero((track > cfg.revival_rel * amp) & (np.arange(len(t)) > i1))[0]
    if later.size == 0:
        return report
    report.has_dpt = True
    report.window = (float(t[i0]), float(t[i1]))
    report.t_star = float(t[later[0]])

    if f_bw is not None and len(f_bw) > 1:
        ft = np.asarray(f_bw_times if f_bw_times is not None else t, dtype=float)
        jumps = np.diff(np.asarray(f_bw, dtype=float))
        k = int(np.argmax(jumps))
        report.fbw_jump_time = float(0.5 * (ft[k] + ft[k + 1]))
        lo, hi = cfg.jump_band
        report.ambiguous = not (lo * report.t_star <= report.fbw_jump_time <= hi * report.t_star)
    return report
