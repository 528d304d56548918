"""Experiments: steady-state phase labels, phase-diagram scans, quenches, Pontus-Mpemba and quantum-Mpemba protocols."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .evolution import EvolutionConfig, Observers, TrajectoryRecord, evolve, load_checkpoint, save_checkpoint
from .initstate import SteadyStateResult, solve_steady_state
from .model import ModelParams, decompose_order_parameter, self_consistent_sigma
from .observables import (
    NOT_RELAXED,
    DPTConfig,
    DPTReport,
    detect_dpt,
    dominant_harmonic,
    euclidean_param_distance,
    fidelity,
    harmonics,
    order_distance,
    relaxation_time,
    upper_envelope,
)

log = logging.getLogger(__name__)

DP_THRESHOLD = 1e-3

#: the four marked points (mu, g) of the phase diagram
P1 = (0.0, 1.1)
P2 = (0.5, 1.1)
P3 = (0.8, 1.1)
P4 = (0.5, 0.9)


def steady_config(**kw) -> EvolutionConfig:
    """Defaults for reaching steady states by dynamics."""
    base = dict(t_max=20000.0, stop_at_steady=True, rediag_mode="per-step", snapshot_stride=200)
    base.update(kw)
    return EvolutionConfig(**base)


def quench_config(t_max: float, **kw) -> EvolutionConfig:
    base = dict(t_max=t_max, rediag_mode="per-step", snapshot_stride=20)
    base.update(kw)
    return EvolutionConfig(**base)


# --------------------------------------------------------------------------
# phase labels


@dataclass(frozen=True)
class PhaseLabel:
    kind: str  # "OP" | "CP" | "DP"
    dominant_nu: int | None
    amplitude: float
    frustrated: bool = False

    def __str__(self):
        return f"CP({self.dominant_nu})" if self.kind == "CP" else self.kind

    def same_phase(self, other: "PhaseLabel") -> bool:
        return self.kind == other.kind and self.dominant_nu == other.dominant_nu


def label_from_sigma(sigma, dp_threshold: float = DP_THRESHOLD) -> PhaseLabel:
    spec = harmonics(decompose_order_parameter(sigma).m)
    a = spec.moduli
    if a.max() < dp_threshold:
        return PhaseLabel("DP", None, float(a.max()))
    nu, amp = dominant_harmonic(spec.mhat, spec.nu)
    return PhaseLabel("OP" if nu == 0 else "CP", nu, amp)


def label_from_theta(theta, g: float) -> PhaseLabel:
    return label_from_sigma(self_consistent_sigma(theta, g))


# --------------------------------------------------------------------------
# steady-state store


class StateStore:
    """Directory cache of steady states, one binary checkpoint plus JSON sidecar each."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(params: ModelParams, seed: int, strategy: str, config: EvolutionConfig | None) -> str:
        payload = json.dumps(
            {
                "params": [params.L, params.J, params.mu, params.g, params.gamma, params.kBT],
                "seed": int(seed),
                "strategy": strategy,
                "config": None if config is None else repr(config),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:20]

    def get(self, params, seed, strategy, config) -> SteadyStateResult | None:
        k = self.key(params, seed, strategy, config)
        meta_path = self.root / f"{k}.json"
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text())
        theta, _ = load_checkpoint(self.root / f"{k}.gnth")
        return SteadyStateResult(
            theta=theta,
            sigma=self_consistent_sigma(theta, params.g),
            converged=meta["converged"],
            effort=meta["effort"],
            method=meta["method"],
            seed=meta["seed"],
            residual=meta["residual"],
        )

    def put(self, params, seed, strategy, config, res: SteadyStateResult) -> None:
        k = self.key(params, seed, strategy, config)
        save_checkpoint(self.root / f"{k}.gnth", res.theta, res.effort)
        meta = {
            "params": [params.L, params.J, params.mu, params.g, params.gamma, params.kBT],
            "converged": bool(res.converged),
            "effort": float(res.effort),
            "method": res.method,
            "seed": res.seed,
            "residual": float(res.residual),
        }
        tmp = self.root / f"{k}.json.tmp"
        tmp.write_text(json.dumps(meta, indent=1))
        tmp.replace(self.root / f"{k}.json")


def steady_state(
    params: ModelParams,
    seed: int = 0,
    *,
    strategy: str = "dynamics",
    config: EvolutionConfig | None = None,
    store: StateStore | None = None,
) -> SteadyStateResult:
    """One steady state, served from ``store`` when available."""
    if strategy == "dynamics":
        config = config or steady_config()
    else:
        config = None
    if store is not None:
        hit = store.get(params, seed, strategy, config)
        if hit is not None:
            return hit
    res = solve_steady_state(params, strategy, seeds=[seed], config=config)[0]
    if store is not None:
        store.put(params, seed, strategy, config, res)
    return res


def classify_steady_state(
    params: ModelParams,
    seeds: Sequence[int] = (0, 1),
    *,
    config: EvolutionConfig | None = None,
    store: StateStore | None = None,
    strategy: str = "dynamics",
) -> PhaseLabel:
    """Phase label of the steady state; all seeds must agree.

    On disagreement two more seeds are run and the majority label is
    returned with ``frustrated`` set.
    """
    labels = [label_from_theta(steady_state(params, s, strategy=strategy, config=config, store=store).theta, params.g) for s in seeds]
    if all(lab.same_phase(labels[0]) for lab in labels):
        return labels[0]
    log.warning("seed-dependent steady state at %s: %s", params.point, [str(x) for x in labels])
    extra = max(seeds) + 1
    for s in (extra, extra + 1):
        labels.append(label_from_theta(steady_state(params, s, strategy=strategy, config=config, store=store).theta, params.g))
    counts: dict[str, list[PhaseLabel]] = {}
    for lab in labels:
        counts.setdefault(str(lab), []).append(lab)
    best = max(counts.values(), key=len)[0]
    return PhaseLabel(best.kind, best.dominant_nu, best.amplitude, frustrated=True)


@dataclass
class PhaseMap:
    mus: np.ndarray
    gs: np.ndarray
    labels: list[list[PhaseLabel | None]]
    failures: dict = field(default_factory=dict)

    def label_at(self, mu, g) -> PhaseLabel | None:
        i = int(np.argmin(np.abs(self.gs - g)))
        k = int(np.argmin(np.abs(self.mus - mu)))
        return self.labels[i][k]

    def boundary_points(self) -> list[tuple[float, float, str, str]]:
        """Midpoints between neighbouring grid points whose labels differ."""
        out = []
        for i, g in enumerate(self.gs):
            for k, mu in enumerate(self.mus):
                a = self.labels[i][k]
                for di, dk in ((0, 1), (1, 0)):
                    ii, kk = i + di, k + dk
                    if ii >= len(self.gs) or kk >= len(self.mus):
                        continue
                    b = self.labels[ii][kk]
                    if a is None or b is None or a.kind == b.kind:
                        continue
                    out.append((0.5 * (mu + self.mus[kk]), 0.5 * (g + self.gs[ii]), a.kind, b.kind))
        return out


def _classify_job(point, seed, base=None, seeds=(0, 1), config=None, store_root=None, strategy="dynamics"):
    mu, g = point
    store = StateStore(store_root) if store_root else None
    return classify_steady_state(base.with_point(mu, g), seeds, config=config, store=store, strategy=strategy)


class _Job:
    # picklable partial for process pools
    def __init__(self, fn, **kw):
        self.fn, self.kw = fn, kw

    def __call__(self, point, seed):
        return self.fn(point, seed, **self.kw)


def scan_phase_diagram(
    mus: Sequence[float],
    gs: Sequence[float],
    base: ModelParams,
    *,
    seeds: Sequence[int] = (0, 1),
    workers: int | None = None,
    config: EvolutionConfig | None = None,
    store: StateStore | None = None,
    strategy: str = "dynamics",
) -> PhaseMap:
    from .harness.sweep import sweep_executor

    mus = np.asarray(mus, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if mus.size == 0 or gs.size == 0:
        raise ValueError("empty grid")
    points = [(float(mu), float(g)) for g in gs for mu in mus]
    job = _Job(_classify_job, base=base, seeds=tuple(seeds), config=config,
               store_root=str(store.root) if store else None, strategy=strategy)
    res = sweep_executor(points, job, workers=workers)
    labels = [res.results[i * len(mus):(i + 1) * len(mus)] for i in range(len(gs))]
    return PhaseMap(mus=mus, gs=gs, labels=labels, failures=res.failures)


# --------------------------------------------------------------------------
# quenches


def align_theta(theta_ref: np.ndarray, sigma_target: np.ndarray, g: float) -> np.ndarray:
    """Lattice translation/reflection of ``theta_ref`` whose field best matches ``sigma_target``."""
    L = theta_ref.shape[0]
    refl = (-np.arange(L)) % L
    best, best_d = theta_ref, np.inf
    for base in (theta_ref, theta_ref[np.ix_(refl, refl)]):
        for s in range(L):
            cand = np.roll(base, s, axis=(0, 1))
            d = float(np.max(np.abs(self_consistent_sigma(cand, g) - sigma_target)))
            if d < best_d:
                best, best_d = cand, d
    return best


def target_spectrum(theta_eq: np.ndarray, g: float) -> np.ndarray:
    """Harmonic spectrum of a steady state's order parameter.

    Distances to it are taken with ``slide=True``: a modulated steady state
    is one member of a family related by translations of its modulation,
    and the trajectory may settle on any member.
    """
    return harmonics(decompose_order_parameter(self_consistent_sigma(theta_eq, g)).m).mhat


@dataclass
class QuenchResult:
    p_in: ModelParams
    p_eq: ModelParams
    record: TrajectoryRecord
    dpt: DPTReport
    theta_in: np.ndarray
    theta_eq: np.ndarray
    M: np.ndarray
    Mhat: np.ndarray
    F_bw_times: np.ndarray
    F_bw: np.ndarray

    @property
    def times(self):
        return self.record.times


def run_quench(
    p_in: ModelParams,
    p_eq: ModelParams,
    config: EvolutionConfig | None = None,
    *,
    seed: int = 0,
    store: StateStore | None = None,
    steady_cfg: EvolutionConfig | None = None,
    theta_every: float = 5.0,
    dpt_config: DPTConfig | None = None,
) -> QuenchResult:
    """Thermal state at ``p_in`` evolved with ``p_eq`` switched on at ``t = 0+``.

    The backward fidelity uses the separately computed ``p_eq`` steady
    state, moved by the lattice symmetry that best matches where this
    trajectory ends up.
    """
    config = config or quench_config(2500.0)
    theta_in = steady_state(p_in, seed, config=steady_cfg, store=store).theta
    theta_eq = steady_state(p_eq, seed, config=steady_cfg, store=store).theta
    stride = max(1, int(round(theta_every / config.dt)))
    cfg = config.replace(theta_stride=stride, stop_at_steady=False)
    rec = evolve(theta_in, p_eq, cfg, Observers(theta_in=theta_in))

    theta_eq_al = align_theta(theta_eq, self_consistent_sigma(rec.final_theta, p_eq.g), p_eq.g)
    f_bw = np.array([fidelity(th, theta_eq_al) for th in rec.theta_series])
    rec.theta_series = []  # large; the record keeps the sampled observables only

    mhat_eq = target_spectrum(theta_eq, p_eq.g)
    Mhat = order_distance(rec.mhat_series, mhat_eq, normalized=False, slide=True)
    M = Mhat / Mhat[0] if Mhat[0] > 0 else np.full_like(Mhat, np.nan)
    dpt = detect_dpt(rec.times, rec.mhat_series, rec.theta_times, f_bw, dpt_config)
    return QuenchResult(p_in, p_eq, rec, dpt, theta_in, theta_eq, M, Mhat, rec.theta_times, f_bw)


# --------------------------------------------------------------------------
# Pontus-Mpemba


@dataclass
class Leg:
    times: np.ndarray
    M: np.ndarray
    envelope: np.ndarray
    record: TrajectoryRecord | None = None


@dataclass
class PMEOutcome:
    t_SF: float
    t_SI: float
    t_IF: float
    pme_holds: bool
    threshold: float
    switch_policy: str
    direct: Leg | None = None
    leg1: Leg | None = None
    leg2: Leg | None = None

    @property
    def ratio(self) -> float:
        if self.t_SF in (0.0, NOT_RELAXED):
            return np.nan
        return (self.t_SI + self.t_IF) / self.t_SF

    def summary(self) -> dict:
        return {
            "t_SF": self.t_SF,
            "t_SI": self.t_SI,
            "t_IF": self.t_IF,
            "two_step": self.t_SI + self.t_IF,
            "ratio": self.ratio,
            "pme_holds": self.pme_holds,
            "threshold": self.threshold,
            "switch_policy": self.switch_policy,
        }


def pme_verdict(t_SF: float, t_SI: float, t_IF: float) -> bool:
    two = t_SI + t_IF
    return bool(two < t_SF)


def _plateau_start(times, values, slope_tol: float) -> float:
    env = upper_envelope(values)
    slope = np.abs(np.diff(env) / np.diff(times))
    steep = np.nonzero(slope >= slope_tol)[0]
    if steep.size == 0:
        return float(times[0])
    flat = np.nonzero((slope < slope_tol) & (np.arange(len(slope)) > steep[0]))[0]
    if flat.size == 0:
        return float(times[-1])
    return float(times[flat[0]])


def run_pme(
    S,
    A,
    F,
    base: ModelParams,
    *,
    switch_policy: str = "fixed",
    t_switch: float | None = None,
    threshold: float = 1e-2,
    horizon: float = 3000.0,
    leg1_horizon: float | None = None,
    leg2_horizon: float | None = None,
    checkpoint_every: float = 1.0,
    plateau_slope: float = 1e-5,
    config: EvolutionConfig | None = None,
    seed: int = 0,
    store: StateStore | None = None,
    steady_cfg: EvolutionConfig | None = None,
    keep_records: bool = False,
) -> PMEOutcome:
    """Direct quench S->F against the two-step S->A, then I->F at ``t_SI``.

    Distances are measured to the F steady-state spectrum (nearest slid
    copy) and normalized by the direct leg's starting value; relaxation
    times are read from upper envelopes at ``threshold``.
    """
    pS, pA, pF = base.with_point(*S), base.with_point(*A), base.with_point(*F)
    if switch_policy not in ("fixed", "min-distance", "plateau-start"):
        raise ValueError(f"unknown switch policy {switch_policy!r}")
    if switch_policy == "fixed" and t_switch is None:
        raise ValueError("fixed switch policy needs t_switch")
    if tuple(S) == tuple(F):
        return PMEOutcome(0.0, float(t_switch or 0.0), 0.0, False, threshold, switch_policy)

    config = config or quench_config(horizon)
    theta_S = steady_state(pS, seed, config=steady_cfg, store=store).theta
    theta_F = steady_state(pF, seed, config=steady_cfg, store=store).theta
    mhat_F = target_spectrum(theta_F, pF.g)

    def distance(rec):
        return order_distance(rec.mhat_series, mhat_F, normalized=False, slide=True)

    direct = evolve(theta_S, pF, config.replace(t_max=horizon, stop_at_steady=False))
    d_direct = distance(direct)
    norm = float(d_direct[0])
    if norm == 0:
        raise ValueError("start spectrum coincides with the target")
    M0 = d_direct / norm
    env0 = upper_envelope(M0)
    t_SF = relaxation_time(direct.times, env0, threshold)

    h1 = leg1_horizon or horizon
    if switch_policy == "fixed":
        cfg1 = config.replace(t_max=float(t_switch), stop_at_steady=False)
        leg1 = evolve(theta_S, pA, cfg1, checkpoint_times=[float(t_switch)])
        t_SI = float(t_switch)
        theta_I = leg1.checkpoint(t_SI)
    else:
        stride = max(1, int(round(checkpoint_every / config.dt)))
        cfg1 = config.replace(t_max=h1, stop_at_steady=False, theta_stride=stride)
        leg1 = evolve(theta_S, pA, cfg1)
        d1 = distance(leg1)
        if switch_policy == "min-distance":
            t_pick = float(leg1.times[int(np.argmin(d1))])
        else:
            t_pick = _plateau_start(leg1.times, d1, plateau_slope)
        k = int(np.searchsorted(leg1.theta_times, t_pick + 1e-9)) - 1
        k = max(k, 0)
        t_SI = float(leg1.theta_times[k])
        theta_I = leg1.theta_series[k]
        leg1.theta_series = []
    M1 = distance(leg1) / norm

    h2 = leg2_horizon or horizon
    leg2 = evolve(theta_I, pF, config.replace(t_max=h2, stop_at_steady=False))
    M2 = distance(leg2) / norm
    env2 = upper_envelope(M2)
    t_IF = relaxation_time(leg2.times, env2, threshold)

    return PMEOutcome(
        t_SF=t_SF,
        t_SI=t_SI,
        t_IF=t_IF,
        pme_holds=pme_verdict(t_SF, t_SI, t_IF),
        threshold=threshold,
        switch_policy=switch_policy,
        direct=Leg(direct.times, M0, env0, direct if keep_records else None),
        leg1=Leg(leg1.times, M1, upper_envelope(M1), leg1 if keep_records else None),
        leg2=Leg(leg2.times + t_SI, M2, env2, leg2 if keep_records else None),
    )


# --------------------------------------------------------------------------
# quantum Mpemba


@dataclass
class QMECopy:
    point: tuple[float, float]
    D_E: float
    pre_quench_nu: int | None
    times: np.ndarray
    Mhat: np.ndarray
    envelope: np.ndarray
    tau: float
    taus: dict[float, float] = field(default_factory=dict)


@dataclass
class QMEOutcome:
    copies: list[QMECopy]
    classification: str
    pairs: list[dict]
    partial: bool
    ordering_stable: bool
    threshold: float

    def tau_order(self, threshold: float | None = None) -> list[int]:
        """Copy indices sorted by decreasing relaxation time."""
        th = self.threshold if threshold is None else threshold
        taus = [c.taus.get(th, c.tau) for c in self.copies]
        return sorted(range(len(taus)), key=lambda i: -taus[i])

    def distance_order(self) -> list[int]:
        return sorted(range(len(self.copies)), key=lambda i: self.copies[i].D_E)


def classify_pair(times, env_close, env_far, until: float) -> dict:
    """No QME / type-I / type-II for one (closer, farther) pair of envelopes."""
    sel = times <= until
    diff = env_close[sel] - env_far[sel]
    t = times[sel]
    if diff.size == 0 or np.all(diff <= 0):
        return {"kind": "none", "crossings": []}
    if np.all(diff > 0):
        return {"kind": "type-I", "crossings": []}
    sign = np.sign(diff)
    idx = np.nonzero(sign[1:] != sign[:-1])[0]
    crossings = [float(t[i + 1]) for i in idx if sign[i + 1] != 0 or i + 2 < len(sign)]
    kind = "type-II" if diff[-1] > 0 else "none"
    return {"kind": kind, "crossings": crossings}


def _qme_copy_job(point, seed, base=None, target=None, horizon=None, config=None, store_root=None, steady_cfg=None):
    store = StateStore(store_root) if store_root else None
    p_in = base.with_point(*point)
    p_eq = base.with_point(*target)
    theta_in = steady_state(p_in, 0, config=steady_cfg, store=store).theta
    theta_eq = steady_state(p_eq, 0, config=steady_cfg, store=store).theta
    rec = evolve(theta_in, p_eq, config.replace(t_max=horizon, stop_at_steady=False))
    Mhat = order_distance(rec.mhat_series, target_spectrum(theta_eq, p_eq.g), normalized=False, slide=True)
    pre = label_from_theta(theta_in, p_in.g)
    return rec.times, Mhat, pre.dominant_nu


def run_qme(
    initial_points: Sequence[tuple[float, float]],
    target: tuple[float, float],
    base: ModelParams,
    *,
    threshold: float = 1e-2,
    check_thresholds: Sequence[float] = (3e-3, 1e-2, 3e-2),
    horizon: float = 2000.0,
    config: EvolutionConfig | None = None,
    workers: int | None = 1,
    store: StateStore | None = None,
    steady_cfg: EvolutionConfig | None = None,
) -> QMEOutcome:
    """Quench several thermal copies to one target and compare envelope relaxation."""
    from .harness.sweep import sweep_executor

    if len(initial_points) < 2:
        raise ValueError("need at least two initial points")
    config = config or quench_config(horizon)
    job = _Job(_qme_copy_job, base=base, target=tuple(target), horizon=horizon, config=config,
               store_root=str(store.root) if store else None, steady_cfg=steady_cfg)
    res = sweep_executor([tuple(p) for p in initial_points], job, workers=workers)
    if res.failures:
        raise RuntimeError(f"QME copies failed: {sorted(res.failures)}")

    thresholds = sorted(set(check_thresholds) | {threshold})
    copies = []
    for point, (times, Mhat, nu) in zip(initial_points, res.results):
        env = upper_envelope(Mhat)
        taus = {th: relaxation_time(times, env, th) for th in thresholds}
        copies.append(QMECopy(
            point=tuple(point),
            D_E=euclidean_param_distance(point, target),
            pre_quench_nu=nu,
            times=times,
            Mhat=Mhat,
            envelope=env,
            tau=taus[threshold],
            taus=taus,
        ))
    partial = any(c.tau == NOT_RELAXED for c in copies)

    pairs = []
    for i in range(len(copies)):
        for k in range(len(copies)):
            ci, ck = copies[i], copies[k]
            if not ci.D_E < ck.D_E:
                continue
            until = max(ci.tau, ck.tau)
            if until == NOT_RELAXED:
                until = float(ci.times[-1])
            n = min(len(ci.times), len(ck.times))
            verdict = classify_pair(ci.times[:n], ci.envelope[:n], ck.envelope[:n], until)
            pairs.append({"close": i, "far": k, **verdict})
    kinds = {p["kind"] for p in pairs}
    classification = "type-II" if "type-II" in kinds else "type-I" if "type-I" in kinds else "none"

    def order(th):
        taus = [c.taus[th] for c in copies]
        return sorted(range(len(copies)), key=lambda i: -taus[i])

    stable = len({tuple(order(th)) for th in thresholds}) == 1
    return QMEOutcome(copies, classification, pairs, partial, stable, threshold)
