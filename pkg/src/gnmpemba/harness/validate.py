"""Fast self-checks behind the ``validate`` command.

Each check returns ``(passed, detail)``; they mirror the oracle and
invariant tests but run without pytest.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from ..evolution import (
    EvolutionConfig,
    dissipator_explicit_sum,
    dissipator_matrix,
    evolve,
    load_checkpoint,
    save_checkpoint,
)
from ..initstate import RandomInitSpec, random_half_filled_theta
from ..model import ModelParams, build_hamiltonian, diagonalize
from ..observables import fidelity, harmonics, trace_distance_corr, upper_envelope
from ..oracle import build_liouvillian, evolve_many_body, gaussian_density_matrix


def check_oracle(t_end: float = 50.0, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mu in (0.0, 0.5):
        p = ModelParams(L=4, mu=mu, g=1.0)
        sigma = rng.uniform(-0.2, 0.2, 4)
        theta0 = random_half_filled_theta(4, RandomInitSpec(seed=int(rng.integers(1 << 31)), epsilon=0.3))
        grid = np.arange(0.0, t_end + 1e-9, 5.0)
        cfg = EvolutionConfig(dt=0.005, t_max=t_end, snapshot_stride=1, check_every=10**9)
        rec = evolve(theta0, p, cfg, sigma_frozen=sigma, checkpoint_times=list(grid))
        h = build_hamiltonian(p, sigma)
        ref = evolve_many_body(gaussian_density_matrix(theta0), build_liouvillian(h, p), grid).thetas
        for t, th in zip(grid, ref):
            worst = max(worst, float(np.max(np.abs(rec.checkpoint(float(t)) - th))))
    return worst < 1e-6, f"max |dtheta| = {worst:.2e}"


def check_dissipator(n: int = 100, seed: int = 1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        L = (4, 6, 10)[i % 3]
        p = ModelParams(L=L, mu=rng.uniform(-1, 1), g=1.0)
        sigma = rng.uniform(-0.3, 0.3, L)
        spec = diagonalize(build_hamiltonian(p, sigma))
        theta = random_half_filled_theta(L, RandomInitSpec(seed=int(rng.integers(1 << 31)), epsilon=0.3))
        a = dissipator_matrix(theta, spec, p.gamma, p.kBT)
        b = dissipator_explicit_sum(theta, spec, p.gamma, p.kBT)
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    return worst < 1e-12, f"max relative deviation = {worst:.2e}"


def check_invariants(seed: int = 2):
    rng = np.random.default_rng(seed)
    L = 8
    p = ModelParams(L=L, mu=0.3, g=1.1)
    theta0 = random_half_filled_theta(L, RandomInitSpec(seed=seed, epsilon=0.3))
    rec = evolve(theta0, p, EvolutionConfig(t_max=20.0, check_every=1))
    th = rec.final_theta
    problems = []
    if np.max(np.abs(th - th.conj().T)) > 1e-12:
        problems.append("hermiticity")
    ev = np.linalg.eigvalsh(th)
    if ev.min() < -1e-8 or ev.max() > 1 + 1e-8:
        problems.append("occupation bounds")
    m = rng.standard_normal(L)
    if abs(np.sum(np.abs(harmonics(m).mhat) ** 2) - np.mean(m**2)) > 1e-12:
        problems.append("parseval")
    f = fidelity(th, theta0)
    if not 0 <= f <= 1:
        problems.append("fidelity range")
    if abs(fidelity(th, th) - float(np.prod(ev**2 + (1 - ev) ** 2))) > 1e-10:
        problems.append("purity identity")
    d = trace_distance_corr(th, theta0)
    if d < 0 or trace_distance_corr(th, th) > 1e-12 or abs(d - trace_distance_corr(theta0, th)) > 1e-12:
        problems.append("trace distance axioms")
    env = upper_envelope(rng.standard_normal(50))
    if np.any(np.diff(env) > 0):
        problems.append("envelope monotonicity")
    with tempfile.TemporaryDirectory() as tmp:
        path = save_checkpoint(Path(tmp) / "c.gnth", th, 20.0)
        back, t = load_checkpoint(path)
        if not (np.array_equal(back, th) and t == 20.0):
            problems.append("checkpoint round trip")
    return not problems, "all invariants hold" if not problems else "failed: " + ", ".join(problems)


CHECKS = {
    "oracle equivalence (L=4, t<=50)": check_oracle,
    "dissipator forms (100 instances)": check_dissipator,
    "invariants": check_invariants,
}


def run_all(out=None) -> bool:
    import sys

    out = out or sys.stdout
    ok = True
    for name, fn in CHECKS.items():
        try:
            passed, detail = fn()
        except Exception as exc:  # report and keep going
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:<36} {detail}", file=out)
    return ok
