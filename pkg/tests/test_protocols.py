import numpy as np
import pytest

from gnmpemba.evolution import load_checkpoint, save_checkpoint
from gnmpemba.model import ModelParams, self_consistent_sigma
from gnmpemba.observables import NOT_RELAXED
from gnmpemba.protocols import (
    PhaseLabel,
    StateStore,
    align_theta,
    classify_pair,
    classify_steady_state,
    label_from_sigma,
    pme_verdict,
    quench_config,
    run_pme,
    run_qme,
    run_quench,
    scan_phase_diagram,
    steady_config,
    steady_state,
)

SMALL = ModelParams(L=12, gamma=0.2, kBT=0.05)


def test_label_rule():
    L = 16
    j = np.arange(L)
    assert str(label_from_sigma(np.full(L, 0.3))) == "DP"  # uniform sigma only shifts J
    assert str(label_from_sigma(0.3 + 0.1 * (-1.0) ** j)) == "OP"
    cp = 0.3 + 0.1 * (-1.0) ** j * np.cos(2 * np.pi * 3 * j / L)
    lab = label_from_sigma(cp)
    assert (lab.kind, lab.dominant_nu) == ("CP", 3)
    assert lab.amplitude == pytest.approx(0.05)
    assert str(label_from_sigma(0.3 + 5e-4 * (-1.0) ** j)) == "DP"


def test_label_equality_ignores_amplitude():
    assert PhaseLabel("CP", 4, 0.07).same_phase(PhaseLabel("CP", 4, 0.05))
    assert not PhaseLabel("CP", 4, 0.07).same_phase(PhaseLabel("CP", 5, 0.07))


def test_store_roundtrip(tmp_path):
    store = StateStore(tmp_path)
    p = SMALL.with_point(0.0, 1.1)
    cfg = steady_config()
    assert store.get(p, 0, "dynamics", cfg) is None
    res = steady_state(p, 0, store=store)
    assert len(list(tmp_path.glob("*.gnth"))) == 1
    hit = store.get(p, 0, "dynamics", cfg)
    np.testing.assert_array_equal(hit.theta, res.theta)
    assert hit.converged == res.converged and hit.effort == res.effort
    # a different seed or config is a different entry
    assert store.get(p, 1, "dynamics", cfg) is None
    assert store.get(p, 0, "dynamics", steady_config(dt=0.025)) is None


def test_weak_coupling_is_disordered():
    lab = classify_steady_state(SMALL.with_point(1.0, 0.2), seeds=(0, 1))
    assert lab.kind == "DP" and not lab.frustrated


def test_classify_is_deterministic(tmp_path):
    p = SMALL.with_point(0.0, 1.3)
    a = classify_steady_state(p, seeds=(0, 1))
    b = classify_steady_state(p, seeds=(0, 1), store=StateStore(tmp_path))
    assert a == b
    assert a.kind == "OP"


def test_scan_zero_coupling_row(tmp_path):
    pm = scan_phase_diagram([0.0, 0.5], [0.0, 1.3], SMALL, seeds=(0,), workers=1, store=StateStore(tmp_path))
    assert [str(x) for x in pm.labels[0]] == ["DP", "DP"]
    assert pm.label_at(0.0, 1.3).kind == "OP"
    assert not pm.failures
    kinds = {(a, b) for _, _, a, b in pm.boundary_points()}
    assert ("DP", "OP") in kinds or ("OP", "DP") in kinds


def test_scan_rejects_empty_grid():
    with pytest.raises(ValueError):
        scan_phase_diagram([], [1.0], SMALL)


def test_align_theta_recovers_translation():
    p = SMALL.with_point(0.5, 1.3)
    theta = steady_state(p, 0).theta
    moved = np.roll(theta, 5, axis=(0, 1))
    al = align_theta(theta, self_consistent_sigma(moved, p.g), p.g)
    np.testing.assert_allclose(self_consistent_sigma(al, p.g), self_consistent_sigma(moved, p.g), atol=1e-12)


def test_classify_pair_cases():
    t = np.arange(5.0)
    far = np.array([1.0, 0.8, 0.6, 0.4, 0.2])
    assert classify_pair(t, far - 0.1, far, 4.0)["kind"] == "none"
    assert classify_pair(t, far + 0.1, far, 4.0)["kind"] == "type-I"
    close = np.array([0.9, 0.7, 0.65, 0.5, 0.3])  # starts lower, ends higher
    out = classify_pair(t, close, far, 4.0)
    assert out["kind"] == "type-II" and out["crossings"] == [2.0]


def test_pme_verdict_and_degenerate_case():
    assert pme_verdict(100.0, 30.0, 50.0)
    assert not pme_verdict(100.0, 60.0, 50.0)
    assert not pme_verdict(NOT_RELAXED, NOT_RELAXED, 10.0)
    out = run_pme((0.5, 1.1), (0.8, 1.1), (0.5, 1.1), SMALL, t_switch=10.0)
    assert out.t_SF == 0.0 and not out.pme_holds
    with pytest.raises(ValueError):
        run_pme((0.0, 1.1), (0.5, 1.1), (0.5, 0.9), SMALL, switch_policy="never")
    with pytest.raises(ValueError):
        run_pme((0.0, 1.1), (0.5, 1.1), (0.5, 0.9), SMALL)


def test_quench_smoke(tmp_path):
    store = StateStore(tmp_path)
    p_in, p_eq = SMALL.with_point(0.0, 1.3), SMALL.with_point(1.0, 0.2)
    q = run_quench(p_in, p_eq, quench_config(60.0), store=store)
    assert q.M[0] == pytest.approx(1.0)
    assert q.M[-1] < 1e-2  # relaxes into the disordered phase
    assert np.all((q.F_bw >= 0) & (q.F_bw <= 1 + 1e-9))
    assert q.F_bw[-1] > q.F_bw[0]
    assert not q.dpt.has_dpt


def test_pme_smoke_and_leg_restart(tmp_path):
    store = StateStore(tmp_path)
    kw = dict(horizon=60.0, config=quench_config(60.0), store=store, keep_records=True)
    out = run_pme((0.0, 1.3), (1.0, 0.2), (0.5, 0.9), SMALL, t_switch=5.0, **kw)
    assert out.leg2.times[0] == pytest.approx(5.0)
    assert out.direct.M[0] == pytest.approx(1.0)
    assert np.all(np.diff(out.direct.envelope) <= 0)
    assert out.pme_holds == pme_verdict(out.t_SF, out.t_SI, out.t_IF)
    # the switch state survives a checkpoint round trip bit for bit
    theta_I = out.leg1.record.checkpoint(5.0)
    path = save_checkpoint(tmp_path / "leg.gnth", theta_I, 5.0)
    back, t = load_checkpoint(path)
    np.testing.assert_array_equal(back, theta_I)
    assert t == 5.0
    again = run_pme((0.0, 1.3), (1.0, 0.2), (0.5, 0.9), SMALL, t_switch=5.0, **kw)
    np.testing.assert_array_equal(again.leg2.M, out.leg2.M)


def test_qme_identical_copies_never_cross(tmp_path):
    out = run_qme([(0.0, 1.3), (0.0, 1.3)], (0.5, 0.9), SMALL, horizon=40.0, store=StateStore(tmp_path))
    np.testing.assert_array_equal(out.copies[0].Mhat, out.copies[1].Mhat)
    assert out.classification == "none" and out.pairs == []
    with pytest.raises(ValueError):
        run_qme([(0.0, 1.3)], (0.5, 0.9), SMALL)
