import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gnmpemba.model import (
    DimensionError,
    ModelParams,
    build_hamiltonian,
    decompose_order_parameter,
    diagonalize,
    fermi,
    self_consistent_sigma,
    stagger,
)

finite = st.floats(-1.0, 1.0, allow_nan=False)


def test_defaults():
    p = ModelParams()
    assert (p.L, p.J, p.gamma, p.kBT) == (100, 1.0, 0.01, 0.05)
    assert p.with_point(0.8, 1.1).point == (0.8, 1.1)


@pytest.mark.parametrize(
    "kw", [dict(L=5), dict(L=2), dict(J=0.0), dict(gamma=-0.1), dict(g=-1.0), dict(kBT=0.0)]
)
def test_params_rejected(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


# ---- single-particle Hamiltonian


def test_uniform_ring_spectrum():
    p = ModelParams(L=4, mu=0.0)
    eps = diagonalize(build_hamiltonian(p, np.zeros(4))).eps
    np.testing.assert_allclose(eps, [-2.0, 0.0, 0.0, 2.0], atol=1e-12)


def test_uniform_field_renormalizes_hopping():
    p = ModelParams(L=4, mu=0.0)
    eps = diagonalize(build_hamiltonian(p, np.full(4, 0.1))).eps
    np.testing.assert_allclose(eps, [-2.2, 0.0, 0.0, 2.2], atol=1e-12)


@pytest.mark.parametrize("L", [4, 10, 30])
def test_chemical_potential_shifts_spectrum(L):
    e0 = diagonalize(build_hamiltonian(ModelParams(L=L, mu=0.0), np.zeros(L))).eps
    e1 = diagonalize(build_hamiltonian(ModelParams(L=L, mu=0.5), np.zeros(L))).eps
    np.testing.assert_allclose(e1, e0 - 0.5, atol=1e-12)


def test_periodic_dispersion():
    L = 12
    eps = diagonalize(build_hamiltonian(ModelParams(L=L), np.zeros(L))).eps
    expected = np.sort(-2 * np.cos(2 * np.pi * np.arange(L) / L))
    np.testing.assert_allclose(eps, expected, atol=1e-12)


def test_hamiltonian_layout():
    sigma = np.array([0.1, 0.2, 0.3, 0.4])
    h = build_hamiltonian(ModelParams(L=4, mu=0.5), sigma)
    assert h[0, 1] == pytest.approx(-1.1)
    assert h[3, 0] == pytest.approx(-1.4)  # wrap-around bond
    np.testing.assert_allclose(np.diag(h), -0.5)
    assert h[0, 2] == 0


def test_field_shape_checked():
    with pytest.raises(DimensionError):
        build_hamiltonian(ModelParams(L=4), np.zeros(5))
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(L=4), np.array([0, np.nan, 0, 0]))


def test_diagonalize_scalar_matrix():
    spec = diagonalize(-0.3 * np.eye(6))
    np.testing.assert_allclose(spec.eps, -0.3)
    np.testing.assert_allclose(spec.u @ spec.u.conj().T, np.eye(6), atol=1e-12)


def test_diagonalize_rejects_non_hermitian():
    with pytest.raises(ValueError):
        diagonalize(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DimensionError):
        diagonalize(np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(arrays(float, 8, elements=finite), st.floats(-1, 1))
def test_reconstruction(sigma, mu):
    h = build_hamiltonian(ModelParams(L=8, mu=mu), sigma)
    spec = diagonalize(h)
    assert np.max(np.abs(spec.reconstruct() - h)) < 1e-10
    assert np.all(np.diff(spec.eps) >= -1e-14)


# ---- self-consistency map


def test_sigma_of_zero_theta():
    np.testing.assert_array_equal(self_consistent_sigma(np.zeros((4, 4)), 1.1), 0.0)


def test_sigma_vanishes_without_coupling():
    rng = np.random.default_rng(3)
    theta = rng.standard_normal((6, 6))
    np.testing.assert_array_equal(self_consistent_sigma(theta, 0.0), 0.0)


def test_sigma_single_bond():
    theta = np.zeros((4, 4))
    theta[0, 1] = theta[1, 0] = 0.25
    np.testing.assert_allclose(self_consistent_sigma(theta, 1.0), [0.5, 0, 0, 0])


def test_sigma_wrap_bond_and_real_part():
    theta = np.zeros((4, 4), dtype=complex)
    theta[3, 0] = 0.1 + 0.4j
    np.testing.assert_allclose(self_consistent_sigma(theta, 2.0), [0, 0, 0, 0.8])


# ---- order parameter


def test_uniform_field_is_pure_dimerization_shift():
    prof = decompose_order_parameter(np.full(6, 0.3))
    assert prof.deltaJ == pytest.approx(0.3)
    np.testing.assert_allclose(prof.m, 0, atol=1e-15)


def test_staggered_field():
    prof = decompose_order_parameter(0.2 * stagger(8))
    assert prof.deltaJ == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(prof.m, 0.2)


def test_two_level_field():
    prof = decompose_order_parameter([0.4, 0.0, 0.4, 0.0])
    assert prof.deltaJ == pytest.approx(0.2)
    np.testing.assert_allclose(prof.m, 0.2)


def test_odd_ring_rejected():
    with pytest.raises(ValueError):
        decompose_order_parameter(np.zeros(5))


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.sampled_from([4, 6, 10, 16]), elements=finite))
def test_decomposition_roundtrip(sigma):
    prof = decompose_order_parameter(sigma)
    assert np.max(np.abs(prof.reconstruct() - sigma)) < 1e-12


# ---- Fermi function


def test_fermi_values():
    assert fermi(0.0, 0.05) == 0.5
    assert fermi(0.0, 3.0) == 0.5
    assert fermi(0.7, 0.05) + fermi(-0.7, 0.05) == pytest.approx(1.0, abs=1e-15)
    assert fermi(0.05, 0.05) == pytest.approx(0.2689414213699951, rel=1e-14)


def test_fermi_extreme_arguments_stay_finite():
    out = fermi(np.array([-1e4, 1e4]), 1e-3)
    np.testing.assert_array_equal(out, [1.0, 0.0])


def test_fermi_needs_positive_temperature():
    with pytest.raises(ValueError):
        fermi(0.1, 0.0)


@settings(max_examples=50)
@given(st.floats(-50, 50), st.floats(1e-3, 10))
def test_fermi_bounds_and_symmetry(e, T):
    f = fermi(e, T)
    assert 0.0 <= f <= 1.0
    assert f + fermi(-e, T) == pytest.approx(1.0, abs=1e-12)
