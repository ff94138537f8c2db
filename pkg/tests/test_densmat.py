import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from clthermal import densmat as D
from clthermal import propagators as P
from clthermal.core import ChiFunction, GaussianChi, ModelParams
from clthermal.errors import QuadratureNonconvergence, WrongPotential

from conftest import gaussian_states


def _psi(q, s, q0, p0, hbar=1.0):
    return (2 * np.pi * s * s) ** -0.25 * np.exp(-((q - q0) ** 2) / (4 * s * s) + 1j * p0 * q / hbar)


def _psi_p(p, s, q0, p0, hbar=1.0):
    """Fourier transform (2 pi hbar)^-1/2 int psi(q) exp(-i p q / hbar) dq."""
    sp = hbar / (2 * s)
    return (2 * np.pi * sp * sp) ** -0.25 * np.exp(-((p - p0) ** 2) / (4 * sp * sp) - 1j * (p - p0) * q0 / hbar)


@pytest.mark.parametrize("hbar", [1.0, 0.3])
def test_pure_state_elements_match_wavefunction(hbar):
    s, q0, p0 = 0.7, 0.4, -0.9
    chi = GaussianChi.wavepacket(s, q0, p0, hbar=hbar)
    for a, b in [(0.0, 0.0), (0.3, -0.5), (1.2, 0.8)]:
        want = _psi(a, s, q0, p0, hbar) * np.conj(_psi(b, s, q0, p0, hbar))
        got = D.element(chi, "position", a, b, hbar=hbar).value
        assert got == pytest.approx(want, rel=1e-12, abs=1e-15)
        want_p = _psi_p(a, s, q0, p0, hbar) * np.conj(_psi_p(b, s, q0, p0, hbar))
        got_p = D.element(chi, "momentum", a, b, hbar=hbar).value
        # momentum eigenstates are fixed up to a global phase convention: compare moduli and the
        # relative phase between elements
        assert abs(got_p) == pytest.approx(abs(want_p), rel=1e-12, abs=1e-15)


def test_cat_state_numeric_matches_wavefunction():
    sep, w, mom = 2.5, 0.5, 0.3
    cat = ChiFunction.cat_state(sep, w, momentum=mom)
    psi = lambda q: _psi(q, w, -sep / 2, -mom) + _psi(q, w, sep / 2, mom)
    norm = integrate.quad(lambda q: abs(psi(q)) ** 2, -10, 10)[0]
    for a, b in [(1.25, 1.25), (1.0, -1.3), (0.0, 0.4)]:
        want = psi(a) * np.conj(psi(b)) / norm
        got = D.element(cat, "position", a, b).value
        assert got == pytest.approx(want, abs=1e-9)


@given(gaussian_states())
@settings(max_examples=20, deadline=None)
def test_analytic_and_numeric_inversion_agree(chi):
    for basis, (a, b) in (("position", (0.3, -0.2)), ("momentum", (-0.4, 0.1))):
        an = D.element(chi, basis, a, b).value
        nu = D.element(chi, basis, a, b, method="numeric").value
        assert nu == pytest.approx(an, abs=1e-10)


@given(gaussian_states())
@settings(max_examples=20, deadline=None)
def test_hermitian_and_unit_trace(chi):
    assert D.element(chi, "position", 0.3, -1.1).value == pytest.approx(np.conj(D.element(chi, "position", -1.1, 0.3).value))
    tr = integrate.quad(lambda q: D.element(chi, "position", q, q).value.real, -np.inf, np.inf)[0]
    assert tr == pytest.approx(1.0, abs=1e-8)


def test_quadrature_failure_for_nondecaying_integrand():
    flat = ChiFunction(lambda k, x: np.ones(np.broadcast(k, x).shape, dtype=complex))
    with pytest.raises(QuadratureNonconvergence):
        D.element(flat, "position", 0.0, 0.0, quad_spec=D.QuadratureSpec(max_doublings=3))


def test_thermal_ho_normalised_and_high_t_limit():
    p = ModelParams.natural(omega=0.7, temperature=0.9)
    tr = integrate.quad(lambda q: D.thermal_ho(q, q, p), -np.inf, np.inf)[0]
    assert tr == pytest.approx(1.0, rel=1e-10)
    hot = p.replace(temperature=200.0)
    L = hot.thermal_length
    for q1, q2 in [(0.0, 0.0), (L, 0.9 * L), (-2 * L, -2 * L)]:
        assert D.thermal_ho_highT(q1, q2, hot) == pytest.approx(D.thermal_ho(q1, q2, hot), rel=1e-5)


def test_thermal_free_maxwell_boltzmann():
    p = ModelParams.natural(temperature=2.0, mass=1.5)
    tr = integrate.quad(lambda x: D.thermal_free(x, x, p).real, -np.inf, np.inf)[0]
    assert tr == pytest.approx(1.0, rel=1e-12)
    assert D.thermal_free(0.1, 0.2, p) == 0


@pytest.mark.parametrize("form", ["lindblad", "nonlindblad"])
def test_stationary_chi_gives_long_time_state(form):
    p = ModelParams.natural(gamma=0.3, omega=1.2, temperature=1.4, form=form)
    st_ = P.stationary_chi(p)
    for a, b in [(0.0, 0.0), (0.5, -0.3), (1.1, 0.9)]:
        assert D.element(st_, "position", a, b).value == pytest.approx(D.ho_longtime(a, b, p), rel=1e-12)


def test_alternate_sign_differs_only_at_fourth_order():
    p = ModelParams.natural(gamma=0.5, omega=2.0, temperature=1.0)
    a, b = 0.4, -0.6
    ratio = abs(D.ho_longtime(a, b, p, alternate_sign=True) / D.ho_longtime(a, b, p))
    alpha = p.hbar * p.gamma / (2 * p.kT)
    beta = p.hbar * p.omega / (4 * p.kT)
    S = 1 + alpha**2 + beta**2
    expected = math.exp(-p.mass * p.kT / (2 * p.hbar**2) * 2 * beta**2 * alpha**2 / S * (a - b) ** 2)
    assert ratio == pytest.approx(expected, rel=1e-12)


def test_stationary_general_reduces_to_ho_form():
    p = ModelParams.natural(omega=0.2, temperature=50.0)
    v = lambda q: 0.5 * p.mass * p.omega**2 * q * q
    assert D.stationary_general(1.0, 0.5, p, v) == pytest.approx(D.stationary_general(1.0, 0.5, p))
    assert D.stationary_general(1.0, 0.5, p) == pytest.approx(D.ho_longtime(1.0, 0.5, p.replace(form="nonlindblad")).real)


def test_free_offdiag_long_time_form():
    p = ModelParams.natural(gamma=0.5, temperature=1.0)
    chi0 = GaussianChi.from_moments(0.3, 0.8, 0.7, 0.9, 0.1)
    p1, p2 = 0.2, 0.9
    for t in (20.0, 40.0):
        exact = D.gaussian_log_element(P.evolve_gaussian(chi0, p, t), "momentum", p1, p2)
        approx = D.longtime_offdiag_free_log(p1, p2, t, chi0, p)
        # neglected terms decay like e^{-2 gamma t}
        assert abs(np.exp(exact - approx) - 1) < 10 * math.exp(-2 * p.gamma * t) + 1e-13


def test_tau_offdiag():
    p = ModelParams.natural(gamma=0.1, temperature=1.0)
    assert D.tau_offdiag(0.0, 2.0, p) == pytest.approx(1.0 / ((0.1 / 8 + 1 / 0.2) * 4.0))
    with pytest.raises(ZeroDivisionError):
        D.tau_offdiag(1.0, 1.0, p)


def test_diagonal_correction_leading_term():
    p = ModelParams.natural(gamma=0.4, temperature=1.0)
    chi0 = GaussianChi.from_moments(0.0, 0.7, 1.0, 0.6)
    pv = 0.8
    for t in (10.0, 15.0):
        exact = D.element(P.evolve_gaussian(chi0, p, t), "momentum", pv, pv).value
        lead = D.diag_correction_free(pv, t, chi0, p)
        # remainder is O(e^{-4 gamma t})
        assert abs(exact / lead - 1) < 10 * math.exp(-4 * p.gamma * t)
        dev = D.diag_deviation_free(pv, t, chi0, p)
        assert dev == pytest.approx((exact / D.thermal_free(pv, pv, p) - 1).real, rel=1e-6)


def test_ho_residual_matches_direct_difference():
    p = ModelParams.natural(gamma=0.3, omega=1.0, temperature=1.0)
    chi0 = GaussianChi.from_moments(0.5, -0.4, 0.6, 0.8)
    t = 3.0
    direct = D.element(P.evolve_gaussian(chi0, p, t), "position", 0.3, 0.1).value / D.ho_longtime(0.3, 0.1, p) - 1
    assert D.ho_residual(0.3, 0.1, t, chi0, p) == pytest.approx(direct, rel=1e-9, abs=1e-14)


def test_wrong_potential():
    with pytest.raises(WrongPotential):
        D.thermal_ho(0.0, 0.0, ModelParams())
    with pytest.raises(WrongPotential):
        D.ho_longtime(0.0, 0.0, ModelParams())


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_reference_kind_dispatch(a, b):
    p = ModelParams.natural(omega=0.5, temperature=2.0)
    ref = D.ThermalReference(D.ReferenceKind.HO_POSITION, p)
    assert ref.basis is D.Basis.POSITION
    assert ref.element(a, b) == D.thermal_ho(a, b, p)
