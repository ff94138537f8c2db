import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from clthermal import general as G
from clthermal import propagators as P
from clthermal.core import GaussianChi, ModelParams
from clthermal.errors import DegenerateShift, InvalidParameters, NonRealResidue, NotApplicable

from conftest import gaussian_states, model_params

coef = st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 0.05)


@st.composite
def admissible(draw):
    """Gaussian-ODE coefficient sets whose drift matrix is invertible, so
    the decoupled L', P' are nonzero and the offset can be shifted away."""
    co = G.LinearPDECoeffs(
        A=draw(st.floats(-1, 1)), B=draw(st.floats(-1, 1)), C=draw(st.floats(-1, 1)),
        D=draw(st.floats(-1, 1)), E=draw(st.floats(-1, 1)),
        F=draw(st.floats(-1, 1)), G=draw(st.floats(-1, 1)), H=draw(st.floats(-1, 1)),
        L=draw(coef), M=draw(coef), N=draw(coef), P=draw(coef),
    )
    assume(abs(co.L * co.P - co.M * co.N) > 1e-2)
    return co


def test_admissibility_classes():
    assert G.admissibility(G.LinearPDECoeffs(L=1)) is G.Admissibility.GAUSSIAN_ODE
    assert G.admissibility(G.LinearPDECoeffs(Q=1)) is G.Admissibility.FOURIER_REDUCIBLE
    assert G.admissibility(G.LinearPDECoeffs(Q=1, F=1)) is G.Admissibility.INADMISSIBLE
    with pytest.raises(InvalidParameters):
        G.build_ode(G.LinearPDECoeffs(S=1.0))


def test_decoupling_matches_symbolic_solution():
    """Solve the M' = N' = 0 conditions of T^-1 J T symbolically."""
    L, M, N, Pc = sp.Rational(3, 10), sp.Rational(7, 5), sp.Rational(-1, 2), sp.Rational(-9, 10)
    a, b = sp.symbols("a b")
    T = sp.Matrix([[1, a], [b, 1]])
    J = sp.Matrix([[L, N], [M, Pc]])
    Jp = sp.simplify(T.inv() * J * T)
    sols = sp.solve([sp.numer(sp.together(Jp[1, 0])), sp.numer(sp.together(Jp[0, 1]))], [a, b], dict=True)
    sols = [s for s in sols if sp.simplify(1 - s[a] * s[b]) != 0]
    dec = G.decouple(G.LinearPDECoeffs(L=float(L), M=float(M), N=float(N), P=float(Pc)))
    got = (complex(dec.a), complex(dec.b))
    assert any(abs(complex(s[a]) - got[0]) < 1e-12 and abs(complex(s[b]) - got[1]) < 1e-12 for s in sols)
    primed = dec.primed
    assert abs(primed.M) < 1e-14 and abs(primed.N) < 1e-14


def _g_of_w(co, f, T, w0=None):
    T = np.asarray(T)
    w0 = np.zeros(2) if w0 is None else np.asarray(w0)

    def g(k, x):
        w1, w2 = k - w0[0], x - w0[1]
        return f(T[0, 0] * w1 + T[0, 1] * w2, T[1, 0] * w1 + T[1, 1] * w2)
    return g


def test_transformed_pde_is_the_chain_rule():
    """(Op f)(T w) equals (Op' g)(w) for g(w) = f(T w), by finite differences."""
    # (L - P)^2 + 4 M N > 0, so the transformation is real
    co = G.LinearPDECoeffs(A=0.2, B=0.3, C=-0.1, D=0.4, E=-0.2, F=-0.3, G=0.1, H=-0.2, L=0.3, M=1.4, N=0.5, P=-0.9)
    f = lambda k, x: np.exp(-0.3 * k * k - 0.1 * k * x - 0.2 * x * x + 0.2 * k - 0.1 * x)
    dec = G.decouple(co)
    assert dec.T.imag.max() == 0
    T = dec.T.real
    w = np.array([[0.3, -0.2], [0.1, 0.5], [-0.4, 0.2]])
    g = _g_of_w(co, f, T)
    lhs = co.apply(f, *(T @ w.T))
    rhs = dec.primed.apply(g, w[:, 0], w[:, 1])
    np.testing.assert_allclose(rhs, lhs, rtol=1e-6, atol=1e-8)
    # the shift: h(s) = g(s - w0) obeys the fully transformed PDE
    h = _g_of_w(co, g, np.eye(2), dec.shift.real)
    s = w + dec.shift.real
    rhs2 = dec.transformed.apply(h, s[:, 0], s[:, 1])
    np.testing.assert_allclose(rhs2, lhs, rtol=1e-6, atol=1e-8)
    assert abs(dec.transformed.D) < 1e-13 and abs(dec.transformed.E) < 1e-13


@given(admissible())
@settings(max_examples=100, deadline=None)
def test_random_decoupling_removes_couplings(co):
    dec = G.decouple(co)
    assert abs(dec.primed.M) < 1e-12 and abs(dec.primed.N) < 1e-12


def test_n_zero_branch_exact():
    co = G.LinearPDECoeffs(L=0.7, M=1.3, N=0.0, P=-0.4)
    dec = G.decouple(co)
    assert dec.a == 0
    assert dec.b == 1.3 / (0.7 - (-0.4))


def test_m_zero_branch_and_not_applicable():
    dec = G.decouple(G.LinearPDECoeffs(L=0.7, M=0.0, N=2.0, P=-0.4))
    assert dec.b == 0 and dec.a == 2.0 / (-0.4 - 0.7)
    with pytest.raises(NotApplicable):
        G.decouple(G.LinearPDECoeffs(L=0.5, M=1.0, N=0.0, P=0.5))


def test_degenerate_shift_only_with_offset():
    # free-particle structure: L' = 0 after decoupling
    G.decouple(G.LinearPDECoeffs(M=1.0, P=-2.0))
    with pytest.raises(DegenerateShift):
        G.decouple(G.LinearPDECoeffs(M=1.0, P=-2.0, D=0.3))


@given(gaussian_states(), model_params(), st.floats(0.0, 4.0))
@settings(max_examples=30, deadline=None)
def test_caldeira_leggett_specialisation(chi0, p, gt):
    t = gt / p.gamma
    ref = P.evolve_gaussian(chi0, p, t).as_array()
    for method in ("expm", "rk"):
        got = G.solve_caldeira_leggett(chi0, p, t, method).as_array()
        np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-9 * np.max(np.abs(ref)))


def test_complex_coefficients_and_nonreal_residue():
    chi0 = GaussianChi.from_moments(0.5, 0.2, 1.0, 1.0)
    # imaginary B, D, E keep the coefficients real
    co = G.LinearPDECoeffs(B=0.3j, D=0.2j, E=-0.1j, M=1.0, P=-0.5, H=-0.2)
    sys = G.build_ode(co)
    assert sys.is_real  # the i's cancel
    out = G.solve_coefficients(sys, chi0, 1.0)
    assert np.all(np.isfinite(out.as_array()))
    assert sys.residual(lambda t: G.solve_coefficients(sys, chi0, t).as_array(), 0.5) < 1e-6
    with pytest.raises(NonRealResidue):
        G.solve_coefficients(G.build_ode(co.replace(B=0.3)), chi0, 1.0)
    assert not G.build_ode(co.replace(B=0.3)).is_real


def test_ode_residual_small_for_real_system():
    p = ModelParams.natural(gamma=0.5, omega=1.5, temperature=1.0)
    sys = G.build_ode(G.caldeira_leggett_coeffs(p))
    chi0 = GaussianChi.from_moments(0.3, -0.2, 0.8, 0.9)
    assert sys.is_real
    assert sys.residual(lambda t: G.solve_coefficients(sys, chi0, t).as_array(), 1.0) < 1e-8
