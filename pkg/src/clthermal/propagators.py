"""Exact time evolution of characteristic functions.

Both potentials reduce to the same structure (method of characteristics):

    chi_t(k, x) = exp(-z^T W(t) z) * chi_0(Phi(t) z),     z = (k, x),

with Phi(t) = exp(A t) the linear pullback of the drift field and
W(t) = int_0^t Phi(s)^T diag(q_k, q_x) Phi(s) ds the accumulated damping.
For the free particle Phi and W are written out explicitly; for the
oscillator they are summed over the two eigen-exponentials of A, or
through a series in mu^2 close to critical damping where the eigenbasis
degenerates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammainc, gammaincc

from .core import ChiFunction, GaussianChi, ModelParams, require_valid
from .errors import DegenerateDamping, InvalidParameters, NonRealResidue, WrongPotential

IMAG_TOL = 1e-10
# |mu| * min(t, 1/gamma) below this switches the oscillator kernel to the mu^2 series
SERIES_THRESHOLD = 0.05


def _check_time(t) -> float:
    t = float(t)
    if not (t >= 0) or not math.isfinite(t):
        raise InvalidParameters(f"time must be finite and >= 0, got {t!r}")
    return t


def _g_free(u: float) -> float:
    """g(u) = int_0^u (1 - e^{-2v})^2 dv = u - (Gamma^2 + 2 Gamma)/4, Gamma = 1 - e^{-2u}."""
    if u < 0.5:
        # sum_{n>=3} (-1)^n (2^{n+2} - 4^n) u^n / (4 n!)
        total, n, fact = 0.0, 3, 6.0
        while n < 60:
            term = (-1) ** n * (2.0 ** (n + 2) - 4.0**n) * u**n / (4.0 * fact)
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
            n += 1
            fact *= n
        return total
    e = math.exp(-2.0 * u)
    return u - (3.0 - 4.0 * e + e * e) / 4.0


# ---------------------------------------------------------------------------
# free particle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeEvolution:
    """Free-particle Green's function data at time ``t``."""

    t: float
    gamma_t: float  # 1 - exp(-2 gamma t)
    decay: float  # exp(-2 gamma t)
    drift: float  # Gamma_t / (2 m gamma)
    a_kk: float
    a_kx: float
    a_xx: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [self.drift, self.decay]])

    @property
    def damping_matrix(self) -> np.ndarray:
        return np.array([[self.a_kk, 0.5 * self.a_kx], [0.5 * self.a_kx, self.a_xx]])

    def pullback(self, k, x):
        return k, x * self.decay + self.drift * k

    def damping(self, k, x):
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.exp(-(self.a_kk * k * k + self.a_kx * k * x + self.a_xx * x * x))


def free_kernel(p: ModelParams, t: float) -> FreeEvolution:
    if not p.is_free:
        raise WrongPotential("free-particle kernel requires omega = 0")
    t = _check_time(t)
    g, m, kT, hb2 = p.gamma, p.mass, p.kT, p.hbar**2
    decay = math.exp(-2.0 * g * t)
    gam = -math.expm1(-2.0 * g * t)
    a_xx = m * kT / (2.0 * hb2) * (-math.expm1(-4.0 * g * t))
    a_kx = kT * gam * gam / (2.0 * hb2 * g)
    a_kk = p.k_damping * t + kT / (2.0 * hb2 * m * g * g) * _g_free(g * t)
    return FreeEvolution(t, gam, decay, gam / (2.0 * m * g), a_kk, a_kx, a_xx)


def evolve_free_gaussian(chi0: GaussianChi, p: ModelParams, t: float) -> GaussianChi:
    """Closed-form c_i(t) for the free particle."""
    if not p.is_free:
        raise WrongPotential("evolve_free_gaussian requires omega = 0")
    require_valid(chi0)
    ev = free_kernel(p, t)
    g, m = p.gamma, p.mass
    c30 = p.mass * p.kT / (2.0 * p.hbar**2)
    s = ev.drift  # Gamma_t / (2 m gamma)
    e = ev.decay
    c1 = chi0.c1 + chi0.c2 * s + chi0.c3 * s * s + ev.a_kk
    c2 = chi0.c2 * e + chi0.c3 * ev.gamma_t * e / (m * g) + ev.a_kx
    c3 = c30 + (chi0.c3 - c30) * e * e
    c4 = chi0.c4 + chi0.c5 * s
    c5 = chi0.c5 * e
    return GaussianChi(c1, c2, c3, c4, c5, chi0.c6)


def evolve_free_pointwise(chi0: Union[ChiFunction, GaussianChi], p: ModelParams, t: float, k, x):
    ev = free_kernel(p, t)
    kk, xx = ev.pullback(np.asarray(k, dtype=float), np.asarray(x, dtype=float))
    return ev.damping(k, x) * chi0(kk, xx)


def evolve_free(chi0: ChiFunction, p: ModelParams, t: float) -> ChiFunction:
    """Evolved characteristic function as a new :class:`ChiFunction`."""
    ev = free_kernel(p, t)
    gauss = evolve_free_gaussian(chi0.gaussian, p, t) if chi0.gaussian is not None else None

    def evaluate(k, x):
        kk, xx = ev.pullback(np.asarray(k, dtype=float), np.asarray(x, dtype=float))
        return ev.damping(k, x) * chi0(kk, xx)

    return ChiFunction(evaluate, gauss, label=f"{chi0.label}@t={ev.t:g}")


# ---------------------------------------------------------------------------
# harmonic oscillator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HOEvolution:
    """Oscillator Green's function data at time ``t``.

    ``matrix`` maps (k, x) to the pulled-back argument of chi_0, ``W`` is the
    symmetric damping matrix and ``W_tail`` = W(inf) - W(t).
    """

    t: float
    mu: complex
    lam: complex  # Lambda_t = 1 - exp(-2 mu t)
    M1: float
    M2: float
    M3: float
    matrix: np.ndarray
    W: np.ndarray
    W_tail: np.ndarray
    method: str

    @property
    def a_kk(self) -> float:
        return float(self.W[0, 0])

    @property
    def a_kx(self) -> float:
        return float(2.0 * self.W[0, 1])

    @property
    def a_xx(self) -> float:
        return float(self.W[1, 1])

    def pullback(self, k, x):
        P = self.matrix
        return P[0, 0] * k + P[0, 1] * x, P[1, 0] * k + P[1, 1] * x

    def damping(self, k, x):
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.exp(-(self.W[0, 0] * k * k + 2.0 * self.W[0, 1] * k * x + self.W[1, 1] * x * x))


def _as_real(value, what: str, scale: float = 1.0):
    arr = np.asarray(value)
    if np.iscomplexobj(arr):
        ref = max(float(np.max(np.abs(arr))), scale, 1e-300)
        resid = float(np.max(np.abs(arr.imag)))
        if resid > IMAG_TOL * ref:
            raise NonRealResidue(f"{what}: imaginary residue {resid:.3e} (scale {ref:.3e})")
        arr = arr.real
    return arr.astype(float)


def _jint(a: complex, t: float) -> complex:
    """int_0^t exp(-a s) ds."""
    at = a * t
    if abs(at) < 1e-8:
        return t * (1.0 - 0.5 * at)
    return -np.expm1(-at) / a


def _eigen_parts(p: ModelParams):
    g, w, m = p.gamma, p.omega, p.mass
    mu = p.mu
    lam_p = -(w * w) / (g + mu)  # = mu - gamma, written without cancellation
    lam_m = -g - mu
    P_plus = np.array([[g + mu, -m * w * w], [1.0 / m, lam_p]], dtype=complex) / (2.0 * mu)
    P_minus = np.array([[lam_p, m * w * w], [-1.0 / m, g + mu]], dtype=complex) / (2.0 * mu)
    return mu, (lam_p, lam_m), (P_plus, P_minus)


def _damping_diag(p: ModelParams) -> np.ndarray:
    return np.diag([p.k_damping, p.x_damping]).astype(complex)


def _eigen_kernel(p: ModelParams, t: float):
    mu, lams, Ps = _eigen_parts(p)
    Q = _damping_diag(p)
    Phi = sum(np.exp(l * t) * P for l, P in zip(lams, Ps))
    W = np.zeros((2, 2), dtype=complex)
    tail = np.zeros((2, 2), dtype=complex)
    for li, Pi in zip(lams, Ps):
        for lj, Pj in zip(lams, Ps):
            a = -(li + lj)
            block = Pi.T @ Q @ Pj
            W += _jint(a, t) * block
            tail += np.exp(-a * t) / a * block
    return Phi, W, tail


def _cs_integrals(p: ModelParams, t: float, upper: bool):
    """int e^{-2 g s} {C^2, C S, S^2} ds over [0, t] (or [t, inf) if ``upper``),
    C = cosh(mu s), S = sinh(mu s)/mu, summed as a series in r = mu^2/gamma^2."""
    g = p.gamma
    r = (g * g - p.omega**2) / (g * g)
    x = 2.0 * g * t
    reg = gammaincc if upper else gammainc
    cc = reg(1.0, x) / (2.0 * g)
    cs = 0.0
    ss = 0.0
    rn = 1.0  # r^n
    for n in range(0, 400):
        t_cs = rn * reg(2 * n + 2, x) / (4.0 * g * g)
        t_ss = rn * reg(2 * n + 3, x) / (4.0 * g**3)
        t_cc = rn * r * reg(2 * n + 3, x) / (4.0 * g)
        cs += t_cs
        ss += t_ss
        cc += t_cc
        if abs(t_cs) <= 1e-17 * abs(cs) and abs(t_ss) <= 1e-17 * abs(ss) and abs(t_cc) <= 1e-17 * abs(cc):
            break
        rn *= r
        if rn == 0.0:
            break
    return cc, cs, ss


def _assemble_w(p: ModelParams, cc, cs, ss) -> np.ndarray:
    g, w, m = p.gamma, p.omega, p.mass
    qk, qx = p.k_damping, p.x_damping
    wkk = qk * (cc + 2 * g * cs + g * g * ss) + qx * ss / (m * m)
    wkx = -qk * m * w * w * (cs + g * ss) + qx / m * (cs - g * ss)
    wxx = qk * m * m * w**4 * ss + qx * (cc - 2 * g * cs + g * g * ss)
    return np.array([[wkk, wkx], [wkx, wxx]])


def _direct_phi(p: ModelParams, t: float) -> np.ndarray:
    """exp(A t) from e^{-g t} cosh(mu t) and e^{-g t} sinh(mu t)/mu."""
    g, w, m = p.gamma, p.omega, p.mass
    m2 = g * g - w * w
    if m2 < 0:
        nu = math.sqrt(-m2)
        eC = math.exp(-g * t) * math.cos(nu * t)
        eS = math.exp(-g * t) * t * float(np.sinc(nu * t / math.pi))
    else:
        mu = math.sqrt(m2)
        lam_p = -(w * w) / (g + mu)
        eC = 0.5 * (math.exp(lam_p * t) + math.exp((-g - mu) * t))
        z = 2.0 * mu * t
        shc = 1.0 if z == 0.0 else -math.expm1(-z) / z
        eS = math.exp(lam_p * t) * t * shc
    return np.array([[eC + g * eS, -m * w * w * eS], [eS / m, eC - g * eS]])


def _series_kernel(p: ModelParams, t: float):
    Phi = _direct_phi(p, t)
    W = _assemble_w(p, *_cs_integrals(p, t, upper=False))
    r = 1.0 - (p.omega / p.gamma) ** 2
    if abs(r) < 0.5:
        tail = _assemble_w(p, *_cs_integrals(p, t, upper=True))
    else:
        # far from critical damping only short times land here; W(t) << W(inf)
        _, _, full = _eigen_kernel(p, 0.0)
        tail = _as_real(full, "stationary damping") - W
    return Phi, W, tail


def ho_kernel(p: ModelParams, t: float) -> HOEvolution:
    """Oscillator Green's function at time ``t`` (omega > 0)."""
    if p.is_free:
        raise WrongPotential("oscillator kernel requires omega > 0")
    t = _check_time(t)
    mu = p.mu
    if abs(mu) * min(t, 1.0 / p.gamma) < SERIES_THRESHOLD:
        Phi, W, tail = _series_kernel(p, t)
        method = "series"
    else:
        Phi, W, tail = _eigen_kernel(p, t)
        method = "eigen"
    Phi = _as_real(Phi, "pullback", 1.0)
    W = _as_real(W, "damping")
    tail = _as_real(tail, "damping tail")
    hb2, kT, m, w, g = p.hbar**2, p.kT, p.mass, p.omega, p.gamma
    M1 = W[0, 0] * 2.0 * hb2 * m * w * w / kT
    M2 = 2.0 * W[0, 1] * hb2 * g / kT
    M3 = W[1, 1] * 2.0 * hb2 / (m * kT)
    lam = complex(-np.expm1(-2.0 * mu * t))
    return HOEvolution(t, mu, lam, float(M1), float(M2), float(M3), Phi, W, tail, method)


def m_functions(p: ModelParams, t: float):
    """M_1, M_2, M_3 evaluated from their explicit closed forms (complex
    arithmetic, real part returned after a residue check).

    Used as an independent cross-check of :func:`ho_kernel`; the expressions
    divide by mu^2 and are therefore not used at or near critical damping.
    """
    if p.is_free:
        raise WrongPotential("M functions require omega > 0")
    t = _check_time(t)
    g, w = p.gamma, p.omega
    mu = p.mu
    if mu == 0:
        raise DegenerateDamping("mu = 0: the closed-form M_i are singular at critical damping")
    e2 = math.exp(-2.0 * g * t)
    X = e2 * np.cosh(2.0 * mu * t)
    Y = e2 * np.sinh(2.0 * mu * t)
    Gam = -math.expm1(-2.0 * g * t)
    Lam = -np.expm1(-2.0 * mu * t)
    mu2 = mu * mu
    b = p.hbar**2 / (16.0 * p.kT**2 * mu2) if p.lindblad else 0.0
    M1 = -((X - 1) * g**2 + Gam * w**2 + Y * g * mu) / mu2 - b * (
        4 * (X - 1) * g**4 - 3 * (X - 1) * g**2 * w**2 + Gam * w**4 + 4 * Y * g**3 * mu - Y * g * w**2 * mu
    )
    M2 = g**2 / (2.0 * mu2) * np.exp(-2.0 * (g - mu) * t) * Lam**2 + b * g**2 * (
        2 * (X - 1) * g**2 - (e2 + X - 2) * w**2 + 2 * Y * g * mu
    )
    M3 = (-(X - 1) * g**2 - Gam * w**2 + Y * g * mu) / mu2 - b * w**2 * (
        (X - 1) * g**2 + Gam * w**2 + Y * g * mu
    )
    out = _as_real(np.array([M1, M2, M3]), "M functions", 1.0)
    return float(out[0]), float(out[1]), float(out[2])


def m_asymptotes(p: ModelParams):
    """t -> infinity limits of (M_1, M_2, M_3).

    The hbar^2 corrections come from the k^2 damping term and are absent in
    the non-Lindblad form.
    """
    if not p.lindblad:
        return 1.0, 0.0, 1.0
    a = p.hbar * p.gamma / p.kT
    b = p.hbar * p.omega / (4.0 * p.kT)
    return 1.0 + (a / 2.0) ** 2 + b * b, -(a * a) / 8.0, 1.0 + b * b


def m_small_omega(p: ModelParams, t: float):
    """Leading terms of M_i in a Taylor expansion about omega = 0."""
    t = _check_time(t)
    g, w = p.gamma, p.omega
    beta = 1.0 / p.kT
    e = math.exp(-2.0 * t * g)
    lind = (p.hbar * beta * g) ** 2 if p.lindblad else 0.0
    M1 = (t * g * (lind + 4.0) - (3.0 - 4.0 * e + e * e)) / (4.0 * g * g) * w * w
    Gam = -math.expm1(-2.0 * g * t)
    return M1, 0.5 * Gam * Gam, -math.expm1(-4.0 * g * t)


def ho_stationary_chi(p: ModelParams) -> GaussianChi:
    """Long-time limit of any initial state under the oscillator evolution."""
    if p.is_free:
        raise WrongPotential("stationary oscillator state requires omega > 0")
    M1, M2, M3 = m_asymptotes(p)
    hb2, kT, m, w = p.hbar**2, p.kT, p.mass, p.omega
    return GaussianChi(
        c1=kT * M1 / (2.0 * hb2 * m * w * w),
        c2=kT * M2 / (hb2 * p.gamma),
        c3=m * kT * M3 / (2.0 * hb2),
    )


def evolve_ho_gaussian(chi0: GaussianChi, p: ModelParams, t: float) -> GaussianChi:
    require_valid(chi0)
    ev = ho_kernel(p, t)
    Phi = ev.matrix
    Q = Phi.T @ chi0.quadratic @ Phi + ev.W
    lin = Phi.T @ chi0.linear
    return GaussianChi(Q[0, 0], Q[0, 1] + Q[1, 0], Q[1, 1], lin[0], lin[1], chi0.c6)


def ho_deviation(chi0: GaussianChi, p: ModelParams, t: float) -> np.ndarray:
    """c(t) - c(inf) for the oscillator, without subtracting nearly equal numbers."""
    require_valid(chi0)
    ev = ho_kernel(p, t)
    Phi = ev.matrix
    Q = Phi.T @ chi0.quadratic @ Phi - ev.W_tail
    lin = Phi.T @ chi0.linear
    return np.array([Q[0, 0], 2.0 * Q[0, 1], Q[1, 1], lin[0], lin[1], 0.0])


def evolve_ho_pointwise(chi0: Union[ChiFunction, GaussianChi], p: ModelParams, t: float, k, x):
    ev = ho_kernel(p, t)
    k = np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    kk, xx = ev.pullback(k, x)
    return ev.damping(k, x) * chi0(kk, xx)


def evolve_ho(chi0: ChiFunction, p: ModelParams, t: float) -> ChiFunction:
    ev = ho_kernel(p, t)
    gauss = evolve_ho_gaussian(chi0.gaussian, p, t) if chi0.gaussian is not None else None

    def evaluate(k, x):
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        kk, xx = ev.pullback(k, x)
        return ev.damping(k, x) * chi0(kk, xx)

    return ChiFunction(evaluate, gauss, label=f"{chi0.label}@t={ev.t:g}")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def kernel(p: ModelParams, t: float):
    return free_kernel(p, t) if p.is_free else ho_kernel(p, t)


def evolve_gaussian(chi0: GaussianChi, p: ModelParams, t: float) -> GaussianChi:
    return evolve_free_gaussian(chi0, p, t) if p.is_free else evolve_ho_gaussian(chi0, p, t)


def evolve_pointwise(chi0, p: ModelParams, t: float, k, x):
    if p.is_free:
        return evolve_free_pointwise(chi0, p, t, k, x)
    return evolve_ho_pointwise(chi0, p, t, k, x)


def evolve(chi0: ChiFunction, p: ModelParams, t: float) -> ChiFunction:
    return evolve_free(chi0, p, t) if p.is_free else evolve_ho(chi0, p, t)


def stationary_chi(p: ModelParams) -> GaussianChi:
    """Long-time state; for the free particle only c3 has a finite limit, so
    this is defined for the oscillator alone."""
    return ho_stationary_chi(p)


def _default_probe(p: ModelParams) -> GaussianChi:
    sp = p.thermal_momentum
    width = p.hbar / (2.0 * sp)
    return GaussianChi.wavepacket(width, q0=width, p0=0.5 * sp, hbar=p.hbar)


def free_limit_check(p: ModelParams, t: float, samples=9, chi0=None) -> float:
    """Max relative difference between oscillator and free evolution.

    ``samples`` is either a grid size n (n x n points spanning +-2 widths of
    the evolved free Gaussian) or an explicit array of (k, x) pairs.
    """
    if p.is_free:
        raise WrongPotential("free_limit_check needs a (small) omega > 0")
    free = p.replace(omega=0.0)
    chi0 = _default_probe(p) if chi0 is None else chi0
    if np.ndim(samples) == 0:
        n = int(samples)
        ref = evolve_free_gaussian(chi0 if isinstance(chi0, GaussianChi) else _default_probe(p), free, t)
        sk = 1.0 / math.sqrt(2.0 * ref.c1)
        sx = 1.0 / math.sqrt(2.0 * ref.c3)
        kk, xx = np.meshgrid(np.linspace(-2, 2, n) * sk, np.linspace(-2, 2, n) * sx, indexing="ij")
        k, x = kk.ravel(), xx.ravel()
    else:
        pts = np.asarray(samples, dtype=float).reshape(-1, 2)
        k, x = pts[:, 0], pts[:, 1]
    a = evolve_ho_pointwise(chi0, p, t, k, x)
    b = evolve_free_pointwise(chi0, free, t, k, x)
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))
