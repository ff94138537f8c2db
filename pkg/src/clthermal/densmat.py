"""Density-matrix elements from characteristic functions, thermal reference
states and long-time asymptotics.

Inversion formulas:

    <p1|rho|p2> = 1/(2 pi hbar) int dx exp(-i x (p1 + p2) / (2 hbar)) chi(p2 - p1, x)
    <q1|rho|q2> = 1/(2 pi hbar) int dk exp(-i k (q1 + q2) / (2 hbar)) chi(k, q1 - q2)

For Gaussian states the integral is done by completing the square and the
result is kept as a complex logarithm, so that elements far below the
double-precision range (fast-decaying off-diagonals) remain usable.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad

from .core import ChiFunction, GaussianChi, ModelParams, require_valid
from .errors import InvalidParameters, QuadratureNonconvergence, WrongPotential
from .propagators import evolve_free_gaussian, ho_deviation, ho_stationary_chi


class Basis(str, enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"

    @classmethod
    def parse(cls, value) -> "Basis":
        if isinstance(value, Basis):
            return value
        key = str(value).strip().lower()
        for b in cls:
            if b.value == key or b.value[0] == key:
                return b
        raise InvalidParameters(f"unknown basis {value!r}")


@dataclass(frozen=True)
class DensityMatrixElement:
    basis: Basis
    a: float
    b: float
    value: complex
    log_value: Optional[complex] = None  # principal log, available on the Gaussian path

    @property
    def log_abs(self) -> float:
        if self.log_value is not None:
            return float(self.log_value.real)
        return math.log(abs(self.value)) if self.value != 0 else -math.inf

    def __complex__(self):
        return complex(self.value)


@dataclass(frozen=True)
class QuadratureSpec:
    """Numeric inversion settings.

    ``half_width`` seeds the integration window (in the units of the
    integration variable); it doubles until the integrand at the window edge
    is below ``tail_tol`` times its sampled peak.
    """

    half_width: float = 8.0
    tail_tol: float = 1e-10
    max_doublings: int = 16
    epsabs: float = 1e-14
    epsrel: float = 1e-11
    limit: int = 500
    probe_points: int = 257


# ---------------------------------------------------------------------------
# Gaussian inversion
# ---------------------------------------------------------------------------


def _reduced(c, basis: Basis, a: float, b: float, hbar: float):
    """Map to the 1-d integral int dy exp(-alpha y^2 - beta y) * exp(rest).

    Returns (alpha, beta, rest) so that the element is
    sqrt(pi/alpha)/(2 pi hbar) * exp(beta^2/(4 alpha) + rest).
    """
    c1, c2, c3, c4, c5, c6 = c
    if basis is Basis.MOMENTUM:
        d = b - a
        alpha = c3
        beta = c2 * d + 1j * (c5 + (a + b) / (2.0 * hbar))
        rest = -c1 * d * d - 1j * c4 * d - c6
    else:
        d = a - b
        alpha = c1
        beta = c2 * d + 1j * (c4 + (a + b) / (2.0 * hbar))
        rest = -c3 * d * d - 1j * c5 * d - c6
    return alpha, beta, rest


def gaussian_log_element(chi: GaussianChi, basis, a: float, b: float, hbar: float = 1.0) -> complex:
    basis = Basis.parse(basis)
    alpha, beta, rest = _reduced(chi.as_array(), basis, a, b, hbar)
    pref = 0.5 * math.log(math.pi / alpha) - math.log(2.0 * math.pi * hbar)
    return complex(pref + beta * beta / (4.0 * alpha) + rest)


def gaussian_log_ratio(ref: GaussianChi, dc, basis, a: float, b: float, hbar: float = 1.0) -> complex:
    """log(element of ref + dc) - log(element of ref), free of cancellation
    when the deviation ``dc`` (six coefficients) is small."""
    basis = Basis.parse(basis)
    c_ref = ref.as_array()
    dc = np.asarray(dc, dtype=float)
    al, be, _ = _reduced(c_ref, basis, a, b, hbar)
    # rest is linear in c; alpha and beta enter through beta^2 / (4 alpha)
    if basis is Basis.MOMENTUM:
        d = b - a
        dal = dc[2]
        dbe = dc[1] * d + 1j * dc[4]
        dre = -dc[0] * d * d - 1j * dc[3] * d - dc[5]
    else:
        d = a - b
        dal = dc[0]
        dbe = dc[1] * d + 1j * dc[3]
        dre = -dc[2] * d * d - 1j * dc[4] * d - dc[5]
    num = al * (2.0 * be * dbe + dbe * dbe) - be * be * dal
    return complex(-0.5 * math.log1p(dal / al) + num / (4.0 * al * (al + dal)) + dre)


# ---------------------------------------------------------------------------
# numeric inversion
# ---------------------------------------------------------------------------


def _integrand(chi, basis: Basis, a: float, b: float, hbar: float) -> Callable[[np.ndarray], np.ndarray]:
    if basis is Basis.MOMENTUM:
        d, phase = b - a, (a + b) / (2.0 * hbar)

        def f(y):
            y = np.asarray(y, dtype=float)
            return np.exp(-1j * y * phase) * chi(np.full_like(y, d), y)
    else:
        d, phase = a - b, (a + b) / (2.0 * hbar)

        def f(y):
            y = np.asarray(y, dtype=float)
            return np.exp(-1j * y * phase) * chi(y, np.full_like(y, d))
    return f


def _window(f, spec: QuadratureSpec, half_width: float) -> float:
    L = half_width
    for _ in range(spec.max_doublings + 1):
        y = np.linspace(-L, L, spec.probe_points)
        vals = np.abs(f(y))
        peak = float(np.max(vals))
        if not np.all(np.isfinite(vals)):
            raise QuadratureNonconvergence("integrand is not finite")
        edge = max(float(vals[0]), float(vals[-1]))
        if peak > 0 and edge <= spec.tail_tol * peak:
            return L
        if peak == 0:
            return L
        L *= 2.0
    raise QuadratureNonconvergence(
        f"integrand does not decay within +-{L / 2:g}; the state may be non-normalizable in this basis"
    )


def numeric_element(chi, basis, a: float, b: float, hbar: float = 1.0, quad_spec: Optional[QuadratureSpec] = None,
                    half_width: Optional[float] = None) -> complex:
    basis = Basis.parse(basis)
    spec = quad_spec or QuadratureSpec()
    f = _integrand(chi, basis, a, b, hbar)
    L = _window(f, spec, half_width if half_width is not None else spec.half_width)
    opts = dict(epsabs=spec.epsabs, epsrel=spec.epsrel, limit=spec.limit)
    re, err_re = quad(lambda y: float(f(np.array([y]))[0].real), -L, L, **opts)
    im, err_im = quad(lambda y: float(f(np.array([y]))[0].imag), -L, L, **opts)
    return complex(re, im) / (2.0 * math.pi * hbar)


def _seed_width(g: GaussianChi, basis: Basis) -> float:
    c = g.c3 if basis is Basis.MOMENTUM else g.c1
    return 8.0 / math.sqrt(2.0 * c)


def element(chi: Union[ChiFunction, GaussianChi], basis, a: float, b: float, quad_spec: Optional[QuadratureSpec] = None,
            hbar: float = 1.0, method: str = "auto") -> DensityMatrixElement:
    """Matrix element <a|rho|b> in the chosen basis.

    ``method``: 'auto' (closed form for Gaussian payloads, quadrature
    otherwise), 'analytic' or 'numeric'.
    """
    basis = Basis.parse(basis)
    gauss = chi if isinstance(chi, GaussianChi) else chi.gaussian
    if method not in ("auto", "analytic", "numeric"):
        raise InvalidParameters(f"unknown method {method!r}")
    if gauss is not None and method != "numeric":
        require_valid(gauss)
        lv = gaussian_log_element(gauss, basis, a, b, hbar)
        return DensityMatrixElement(basis, a, b, complex(cmath.exp(lv)) if lv.real > -745 else 0j, lv)
    if method == "analytic":
        raise InvalidParameters("analytic inversion needs a Gaussian payload")
    seed = _seed_width(gauss, basis) if gauss is not None else None
    value = numeric_element(chi, basis, a, b, hbar, quad_spec, seed)
    return DensityMatrixElement(basis, a, b, value, None)


def element_grid(chi, basis, coords, hbar: float = 1.0, **kw) -> np.ndarray:
    """Matrix of elements over coords x coords."""
    coords = list(coords)
    out = np.empty((len(coords), len(coords)), dtype=complex)
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            out[i, j] = element(chi, basis, a, b, hbar=hbar, **kw).value
    return out


# ---------------------------------------------------------------------------
# reference states
# ---------------------------------------------------------------------------


def thermal_free(p1: float, p2: float, p: ModelParams) -> complex:
    """Maxwell-Boltzmann momentum density on the diagonal, 0 off it (the
    diagonal delta function is represented by the density value)."""
    if p1 != p2:
        return 0j
    mkT = p.mass * p.kT
    return complex(math.exp(-p1 * p1 / (2.0 * mkT)) / math.sqrt(2.0 * math.pi * mkT))


def thermal_ho(q1: float, q2: float, p: ModelParams) -> float:
    """Canonical equilibrium state of the oscillator in position representation."""
    if p.is_free:
        raise WrongPotential("thermal_ho requires omega > 0")
    u = p.hbar * p.omega / p.kT
    s = p.mass * p.omega / p.hbar
    norm = math.sqrt(s * math.tanh(0.5 * u) / math.pi)
    expo = -s / (2.0 * math.tanh(u)) * (q1 * q1 + q2 * q2) + s / math.sinh(u) * q1 * q2
    return norm * math.exp(expo)


def thermal_ho_highT(q1: float, q2: float, p: ModelParams) -> float:
    """Leading high-temperature expansion of :func:`thermal_ho`."""
    if p.is_free:
        raise WrongPotential("thermal_ho_highT requires omega > 0")
    u = p.hbar * p.omega / p.kT
    m, kT, w, hb2 = p.mass, p.kT, p.omega, p.hbar**2
    norm = math.sqrt(m * w * w / (2.0 * math.pi * kT))
    s, d = q1 + q2, q1 - q2
    return norm * math.exp(-m * w * w / (8.0 * kT) * s * s - m * kT / (2.0 * hb2) * (1.0 + u * u / 12.0) * d * d)


def stationary_general(q1: float, q2: float, p: ModelParams, potential: Optional[Callable[[float], float]] = None,
                       normalization: Optional[float] = None) -> float:
    """Approximate stationary state exp(-V(qbar)/kT - m kT (q1-q2)^2 / 2 hbar^2).

    ``potential`` defaults to m omega^2 q^2 / 2. The normalization defaults
    to the oscillator value; the free particle (omega = 0, no potential) is
    not normalizable and gets N = 1, suitable for relative comparisons only.
    """
    if potential is None:
        potential = lambda q: 0.5 * p.mass * p.omega**2 * q * q  # noqa: E731
    if normalization is None:
        normalization = 1.0 if p.is_free else math.sqrt(p.mass * p.omega**2 / (2.0 * math.pi * p.kT))
    qbar = 0.5 * (q1 + q2)
    d = q1 - q2
    return normalization * math.exp(-potential(qbar) / p.kT - p.mass * p.kT * d * d / (2.0 * p.hbar**2))


def ho_longtime(q1: float, q2: float, p: ModelParams, alternate_sign: bool = False) -> complex:
    """Long-time oscillator state in position representation.

    The (q1 - q2)^2 exponent contains the correction
    - (hbar omega/4kT)^2 (hbar gamma/2kT)^2 / S with S = M_1(inf); completing
    the square on the stationary Gaussian fixes this sign. ``alternate_sign``
    flips it to '+', the alternative arrangement of that term, for
    comparison (the two differ only at fourth order in hbar/kT).
    """
    if p.is_free:
        raise WrongPotential("ho_longtime requires omega > 0")
    m, kT, w, hb = p.mass, p.kT, p.omega, p.hbar
    if p.lindblad:
        a = hb * p.gamma / (2.0 * kT)
        bq = hb * w / (4.0 * kT)
    else:
        a = bq = 0.0
    S = 1.0 + a * a + bq * bq
    sign = 1.0 if alternate_sign else -1.0
    s, d = q1 + q2, q1 - q2
    width = 1.0 + bq * bq + sign * bq * bq * a * a / S
    expo = (
        -m * w * w / (8.0 * kT * S) * s * s
        - m * kT / (2.0 * hb * hb) * width * d * d
        - 1j * m * w * w / (16.0 * kT) * (2.0 * a) / S * (q1 * q1 - q2 * q2)
    )
    return complex(math.sqrt(m * w * w / (2.0 * math.pi * kT * S)) * cmath.exp(expo))


class ReferenceKind(str, enum.Enum):
    FREE_MOMENTUM = "FreeMomentum"
    HO_POSITION = "HOPosition"
    STATIONARY_GENERAL = "StationaryGeneral"
    HO_LONGTIME = "HOLongTime"


@dataclass(frozen=True)
class ThermalReference:
    kind: ReferenceKind
    params: ModelParams
    normalization: Optional[float] = None

    @property
    def basis(self) -> Basis:
        return Basis.MOMENTUM if self.kind is ReferenceKind.FREE_MOMENTUM else Basis.POSITION

    def element(self, a: float, b: float) -> complex:
        k = self.kind
        if k is ReferenceKind.FREE_MOMENTUM:
            return thermal_free(a, b, self.params)
        if k is ReferenceKind.HO_POSITION:
            return complex(thermal_ho(a, b, self.params))
        if k is ReferenceKind.STATIONARY_GENERAL:
            return complex(stationary_general(a, b, self.params, normalization=self.normalization))
        return ho_longtime(a, b, self.params)


# ---------------------------------------------------------------------------
# free-particle asymptotics
# ---------------------------------------------------------------------------


def offdiag_rate_coefficient(p: ModelParams) -> float:
    """Coefficient r with |<p1|rho_t|p2>| ~ exp(-r (p2 - p1)^2 t)."""
    return p.k_damping + p.kT / (2.0 * p.hbar**2 * p.mass * p.gamma)


def tau_offdiag(p1: float, p2: float, p: ModelParams) -> float:
    d = p2 - p1
    if d == 0:
        raise ZeroDivisionError("relaxation time of a diagonal element is undefined")
    return 1.0 / (offdiag_rate_coefficient(p) * d * d)


def longtime_offdiag_free_log(p1: float, p2: float, t: float, chi0, p: ModelParams) -> complex:
    if not p.is_free:
        raise WrongPotential("longtime_offdiag_free requires omega = 0")
    m, kT, g, hb = p.mass, p.kT, p.gamma, p.hbar
    d = p2 - p1
    val0 = complex(np.asarray(chi0(np.array(d), np.array(d / (2.0 * m * g)))))
    expo = (
        -0.5 * math.log(2.0 * math.pi * m * kT)
        + d * d * kT / (2.0 * hb * hb * m * g * g)
        - (p1 + p2) ** 2 / (8.0 * m * kT)
        + 1j * (p2 * p2 - p1 * p1) / (4.0 * m * hb * g)
        - offdiag_rate_coefficient(p) * d * d * t
    )
    return expo + cmath.log(val0)


def longtime_offdiag_free(p1: float, p2: float, t: float, chi0, p: ModelParams) -> complex:
    """Leading long-time form of an off-diagonal momentum element (valid for
    t well beyond 1/gamma, where the remainder has decayed)."""
    lv = longtime_offdiag_free_log(p1, p2, t, chi0, p)
    return complex(cmath.exp(lv)) if lv.real > -745 else 0j


def _dchi_dx0(chi0) -> complex:
    if isinstance(chi0, GaussianChi):
        return chi0.gradient_at_origin()[1]
    if getattr(chi0, "gaussian", None) is not None:
        return chi0.gaussian.gradient_at_origin()[1]
    h = 1e-5
    vals = chi0(np.array([0.0, 0.0]), np.array([h, -h]))
    return complex((vals[0] - vals[1]) / (2 * h))


def diag_correction_free(pval: float, t: float, chi0, p: ModelParams) -> complex:
    """Maxwell-Boltzmann diagonal with its leading e^{-2 gamma t} correction."""
    mkT = p.mass * p.kT
    mb = thermal_free(pval, pval, p)
    corr = 1.0 - 1j * p.hbar * pval / mkT * _dchi_dx0(chi0) * math.exp(-2.0 * p.gamma * t)
    return mb * corr


def diag_deviation_free(pval: float, t: float, chi0: GaussianChi, p: ModelParams) -> float:
    """Exact <p|rho_t|p> / MB(p) - 1 for a Gaussian initial state, evaluated
    without subtracting nearly equal numbers."""
    if not p.is_free:
        raise WrongPotential("diag_deviation_free requires omega = 0")
    g, hb = p.gamma, p.hbar
    c30 = p.mass * p.kT / (2.0 * hb * hb)
    delta = (chi0.c3 - c30) * math.exp(-4.0 * g * t)
    c5 = chi0.c5 * math.exp(-2.0 * g * t)
    c3 = c30 + delta
    u = pval / hb
    lr = -0.5 * math.log1p(delta / c30) + (u * u * delta - c30 * c5 * (2.0 * u + c5)) / (4.0 * c3 * c30)
    return math.expm1(lr)


# ---------------------------------------------------------------------------
# oscillator residuals
# ---------------------------------------------------------------------------


def ho_residual(q1: float, q2: float, t: float, chi0: GaussianChi, p: ModelParams) -> complex:
    """(<q1|rho_t|q2> - <q1|rho_inf|q2>) / <q1|rho_inf|q2> for a Gaussian
    initial state, from coefficient deviations (no cancellation)."""
    ref = ho_stationary_chi(p)
    dc = ho_deviation(chi0, p, t)
    return complex(np.expm1(gaussian_log_ratio(ref, dc, Basis.POSITION, q1, q2, p.hbar)))


def free_thermal_from_chi(p1: float, p2: float, t: float, chi0: GaussianChi, p: ModelParams) -> DensityMatrixElement:
    """Exact momentum element at time t for a Gaussian initial state."""
    return element(evolve_free_gaussian(chi0, p, t), Basis.MOMENTUM, p1, p2, hbar=p.hbar)
