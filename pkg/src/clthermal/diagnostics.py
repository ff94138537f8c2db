"""Thermalization metrics: decay-rate fits, distance to equilibrium,
diffusion, and separable d-dimensional states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import ChiFunction, GaussianChi, ModelParams, moments, require_valid
from .densmat import (
    Basis,
    ReferenceKind,
    ThermalReference,
    diag_deviation_free,
    element,
    gaussian_log_element,
    ho_residual,
    offdiag_rate_coefficient,
)
from .errors import IncompatibleReference, InvalidParameters, NonPositiveValue
from .propagators import evolve_free_gaussian, evolve_gaussian

MIN_SAMPLES = 8
DEFAULT_WINDOW = (5.0, 15.0)  # in units of the relevant relaxation time
DEFAULT_SAMPLES = 32


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple
    n: int
    stderr: float = 0.0

    def __str__(self):
        return (f"rate={self.rate:.10g} +- {self.stderr:.2g} (r^2={self.r_squared:.12f}, "
                f"t in [{self.window[0]:g}, {self.window[1]:g}], n={self.n})")


def fit_decay(times: Sequence[float], values: Optional[Sequence[float]] = None, window=None,
              log_values: Optional[Sequence[float]] = None) -> DecayFit:
    """Least-squares fit of log(value) = intercept - rate * t.

    Pass ``log_values`` instead of ``values`` when the data are only
    available as logarithms (e.g. elements below the float range).
    """
    t = np.asarray(times, dtype=float)
    if (values is None) == (log_values is None):
        raise InvalidParameters("give exactly one of values / log_values")
    if window is not None:
        sel = (t >= window[0] - 1e-12 * abs(window[0])) & (t <= window[1] + 1e-12 * abs(window[1]))
    else:
        sel = np.ones_like(t, dtype=bool)
    if log_values is None:
        v = np.asarray(values, dtype=float)[sel]
        if np.any(~(v > 0)):
            raise NonPositiveValue("fit_decay needs strictly positive values in the window")
        y = np.log(v)
    else:
        y = np.asarray(log_values, dtype=float)[sel]
        if not np.all(np.isfinite(y)):
            raise NonPositiveValue("non-finite log value in the window")
    t = t[sel]
    if t.size < MIN_SAMPLES:
        raise InvalidParameters(f"fit window holds {t.size} samples; at least {MIN_SAMPLES} required")
    res = stats.linregress(t, y)
    ss_res = float(np.sum((y - (res.intercept + res.slope * t)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return DecayFit(-float(res.slope), float(res.intercept), r2, (float(t[0]), float(t[-1])), int(t.size),
                    float(res.stderr))


def _window_times(t0: float, t1: float, n: int = DEFAULT_SAMPLES) -> np.ndarray:
    return np.linspace(t0, t1, n)


# ---------------------------------------------------------------------------
# fits of the predicted decay laws
# ---------------------------------------------------------------------------


def offdiag_decay_fit(p1: float, p2: float, chi0: GaussianChi, p: ModelParams, window=None,
                      n: int = DEFAULT_SAMPLES) -> DecayFit:
    """Fit |<p1|rho_t|p2>| of the exact free evolution; window in units of 1/gamma."""
    w = window or DEFAULT_WINDOW
    ts = _window_times(w[0] / p.gamma, w[1] / p.gamma, n)
    logs = [gaussian_log_element(evolve_free_gaussian(chi0, p, t), Basis.MOMENTUM, p1, p2, p.hbar).real for t in ts]
    return fit_decay(ts, log_values=logs)


def diag_correction_fit(pval: float, chi0: GaussianChi, p: ModelParams, window=None,
                        n: int = DEFAULT_SAMPLES) -> DecayFit:
    """Fit |<p|rho_t|p> / MB(p) - 1| (expected rate 2 gamma); window in units of 1/gamma."""
    w = window or DEFAULT_WINDOW
    ts = _window_times(w[0] / p.gamma, w[1] / p.gamma, n)
    vals = [abs(diag_deviation_free(pval, t, chi0, p)) for t in ts]
    return fit_decay(ts, vals)


def ho_relaxation_rate(p: ModelParams) -> float:
    return p.relaxation_rate


def ho_sample_times(p: ModelParams, window=None, n: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Sampling times for the oscillator residual, window in units of
    1/Re(gamma - mu).

    Underdamped: stroboscopic at half periods pi/nu, so the oscillating
    factor of the leading term has constant modulus. At or near critical
    damping the leading term carries a t e^{-gamma t} prefactor; the window
    is pushed out by a factor 8 to keep the log-derivative bias of t small.
    """
    rate = p.relaxation_rate
    w = window or DEFAULT_WINDOW
    t0, t1 = w[0] / rate, w[1] / rate
    nu2 = p.omega**2 - p.gamma**2
    if nu2 > 0:
        nu = math.sqrt(nu2)
        step = math.pi / nu
        if (t1 - t0) / step < 12.0 * (1 + 1e-12):
            # widen until the strobe holds enough samples for a stable fit
            t1 = t0 + 12.0 * step
        k0 = math.ceil(t0 / step)
        k1 = math.floor(t1 / step)
        return np.arange(k0, k1 + 1) * step
    mu = math.sqrt(max(-nu2, 0.0))
    if mu < 0.2 * p.gamma:
        t0, t1 = 8.0 * t0, 8.0 * t1
    return _window_times(t0, t1, n)


def ho_residual_fit(q1: float, q2: float, chi0: GaussianChi, p: ModelParams, window=None,
                    n: int = DEFAULT_SAMPLES) -> DecayFit:
    """Fit |<q1|rho_t|q2> / <q1|rho_inf|q2> - 1| (expected rate Re(gamma - mu))."""
    ts = ho_sample_times(p, window, n)
    vals = [abs(ho_residual(q1, q2, t, chi0, p)) for t in ts]
    return fit_decay(ts, vals)


def relaxation_fit(chi0: GaussianChi, p: ModelParams, window=None) -> DecayFit:
    """Relaxation rate of a representative element: the oscillator residual
    for omega > 0, the momentum-diagonal correction for the free particle."""
    if p.is_free:
        return diag_correction_fit(2.0 * p.thermal_momentum, chi0, p, window)
    L = p.thermal_length
    return ho_residual_fit(L, L, chi0, p, window)


def expected_relaxation_rate(p: ModelParams, chi0: Optional[GaussianChi] = None) -> float:
    """Predicted rate for :func:`relaxation_fit`.

    For the free particle the leading e^{-2 gamma t} correction of the
    momentum diagonal is proportional to the initial mean momentum; when that
    vanishes the next term, from the momentum variance, decays at 4 gamma.
    """
    if not p.is_free:
        return p.relaxation_rate
    if chi0 is not None and chi0.c5 == 0:
        return 4.0 * p.gamma
    return 2.0 * p.gamma


def rate_law_fit(deltas: Sequence[float], rates: Sequence[float]) -> tuple:
    """Fit rate = a * delta^2 through the origin; returns (a, max relative residual)."""
    d2 = np.asarray(deltas, dtype=float) ** 2
    r = np.asarray(rates, dtype=float)
    a = float(np.dot(d2, r) / np.dot(d2, d2))
    return a, float(np.max(np.abs(r - a * d2) / np.abs(r)))


def form_rate_gap(p: ModelParams) -> float:
    """Predicted |rate_L - rate_NL| / rate_L for off-diagonal decay."""
    a2 = (p.hbar * p.gamma / (2.0 * p.kT)) ** 2
    return a2 / (1.0 + a2)


# ---------------------------------------------------------------------------
# equilibrium distance and diffusion
# ---------------------------------------------------------------------------


def _check_reference(ref: ThermalReference, params: Optional[ModelParams]):
    if ref.kind is ReferenceKind.FREE_MOMENTUM and not ref.params.is_free:
        raise IncompatibleReference("FreeMomentum reference needs a free particle (omega = 0)")
    if ref.kind is not ReferenceKind.FREE_MOMENTUM and ref.params.is_free:
        raise IncompatibleReference(f"{ref.kind.value} reference needs omega > 0")
    if params is not None:
        if params.is_free != ref.params.is_free:
            raise IncompatibleReference("state and reference disagree on the potential")
        if params.form is not ref.params.form and ref.kind is ReferenceKind.HO_LONGTIME:
            raise IncompatibleReference("state and reference use different equation forms")


def equilibrium_distance(chi_t, ref: ThermalReference, sample_grid, params: Optional[ModelParams] = None) -> float:
    """sup over sample pairs of |rho_t(a, b) - rho_ref(a, b)|.

    ``sample_grid`` is a 1-d array of coordinates (all pairs are used) or an
    (n, 2) array of explicit (a, b) pairs.
    """
    _check_reference(ref, params)
    grid = np.asarray(sample_grid, dtype=float)
    if grid.ndim == 1:
        pairs = [(a, b) for a in grid for b in grid]
    else:
        pairs = [tuple(row) for row in grid.reshape(-1, 2)]
    hb = ref.params.hbar
    dist = 0.0
    for a, b in pairs:
        val = element(chi_t, ref.basis, a, b, hbar=hb).value
        dist = max(dist, abs(val - ref.element(a, b)))
    return float(dist)


def reference_peak(ref: ThermalReference, sample_grid) -> float:
    grid = np.asarray(sample_grid, dtype=float).ravel()
    return float(max(abs(ref.element(a, a)) for a in grid))


@dataclass(frozen=True)
class DiffusionResult:
    D_fit: float
    D_theory: float
    fit: DecayFit

    @property
    def ratio(self) -> float:
        return self.D_fit / self.D_theory


def diffusion_check(chi0: GaussianChi, p: ModelParams, t_samples: Optional[Sequence[float]] = None) -> DiffusionResult:
    """Slope of <q^2>(t) against k_B T / (m gamma); default samples are 32
    points over [5/gamma, 20/gamma]."""
    if not p.is_free:
        raise InvalidParameters("diffusion_check is defined for the free particle")
    require_valid(chi0)
    ts = np.asarray(t_samples if t_samples is not None else np.linspace(5.0, 20.0, 32) / p.gamma, dtype=float)
    q2 = []
    for t in ts:
        mo = moments(evolve_free_gaussian(chi0, p, t), p)
        q2.append(mo.var_q + mo.mean_q**2)
    res = stats.linregress(ts, q2)
    fit = DecayFit(-float(res.slope), float(res.intercept), float(res.rvalue**2), (float(ts[0]), float(ts[-1])),
                   int(ts.size), float(res.stderr))
    return DiffusionResult(float(res.slope), p.diffusion_constant, fit)


# ---------------------------------------------------------------------------
# d-dimensional product states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductState:
    axes: tuple  # of (GaussianChi, ModelParams)

    def __post_init__(self):
        axes = tuple((c, q) for c, q in self.axes)
        if not axes:
            raise InvalidParameters("a product state needs at least one axis")
        for c, _ in axes:
            require_valid(c)
        object.__setattr__(self, "axes", axes)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    def __call__(self, kvec, xvec):
        kvec = np.asarray(kvec, dtype=float)
        xvec = np.asarray(xvec, dtype=float)
        out = 1.0 + 0j
        for i, (c, _) in enumerate(self.axes):
            out = out * c(kvec[..., i], xvec[..., i])
        return out

    def trace(self) -> complex:
        return self(np.zeros(self.dimension), np.zeros(self.dimension))

    def second_moment_q(self) -> float:
        """<|q|^2> summed over axes."""
        total = 0.0
        for c, q in self.axes:
            mo = moments(c, q)
            total += mo.var_q + mo.mean_q**2
        return total


def evolve_product(ps: ProductState, t: float) -> ProductState:
    return ProductState(tuple((evolve_gaussian(c, q, t), q) for c, q in ps.axes))


def product_diffusion_slope(ps: ProductState, t_samples: Sequence[float]) -> float:
    ts = np.asarray(t_samples, dtype=float)
    vals = [evolve_product(ps, t).second_moment_q() for t in ts]
    return float(stats.linregress(ts, vals).slope)
