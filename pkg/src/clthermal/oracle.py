"""Brute-force grid integrator for the characteristic-function PDE.

    d_t chi = -m omega^2 x d_k chi + (k/m - 2 gamma x) d_x chi
              - (q_k k^2 + q_x x^2) chi

with q_k = gamma / (8 m kB T) (zero in the non-Lindblad form) and
q_x = 2 gamma m kB T / hbar^2. Method of lines: fourth-order finite
differences (central in the interior, one-sided near the edges), classical
RK4 in time, boundary values pinned to zero.

The time stepping shares nothing with the closed-form propagators, so
agreement between the two is a real check (the default box size is the one
place the closed-form Gaussian widths are consulted).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .core import ChiFunction, GaussianChi, ModelParams
from .errors import Instability, InvalidParameters

# |eigenvalue| of the 4th-order central first-derivative stencil is at most 1.372 / h
STENCIL_RADIUS = 1.372
RK4_LIMIT = 2.0  # conservative radius inside the RK4 stability region


@dataclass(frozen=True)
class GridSpec:
    k_min: float
    k_max: float
    x_min: float
    x_max: float
    n_k: int = 257
    n_x: int = 257
    dt: float = 1e-3
    scheme: str = "RK4"

    def __post_init__(self):
        if self.scheme != "RK4":
            raise InvalidParameters(f"unsupported scheme {self.scheme!r}")
        if self.n_k < 5 or self.n_x < 5:
            raise InvalidParameters("need at least 5 points per axis")
        if not (self.k_max > self.k_min and self.x_max > self.x_min and self.dt > 0):
            raise InvalidParameters("empty domain or non-positive time step")

    @property
    def k(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, self.n_k)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def hk(self) -> float:
        return (self.k_max - self.k_min) / (self.n_k - 1)

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    def stability_limit(self, p: ModelParams) -> float:
        kmax = max(abs(self.k_min), abs(self.k_max))
        xmax = max(abs(self.x_min), abs(self.x_max))
        vx = kmax / p.mass + 2.0 * p.gamma * xmax
        vk = p.mass * p.omega**2 * xmax
        qmax = p.k_damping * kmax**2 + p.x_damping * xmax**2
        return RK4_LIMIT / (STENCIL_RADIUS * (vx / self.hx + vk / self.hk) + qmax)

    def check(self, p: ModelParams) -> None:
        lim = self.stability_limit(p)
        if self.dt > lim:
            raise Instability(f"dt = {self.dt:.3e} exceeds the stability bound {lim:.3e}")

    def with_points(self, n_k: int, n_x: int, p: Optional[ModelParams] = None, safety: float = 0.25) -> "GridSpec":
        spec = GridSpec(self.k_min, self.k_max, self.x_min, self.x_max, n_k, n_x, self.dt, self.scheme)
        if p is not None:
            spec = GridSpec(self.k_min, self.k_max, self.x_min, self.x_max, n_k, n_x,
                            safety * spec.stability_limit(p), self.scheme)
        return spec

    @classmethod
    def symmetric(cls, k_half: float, x_half: float, p: ModelParams, n: int = 257, safety: float = 0.25) -> "GridSpec":
        probe = cls(-k_half, k_half, -x_half, x_half, n, n, 1.0)
        return cls(-k_half, k_half, -x_half, x_half, n, n, safety * probe.stability_limit(p))

    @classmethod
    def default_for(cls, chi0: GaussianChi, p: ModelParams, t_final: float = 0.0, n: int = 257,
                    widths: float = 8.0, safety: float = 0.25) -> "GridSpec":
        """+-``widths`` standard widths of the field, where the width on each
        axis is the largest one the Gaussian attains over [0, t_final].

        Only the box size is taken from the closed-form coefficient
        evolution; the field values themselves are computed independently.
        """
        from .propagators import evolve_gaussian

        wk = wx = 0.0
        for t in np.linspace(0.0, t_final, 17) if t_final > 0 else [0.0]:
            c = evolve_gaussian(chi0, p, float(t))
            wk = max(wk, 1.0 / math.sqrt(2.0 * c.c1))
            wx = max(wx, 1.0 / math.sqrt(2.0 * c.c3))
        return cls.symmetric(widths * wk, widths * wx, p, n, safety)


@dataclass
class GridField:
    spec: GridSpec
    values: np.ndarray  # shape (n_k, n_x), indexing [k, x]
    t: float = 0.0
    monitor: list = field(default_factory=list)  # (t, |chi(0,0) - 1|)
    snapshots: dict = field(default_factory=dict)

    @property
    def k(self) -> np.ndarray:
        return self.spec.k

    @property
    def x(self) -> np.ndarray:
        return self.spec.x

    def mesh(self):
        return np.meshgrid(self.spec.k, self.spec.x, indexing="ij")

    def origin_value(self) -> complex:
        i = int(np.argmin(np.abs(self.spec.k)))
        j = int(np.argmin(np.abs(self.spec.x)))
        return complex(self.values[i, j])

    def interior(self, fraction: float = 0.8):
        """Index slices covering the central ``fraction`` of each axis."""
        def sl(n):
            cut = int(round(0.5 * (1.0 - fraction) * (n - 1)))
            return slice(cut, n - cut)
        return sl(self.spec.n_k), sl(self.spec.n_x)

    def rows(self):
        kk, xx = self.mesh()
        for kv, xv, val in zip(kk.ravel(), xx.ravel(), self.values.ravel()):
            yield float(kv), float(xv), float(val.real), float(val.imag)


def sample(chi0, spec: GridSpec) -> np.ndarray:
    kk, xx = np.meshgrid(spec.k, spec.x, indexing="ij")
    return np.asarray(chi0(kk, xx), dtype=complex)


_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _d1(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order first derivative along ``axis`` (real arrays)."""
    d = correlate1d(f, _CENTRAL, axis=axis, mode="constant")
    f = np.moveaxis(f, axis, 0)
    e = np.moveaxis(d, axis, 0)  # view into d
    e[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / 12.0
    e[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / 12.0
    e[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / 12.0
    e[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / 12.0
    d *= 1.0 / h
    return d


class _Operator:
    """Semi-discrete right-hand side acting on stacked (re, im) real arrays;
    the PDE has real coefficients, so the two parts evolve independently."""

    def __init__(self, spec: GridSpec, p: ModelParams):
        kk, xx = np.meshgrid(spec.k, spec.x, indexing="ij")
        self.vk = -p.mass * p.omega**2 * xx
        self.vx = kk / p.mass - 2.0 * p.gamma * xx
        self.q = p.k_damping * kk * kk + p.x_damping * xx * xx
        self.hk, self.hx = spec.hk, spec.hx
        self.has_k = p.omega != 0.0

    def __call__(self, f: np.ndarray) -> np.ndarray:
        out = _d1(f, self.hx, 2)
        out *= self.vx
        out -= self.q * f
        if self.has_k:
            dk = _d1(f, self.hk, 1)
            dk *= self.vk
            out += dk
        return out


def _pin(f: np.ndarray) -> np.ndarray:
    f[..., 0, :] = 0.0
    f[..., -1, :] = 0.0
    f[..., :, 0] = 0.0
    f[..., :, -1] = 0.0
    return f


def _stack(values: np.ndarray) -> np.ndarray:
    return np.stack([values.real, values.imag]).astype(float)


def _unstack(f: np.ndarray) -> np.ndarray:
    return f[0] + 1j * f[1]


def _rk4(op: _Operator, f: np.ndarray, dt: float) -> np.ndarray:
    k1 = op(f)
    k2 = op(_pin(f + 0.5 * dt * k1))
    k3 = op(_pin(f + 0.5 * dt * k2))
    k4 = op(_pin(f + dt * k3))
    k2 += k3
    k2 *= 2.0
    k2 += k1
    k2 += k4
    k2 *= dt / 6.0
    k2 += f
    return _pin(k2)


def step(fld: GridField, p: ModelParams, dt: Optional[float] = None) -> GridField:
    """One RK4 step (returns a new field)."""
    fld.spec.check(p)
    dt = fld.spec.dt if dt is None else dt
    new = _rk4(_Operator(fld.spec, p), _pin(_stack(fld.values)), dt)
    return GridField(fld.spec, _unstack(new), fld.t + dt, list(fld.monitor), dict(fld.snapshots))


def integrate(chi0, p: ModelParams, t_final: float, spec: Optional[GridSpec] = None,
              snapshots: Sequence[float] = (), monitor_tol: float = 1e-3) -> GridField:
    """Integrate from 0 to ``t_final``; values at each time in ``snapshots``
    are stored in ``field.snapshots``. The step size is shrunk slightly so
    that every requested time is hit exactly."""
    t_final = float(t_final)
    if not t_final >= 0:
        raise InvalidParameters("t_final must be >= 0")
    if spec is None:
        gauss = chi0 if isinstance(chi0, GaussianChi) else getattr(chi0, "gaussian", None)
        if gauss is None:
            raise InvalidParameters("a GridSpec is required for non-Gaussian initial states")
        spec = GridSpec.default_for(gauss, p, t_final)
    spec.check(p)
    f0 = _pin(sample(chi0, spec))
    peak0 = float(np.max(np.abs(f0)))
    f = _stack(f0)
    op = _Operator(spec, p)
    fld = GridField(spec, f0, 0.0)
    ic, jc = int(np.argmin(np.abs(spec.k))), int(np.argmin(np.abs(spec.x)))
    start_drift = abs(f0[ic, jc] - 1.0)
    fld.monitor.append((0.0, start_drift))
    stops = sorted({float(s) for s in snapshots if 0 <= s <= t_final} | {t_final})
    t = 0.0
    if 0.0 in stops:
        fld.snapshots[0.0] = f0.copy()
    for stop in stops:
        span = stop - t
        if span <= 0:
            continue
        n = max(1, math.ceil(span / spec.dt - 1e-9))
        dt = span / n
        for i in range(n):
            f = _rk4(op, f, dt)
            if i % 16 == 15 or i == n - 1:
                peak = float(np.max(np.abs(f)))
                if not math.isfinite(peak) or peak > 10.0 * max(peak0, 1e-300):
                    raise Instability(f"grid field grew to {peak:.3e} at t = {t + (i + 1) * dt:.4g}")
        t = stop
        cur = _unstack(f)
        drift = abs(cur[ic, jc] - 1.0)
        fld.monitor.append((t, drift))
        if start_drift < monitor_tol and drift > monitor_tol:
            raise Instability(f"chi(0,0) drifted by {drift:.3e} at t = {t:.4g}")
        fld.snapshots[stop] = cur
    fld.values = _unstack(f)
    fld.t = t_final
    return fld


def compare(fld: GridField, exact, t: Optional[float] = None, fraction: float = 0.8) -> float:
    """Interior sup-norm error relative to the interior sup-norm of ``exact``
    (a callable (k, x) -> chi_t)."""
    vals = fld.values if t is None else fld.snapshots[t]
    kk, xx = fld.mesh()
    ref = np.asarray(exact(kk, xx), dtype=complex)
    si, sj = fld.interior(fraction)
    err = np.max(np.abs(vals[si, sj] - ref[si, sj]))
    return float(err / np.max(np.abs(ref[si, sj])))


def convergence_order(errors: Sequence[float], refinement: float = 2.0) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / math.log(refinement)
