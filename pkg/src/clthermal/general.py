"""Gaussian-ansatz solver for the general linear Wigner-space PDE

    d_t f = [A + B k + C x + D d_k + E d_x + F k^2 + G k x + H x^2
             + L k d_k + M k d_x + N x d_k + P x d_x
             + Q d_k^2 + R d_k d_x + S d_x^2] f.

Writing the first-order part as a vector field v(z) = d + J z with
z = (k, x), d = (D, E), J = [[L, N], [M, P]], the multiplicative part as
A + u.z + z^T K z with u = (B, C), K = [[F, G/2], [G/2, H]], a linear change
of variables z = T w transforms the data as

    d' = T^-1 d,  J' = T^-1 J T,  u' = T^T u,  K' = T^T K T,  A' = A.

Coefficients may be complex: the c4, c5 rows carry factors of i, so real
Gaussian coefficients require B, D, E to be imaginary (A, F..P real).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .core import GaussianChi, ModelParams
from .errors import DegenerateShift, IntegratorFailure, InvalidParameters, NonRealResidue, NotApplicable

REAL_TOL = 1e-10


@dataclass(frozen=True)
class LinearPDECoeffs:
    A: complex = 0.0
    B: complex = 0.0
    C: complex = 0.0
    D: complex = 0.0
    E: complex = 0.0
    F: complex = 0.0
    G: complex = 0.0
    H: complex = 0.0
    L: complex = 0.0
    M: complex = 0.0
    N: complex = 0.0
    P: complex = 0.0
    Q: complex = 0.0
    R: complex = 0.0
    S: complex = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes) -> "LinearPDECoeffs":
        return replace(self, **changes)

    # structured views -----------------------------------------------------
    @property
    def drift_offset(self) -> np.ndarray:
        return np.array([self.D, self.E], dtype=complex)

    @property
    def drift_matrix(self) -> np.ndarray:
        return np.array([[self.L, self.N], [self.M, self.P]], dtype=complex)

    @property
    def linear(self) -> np.ndarray:
        return np.array([self.B, self.C], dtype=complex)

    @property
    def quadratic(self) -> np.ndarray:
        return np.array([[self.F, 0.5 * self.G], [0.5 * self.G, self.H]], dtype=complex)

    @classmethod
    def from_parts(cls, A, u, K, d, J, Q=0.0, R=0.0, S=0.0) -> "LinearPDECoeffs":
        return cls(
            A=A, B=u[0], C=u[1], D=d[0], E=d[1],
            F=K[0, 0], G=K[0, 1] + K[1, 0], H=K[1, 1],
            L=J[0, 0], M=J[1, 0], N=J[0, 1], P=J[1, 1],
            Q=Q, R=R, S=S,
        )

    def apply(self, f, k, x, h: float = 1e-4):
        """Right-hand side of the PDE applied to a callable ``f(k, x)``,
        with derivatives by central differences (test helper)."""
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        f0 = f(k, x)
        fk = (f(k + h, x) - f(k - h, x)) / (2 * h)
        fx = (f(k, x + h) - f(k, x - h)) / (2 * h)
        fkk = (f(k + h, x) - 2 * f0 + f(k - h, x)) / h**2
        fxx = (f(k, x + h) - 2 * f0 + f(k, x - h)) / h**2
        fkx = (f(k + h, x + h) - f(k + h, x - h) - f(k - h, x + h) + f(k - h, x - h)) / (4 * h * h)
        return (
            (self.A + self.B * k + self.C * x + self.F * k * k + self.G * k * x + self.H * x * x) * f0
            + (self.D + self.L * k + self.N * x) * fk
            + (self.E + self.M * k + self.P * x) * fx
            + self.Q * fkk + self.R * fkx + self.S * fxx
        )


class Admissibility(enum.Enum):
    GAUSSIAN_ODE = "GaussianODE"
    FOURIER_REDUCIBLE = "FourierReducible"
    INADMISSIBLE = "Inadmissible"


def admissibility(co: LinearPDECoeffs) -> Admissibility:
    Q, R, S = co.Q != 0, co.R != 0, co.S != 0
    F, G, H = co.F != 0, co.G != 0, co.H != 0
    if not (Q or R or S):
        return Admissibility.GAUSSIAN_ODE
    if not (F or G or H):
        return Admissibility.FOURIER_REDUCIBLE
    if not F and not R and not S and Q:
        return Admissibility.FOURIER_REDUCIBLE
    if not H and not Q and not R and S:
        return Admissibility.FOURIER_REDUCIBLE
    return Admissibility.INADMISSIBLE


def _require_gaussian(co: LinearPDECoeffs):
    if admissibility(co) is not Admissibility.GAUSSIAN_ODE:
        raise InvalidParameters("second-derivative terms present (Q, R, S must vanish for the Gaussian ansatz)")


# ---------------------------------------------------------------------------
# affine decoupling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decoupling:
    a: complex
    b: complex
    shift: np.ndarray  # w0 with s = w + w0
    primed: LinearPDECoeffs  # after z = T w (M' = N' = 0)
    transformed: LinearPDECoeffs  # after the shift (D'' = E'' = 0)

    @property
    def T(self) -> np.ndarray:
        return np.array([[1.0, self.a], [self.b, 1.0]], dtype=complex)


def transform_linear(co: LinearPDECoeffs, T) -> LinearPDECoeffs:
    """Coefficients of the PDE for f(T w), as functions of w."""
    T = np.asarray(T, dtype=complex)
    Ti = np.linalg.inv(T)
    return LinearPDECoeffs.from_parts(
        co.A, T.T @ co.linear, T.T @ co.quadratic @ T, Ti @ co.drift_offset, Ti @ co.drift_matrix @ T,
        co.Q, co.R, co.S,
    )


def transform_shift(co: LinearPDECoeffs, w0) -> LinearPDECoeffs:
    """Coefficients for g(s) = f(s - w0)."""
    w0 = np.asarray(w0, dtype=complex)
    u, K, J = co.linear, co.quadratic, co.drift_matrix
    A = co.A - u @ w0 + w0 @ K @ w0
    u2 = u - 2.0 * K @ w0
    d2 = co.drift_offset - J @ w0
    return LinearPDECoeffs.from_parts(A, u2, K, d2, J, co.Q, co.R, co.S)


def _root_pairs(co: LinearPDECoeffs):
    L, M, N, P = co.L, co.M, co.N, co.P
    dlt = L - P
    s = np.sqrt(complex(dlt * dlt + 4 * M * N))
    if np.isreal(s) and np.isreal(dlt) and np.isreal(M) and np.isreal(N):
        s = s.real
    a_opts = [(dlt + s) / (2 * M), (dlt - s) / (2 * M)]
    b_opts = [(-dlt - s) / (2 * N), (-dlt + s) / (2 * N)]
    return [(a, b) for a in a_opts for b in b_opts]


def decouple(co: LinearPDECoeffs) -> Decoupling:
    """Affine change of variables removing the M, N couplings, then a shift
    removing D, E."""
    _require_gaussian(co)
    L, M, N, P = co.L, co.M, co.N, co.P
    if M != 0 and N != 0:
        a, b = max(_root_pairs(co), key=lambda ab: abs(1.0 - ab[0] * ab[1]))
    elif M == 0 and N == 0:
        a, b = 0.0, 0.0
    elif L == P:
        raise NotApplicable("M N = 0 with L = P: the affine decoupling does not apply")
    elif N == 0:
        a, b = 0.0, M / (L - P)
    else:
        a, b = N / (P - L), 0.0
    if abs(1.0 - a * b) < 1e-12:
        raise NotApplicable("degenerate transformation (ab = 1)")
    T = np.array([[1.0, a], [b, 1.0]], dtype=complex)
    primed = transform_linear(co, T)
    shift = np.zeros(2, dtype=complex)
    for i, (dv, lv, name) in enumerate(((primed.D, primed.L, "L'"), (primed.E, primed.P, "P'"))):
        if dv == 0:
            continue
        if lv == 0:
            raise DegenerateShift(f"{name} = 0 but the matching drift offset is {dv!r}")
        shift[i] = dv / lv
    # s = w + shift, i.e. f(w) = g(w + shift): g(s) = f(s - shift)
    transformed = transform_shift(primed, shift)
    return Decoupling(complex(a), complex(b), shift, primed, transformed)


# ---------------------------------------------------------------------------
# coefficient ODE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OdeSystem:
    """d c / dt = matrix @ c + forcing over c = (c1, ..., c6)."""

    matrix: np.ndarray
    forcing: np.ndarray

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.isreal(self.matrix)) and np.all(np.isreal(self.forcing)))

    def rhs(self, t, c):
        return self.matrix @ c + self.forcing

    def residual(self, c_of_t, t: float, h: float = 1e-5) -> float:
        """|dc/dt - rhs| / max(|dc/dt|, |c|) at time t via central differences."""
        lo = max(t - h, 0.0)
        hi = lo + 2 * h
        mid = 0.5 * (lo + hi)
        dc = (c_of_t(hi) - c_of_t(lo)) / (hi - lo)
        c = c_of_t(mid)
        r = self.rhs(mid, c)
        scale = max(np.max(np.abs(dc)), np.max(np.abs(c)), 1e-300)
        return float(np.max(np.abs(dc - r)) / scale)


def build_ode(co: LinearPDECoeffs) -> OdeSystem:
    _require_gaussian(co)
    A, B, C, D, E, F, G, H, L, M, N, P = (
        co.A, co.B, co.C, co.D, co.E, co.F, co.G, co.H, co.L, co.M, co.N, co.P
    )
    i = 1j
    mat = np.array(
        [
            [2 * L, M, 0, 0, 0, 0],
            [2 * N, L + P, 2 * M, 0, 0, 0],
            [0, N, 2 * P, 0, 0, 0],
            [-2 * i * D, -i * E, 0, L, M, 0],
            [0, -i * D, -2 * i * E, N, P, 0],
            [0, 0, 0, i * D, i * E, 0],
        ],
        dtype=complex,
    )
    forcing = np.array([-F, -G, -H, i * B, i * C, -A], dtype=complex)
    if np.all(np.abs(mat.imag) == 0) and np.all(np.abs(forcing.imag) == 0):
        mat, forcing = mat.real.copy(), forcing.real.copy()
    return OdeSystem(mat, forcing)


def _expm_solution(sys: OdeSystem, c0: np.ndarray, t: float) -> np.ndarray:
    # augmented exponential; the upper-triangular block structure means the
    # (c1, c2, c3) block is propagated without reference to c4..c6
    n = 6
    aug = np.zeros((n + 1, n + 1), dtype=sys.matrix.dtype)
    aug[:n, :n] = sys.matrix * t
    aug[:n, n] = sys.forcing * t
    E = expm(aug)
    return E[:n, :n] @ c0 + E[:n, n]


def _rk_solution(sys: OdeSystem, c0: np.ndarray, t: float) -> np.ndarray:
    if t == 0:
        return c0.copy()
    y0 = c0.astype(complex)
    sol = solve_ivp(sys.rhs, (0.0, t), y0, method="DOP853", rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise IntegratorFailure(sol.message)
    return sol.y[:, -1]


def solve_coefficients(sys: OdeSystem, c0: GaussianChi, t: float, method: str = "auto") -> GaussianChi:
    """c(t) for the linear system; ``method`` is 'auto', 'expm' or 'rk'."""
    t = float(t)
    if not t >= 0:
        raise InvalidParameters(f"time must be >= 0, got {t!r}")
    y0 = c0.as_array().astype(sys.matrix.dtype)
    if method == "rk":
        out = _rk_solution(sys, y0, t)
    elif method in ("auto", "expm"):
        out = _expm_solution(sys, y0, t)
        if not np.all(np.isfinite(out)):
            if method == "expm":
                raise IntegratorFailure("matrix exponential produced non-finite values")
            out = _rk_solution(sys, y0, t)
    else:
        raise InvalidParameters(f"unknown method {method!r}")
    out = np.asarray(out)
    if np.iscomplexobj(out):
        scale = max(float(np.max(np.abs(out))), 1.0)
        if float(np.max(np.abs(out.imag))) > REAL_TOL * scale:
            raise NonRealResidue("complex Gaussian coefficients: B, D, E must be imaginary for real states")
        out = out.real
    return GaussianChi.from_array(out)


def caldeira_leggett_coeffs(p: ModelParams) -> LinearPDECoeffs:
    """PDE for the characteristic function under the Caldeira-Leggett equation
    (harmonic potential m omega^2 q^2 / 2; omega = 0 for the free particle)."""
    return LinearPDECoeffs(
        F=-p.k_damping,
        H=-p.x_damping,
        M=1.0 / p.mass,
        N=-p.mass * p.omega**2,
        P=-2.0 * p.gamma,
    )


def solve_caldeira_leggett(chi0: GaussianChi, p: ModelParams, t: float, method: str = "auto") -> GaussianChi:
    return solve_coefficients(build_ode(caldeira_leggett_coeffs(p)), chi0, t, method)
