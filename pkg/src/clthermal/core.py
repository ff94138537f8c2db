"""State objects and model parameters.

The characteristic function of the Wigner function is

    chi(k, x) = tr(rho exp(i (k q + x p) / hbar))

and a Gaussian state is stored through the six real exponent coefficients

    chi(k, x) = exp(-c1 k^2 - c2 k x - c3 x^2 - i c4 k - i c5 x - c6).
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameters, InvalidState


class Form(str, enum.Enum):
    """Which master equation is evolved."""

    LINDBLAD = "lindblad"
    NONLINDBLAD = "nonlindblad"

    @classmethod
    def parse(cls, value) -> "Form":
        if isinstance(value, Form):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if member.value == key:
                return member
        raise InvalidParameters(f"unknown equation form {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the particle and its bath.

    ``omega == 0`` selects the free particle. ``cutoff`` (the Drude frequency
    of the bath) only enters :func:`validity_ratios`.
    """

    mass: float = 1.0
    gamma: float = 0.1
    omega: float = 0.0
    temperature: float = 1.0
    hbar: float = 1.0
    kB: float = 1.0
    cutoff: float = math.inf
    form: Form = Form.LINDBLAD

    def __post_init__(self):
        object.__setattr__(self, "form", Form.parse(self.form))
        for name in ("mass", "gamma", "temperature", "hbar", "kB", "cutoff"):
            value = getattr(self, name)
            if not (value > 0) or math.isnan(value):
                raise InvalidParameters(f"{name} must be > 0, got {value!r}")
        if not (self.omega >= 0) or not math.isfinite(self.omega):
            raise InvalidParameters(f"omega must be finite and >= 0, got {self.omega!r}")
        for name in ("mass", "gamma", "temperature", "hbar", "kB"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameters(f"{name} must be finite")

    @classmethod
    def natural(cls, **kwargs) -> "ModelParams":
        """hbar = kB = m = 1; remaining fields from ``kwargs``."""
        base = dict(mass=1.0, hbar=1.0, kB=1.0)
        base.update(kwargs)
        return cls(**base)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def is_free(self) -> bool:
        return self.omega == 0.0

    @property
    def kT(self) -> float:
        return self.kB * self.temperature

    @property
    def lindblad(self) -> bool:
        return self.form is Form.LINDBLAD

    @property
    def x_damping(self) -> float:
        """Coefficient of the x^2 decay term, 2 gamma m kB T / hbar^2."""
        return 2.0 * self.gamma * self.mass * self.kT / self.hbar**2

    @property
    def k_damping(self) -> float:
        """Coefficient of the k^2 decay term; zero for the non-Lindblad form."""
        if not self.lindblad:
            return 0.0
        return self.gamma / (8.0 * self.mass * self.kT)

    @property
    def diffusion_constant(self) -> float:
        return self.kT / (self.mass * self.gamma)

    @property
    def thermal_momentum(self) -> float:
        """sqrt(m kB T), the Maxwell-Boltzmann momentum spread."""
        return math.sqrt(self.mass * self.kT)

    @property
    def thermal_length(self) -> float:
        """sqrt(kB T / (m omega^2)), the classical thermal position spread."""
        if self.is_free:
            raise InvalidParameters("thermal length needs omega > 0")
        return math.sqrt(self.kT / (self.mass * self.omega**2))

    @property
    def mu(self) -> complex:
        """sqrt(gamma^2 - omega^2), principal branch."""
        return cmath.sqrt(complex(self.gamma**2 - self.omega**2, 0.0))

    @property
    def relaxation_rate(self) -> float:
        """Re(gamma - mu): gamma when underdamped, gamma - sqrt(gamma^2 - omega^2) otherwise.

        The overdamped branch is evaluated as omega^2 / (gamma + mu) to stay
        accurate for omega << gamma.
        """
        g2, w2 = self.gamma**2, self.omega**2
        if w2 >= g2:
            return self.gamma
        return w2 / (self.gamma + math.sqrt(g2 - w2))


@dataclass(frozen=True)
class GaussianChi:
    """Exponent coefficients of a Gaussian characteristic function."""

    c1: float
    c2: float
    c3: float
    c4: float = 0.0
    c5: float = 0.0
    c6: float = 0.0

    def __call__(self, k, x):
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        expo = -(self.c1 * k * k + self.c2 * k * x + self.c3 * x * x + self.c6) - 1j * (self.c4 * k + self.c5 * x)
        return np.exp(expo)

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3, self.c4, self.c5, self.c6])

    @classmethod
    def from_array(cls, values) -> "GaussianChi":
        values = [float(v) for v in values]
        if len(values) != 6:
            raise InvalidState(f"expected 6 coefficients, got {len(values)}")
        return cls(*values)

    @property
    def quadratic(self) -> np.ndarray:
        """Symmetric matrix Q with c1 k^2 + c2 k x + c3 x^2 = z^T Q z, z = (k, x)."""
        return np.array([[self.c1, 0.5 * self.c2], [0.5 * self.c2, self.c3]])

    @property
    def linear(self) -> np.ndarray:
        return np.array([self.c4, self.c5])

    @property
    def determinant(self) -> float:
        """4 c1 c3 - c2^2."""
        return 4.0 * self.c1 * self.c3 - self.c2**2

    def gradient_at_origin(self) -> tuple[complex, complex]:
        """(d chi/dk, d chi/dx) at (0, 0)."""
        scale = math.exp(-self.c6)
        return -1j * self.c4 * scale, -1j * self.c5 * scale

    @classmethod
    def from_moments(cls, mean_q=0.0, mean_p=0.0, var_q=0.5, var_p=0.5, cov_qp=0.0, hbar=1.0) -> "GaussianChi":
        """Inverse of :func:`moments`; ``cov_qp`` is the symmetrised covariance."""
        h2 = hbar * hbar
        return cls(
            c1=var_q / (2.0 * h2),
            c2=cov_qp / h2,
            c3=var_p / (2.0 * h2),
            c4=-mean_q / hbar,
            c5=-mean_p / hbar,
        )

    @classmethod
    def wavepacket(cls, width: float, q0=0.0, p0=0.0, hbar=1.0, squeeze=1.0, cov_qp=0.0) -> "GaussianChi":
        """Gaussian state with position spread ``width`` and momentum spread
        ``squeeze * hbar / (2 width)`` (minimum uncertainty when both extra
        arguments take their defaults)."""
        var_q = width**2
        var_p = (squeeze * hbar / (2.0 * width)) ** 2
        return cls.from_moments(q0, p0, var_q, var_p, cov_qp, hbar)


ChiEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChiFunction:
    """Arbitrary characteristic function, optionally carrying its Gaussian form.

    ``evaluator`` must accept broadcastable arrays of k and x.
    """

    evaluator: ChiEvaluator
    gaussian: Optional[GaussianChi] = None
    label: str = field(default="", compare=False)

    def __call__(self, k, x):
        return self.evaluator(np.asarray(k, dtype=float), np.asarray(x, dtype=float))

    @classmethod
    def from_gaussian(cls, chi: GaussianChi, label: str = "gaussian") -> "ChiFunction":
        return cls(evaluator=chi, gaussian=chi, label=label)

    @classmethod
    def mixture(cls, weights, parts) -> "ChiFunction":
        """Convex (or generally linear) combination of characteristic functions."""
        weights = [float(w) for w in weights]
        parts = [p if isinstance(p, ChiFunction) else cls.from_gaussian(p) for p in parts]

        def evaluate(k, x):
            total = 0.0
            for w, part in zip(weights, parts):
                total = total + w * part(k, x)
            return total

        gaussian = parts[0].gaussian if len(parts) == 1 and weights[0] == 1.0 else None
        return cls(evaluate, gaussian, label="mixture")

    @classmethod
    def cat_state(cls, separation: float, width: float, hbar: float = 1.0, momentum: float = 0.0) -> "ChiFunction":
        """Even superposition of two wavepackets centred at +-separation/2.

        Built from the four complex Gaussian terms of |a><a|, |a><b|, |b><a|, |b><b|,
        including the interference terms.
        """
        centres = [(-0.5 * separation, -momentum), (0.5 * separation, momentum)]
        s2 = width * width

        def term(qa, pa, qb, pb, k, x):
            # integral over y of exp(i k y / hbar) psi_a(y + x/2) conj(psi_b(y - x/2)),
            # psi_c(q) = (2 pi s^2)^(-1/4) exp(-(q - q_c)^2 / (4 s^2) + i p_c q / hbar)
            u = x / 2.0
            # exponent in y: -[(y + u - qa)^2 + (y - u - qb)^2] / (4 s2) + i y (k + pa - pb) / hbar
            #                + i (pa u + pb u) / hbar
            lin = (qa - u + qb + u) / (2.0 * s2) + 1j * (k + pa - pb) / hbar
            const = -((u - qa) ** 2 + (u + qb) ** 2) / (4.0 * s2) + 1j * u * (pa + pb) / hbar
            # integral of exp(-y^2 / (2 s2) + lin y) is sqrt(2 pi s2) exp(s2 lin^2 / 2),
            # which cancels the wavefunction normalisation
            return np.exp(const + 0.5 * s2 * lin * lin)

        zero = np.zeros(1)
        overlap = term(*centres[0], *centres[1], zero, zero)[0].real
        norm = 1.0 / (2.0 + 2.0 * overlap)

        def evaluate(k, x):
            total = 0.0
            for qa, pa in centres:
                for qb, pb in centres:
                    total = total + term(qa, pa, qb, pb, k, x)
            return norm * total

        return cls(evaluate, None, label="cat")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[Check, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def __str__(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name} = {c.value!r} {c.detail}".rstrip() for c in self.checks]
        return "\n".join(lines)


def validate(chi: GaussianChi, normalization_tol: float = 0.0) -> ValidationReport:
    """Check the invariants of a Gaussian characteristic function.

    Failures are reported, never raised.
    """
    det = chi.determinant
    checks = (
        Check("finite", bool(np.all(np.isfinite(chi.as_array()))), float(np.max(np.abs(chi.as_array())))),
        Check("c1 > 0", chi.c1 > 0, chi.c1),
        Check("c3 > 0", chi.c3 > 0, chi.c3),
        Check("4 c1 c3 - c2^2 > 0", det > 0, det),
        Check("c6 = 0 (normalized)", abs(chi.c6) <= normalization_tol, chi.c6, f"chi(0,0) = {math.exp(-chi.c6)!r}"),
    )
    return ValidationReport(checks)


def require_valid(chi: GaussianChi) -> None:
    report = validate(chi)
    if not report.ok:
        raise InvalidState("invalid Gaussian state:\n" + str(report))


def uncertainty_product(chi: GaussianChi, hbar: float = 1.0) -> float:
    """var_q var_p - cov^2 in units of hbar^2/4; >= 1 for a positive density operator."""
    return (hbar**4 * chi.determinant) / (hbar**2 / 4.0)


@dataclass(frozen=True)
class Moments:
    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    cov_qp: float


def moments(chi: GaussianChi, p: ModelParams) -> Moments:
    """First and second moments of q and p.

    Derivatives of chi at the origin give <q> = -hbar c4, <p> = -hbar c5,
    var q = 2 hbar^2 c1, var p = 2 hbar^2 c3 and the symmetrised covariance
    <(qp + pq)/2> - <q><p> = hbar^2 c2.
    """
    require_valid(chi)
    h = p.hbar
    return Moments(
        mean_q=-h * chi.c4,
        mean_p=-h * chi.c5,
        var_q=2.0 * h * h * chi.c1,
        var_p=2.0 * h * h * chi.c3,
        cov_qp=h * h * chi.c2,
    )


@dataclass(frozen=True)
class ValidityRatios:
    r1: float
    r2: float
    threshold: float

    @property
    def warn(self) -> bool:
        return self.r1 > self.threshold or self.r2 > self.threshold

    def messages(self) -> list[str]:
        out = []
        if self.r1 > self.threshold:
            out.append(f"hbar*gamma / min(hbar*Omega, 2 pi kB T) = r1={self.r1:.6g} exceeds {self.threshold:g}")
        if self.r2 > self.threshold:
            out.append(f"hbar*omega / min(hbar*Omega, 2 pi kB T) = r2={self.r2:.6g} exceeds {self.threshold:g}")
        return out


def validity_ratios(p: ModelParams, threshold: float = 0.1) -> ValidityRatios:
    """Markov and weak-coupling validity ratios of the master equation."""
    scale = min(p.hbar * p.cutoff, 2.0 * math.pi * p.kT)
    return ValidityRatios(p.hbar * p.gamma / scale, p.hbar * p.omega / scale, threshold)
