"""TOML scenario files.

A scenario has four sections::

    seed = 7

    [params]            # ModelParams fields; omega = 0 -> free particle
    gamma = 0.1
    omega = 0.3
    temperature = 10.0
    form = "lindblad"

    [initial]           # one of: coefficients | moments | preset
    moments = { mean_q = 1.0, mean_p = 0.0, var_q = 0.5, var_p = 0.5, cov_qp = 0.0 }

    [schedule]          # explicit list or a range; unit "time" or "1/gamma"
    times = [0.0, 1.0, 2.0]
    unit = "1/gamma"

    [outputs]
    moments = true
    elements = { coords = [-1.0, 0.0, 1.0] }
    offdiag = [[0.0, 1.0]]
    fits = true

An optional ``[oracle]`` table configures ``oracle-compare``.
"""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .core import Form, GaussianChi, ModelParams, uncertainty_product, validate
from .errors import CLThermalError, ConfigError

PARAM_KEYS = ("mass", "gamma", "omega", "temperature", "hbar", "kB", "cutoff", "form")
MOMENT_KEYS = ("mean_q", "mean_p", "var_q", "var_p", "cov_qp")
STATE_PRESETS = ("ground", "thermal", "random", "displaced")


@dataclass
class OutputSpec:
    moments: bool = True
    element_coords: tuple = ()
    basis: Optional[str] = None
    offdiag: tuple = ()
    fits: bool = False
    field: bool = False


@dataclass
class OracleSpec:
    gamma_times: tuple = (0.25, 0.5, 1.0)
    n: int = 257
    tolerance: float = 1e-4
    safety: float = 0.25


@dataclass
class Scenario:
    params: ModelParams
    initial: GaussianChi
    times: np.ndarray
    outputs: OutputSpec = field(default_factory=OutputSpec)
    oracle: OracleSpec = field(default_factory=OracleSpec)
    seed: int = 0
    name: str = "scenario"
    raw: dict = field(default_factory=dict)
    initial_spec: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Fully resolved configuration as plain data (embedded in manifests)."""
        p = asdict(self.params)
        p["form"] = self.params.form.value
        if math.isinf(p["cutoff"]):
            p["cutoff"] = "inf"
        return {
            "name": self.name,
            "seed": self.seed,
            "params": p,
            "initial": {"spec": self.initial_spec, "coefficients": [repr(float(v)) for v in self.initial.as_array()]},
            "schedule": [repr(float(t)) for t in self.times],
            "outputs": asdict(self.outputs),
            "oracle": asdict(self.oracle),
        }

    def with_form(self, form) -> "Scenario":
        out = Scenario(**{**self.__dict__})
        out.params = self.params.replace(form=Form.parse(form))
        return out


def preset_path(name: str) -> Path:
    """Path of a shipped preset (``name`` with or without ``.toml``)."""
    fname = name if name.endswith(".toml") else name + ".toml"
    ref = resources.files("clthermal") / "presets" / fname
    return Path(str(ref))


def list_presets() -> list:
    return sorted(p.name for p in (resources.files("clthermal") / "presets").iterdir() if p.name.endswith(".toml"))


def _float(section: str, key: str, value) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    return float(value)


def parse_params(tbl: dict) -> ModelParams:
    unknown = set(tbl) - set(PARAM_KEYS)
    if unknown:
        raise ConfigError(f"[params] unknown keys: {sorted(unknown)}")
    kw = {k: (v if k == "form" else _float("params", k, v)) for k, v in tbl.items()}
    try:
        return ModelParams(**kw)
    except CLThermalError as exc:
        raise ConfigError(f"[params] {exc}") from exc


def random_state(rng: np.random.Generator, p: ModelParams) -> GaussianChi:
    """A random valid Gaussian near the thermal scales of ``p``."""
    sq = 1.0 if p.is_free else p.thermal_length
    sp = p.thermal_momentum
    var_q = (0.25 + rng.random()) * sq * sq * 0.5
    var_p = (0.25 + rng.random()) * sp * sp * 0.5
    hb2 = 0.25 * p.hbar**2
    # keep var_q var_p - cov^2 >= hbar^2/4 with a margin
    var_p = max(var_p, 2.0 * hb2 / var_q)
    cov_max = math.sqrt(max(var_q * var_p - hb2, 0.0))
    cov = (2.0 * rng.random() - 1.0) * 0.5 * cov_max
    return GaussianChi.from_moments(rng.normal() * sq, rng.normal() * sp, var_q, var_p, cov, hbar=p.hbar)


def parse_initial(tbl: dict, p: ModelParams, seed: int) -> GaussianChi:
    kinds = [k for k in ("coefficients", "moments", "preset") if k in tbl]
    if len(kinds) != 1:
        raise ConfigError("[initial] needs exactly one of 'coefficients', 'moments', 'preset'")
    kind = kinds[0]
    try:
        if kind == "coefficients":
            vals = tbl["coefficients"]
            if not isinstance(vals, list) or len(vals) not in (6, 12):
                raise ConfigError("[initial] coefficients must list c1..c6 (or 12 numbers: re/im pairs)")
            if len(vals) == 12:
                arr = np.array(vals[0::2], dtype=float) + 1j * np.array(vals[1::2], dtype=float)
            else:
                arr = np.array([_float("initial", "coefficients", v) for v in vals], dtype=complex)
            chi = GaussianChi.from_array(arr)
        elif kind == "moments":
            m = tbl["moments"]
            unknown = set(m) - set(MOMENT_KEYS)
            if unknown:
                raise ConfigError(f"[initial] unknown moment keys: {sorted(unknown)}")
            chi = GaussianChi.from_moments(**{k: _float("initial", k, v) for k, v in m.items()}, hbar=p.hbar)
        else:
            name = tbl["preset"]
            if name == "random":
                chi = random_state(np.random.default_rng(seed), p)
            elif name == "ground":
                width = 1.0 if p.is_free else math.sqrt(p.hbar / (2.0 * p.mass * p.omega))
                chi = GaussianChi.wavepacket(width, hbar=p.hbar)
            elif name == "displaced":
                width = 1.0 if p.is_free else math.sqrt(p.hbar / (2.0 * p.mass * p.omega))
                q0 = _float("initial", "q0", tbl.get("q0", 1.0))
                p0 = _float("initial", "p0", tbl.get("p0", 0.0))
                chi = GaussianChi.wavepacket(width, q0=q0, p0=p0, hbar=p.hbar)
            elif name == "thermal":
                if p.is_free:
                    raise ConfigError("[initial] preset 'thermal' needs omega > 0")
                from .propagators import stationary_chi

                chi = stationary_chi(p)
            else:
                raise ConfigError(f"[initial] unknown preset {name!r}; choose from {STATE_PRESETS}")
    except ConfigError:
        raise
    except (CLThermalError, TypeError, ValueError) as exc:
        raise ConfigError(f"[initial] {exc}") from exc
    report = validate(chi)
    if not report.ok:
        raise ConfigError(f"[initial] state is not valid:\n{report}")
    if uncertainty_product(chi, p.hbar) < 1.0 - 1e-9:
        raise ConfigError("[initial] var_q var_p - cov_qp^2 is below hbar^2/4: not a density operator")
    return chi


def parse_schedule(tbl: dict, p: ModelParams) -> np.ndarray:
    unit = tbl.get("unit", "time")
    if unit not in ("time", "1/gamma"):
        raise ConfigError("[schedule] unit must be 'time' or '1/gamma'")
    if "times" in tbl:
        ts = np.array([_float("schedule", "times", v) for v in tbl["times"]], dtype=float)
    elif "stop" in tbl:
        start = _float("schedule", "start", tbl.get("start", 0.0))
        stop = _float("schedule", "stop", tbl["stop"])
        num = tbl.get("num", 11)
        if not isinstance(num, int) or num < 1:
            raise ConfigError("[schedule] num must be a positive integer")
        spacing = tbl.get("spacing", "linear")
        if spacing == "linear":
            ts = np.linspace(start, stop, num)
        elif spacing == "log":
            if not start > 0:
                raise ConfigError("[schedule] log spacing needs start > 0")
            ts = np.geomspace(start, stop, num)
        else:
            raise ConfigError("[schedule] spacing must be 'linear' or 'log'")
    else:
        raise ConfigError("[schedule] needs 'times' or 'start'/'stop'/'num'")
    if unit == "1/gamma":
        ts = ts / p.gamma
    if ts.size == 0 or np.any(ts < 0) or np.any(~np.isfinite(ts)) or np.any(np.diff(ts) <= 0):
        raise ConfigError("[schedule] times must be finite, >= 0 and strictly increasing")
    return ts


def parse_outputs(tbl: dict) -> OutputSpec:
    out = OutputSpec()
    out.moments = tbl.get("moments", True)
    if not isinstance(out.moments, bool):
        raise ConfigError("[outputs] moments must be true or false")
    el = tbl.get("elements")
    if el is not None:
        if isinstance(el, list):
            el = {"coords": el}
        out.element_coords = tuple(_float("outputs", "elements", v) for v in el.get("coords", ()))
        out.basis = el.get("basis")
    pairs = tbl.get("offdiag", ())
    try:
        out.offdiag = tuple((float(a), float(b)) for a, b in pairs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("[outputs] offdiag must be a list of [a, b] pairs") from exc
    out.fits = bool(tbl.get("fits", False))
    out.field = bool(tbl.get("field", False))
    return out


def parse_oracle(tbl: dict) -> OracleSpec:
    spec = OracleSpec()
    if "gamma_times" in tbl:
        spec.gamma_times = tuple(_float("oracle", "gamma_times", v) for v in tbl["gamma_times"])
    if "n" in tbl:
        spec.n = int(tbl["n"])
    if "tolerance" in tbl:
        spec.tolerance = _float("oracle", "tolerance", tbl["tolerance"])
    if "safety" in tbl:
        spec.safety = _float("oracle", "safety", tbl["safety"])
    return spec


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    for sec in ("params", "initial", "schedule"):
        if sec not in data or not isinstance(data[sec], dict):
            raise ConfigError(f"missing [{sec}] section")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    p = parse_params(data["params"])
    chi = parse_initial(data["initial"], p, seed)
    times = parse_schedule(data["schedule"], p)
    return Scenario(p, chi, times, parse_outputs(data.get("outputs", {})), parse_oracle(data.get("oracle", {})),
                    seed, name, data, dict(data["initial"]))


def load_scenario(path) -> Scenario:
    """Read a scenario file; bare names resolve to shipped presets."""
    path = Path(path)
    if not path.exists() and not path.parent.parts:
        candidate = preset_path(path.name)
        if candidate.exists():
            path = candidate
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(data, path.stem)
