"""Command-line scenario runner.

Exit codes: 0 success, 1 runtime failure (or a failed check), 2 bad config.
The log level comes from the LG_LOG environment variable
(error | warn | info | debug).
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import re
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import densmat, diagnostics, io, oracle, propagators
from .config import Scenario, list_presets, load_scenario
from .core import moments, validate, validity_ratios
from .densmat import Basis, ReferenceKind, ThermalReference
from .errors import CLThermalError, ConfigError

log = logging.getLogger("clthermal")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("LG_LOG", "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def parse_value_list(text: str, gamma: float) -> list:
    """Parse '0,0.5γ,γ,2g' into floats; a γ / g / gamma suffix multiplies by gamma."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        m = re.fullmatch(r"([-+0-9.eE]*)\s*(γ|g|gamma)?", item)
        if not m or (not m.group(1) and not m.group(2)):
            raise ConfigError(f"cannot parse sweep value {item!r}")
        num = float(m.group(1)) if m.group(1) not in ("", "+", "-") else (-1.0 if m.group(1) == "-" else 1.0)
        out.append(num * gamma if m.group(2) else num)
    if not out:
        raise ConfigError("--values is empty")
    return out


def _scenario(args) -> Scenario:
    if not args.config:
        raise ConfigError("--config is required")
    sc = load_scenario(args.config)
    if args.seed is not None and args.seed != sc.seed:
        sc.seed = args.seed
        if sc.initial_spec.get("preset") == "random":
            from .config import parse_initial

            sc.initial = parse_initial(sc.initial_spec, sc.params, sc.seed)
    if args.form:
        sc = sc.with_form(args.form)
    return sc


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _basis(sc: Scenario) -> Basis:
    if sc.outputs.basis:
        return Basis.parse(sc.outputs.basis)
    return Basis.MOMENTUM if sc.params.is_free else Basis.POSITION


def _default_coords(sc: Scenario) -> np.ndarray:
    if sc.outputs.element_coords:
        return np.asarray(sc.outputs.element_coords, dtype=float)
    p = sc.params
    scale = p.thermal_momentum if p.is_free else p.thermal_length
    return np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * scale


def _fit_records(sc: Scenario) -> list:
    p, chi0 = sc.params, sc.initial
    rows = []
    if p.is_free:
        for a, b in sc.outputs.offdiag:
            if a != b:
                fit = diagnostics.offdiag_decay_fit(a, b, chi0, p)
                rows.append((f"offdiag[{a!r},{b!r}]", fit))
        rows.append(("diag_correction", diagnostics.diag_correction_fit(2.0 * p.thermal_momentum, chi0, p)))
    else:
        rows.append(("ho_residual", diagnostics.relaxation_fit(chi0, p)))
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_evolve(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    p, chi0 = sc.params, sc.initial
    basis = _basis(sc)
    coords = _default_coords(sc) if sc.outputs.element_coords or not sc.outputs.offdiag else np.array([])
    mom_rows, el_rows, off_rows = [], [], []
    for t in sc.times:
        ct = propagators.evolve_gaussian(chi0, p, t)
        mom_rows.append(io.moments_row(t, moments(ct, p)))
        for a in coords:
            for b in coords:
                el_rows.append(io.element_row(t, basis, a, b, densmat.element(ct, basis, a, b, hbar=p.hbar).value))
        for a, b in sc.outputs.offdiag:
            off_rows.append(io.element_row(t, basis, a, b, densmat.element(ct, basis, a, b, hbar=p.hbar).value))
    files = []
    if sc.outputs.moments:
        files.append(io.write_csv(out / "moments.csv", io.MOMENTS_COLUMNS, mom_rows))
    if el_rows:
        files.append(io.write_csv(out / "elements.csv", io.ELEMENTS_COLUMNS, el_rows))
    if off_rows:
        files.append(io.write_csv(out / "offdiag.csv", io.ELEMENTS_COLUMNS, off_rows))
    if sc.outputs.fits:
        fits = _fit_records(sc)
        files.append(io.write_csv(out / "fits.csv", io.FITS_COLUMNS, [io.fit_row(q, f) for q, f in fits]))
        for q, f in fits:
            print(f"{q}: {f}")
    io.write_manifest(out, files, sc.resolved(), "evolve")
    print(f"wrote {len(files)} files + manifest.json to {out}")
    return 0


def cmd_equilibrium(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    p, chi0 = sc.params, sc.initial
    t = float(sc.times[-1])
    kind = ReferenceKind.FREE_MOMENTUM if p.is_free else ReferenceKind.HO_LONGTIME
    ref = ThermalReference(kind, p)
    coords = _default_coords(sc)
    ct = propagators.evolve_gaussian(chi0, p, t)
    dist = diagnostics.equilibrium_distance(ct, ref, coords, params=p)
    peak = diagnostics.reference_peak(ref, coords)
    fit = diagnostics.relaxation_fit(chi0, p)
    expected = diagnostics.expected_relaxation_rate(p, chi0)
    rows = [io.element_row(t, ref.basis, a, b, densmat.element(ct, ref.basis, a, b, hbar=p.hbar).value)
            for a in coords for b in coords]
    files = [io.write_csv(out / "elements.csv", io.ELEMENTS_COLUMNS, rows),
             io.write_csv(out / "fits.csv", io.FITS_COLUMNS, [io.fit_row("relaxation", fit)])]
    print(f"t = {t!r}  reference = {kind.value}")
    print(f"distance = {dist:.6e}  (relative to peak {dist / peak:.3e})")
    print(f"fitted relaxation rate = {fit.rate:.8g}, expected {expected:.8g} "
          f"(rel. diff {abs(fit.rate / expected - 1):.2e}, r^2 = {fit.r_squared:.10f})")
    io.write_manifest(out, files, sc.resolved(), "equilibrium",
                      {"distance": repr(dist), "peak": repr(peak), "rate": repr(fit.rate), "expected": repr(expected)})
    return 0


SWEEP_PARAMS = ("omega", "gamma", "temperature", "mass")


def _sweep_one(job):
    idx, stage, param, value, sc = job
    p = sc.params.replace(**{param: value})
    fit = diagnostics.relaxation_fit(sc.initial, p)
    expected = diagnostics.expected_relaxation_rate(p, sc.initial)
    io.write_csv(stage / f"{idx:05d}.csv", io.FITS_COLUMNS, [io.fit_row(f"relaxation[{param}={value!r}]", fit)])
    return idx, value, fit, expected


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {SWEEP_PARAMS}")
    values = parse_value_list(args.values, sc.params.gamma)
    out = _out_dir(args)
    stage = out / ".staging"
    stage.mkdir(exist_ok=True)
    jobs = [(i, stage, args.param, v, sc) for i, v in enumerate(values)]
    threads = max(1, args.threads or 1)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = []
    for i in range(len(values)):
        rows.extend(io.read_csv(stage / f"{i:05d}.csv"))
    shutil.rmtree(stage)
    path = io.write_csv(out / "fits.csv", io.FITS_COLUMNS, [[r[c] for c in io.FITS_COLUMNS] for r in rows])
    print(f"{args.param:>12} {'fitted':>14} {'expected':>14} {'rel.diff':>10}")
    for _, value, fit, expected in sorted(results, key=lambda r: r[0]):
        rel = abs(fit.rate / expected - 1.0)
        print(f"{value:12.6g} {fit.rate:14.8g} {expected:14.8g} {rel:10.2e} {'PASS' if rel < 0.05 else 'FAIL'}")
    io.write_manifest(out, [path], {**sc.resolved(), "sweep": {"param": args.param, "values": [repr(v) for v in values]}},
                      "sweep")
    return 0


def cmd_oracle_compare(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    p, chi0, osp = sc.params, sc.initial, sc.oracle
    times = [g / p.gamma for g in osp.gamma_times]
    spec = oracle.GridSpec.default_for(chi0, p, max(times), n=osp.n, safety=osp.safety)
    log.info("grid %dx%d, dt=%g", spec.n_k, spec.n_x, spec.dt)
    fld = oracle.integrate(chi0, p, max(times), spec, snapshots=times)
    rows, worst = [], 0.0
    print(f"{'gamma t':>8} {'rel. sup error':>15}")
    for g, t in zip(osp.gamma_times, times):
        err = oracle.compare(fld, lambda k, x, t=t: propagators.evolve_pointwise(chi0, p, t, k, x), t)
        worst = max(worst, err)
        rows.append((t, g, err))
        print(f"{g:8.3g} {err:15.3e} {'PASS' if err < osp.tolerance else 'FAIL'}")
    files = [io.write_csv(out / "oracle.csv", io.ORACLE_COLUMNS, rows)]
    if sc.outputs.field:
        files.append(io.write_csv(out / "field.csv", io.FIELD_COLUMNS, fld.rows()))
    io.write_manifest(out, files, sc.resolved(), "oracle-compare", {"max_rel_error": repr(worst)})
    ok = worst < osp.tolerance
    print(f"max error {worst:.3e} vs tolerance {osp.tolerance:g}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def limit_checks(sc: Scenario) -> list:
    """(name, value, threshold, passed) rows for the omega -> 0 and high-T limits."""
    p = sc.params
    rows = []
    base = p.replace(omega=p.gamma) if p.is_free else p
    ratios = (1e-2, 1e-3, 1e-4)
    t = 1.0 / base.gamma
    diffs = [propagators.free_limit_check(base.replace(omega=r * base.gamma), t) for r in ratios]
    order = float(np.polyfit(np.log(ratios), np.log(diffs), 1)[0])
    rows.append(("omega->0: HO vs free order", order, "2.0 +- 0.1", abs(order - 2.0) <= 0.1))
    small = base.replace(omega=1e-3 * base.gamma)
    kern = propagators.ho_kernel(small, t)
    m_exact = np.array([kern.M1, kern.M2, kern.M3], dtype=float)
    m_taylor = np.array(propagators.m_small_omega(small, t), dtype=float)
    dev = float(np.max(np.abs(m_taylor / m_exact - 1.0)))
    rows.append(("omega->0: M_i Taylor form", dev, "< 1e-5", dev < 1e-5))
    if not p.is_free:
        qs = np.linspace(-3.0, 3.0, 61) * p.thermal_length
        hi = max(abs(densmat.ho_longtime(q, q, p).real / densmat.thermal_ho(q, q, p) - 1.0) for q in qs)
        u = p.hbar * p.omega / p.kT
        tol = max(10.0 * u * u, 1e-3)
        rows.append((f"high-T diagonal (hbar w/kT={u:.3g})", hi, f"< {tol:.3g}", hi < tol))
        lam = p.hbar / math.sqrt(p.mass * p.kT)
        band = [(q, q + d) for q in qs[::5] for d in (-lam, 0.0, lam)]
        pr = max(abs(densmat.ho_longtime(a, b, p, alternate_sign=True) / densmat.ho_longtime(a, b, p) - 1.0)
                 for a, b in band)
        rows.append(("long-time state sign variants agree", pr, "< 1e-6", pr < 1e-6))
        st = propagators.stationary_chi(p)
        sd = max(abs(densmat.element(st, Basis.POSITION, a, b, hbar=p.hbar).value / densmat.ho_longtime(a, b, p) - 1.0)
                 for a, b in band)
        rows.append(("stationary chi vs long-time state", sd, "< 1e-10", sd < 1e-10))
    return rows


def cmd_limits(args) -> int:
    names = [args.config] if args.config else [n[:-5] for n in list_presets()]
    all_ok = True
    for name in names:
        ns = argparse.Namespace(**{**vars(args), "config": name})
        sc = _scenario(ns)
        print(f"[{sc.name}]")
        for label, value, thr, ok in limit_checks(sc):
            all_ok &= bool(ok)
            print(f"  {label:<42} {value:12.4e}  {thr:<12} {'PASS' if ok else 'FAIL'}")
    print("all limit checks passed" if all_ok else "some limit checks FAILED")
    return 0 if all_ok else 1


def cmd_validate_config(args) -> int:
    sc = _scenario(args)
    print(f"{sc.name}: {sc.params}")
    print(validate(sc.initial))
    vr = validity_ratios(sc.params)
    for msg in vr.messages():
        print(f"warning: {msg}")
        log.warning(msg)
    print(f"schedule: {len(sc.times)} times in [{float(sc.times[0])!r}, {float(sc.times[-1])!r}]")
    print("config OK")
    return 0


COMMANDS = {
    "evolve": (cmd_evolve, "evolve the initial state over the schedule and emit CSVs"),
    "equilibrium": (cmd_equilibrium, "distance to the thermal reference and fitted relaxation rate"),
    "sweep": (cmd_sweep, "relaxation-rate fits over a parameter sweep"),
    "oracle-compare": (cmd_oracle_compare, "grid integrator vs exact propagator"),
    "limits": (cmd_limits, "omega -> 0 and high-temperature limit checks"),
    "validate-config": (cmd_validate_config, "parse and check a scenario"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario TOML (or the name of a shipped preset)")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--form", choices=("lindblad", "nonlindblad"), help="override the equation form")
    parser = argparse.ArgumentParser(prog="clthermal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "sweep":
            sp.add_argument("--param", default="omega", help=f"one of {', '.join(SWEEP_PARAMS)}")
            sp.add_argument("--values", required=True, help="comma list; suffix γ/g multiplies by gamma")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CLThermalError, RuntimeError, ArithmeticError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
