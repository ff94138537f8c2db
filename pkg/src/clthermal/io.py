"""CSV emitters with fixed column orders, and the run manifest.

Floats are written with ``repr`` (shortest round-trip decimal), so the
files are byte-stable across reruns of the same scenario.

Schemas::

    moments.csv   t, mean_q, mean_p, var_q, var_p, cov_qp
    elements.csv  t, basis, a, b, re, im      (also offdiag.csv)
    fits.csv      quantity, rate, r_squared, t_start, t_end
    field.csv     k, x, re, im
    oracle.csv    t, gamma_t, rel_error
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable

from . import __version__

MOMENTS_COLUMNS = ("t", "mean_q", "mean_p", "var_q", "var_p", "cov_qp")
ELEMENTS_COLUMNS = ("t", "basis", "a", "b", "re", "im")
FITS_COLUMNS = ("quantity", "rate", "r_squared", "t_start", "t_end")
FIELD_COLUMNS = ("k", "x", "re", "im")
ORACLE_COLUMNS = ("t", "gamma_t", "rel_error")


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_csv(path, columns: Iterable[str], rows: Iterable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def moments_row(t, mo) -> tuple:
    return (t, mo.mean_q, mo.mean_p, mo.var_q, mo.var_p, mo.cov_qp)


def element_row(t, basis, a, b, value) -> tuple:
    value = complex(value)
    return (t, getattr(basis, "value", str(basis)), a, b, value.real, value.imag)


def fit_row(quantity: str, fit) -> tuple:
    return (quantity, fit.rate, fit.r_squared, fit.window[0], fit.window[1])


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, files, config: dict, command: str, extra: dict | None = None) -> Path:
    """manifest.json listing every emitted file with its sha256 and the full
    resolved config. No timestamps, so identical runs give identical bytes."""
    out_dir = Path(out_dir)
    entries = [{"file": Path(f).name, "sha256": sha256(f)} for f in sorted(files, key=lambda f: Path(f).name)]
    doc = {"tool": "clthermal", "version": __version__, "command": command, "config": config, "files": entries}
    if extra:
        doc["results"] = extra
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
