"""File formats: delimited text tables, JSON records and run manifests.

Numbers are written in scientific notation with 9 significant digits via
Python's locale-independent formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import time
from pathlib import Path

import numpy as np

from .spectral_fit import NoiseSpectrum
from .thermal_inference import ThermalDataset

SPECTRUM_COLUMNS = ("frequency_hz", "psd_phi0sq_per_hz")
THERMAL_COLUMNS = ("T_K", "Q", "B_phi0sq_per_hz", "sigma_B")
SCAN_COLUMNS = ("rC_m", "lambda_per_s", "psd_N2_per_Hz")
CURVE_COLUMNS = ("rC_m", "lambda_upper_per_s")
DESIGN_COLUMNS = ("n_lay", "testable_lambda_per_s")
SPECTRUM_META_KEYS = ("n_av", "window", "sample_rate", "n_samples", "temperature_K", "Qprime", "Q")


class FormatError(ValueError):
    """Input file does not follow the expected layout."""


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".8e")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(fmt(v)) if np.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj):
    return atomic_write_text(path, dumps(obj))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON from {path}: {exc}") from exc


def table_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, columns, rows):
    return atomic_write_text(path, table_text(columns, rows))


def read_table(path, columns):
    """Read a CSV with the given header; returns one float array per column."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise FormatError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in columns if c not in header]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")
    idx = [header.index(c) for c in columns]
    try:
        data = np.array([[float(r[i]) for i in idx] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from exc
    if data.size == 0:
        raise FormatError(f"{path} has no data rows")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite values")
    return [data[:, j] for j in range(len(columns))]


# --- spectra -----------------------------------------------------------------

def meta_path_for(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_spectrum(path, spectrum: NoiseSpectrum, **meta):
    """Write ``path`` plus the sidecar ``<path>.meta.json``."""
    record = {"n_av": spectrum.n_av, "window": spectrum.window,
              "sample_rate": spectrum.sample_rate, "n_samples": spectrum.n_samples}
    for k in ("temperature_K", "Qprime", "Q"):
        if k in spectrum.meta:
            record[k] = spectrum.meta[k]
    record.update(meta)
    write_table(path, SPECTRUM_COLUMNS, zip(spectrum.freqs, spectrum.psd))
    write_json(meta_path_for(path), record)
    return Path(path), meta_path_for(path)


def read_spectrum(path, meta_path=None):
    f, p = read_table(path, SPECTRUM_COLUMNS)
    mp = meta_path_for(path) if meta_path is None else Path(meta_path)
    if not mp.exists():
        raise FormatError(f"missing metadata record {mp}")
    meta = read_json(mp)
    if "n_av" not in meta:
        raise FormatError(f"{mp}: n_av is required")
    extra = {k: meta[k] for k in ("temperature_K", "Qprime", "Q") if meta.get(k) is not None}
    try:
        return NoiseSpectrum(f, p, int(meta["n_av"]), meta.get("window", "blackman"),
                             meta.get("sample_rate"), meta.get("n_samples"), extra)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# --- thermal datasets ----------------------------------------------------------

def write_thermal(path, data: ThermalDataset):
    return write_table(path, THERMAL_COLUMNS, zip(data.T, data.Q, data.B, data.sigma_B))


def read_thermal(path):
    cols = read_table(path, THERMAL_COLUMNS)
    try:
        return ThermalDataset(*cols)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# --- manifests ----------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def timestamp():
    """UTC ISO time; honours ``SOURCE_DATE_EPOCH`` for reproducible manifests."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = time.gmtime(int(epoch)) if epoch else time.gmtime()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", t)


def write_manifest(path, command, config, inputs=(), outputs=(), status="ok", failed_stage=None,
                   extra=None):
    from . import __version__

    config_text = dumps(config)
    record = {
        "command": command,
        "config": json.loads(config_text),
        "config_hash": sha256_text(config_text),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in outputs],
        "tool_version": __version__,
        "timestamp": timestamp(),
        "status": status,
    }
    if failed_stage is not None:
        record["failed_stage"] = failed_stage
    if extra:
        record.update(extra)
    return write_json(path, record)
