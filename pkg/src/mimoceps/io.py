"""File formats: signal/cepstrum CSV, state-space model JSON, run manifests.

All numeric CSV output uses 17 significant digits so double-precision values
round-trip exactly.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .cepstrum import CepstrumSequence
from .exceptions import ValidationError
from .lti import SignalRecord, StateSpaceModel

FLOAT_FMT = "%.17g"


def _fmt(x):
    return FLOAT_FMT % float(x)


def write_signal_csv(path, rec, time_label="t"):
    """Signal record as CSV: time column followed by one column per channel."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([time_label, *rec.labels])
        for k in range(rec.n_samples):
            writer.writerow([_fmt(k * rec.sample_time),
                             *(_fmt(v) for v in rec.channels[:, k])])


def read_signal_csv(path):
    """Read a signal CSV (first column = time, remaining columns = channels)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty signal file") from None
        if len(header) < 2:
            raise ValidationError(f"{path}: need a time column and at least one channel")
        rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric value ({exc})") from None
    if data.shape[1] != len(header):
        raise ValidationError(f"{path}: row width does not match header")
    t = data[:, 0]
    dt = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    if dt <= 0:
        raise ValidationError(f"{path}: time column is not increasing")
    return SignalRecord(data[:, 1:].T, dt, tuple(header[1:]))


def write_scenario_csv(path, u, y):
    """Combined case-study CSV with columns t_min, q, Tj, CA, T."""
    if u.n_samples != y.n_samples:
        raise ValidationError("input and output records have different lengths")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_min", *u.labels, *y.labels])
        for k in range(u.n_samples):
            writer.writerow([_fmt(k * u.sample_time),
                             *(_fmt(v) for v in u.channels[:, k]),
                             *(_fmt(v) for v in y.channels[:, k])])


def write_cepstrum_csv(path, ceps):
    """Cepstrum CSV with columns k, c, provenance, zeroth_reliable."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "c", "provenance", "zeroth_reliable"])
        for k, c in enumerate(ceps.coeffs):
            writer.writerow([k, _fmt(c), ceps.provenance,
                             "true" if ceps.zeroth_reliable else "false"])


def read_cepstrum_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["k", "c"]:
            raise ValidationError(f"{path}: not a cepstrum CSV (header must start k,c)")
        rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(f"{path}: no coefficients")
    ks = [int(r[0]) for r in rows]
    if ks != list(range(len(rows))):
        raise ValidationError(f"{path}: k must ascend from 0 without gaps")
    coeffs = np.array([float(r[1]) for r in rows])
    provenance = rows[0][2] if len(rows[0]) > 2 else "data"
    zeroth = (rows[0][3].strip().lower() == "true") if len(rows[0]) > 3 else False
    return CepstrumSequence(coeffs, provenance=provenance, zeroth_reliable=zeroth)


def model_to_dict(model):
    """JSON-ready dict: dimensions plus row-major flat system matrices."""
    return {
        "n": model.n,
        "m": model.m,
        "l": model.l,
        "A": [float(v) for v in model.A.ravel()],
        "B": [float(v) for v in model.B.ravel()],
        "C": [float(v) for v in model.C.ravel()],
        "D": [float(v) for v in model.D.ravel()],
    }


def model_from_dict(data):
    """Parse the model JSON schema with field-level error messages."""
    for field in ("n", "m", "l", "A", "B", "C", "D"):
        if field not in data:
            raise ValidationError(f"model JSON: missing field '{field}'")
    try:
        n, m, l = int(data["n"]), int(data["m"]), int(data["l"])
    except (TypeError, ValueError):
        raise ValidationError("model JSON: n, m, l must be integers") from None
    if n < 0 or m < 1 or l < 1:
        raise ValidationError("model JSON: need n >= 0, m >= 1, l >= 1")
    shapes = {"A": (n, n), "B": (n, l), "C": (m, n), "D": (m, l)}
    mats = {}
    for name, shape in shapes.items():
        arr = np.asarray(data[name], dtype=float)
        if arr.ndim > 1:
            arr = arr.reshape(-1)
        if arr.size != shape[0] * shape[1]:
            raise ValidationError(
                f"model JSON: field '{name}' must hold {shape[0] * shape[1]} "
                f"values (row-major {shape[0]}x{shape[1]}), got {arr.size}"
            )
        mats[name] = arr.reshape(shape)
    return StateSpaceModel(mats["A"], mats["B"], mats["C"], mats["D"])


def load_model_json(path):
    path = Path(path)
    try:
        with path.open() as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(data)


def write_manifest(path, command, config_path, input_paths, output_paths, seed,
                   tool_version, timestamp):
    """Run manifest written alongside every command's outputs."""
    manifest = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "input_paths": [str(p) for p in input_paths],
        "output_paths": [str(p) for p in output_paths],
        "seed": seed,
        "tool_version": tool_version,
        "timestamp": timestamp,
    }
    with Path(path).open("w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
