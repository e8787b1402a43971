"""File formats.

Signal container (``.sgnb``), little-endian::

    b"SGNB"  u32 version  u32 d  u32 N_1..N_d  f64 L_1..L_d  f64 values (row-major)

Measurement sets are JSON; frame descriptors and run configs are INI text.
"""
from __future__ import annotations

import configparser
import csv
import json
import struct
from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np

from .blcore import BandLimitedSignal, Grid, SamplingLattice
from .errors import ValidationError
from .frames import COVER_THRESHOLD, curvelet_windows, meyer_frame
from .recovery import BandMeasurement, MeasurementSet

MAGIC = b"SGNB"
VERSION = 1


# ----------------------------------------------------------------- signals


def write_signal(path, sig):
    grid = sig.grid
    d = grid.dim
    head = MAGIC + struct.pack(f"<II{d}I{d}d", VERSION, d, *grid.shape, *grid.period)
    data = np.ascontiguousarray(sig.values, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(head + data)


def read_signal(path, support=None):
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValidationError(f"{path}: not an SGNB file")
    version, d = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported SGNB version {version}")
    if d not in (1, 2):
        raise ValidationError(f"{path}: unsupported dimension {d}")
    off = 12
    shape = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    period = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    n = int(np.prod(shape))
    if len(raw) - off != 8 * n:
        raise ValidationError(f"{path}: expected {n} values, found {(len(raw) - off) / 8:g}")
    values = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
    return BandLimitedSignal(Grid(tuple(shape), tuple(period)), values.astype(float), support)


def write_signal_csv(path, sig):
    vals = np.asarray(sig.values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{k}" for k in range(vals.ndim)] + ["value"])
        for idx in np.ndindex(vals.shape):
            w.writerow([*idx, repr(float(vals[idx]))])


def read_signal_csv(path, grid):
    vals = np.zeros(grid.shape)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            vals[tuple(int(v) for v in row[:-1])] = float(row[-1])
    return BandLimitedSignal(grid, vals)


# ------------------------------------------------------------ measurements


def _grid_dict(grid):
    return {"shape": list(grid.shape), "period": list(grid.period)}


def measurements_to_dict(ms):
    grid = ms.bands[0].lattice.grid
    return {
        "grid": _grid_dict(grid),
        "bands": [
            {
                "label": b.label,
                "generator": np.asarray(b.lattice.generator).tolist(),
                "shift": np.asarray(b.lattice.shift).tolist(),
                "normalization": b.normalization,
                "magnitudes": np.asarray(b.magnitudes).tolist(),
            }
            for b in ms.bands
        ],
    }


def measurements_from_dict(doc):
    grid = Grid(tuple(doc["grid"]["shape"]), tuple(doc["grid"]["period"]))
    bands = []
    for b in doc["bands"]:
        lat = SamplingLattice.build(grid, b["generator"], b["shift"])
        bands.append(BandMeasurement(b["label"], lat, np.array(b["magnitudes"], float), float(b["normalization"])))
    return MeasurementSet(tuple(bands)), grid


def write_measurements(path, ms):
    Path(path).write_text(json.dumps(measurements_to_dict(ms)))


def read_measurements(path):
    return measurements_from_dict(json.loads(Path(path).read_text()))


# ------------------------------------------------------------------ config


def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


@dataclass
class RunConfig:
    """Every tunable of a CLI run; all randomness derives from ``seed``."""

    kind: str = "meyer"
    J: int = 4
    jmax: int = 2
    shape: tuple = (1024,)
    period: tuple = (24.0,)
    beta: str = "quartic"
    cover_threshold: float = COVER_THRESHOLD
    alpha: float = 3.0 / 16.0
    s: float = 1.0
    restarts: int = 32
    max_iter: int = 200
    tol: float = 1e-6
    method: str = "auto"
    tau: float = 1e-4
    min_confidence: float = 0.9
    measurement_tol: float = 1e-5
    seed: int = 0
    jobs: int = 1
    deltas: tuple = (0.0, 1e-4, 1e-3)
    trials: int = 20
    noise: str = "uniform"

    SECTIONS = {
        "frame": ("kind", "J", "jmax", "beta", "cover_threshold"),
        "grid": ("shape", "period"),
        "sampling": ("alpha", "s"),
        "recovery": ("restarts", "max_iter", "tol", "method"),
        "stitching": ("tau", "min_confidence", "measurement_tol"),
        "run": ("seed", "jobs"),
        "probe": ("deltas", "trials", "noise"),
    }

    def __post_init__(self):
        if self.kind not in ("meyer", "curvelet"):
            raise ValidationError(f"unknown frame kind {self.kind!r}")
        if self.beta != "quartic":
            raise ValidationError(f"unsupported beta {self.beta!r}")
        if len(self.shape) != len(self.period):
            raise ValidationError("grid shape and period differ in length")
        if self.jobs < 1 or self.trials < 1 or self.restarts < 1:
            raise ValidationError("jobs, trials and restarts must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def grid(self):
        return Grid(tuple(int(n) for n in self.shape), tuple(float(p) for p in self.period))

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for sec, keys in self.SECTIONS.items():
            cp[sec] = {}
            for k in keys:
                v = getattr(self, k)
                cp[sec][k] = " ".join(repr(x) for x in v) if isinstance(v, tuple) else str(v)
        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


def _coerce(name, text):
    default = getattr(RunConfig(), name)
    if isinstance(default, tuple):
        vals = _floats(text)
        return tuple(int(v) for v in vals) if name == "shape" else vals
    if isinstance(default, bool):
        return str(text).lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return str(text).strip()


def config_from_ini(text, **overrides):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    vals = {}
    known = {k: sec for sec, keys in RunConfig.SECTIONS.items() for k in keys}
    for sec in cp.sections():
        for k, v in cp[sec].items():
            if k not in known or known[k] != sec:
                raise ValidationError(f"unknown config key [{sec}] {k}")
            try:
                vals[k] = _coerce(k, v)
            except ValueError as exc:
                raise ValidationError(f"bad value for [{sec}] {k}: {v!r}") from exc
    if "kind" in vals and vals["kind"] == "curvelet" and "shape" not in vals:
        vals.setdefault("shape", (256, 256))
        vals.setdefault("period", (1.5, 1.5))
    vals.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**vals)


def load_config(path=None, **overrides):
    text = "" if path is None else Path(path).read_text()
    return config_from_ini(text, **overrides)


# ------------------------------------------------------------------ frames


def build_frame(cfg):
    grid = cfg.grid()
    if cfg.kind == "meyer":
        return meyer_frame(cfg.J, grid)
    return curvelet_windows(cfg.jmax, grid)


def frame_descriptor(frame, cover_threshold=COVER_THRESHOLD):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["frame"] = {
        "kind": frame.kind,
        **{k: str(v) for k, v in frame.params.items()},
        "cover_threshold": repr(cover_threshold),
    }
    cp["grid"] = {
        "shape": " ".join(str(n) for n in frame.grid.shape),
        "period": " ".join(repr(p) for p in frame.grid.period),
    }
    buf = StringIO()
    cp.write(buf)
    return buf.getvalue()


def write_frame_descriptor(path, frame, cover_threshold=COVER_THRESHOLD):
    Path(path).write_text(frame_descriptor(frame, cover_threshold))


def read_frame_descriptor(path):
    """Rebuild the frame described by a descriptor file."""
    return build_frame(config_from_ini(Path(path).read_text()))


def write_band_filters(out_dir, frame):
    """One SGNB file of the real spatial filter per band; returns the paths."""
    out = []
    for b in frame.bands:
        p = Path(out_dir) / f"filter_{b.label}.sgnb"
        write_signal(p, frame.spatial_filter(b.label))
        out.append(p)
    return out


def dump_json(obj):
    """Deterministic JSON text (sorted keys, non-finite floats as strings)."""

    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, float)):
            f = float(o)
            return f if np.isfinite(f) else str(f)
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return clean(o.tolist())
        return o

    return json.dumps(clean(obj), sort_keys=True, indent=2)
