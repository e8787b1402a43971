"""Constructions and probes that sit outside the main pipeline.

* the sharpness counterexample: two signals with equal magnitudes on an
  undersampled lattice that are not equal up to sign;
* the single-band instability: a large perturbation nearly invisible to one
  filter;
* empirical stability probes of the full pipeline under magnitude noise;
* redundancy factors of the sign-blind sampling schemes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blcore import BandLimitedSignal, FrequencySupport, Grid, SamplingLattice, signal_distance
from .errors import CommensurabilityError, PipelineError, ValidationError
from .frames import curvelet_windows, meyer_frame, working_support
from .recovery import RecoveryConfig, measure
from .sampling import MEYER_ALPHA_MAX, axis_aligned_lattices, meyer_lattices
from .stitching import PipelineConfig, full_pipeline

# level-one reference spacings for the curvelet redundancy count
CURVELET_DELTA = (14.0 / 3.0, 10.0 * math.pi / 9.0)
CURVELET_ALPHA = (3.0 * 2.0**-5, 9.0 / (20.0 * math.pi))
MAGNITUDE_TOL = 1e-10
SEPARATION_MIN = 0.5


# ---------------------------------------------------------------- signals


def random_decaying_signal(support, rng, width=None, center=None, kmax=None):
    """Random real signal in ``support`` with a Gaussian envelope, re-projected onto the support.

    ``width`` defaults to a twelfth of the period; ``kmax`` optionally limits
    the raw spectrum to ``|k_i| <= kmax`` before the envelope is applied.
    """
    grid = support.grid
    mask = np.asarray(support.mask).copy()
    if kmax is not None:
        for k in grid.bins():
            mask &= np.abs(k) <= kmax
    spec = np.zeros(grid.shape, complex)
    spec[mask] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    v = np.fft.ifftn(spec).real
    width = np.asarray(grid.period) / 12 if width is None else np.broadcast_to(width, (grid.dim,))
    center = np.asarray(grid.period) / 2 if center is None else np.broadcast_to(center, (grid.dim,))
    r2 = sum(((x - c) / w) ** 2 for x, c, w in zip(grid.coordinates(), center, width))
    f = BandLimitedSignal.project(grid, v * np.exp(-0.5 * r2), support)
    return f.scaled(1.0 / f.norm())


def meyer_setup(J=4, alpha=MEYER_ALPHA_MAX, n=1024, period=24.0, check=True):
    """Meyer frame, its lattices for translation step ``alpha``, and its working support."""
    grid = Grid((n,), (period,))
    frame = meyer_frame(J, grid)
    return frame, meyer_lattices(frame, alpha, check=check), working_support(frame)


def curvelet_setup(jmax=2, n=256, period=1.5):
    grid = Grid((n, n), (period, period))
    frame = curvelet_windows(jmax, grid)
    return frame, axis_aligned_lattices(frame), working_support(frame)


# ---------------------------------------------------------- counterexample


@dataclass
class Counterexample:
    h1: BandLimitedSignal
    h2: BandLimitedSignal
    lattice: SamplingLattice
    support: FrequencySupport
    u: np.ndarray
    v: np.ndarray
    discrepancy: float
    separation: float

    @property
    def passed(self):
        return self.discrepancy <= MAGNITUDE_TOL and self.separation >= SEPARATION_MIN

    def summary(self):
        return {
            "discrepancy": self.discrepancy,
            "separation": self.separation,
            "lattice_size": self.lattice.size,
            "passed": self.passed,
        }


def counterexample_grid(s, n_lattice=16, oversample=4):
    """1D grid on which ``(2s)^-1 Z`` has ``n_lattice`` periodic sites."""
    if n_lattice % 4:
        raise CommensurabilityError("n_lattice must be a multiple of 4 so the tone s/2 is a grid bin")
    return Grid((n_lattice * oversample,), (n_lattice / (2.0 * s),))


def _check_tone(grid, s, axis=0):
    k = s / 2 * grid.period[axis]
    if abs(k - round(k)) > 1e-9:
        raise CommensurabilityError(f"tone s/2 = {s / 2} is not a frequency of the grid")


def _separation(h1, h2):
    return min(
        np.linalg.norm(h1.values - h2.values), np.linalg.norm(h1.values + h2.values)
    ) / np.linalg.norm(h1.values)


def counterexample_pair(s, grid=None, n_lattice=16):
    """Signals in ``|xi| < 1/2`` with equal magnitudes on ``(2s)^-1 Z`` but ``h1 != +-h2``.

    ``u = sin(pi s x)`` and ``v = cos(pi s x)`` give ``u v = sin(2 pi s x) / 2``,
    which vanishes on the lattice; ``h1 = (u+v)/2`` and ``h2 = (v-u)/2``
    satisfy ``h1^2 - h2^2 = u v``.  Pure tones are admissible on the
    periodic grid, so no taper is applied.
    """
    if not 0 < s < 1:
        raise ValidationError(f"s must lie in (0, 1), got {s}")
    grid = counterexample_grid(s, n_lattice) if grid is None else grid
    if grid.dim != 1:
        raise ValidationError("counterexample_pair needs a 1D grid")
    _check_tone(grid, s)
    F = FrequencySupport.box(grid, 0.5)
    X = SamplingLattice.build(grid, [[1.0 / (2 * s)]])
    x = grid.coordinates()[0]
    u, v = np.sin(np.pi * s * x), np.cos(np.pi * s * x)
    h1 = BandLimitedSignal(grid, (u + v) / 2, F)
    h2 = BandLimitedSignal(grid, (v - u) / 2, F)
    disc = float(np.abs(np.abs(h1.values[X.sites]) - np.abs(h2.values[X.sites])).max())
    return Counterexample(h1, h2, X, F, u, v, disc, float(_separation(h1, h2)))


def sharpness_bracket(n_lattice=8, s=0.5):
    """Oracle candidate counts for one counterexample at the critical and the undersampled lattice."""
    from .recovery import recover_band_oracle

    ce = counterexample_pair(s, n_lattice=n_lattice)
    grid, F = ce.h1.grid, ce.support
    out = {}
    for name, step in (("critical", 0.5), ("undersampled", 1.0 / (2 * s))):
        X = SamplingLattice.build(grid, [[step]])
        out[name] = len(recover_band_oracle(np.abs(ce.h1.values[X.sites]), X, F))
    return out


@dataclass
class TensorCounterexample:
    g1: BandLimitedSignal
    g2: BandLimitedSignal
    lattice: SamplingLattice
    axis: int
    discrepancy: float
    separation: float

    @property
    def passed(self):
        return self.discrepancy <= MAGNITUDE_TOL and self.separation >= SEPARATION_MIN


def tensor_counterexample(s, grid=None):
    """``g_j(x) = f(x_other) h_j(x_axis)`` with the 1D pair on the first sub-critical axis.

    ``f`` is a fixed low-frequency profile; the default grid has period 8 on
    the other axis and ``8 / s_i`` on the sub-critical one.
    """
    s = tuple(float(v) for v in s)
    if len(s) != 2:
        raise ValidationError("tensor_counterexample needs two dilations")
    sub = [i for i, v in enumerate(s) if v < 1]
    if not sub:
        raise ValidationError(f"no sub-critical axis in s = {s}")
    if any(v <= 0 for v in s):
        raise ValidationError("dilations must be positive")
    axis = sub[0]
    if grid is None:
        shape, period = [], []
        for i, v in enumerate(s):
            g1d = counterexample_grid(v) if i == axis else Grid((32,), (8.0,))
            shape.append(g1d.shape[0])
            period.append(g1d.period[0])
        grid = Grid(tuple(shape), tuple(period))
    _check_tone(grid, s[axis], axis)
    other = 1 - axis
    X = SamplingLattice.build(grid, np.diag([1.0 / (2 * v) for v in s]))
    F = FrequencySupport.box(grid, 0.5)
    coords = grid.coordinates()
    xa, xo = coords[axis], coords[other]
    Lo = grid.period[other]
    f = 1.0 + 0.6 * np.cos(2 * np.pi * xo / Lo) + 0.3 * np.sin(4 * np.pi * xo / Lo)
    u, v = np.sin(np.pi * s[axis] * xa), np.cos(np.pi * s[axis] * xa)
    g1 = BandLimitedSignal(grid, f * (u + v) / 2, F)
    g2 = BandLimitedSignal(grid, f * (v - u) / 2, F)
    disc = float(np.abs(np.abs(g1.values[X.sites]) - np.abs(g2.values[X.sites])).max())
    return TensorCounterexample(g1, g2, X, axis, disc, float(_separation(g1, g2)))


# ------------------------------------------------------------- instability


@dataclass
class Instability:
    f_tilde: BandLimitedSignal
    p: BandLimitedSignal
    difference_norm: float
    filtered_norm: float
    bins: int

    @property
    def ratio(self):
        return self.difference_norm / self.filtered_norm if self.filtered_norm > 0 else math.inf


def single_band_instability(f, frame, label, eps):
    """``f + p`` with ``||p|| = 1`` and ``||p * psi_lambda|| <= eps``.

    p spreads evenly over working-band bins where ``0 < |psi^_lambda| <= eps``;
    when the filter has no such small-but-nonzero bins it uses the bins where
    the filter vanishes.
    """
    grid = frame.grid
    mag = np.abs(frame[label].spectrum)
    wb = np.asarray(frame.working_band)
    mirror = tuple(np.ix_(*[(-np.arange(n)) % n for n in grid.shape]))
    small = wb & (mag <= eps) & (mag > 0)
    small &= small[mirror]
    if not small.any():
        small = wb & (mag == 0)
        small &= small[mirror]
    if not small.any():
        raise ValidationError(f"no off-band room: every working-band bin has |psi^_{label}| > {eps}")
    spec = np.where(small, 1.0 + 0j, 0)
    p = np.fft.ifftn(spec).real
    p = BandLimitedSignal(grid, p / math.sqrt(np.sum(p**2) * grid.cell_volume))
    pf = np.fft.ifftn(np.fft.fftn(p.values) * frame[label].spectrum).real
    filt = float(math.sqrt(np.sum(pf**2) * grid.cell_volume))
    ft = BandLimitedSignal(grid, np.asarray(f.values) + p.values)
    return Instability(ft, p, p.norm(), filt, int(small.sum()))


# ----------------------------------------------------------- stability probe


def perturb(measurements, delta, rng, kind="uniform", targets=None):
    """Noisy copy of ``measurements``.

    ``uniform`` adds ``delta * max`` times U(-1, 1) per band and clips at 0;
    ``attenuate`` scales the targeted bands by ``max(0, 1 - delta)``.
    """
    targets = set(measurements.labels if targets is None else targets)
    out = measurements
    for b in measurements.bands:
        if b.label not in targets:
            continue
        m = b.magnitudes
        if kind == "uniform":
            noisy = np.clip(m + delta * m.max(initial=0) * rng.uniform(-1, 1, m.shape), 0, None)
        elif kind == "attenuate":
            noisy = m * max(0.0, 1.0 - delta)
        else:
            raise ValidationError(f"unknown noise kind {kind!r}")
        out = out.replace(b.label, noisy)
    return out


@dataclass
class ProbeResult:
    rows: list
    deltas: list
    kind: str
    seed: int
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "trial", "status", "error", "measurement_residual", "message"])
        for r in self.rows:
            w.writerow([repr(r["delta"]), r["trial"], r["status"], repr(r["error"]), repr(r["residual"]), r["message"]])
        return buf.getvalue()

    def plot_data(self):
        """Two columns: noise level and median error."""
        return "".join(f"{d!r} {self.summary['per_delta'][repr(d)]['median_error']!r}\n" for d in self.deltas)

    def to_json(self):
        return json.dumps(self.summary, sort_keys=True, indent=2)


def _probe_trial(f, frame, base, delta, trial_seed, kind, targets, cfg):
    rng = np.random.default_rng(trial_seed)
    meas = perturb(base, delta, rng, kind, targets) if delta > 0 else base
    try:
        out, rep = full_pipeline(meas, frame, cfg, reference=f)
    except PipelineError as exc:
        return {"status": f"failed:{exc.stage}", "error": math.inf, "residual": math.inf, "message": str(exc.cause)}
    status = "ok" if rep["ok"] else "unverified"
    return {"status": status, "error": rep["error"], "residual": rep["measurement_residual"], "message": ""}


def stability_probe(f, frame, lattices, deltas, trials=20, seed=0, kind="uniform", targets=None, jobs=1):
    """Pipeline error against magnitude noise level; failures are recorded, not raised."""
    base = measure(f, frame, lattices)
    cfg = PipelineConfig(recovery=RecoveryConfig(seed=seed, strict=False), strict=False)
    seeds = np.random.SeedSequence(seed).spawn(len(deltas) * trials)
    jobs_list = []
    for i, d in enumerate(deltas):
        n = 1 if d == 0 and kind == "uniform" else trials
        for t in range(n):
            jobs_list.append((float(d), t, seeds[i * trials + t]))

    def run(job):
        d, t, ss = job
        r = _probe_trial(f, frame, base, d, ss, kind, targets, cfg)
        return {"delta": d, "trial": t, **r}

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            rows = list(ex.map(run, jobs_list))
    else:
        rows = [run(j) for j in jobs_list]
    per = {}
    for d in deltas:
        errs = np.array([r["error"] for r in rows if r["delta"] == float(d)])
        fin = errs[np.isfinite(errs)]
        per[repr(float(d))] = {
            "trials": int(errs.size),
            "failures": int(errs.size - fin.size),
            "median_error": float(np.median(errs)) if errs.size else math.nan,
            "q90_error": float(np.quantile(errs, 0.9)) if fin.size == errs.size and errs.size else math.inf,
        }
    med = [per[repr(float(d))]["median_error"] for d in deltas]
    summary = {
        "kind": kind,
        "seed": seed,
        "per_delta": per,
        "monotone_median": bool(all(a <= b for a, b in zip(med, med[1:]))),
    }
    return ProbeResult(rows, [float(d) for d in deltas], kind, seed, summary)


# --------------------------------------------------------------- redundancy


@dataclass(frozen=True)
class Redundancy:
    kind: str
    factors: tuple

    @property
    def value(self):
        return float(np.prod(self.factors))

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"kind": self.kind, "factors": list(self.factors), "total": self.value}


def redundancy_report(alpha=None, kind="curvelet"):
    """Oversampling relative to the reference spacings.

    curvelet: ``(alpha1^-1 / delta1) * (alpha2^-1 / delta2)``; meyer:
    ``alpha^-1`` relative to unit-spaced translates.
    """
    if kind == "curvelet":
        a = CURVELET_ALPHA if alpha is None else tuple(float(v) for v in np.broadcast_to(alpha, (2,)))
        if any(v <= 0 for v in a):
            raise ValidationError("alpha must be positive")
        return Redundancy(kind, tuple(1.0 / (v * dl) for v, dl in zip(a, CURVELET_DELTA)))
    if kind == "meyer":
        a = MEYER_ALPHA_MAX if alpha is None else float(alpha)
        if a <= 0:
            raise ValidationError("alpha must be positive")
        return Redundancy(kind, (1.0 / a,))
    raise ValidationError(f"unknown frame kind {kind!r}")
