"""Semi-discrete frames of real band-limited filters.

Includes the generic machinery (bounds, dual, analysis/synthesis, overlap
graph) and two concrete families: Meyer wavelets in 1D and second
generation curvelet windows in 2D.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .blcore import (
    REALNESS_TOL,
    BandLimitedSignal,
    FrequencySupport,
    convolve,
    forward_spectrum,
    inverse_spectrum,
    is_hermitian,
)
from .errors import CoverError, FrameError, GridMismatchError, ValidationError
from .sampling import fit_bounding_box

SUPPORT_THRESHOLD = 1e-12
COVER_THRESHOLD = 1e-6
# F~ keeps overlap bins where both filters reach this fraction of their best joint level
SUBREGION_FRACTION = 0.1


def beta(x):
    """Quartic transition profile: 0 below 0, 1 above 1, beta(x) + beta(1 - x) = 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)


def meyer_psi_hat(xi):
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    out = np.zeros(xi.shape, dtype=complex)
    lo = (a >= 1 / 3) & (a <= 2 / 3)
    hi = (a > 2 / 3) & (a <= 4 / 3)
    out[lo] = np.sin(np.pi / 2 * beta(3 * a[lo] - 1))
    out[hi] = np.cos(np.pi / 2 * beta(3 * a[hi] / 2 - 1))
    return out * np.exp(1j * np.pi * xi)


def meyer_phi_hat(xi):
    a = np.abs(np.asarray(xi, dtype=float))
    return np.where(a <= 2 / 3, np.cos(np.pi / 2 * beta(3 * a - 1)), 0.0)


def curvelet_radial(r):
    """Radial window w on [1/3, 8/3]: rises on [1/3, 2/3], flat to 4/3, falls to 8/3."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    up = (r >= 1 / 3) & (r < 2 / 3)
    flat = (r >= 2 / 3) & (r <= 4 / 3)
    down = (r > 4 / 3) & (r <= 8 / 3)
    out[up] = np.sin(np.pi / 2 * beta(3 * r[up] - 1))
    out[flat] = 1.0
    out[down] = np.cos(np.pi / 2 * beta(3 * r[down] / 4 - 1))
    return out


def curvelet_lowpass(r):
    r = np.asarray(r, dtype=float)
    return np.where(r <= 4 / 3, 1.0, np.where(r <= 8 / 3, np.cos(np.pi / 2 * beta(3 * r / 4 - 1)), 0.0))


def curvelet_angular(t):
    """Even angular profile nu on [-1/2, 1/2] with nu(t)^2 + nu(t - 1/2)^2 = 1."""
    a = np.abs(np.asarray(t, dtype=float))
    return np.where(a <= 0.5, np.cos(np.pi / 2 * beta(2 * a)), 0.0)


def _nu_jl(j, l, theta):
    # periodic in theta with period 1, i.e. period 2^j in u
    u = 2.0**j * theta - l / 2
    P = 2.0**j
    u = (u + P / 2) % P - P / 2
    return curvelet_angular(u)


def curvelet_window(j, l, xi1, xi2):
    """chi_{j,l}(xi) for j >= 1; ``j == 0`` gives the low-pass window."""
    xi1, xi2 = np.broadcast_arrays(np.asarray(xi1, float), np.asarray(xi2, float))
    r = np.hypot(xi1, xi2)
    if j == 0:
        return curvelet_lowpass(r)
    theta = (np.arctan2(xi2, xi1) / (2 * np.pi)) % 1.0
    ang = _nu_jl(j, l, theta) + _nu_jl(j, l, theta + 0.5)
    return curvelet_radial(r / 4.0**j) * ang


@dataclass(frozen=True)
class Band:
    label: str
    spectrum: np.ndarray
    support: FrequencySupport
    meta: dict = field(default_factory=dict)


class SemiDiscreteFrame:
    """Finite family of real band-limited filters on a grid.

    ``working_band`` is the bin mask on which the frame inequality is
    asserted; the bounds ``A`` and ``B`` are the extreme values of
    ``sum |psi^_lambda|^2`` over it.
    """

    def __init__(self, grid, bands, working_band=None, kind="generic", params=None, check_real=True):
        if not bands:
            raise FrameError("frame has no bands")
        self.grid = grid
        self.kind = kind
        self.params = dict(params or {})
        self.notes = []
        built = []
        for b in bands:
            if isinstance(b, Band):
                label, spec, meta = b.label, b.spectrum, b.meta
            else:
                label, spec = b[0], b[1]
                meta = b[2] if len(b) > 2 else {}
            spec = np.array(spec, dtype=complex)
            if spec.shape != grid.shape:
                raise GridMismatchError(f"band {label}: filter shape {spec.shape} != {grid.shape}")
            if check_real and not is_hermitian(spec, REALNESS_TOL):
                raise FrameError(f"band {label}: filter is not real-valued in space")
            spec.setflags(write=False)
            mask = np.abs(spec) > SUPPORT_THRESHOLD
            if not mask.any():
                raise FrameError(f"band {label}: empty support")
            supp = _support(grid, mask)
            built.append(Band(str(label), spec, supp, dict(meta)))
        labels = [b.label for b in built]
        if len(set(labels)) != len(labels):
            raise FrameError("duplicate band labels")
        self.bands = tuple(built)
        self.working_band = np.ones(grid.shape, bool) if working_band is None else np.asarray(working_band, bool)
        self.working_band.setflags(write=False)
        self.A, self.B = frame_bounds(self)

    def __len__(self):
        return len(self.bands)

    def __getitem__(self, label):
        for b in self.bands:
            if b.label == label:
                return b
        raise KeyError(label)

    @property
    def labels(self):
        return [b.label for b in self.bands]

    def energy_sum(self):
        return sum(np.abs(b.spectrum) ** 2 for b in self.bands)

    def spatial_filter(self, label):
        return inverse_spectrum(self[label].spectrum, self.grid)


def _support(grid, mask):
    """Support object for ``mask`` with a fitted axis-aligned box."""
    loose = FrequencySupport(grid, mask, FrequencySupport.full(grid).bounding_matrix)
    return FrequencySupport(grid, mask, fit_bounding_box(loose))


def working_support(frame):
    """The frame's working band as a :class:`FrequencySupport`."""
    return _support(frame.grid, frame.working_band)


def frame_bounds(frame):
    S = frame.energy_sum()[frame.working_band]
    if S.size == 0:
        raise FrameError("empty working band")
    A, B = float(S.min()), float(S.max())
    if A <= 0:
        raise FrameError("not a frame on working band")
    return A, B


def dual_frame(frame):
    """Filters ``psi^ / sum |psi^|^2`` on the working band, zero elsewhere."""
    S = frame.energy_sum()
    wb = frame.working_band
    low = (~wb) & (S < frame.A / 2) & (S > 0)
    bands = []
    for b in frame.bands:
        d = np.zeros(frame.grid.shape, dtype=complex)
        d[wb] = b.spectrum[wb] / S[wb]
        bands.append(Band(b.label, d, b.support, b.meta))
    dual = SemiDiscreteFrame(frame.grid, bands, wb, kind=f"dual:{frame.kind}", params=frame.params)
    if low.any():
        dual.notes.append(f"{int(low.sum())} bins outside the working band with sum < A/2 zeroed")
    return dual


def analyze(f, frame):
    """``[f * psi_lambda for lambda in frame]``."""
    if f.grid != frame.grid:
        raise GridMismatchError("signal and frame grids differ")
    return [convolve(f, b.spectrum, SUPPORT_THRESHOLD) for b in frame.bands]


def synthesize(parts, frame, dual=None):
    """``sum_lambda part_lambda * adjoint(dual_lambda)``; inverts :func:`analyze` on the working band.

    The adjoint filter has spectrum ``conj(dual^)``, which is what makes the
    sum collapse to ``f^ sum |psi^|^2 / sum |psi^|^2``.
    """
    if len(parts) != len(frame.bands):
        raise FrameError(f"expected {len(frame.bands)} parts, got {len(parts)}")
    dual = dual_frame(frame) if dual is None else dual
    spec = np.zeros(frame.grid.shape, dtype=complex)
    for p, b in zip(parts, dual.bands):
        if p is None:
            raise FrameError(f"missing part for band {b.label}")
        if p.grid != frame.grid:
            raise GridMismatchError("part grid differs from frame grid")
        spec += forward_spectrum(p) * np.conj(b.spectrum)
    supp = _support(frame.grid, frame.working_band)
    spec[~frame.working_band] = 0
    return inverse_spectrum(spec, frame.grid, supp)


@dataclass(frozen=True)
class OverlapEdge:
    a: str
    b: str
    region: np.ndarray
    subregion: np.ndarray
    c_a: float
    c_b: float


@dataclass
class OverlapGraph:
    nodes: list
    edges: list

    def neighbors(self, label):
        out = []
        for e in self.edges:
            if e.a == label:
                out.append(e.b)
            elif e.b == label:
                out.append(e.a)
        return out

    def edge(self, a, b):
        for e in self.edges:
            if {e.a, e.b} == {a, b}:
                return e
        raise KeyError((a, b))

    def components(self, edges=None):
        edges = self.edges if edges is None else edges
        adj = {n: set() for n in self.nodes}
        for e in edges:
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        seen, comps = set(), []
        for n in self.nodes:
            if n in seen:
                continue
            comp, q = [], deque([n])
            seen.add(n)
            while q:
                u = q.popleft()
                comp.append(u)
                for v in sorted(adj[u]):
                    if v not in seen:
                        seen.add(v)
                        q.append(v)
            comps.append(comp)
        return comps

    def is_connected(self):
        return len(self.components()) == 1


def overlap_graph(frame, working_band=None, cover_threshold=COVER_THRESHOLD, check_cover=True):
    """Overlap graph of the sets ``U_lambda = {|psi^_lambda| > cover_threshold}``."""
    wb = frame.working_band if working_band is None else np.asarray(working_band, bool)
    mags = {b.label: np.abs(b.spectrum) for b in frame.bands}
    U = {k: m > cover_threshold for k, m in mags.items()}
    if check_cover:
        covered = np.zeros(frame.grid.shape, bool)
        for u in U.values():
            covered |= u
        gap = wb & ~covered
        if gap.any():
            bins = frame.grid.bins()
            uncovered = [tuple(int(k[i]) for k in bins) for i in zip(*np.nonzero(gap))]
            raise CoverError(uncovered)
    labels = frame.labels
    edges = []
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            region = U[a] & U[b]
            if not region.any():
                continue
            na = mags[a] / mags[a].max()
            nb = mags[b] / mags[b].max()
            joint = np.minimum(na, nb)
            pool = region & wb if (region & wb).any() else region
            level = joint[pool].max()
            sub = pool & (joint >= SUBREGION_FRACTION * level)
            edges.append(OverlapEdge(a, b, region, sub, float(mags[a][sub].min()), float(mags[b][sub].min())))
    return OverlapGraph(labels, edges)


def meyer_frame(J, grid):
    """Scaling band plus ``psi_j(x) = 2^j psi(2^j x)`` for ``j = 0 .. J-1``.

    The working band is ``|xi| <= 2^J / 3`` where the squared filters sum to one.
    """
    if grid.dim != 1:
        raise ValidationError("Meyer frame needs a 1D grid")
    if J < 1:
        raise ValidationError("J must be >= 1")
    nyq = grid.shape[0] / (2 * grid.period[0])
    top = 2.0 ** (J + 1) / 3
    if nyq < top:
        raise ValidationError(f"insufficient grid bandwidth: Nyquist {nyq:.4g} < {top:.4g}")
    xi = grid.frequencies()[0]
    bands = [Band("phi", meyer_phi_hat(xi).astype(complex), None, {"j": None})]
    for j in range(J):
        bands.append(Band(f"psi{j}", meyer_psi_hat(xi / 2.0**j), None, {"j": j}))
    wb = np.abs(xi) <= 2.0**J / 3 + 1e-12
    return SemiDiscreteFrame(grid, bands, wb, kind="meyer", params={"J": J, "beta": "quartic"})


def curvelet_windows(jmax, grid):
    """Low-pass window plus ``chi_{j,l}`` for ``1 <= j <= jmax``, ``0 <= l < 2^j``.

    Filters are the windows themselves, so the frame is Parseval on
    ``|xi| <= (4/3) 4^jmax``; the discrete-frame normalisation
    ``2^(-3j/2 - 5/2)`` is kept in each band's metadata.
    """
    if grid.dim != 2:
        raise ValidationError("curvelet windows need a 2D grid")
    if jmax < 1:
        raise ValidationError("jmax must be >= 1")
    top = 8.0 / 3 * 4.0**jmax
    nyq = min(n / (2 * p) for n, p in zip(grid.shape, grid.period))
    if nyq < top:
        raise ValidationError(f"resolution insufficient: Nyquist {nyq:.4g} < {top:.4g}")
    xi1, xi2 = grid.frequencies()
    bands = [Band("chi0", curvelet_window(0, 0, xi1, xi2).astype(complex), None, {"j": 0, "l": 0})]
    for j in range(1, jmax + 1):
        for l in range(2**j):
            bands.append(
                Band(
                    f"chi{j}_{l}",
                    curvelet_window(j, l, xi1, xi2).astype(complex),
                    None,
                    {"j": j, "l": l, "gamma_scale": 2.0 ** (-1.5 * j - 2.5), "theta": np.pi * l / 2**j},
                )
            )
    wb = np.hypot(xi1, xi2) <= 4.0 / 3 * 4.0**jmax + 1e-12
    return SemiDiscreteFrame(grid, bands, wb, kind="curvelet", params={"jmax": jmax, "beta": "quartic"})
