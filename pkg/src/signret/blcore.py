"""Discrete periodic model of real band-limited signals.

A signal lives on a periodic grid of ``N_i`` points over a physical period
``L_i`` per axis.  Spectra are stored in numpy FFT order and scaled by the
grid cell volume, so that ``spectrum[k]`` approximates the continuous
transform ``f^(k / L)`` with the ``exp(-2 pi i x xi)`` convention.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    CommensurabilityError,
    ContainmentError,
    GridMismatchError,
    NotStableSamplingError,
    ValidationError,
)

REALNESS_TOL = 1e-10
SUPPORT_TOL = 1e-10
RIDGE = 1e-12
# relative singular value below which a sampling system counts as rank deficient
RANK_TOL = 1e-9


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Periodic sampling grid in one or two dimensions."""

    shape: tuple
    period: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        period = tuple(float(p) for p in np.atleast_1d(self.period))
        if len(period) == 1 and len(shape) > 1:
            period = period * len(shape)
        if len(shape) not in (1, 2) or len(period) != len(shape):
            raise ValidationError(f"unsupported grid dimension: shape={shape}, period={period}")
        for n in shape:
            if n < 4 or n & (n - 1):
                raise ValidationError(f"grid extent must be a power of two >= 4, got {n}")
        if any(not np.isfinite(p) or p <= 0 for p in period):
            raise ValidationError(f"grid period must be positive, got {period}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "period", period)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(p / n for p, n in zip(self.period, self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.period))

    @property
    def bin_volume(self):
        """Frequency-domain measure of one bin, ``prod(1 / L_i)``."""
        return 1.0 / self.volume

    def bins(self):
        """Integer frequency index per axis, FFT order, broadcast to the grid."""
        axes = [np.fft.fftfreq(n, 1.0 / n).astype(int) for n in self.shape]
        return np.meshgrid(*axes, indexing="ij")

    def frequencies(self):
        """Physical frequencies ``k_i / L_i`` per axis, broadcast to the grid."""
        return [k / p for k, p in zip(self.bins(), self.period)]

    def coordinates(self):
        axes = [np.arange(n) * h for n, h in zip(self.shape, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def radius(self):
        return np.sqrt(sum(xi**2 for xi in self.frequencies()))

    def full_mask(self):
        return np.ones(self.shape, dtype=bool)


@dataclass(frozen=True)
class FrequencySupport:
    """Compact spectral set on a grid with its bounding parallelepiped.

    ``mask`` marks the bins of the set F.  ``bounding_matrix`` is M with
    F inside M[-1/2, 1/2]^d; ``dilation`` holds the oversampling factors s_i.
    """

    grid: Grid
    mask: np.ndarray
    bounding_matrix: np.ndarray
    dilation: tuple = None

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise GridMismatchError(f"mask shape {mask.shape} != grid shape {self.grid.shape}")
        d = self.grid.dim
        M = np.atleast_2d(np.asarray(self.bounding_matrix, dtype=float))
        if M.shape != (d, d):
            raise ValidationError(f"bounding matrix must be {d}x{d}")
        if abs(np.linalg.det(M)) <= 1e-12:
            raise ValidationError("bounding matrix is singular")
        s = (1.0,) * d if self.dilation is None else tuple(float(v) for v in np.atleast_1d(self.dilation))
        if len(s) != d or any(v <= 0 for v in s):
            raise ValidationError(f"bad dilation {s}")
        object.__setattr__(self, "mask", _readonly(mask))
        object.__setattr__(self, "bounding_matrix", _readonly(M))
        object.__setattr__(self, "dilation", s)
        worst, where = containment_excess(self.grid, mask, M)
        if worst > 1e-12:
            raise ContainmentError(
                f"F not contained in M[-1/2,1/2]^d: bin {where} maps to |M^-1 xi|_inf = {0.5 + worst:.6g}"
            )

    @classmethod
    def full(cls, grid):
        """Every bin; M is the Nyquist box."""
        M = np.diag([n / p for n, p in zip(grid.shape, grid.period)])
        return cls(grid, grid.full_mask(), M)

    @classmethod
    def box(cls, grid, halfwidths, strict=True):
        """Bins with |xi_i| < halfwidths[i] (or <= if not strict), M = diag(2 * halfwidths)."""
        hw = np.broadcast_to(np.asarray(halfwidths, dtype=float), (grid.dim,))
        xi = grid.frequencies()
        mask = np.ones(grid.shape, dtype=bool)
        for a, h in zip(xi, hw):
            mask &= (np.abs(a) < h) if strict else (np.abs(a) <= h + 1e-12)
        return cls(grid, mask, np.diag(2 * hw))

    def measure(self):
        """Lebesgue measure of F on the grid (bin count times bin volume)."""
        return float(self.mask.sum()) * self.grid.bin_volume

    def extent(self):
        """Largest |k_i| over the mask, per axis."""
        if not self.mask.any():
            return (0,) * self.grid.dim
        return tuple(int(np.abs(k[self.mask]).max()) for k in self.grid.bins())

    def intersect(self, mask):
        return FrequencySupport(self.grid, self.mask & np.asarray(mask, bool), self.bounding_matrix, self.dilation)


def containment_excess(grid, mask, M):
    """Worst amount by which a masked bin exceeds M[-1/2,1/2]^d (<= 0 means contained)."""
    if not np.any(mask):
        return -0.5, None
    xi = np.stack([a[mask] for a in grid.frequencies()])
    u = np.linalg.solve(np.atleast_2d(M), xi)
    amax = np.abs(u).max(axis=0)
    i = int(np.argmax(amax))
    where = tuple(int(k[mask][i]) for k in grid.bins())
    return float(amax[i] - 0.5), where


@dataclass(frozen=True)
class BandLimitedSignal:
    """Real signal on a grid whose spectrum lives in ``support.mask``."""

    grid: Grid
    values: np.ndarray
    support: FrequencySupport = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if np.iscomplexobj(v):
            if np.abs(v.imag).max(initial=0) > REALNESS_TOL * max(np.abs(v).max(initial=0), 1e-300):
                raise ValidationError("signal values are not real")
            v = v.real
        v = v.astype(float)
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite signal values")
        support = self.support if self.support is not None else FrequencySupport.full(self.grid)
        if support.grid != self.grid:
            raise GridMismatchError("support grid differs from signal grid")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "support", support)
        if not support.mask.all():
            spec = np.fft.fftn(v)
            total = np.sum(np.abs(spec) ** 2)
            outside = np.sum(np.abs(spec[~support.mask]) ** 2)
            if total > 0 and outside > SUPPORT_TOL * total:
                raise ValidationError(
                    f"spectral energy outside support: {outside / total:.3e} of total"
                )

    @classmethod
    def project(cls, grid, values, support=None):
        """Band-limit ``values`` to ``support`` by zeroing the spectrum outside it."""
        support = support if support is not None else FrequencySupport.full(grid)
        spec = np.fft.fftn(np.asarray(values, dtype=float))
        spec[~support.mask] = 0
        return cls(grid, np.fft.ifftn(spec).real, support)

    @classmethod
    def zeros(cls, grid, support=None):
        return cls(grid, np.zeros(grid.shape), support)

    def norm(self):
        """Physical L2 norm (sum of squares times cell volume, square-rooted)."""
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))

    def __neg__(self):
        return BandLimitedSignal(self.grid, -self.values, self.support)

    def scaled(self, c):
        return BandLimitedSignal(self.grid, c * self.values, self.support)


def signal_distance(a, b, up_to_sign=True):
    """Relative L2 distance ``min ||a -+ b|| / ||b||``."""
    va, vb = np.asarray(getattr(a, "values", a)), np.asarray(getattr(b, "values", b))
    ref = np.linalg.norm(vb)
    d = np.linalg.norm(va - vb)
    if up_to_sign:
        d = min(d, np.linalg.norm(va + vb))
    return float(d / ref) if ref > 0 else float(np.linalg.norm(va))


def forward_spectrum(sig):
    """Spectrum of ``sig`` in FFT order, scaled by the grid cell volume."""
    v = np.asarray(sig.values)
    if not np.all(np.isfinite(v)):
        raise ValidationError("non-finite values")
    return np.fft.fftn(v) * sig.grid.cell_volume


def inverse_spectrum(spec, grid, support=None):
    """Inverse of :func:`forward_spectrum`; the result must be real."""
    spec = np.asarray(spec)
    if spec.shape != grid.shape:
        raise GridMismatchError("spectrum shape does not match grid")
    if not np.all(np.isfinite(spec)):
        raise ValidationError("non-finite spectrum")
    v = np.fft.ifftn(spec) / grid.cell_volume
    scale = np.abs(v).max(initial=0)
    if scale > 0 and np.abs(v.imag).max() > REALNESS_TOL * scale:
        raise ValidationError(
            f"inverse transform is not real (relative imaginary residue {np.abs(v.imag).max() / scale:.2e})"
        )
    return BandLimitedSignal(grid, v.real, support)


def is_hermitian(spec, rtol=REALNESS_TOL):
    """True if ``spec[-k] == conj(spec[k])`` on every bin."""
    spec = np.asarray(spec)
    flipped = np.conj(np.roll(np.flip(spec), 1, axis=tuple(range(spec.ndim))))
    scale = max(np.abs(spec).max(initial=0), 1e-300)
    return bool(np.abs(spec - flipped).max(initial=0) <= rtol * scale)


def convolve(f, filter_spectrum, support_threshold=1e-12):
    """Circular convolution ``f * psi`` given ``psi^`` on the grid bins.

    The output support is the input mask intersected with the bins where
    ``|psi^| > support_threshold``.
    """
    filt = np.asarray(filter_spectrum)
    if filt.shape != f.grid.shape:
        raise GridMismatchError(f"filter shape {filt.shape} != grid shape {f.grid.shape}")
    out = forward_spectrum(f) * filt
    mask = f.support.mask & (np.abs(filt) > support_threshold)
    out[~mask] = 0
    return inverse_spectrum(out, f.grid, f.support.intersect(mask))


@dataclass(frozen=True)
class SamplingLattice:
    """Lattice ``G Z^d + v`` restricted to one period of a grid.

    Build with :meth:`SamplingLattice.build`, which enumerates the sites and
    enforces that every site is a grid point and that the lattice is periodic
    on the grid.  ``indices`` has one row of grid indices per site, sorted
    lexicographically by the lattice coordinate ``n``.
    """

    grid: Grid
    generator: np.ndarray
    shift: np.ndarray
    indices: np.ndarray
    lattice_coords: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, grid, generator, shift=None, tol=1e-9):
        d = grid.dim
        G = np.atleast_2d(np.asarray(generator, dtype=float))
        if G.shape != (d, d):
            raise ValidationError(f"generator must be {d}x{d}")
        if abs(np.linalg.det(G)) < 1e-14:
            raise ValidationError("generator columns are linearly dependent")
        v = np.zeros(d) if shift is None else np.asarray(shift, dtype=float).reshape(d)
        h = np.asarray(grid.spacing)
        Gh = G / h[:, None]
        vh = v / h
        if np.abs(Gh - np.round(Gh)).max() > tol or np.abs(vh - np.round(vh)).max() > tol:
            raise CommensurabilityError("lattice points do not fall on grid points")
        Lper = np.linalg.solve(G, np.diag(grid.period))
        if np.abs(Lper - np.round(Lper)).max() > tol:
            raise CommensurabilityError("lattice is not periodic on the grid period")
        Gi = np.round(Gh).astype(np.int64)
        vi = np.round(vh).astype(np.int64)
        N = np.asarray(grid.shape)
        count = int(round(np.prod(N) / abs(np.linalg.det(Gi))))
        # n-range covering G^-1 [0, L)^d
        corners = np.array(list(itertools.product(*[(0, n) for n in N]))).T
        nc = np.linalg.solve(Gi.astype(float), corners - vi[:, None])
        lo = np.floor(nc.min(axis=1)).astype(int) - 1
        hi = np.ceil(nc.max(axis=1)).astype(int) + 1
        ns = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij"), axis=-1)
        ns = ns.reshape(-1, d)
        pts = ns @ Gi.T + vi
        keep = np.all((pts >= 0) & (pts < N), axis=1)
        ns, pts = ns[keep], pts[keep]
        if len(pts) != count:
            raise CommensurabilityError(f"enumerated {len(pts)} sites, expected {count}")
        order = np.lexsort(ns.T[::-1])
        return cls(grid, _readonly(G), _readonly(v), _readonly(pts[order]), _readonly(ns[order]))

    @classmethod
    def rectangular(cls, grid, strides, shift_steps=None):
        """Axis-aligned lattice with integer grid strides per axis."""
        h = np.asarray(grid.spacing)
        st = np.broadcast_to(np.asarray(strides, dtype=float), (grid.dim,))
        shift = None if shift_steps is None else np.asarray(shift_steps, dtype=float) * h
        return cls.build(grid, np.diag(st * h), shift)

    @property
    def sites(self):
        return tuple(self.indices.T)

    @property
    def size(self):
        return len(self.indices)

    @property
    def density(self):
        """Points per unit volume, ``1 / |det G|``."""
        return 1.0 / abs(np.linalg.det(self.generator))

    @property
    def strides(self):
        """Integer grid strides if the generator is diagonal, else None."""
        G = self.generator
        if np.count_nonzero(G - np.diag(np.diag(G))):
            return None
        return tuple(int(round(g / h)) for g, h in zip(np.diag(G), self.grid.spacing))

    def positions(self):
        return self.indices * np.asarray(self.grid.spacing)


def sample_on_lattice(sig, lat):
    """Values of ``sig`` at the lattice sites, in lattice order."""
    if sig.grid != lat.grid:
        raise GridMismatchError("signal and lattice grids differ")
    return np.asarray(sig.values)[lat.sites].copy()


def minkowski_sum(grid, mask_a, mask_b=None):
    """Bin mask of F_a + F_b; raises if the sum wraps around the grid."""
    mask_b = mask_a if mask_b is None else mask_b
    bins = grid.bins()
    out = np.zeros(grid.shape, dtype=bool)
    ka = np.stack([k[mask_a] for k in bins], axis=1)
    kb = np.stack([k[mask_b] for k in bins], axis=1)
    if len(ka) == 0 or len(kb) == 0:
        return out
    N = np.asarray(grid.shape)
    hi = ka.max(axis=0) + kb.max(axis=0)
    lo = ka.min(axis=0) + kb.min(axis=0)
    if np.any(hi >= N // 2) or np.any(lo <= -(N // 2)):
        raise ValidationError("F + F does not fit on the grid without wrap-around")
    # dilate via FFT convolution of indicator arrays
    A = np.fft.fftshift(np.asarray(mask_a, float))
    B = np.fft.fftshift(np.asarray(mask_b, float))
    C = fftconvolve(A, B, mode="full")
    sl = tuple(slice(n // 2, n // 2 + n) for n in grid.shape)
    out = np.fft.ifftshift(C[sl] > 0.5)
    return out


def _real_basis(grid, mask, positions):
    """Real design matrix for trigonometric polynomials with spectrum on ``mask``.

    Returns ``(A, to_spectrum)`` where ``A[:, j]`` evaluates basis function j
    at ``positions`` and ``to_spectrum(c)`` maps coefficients to a grid
    spectrum in :func:`forward_spectrum` scaling.
    """
    bins = np.stack([k[mask] for k in grid.bins()], axis=1)
    N = np.asarray(grid.shape)
    neg = (-bins) % N
    neg = np.where(neg >= N // 2, neg - N, neg)
    # keep one representative per {k, -k} pair
    keys = [tuple(b) for b in bins]
    negkeys = [tuple(b) for b in neg]
    keyset = set(keys)
    if keyset != set(negkeys):
        raise ValidationError("support mask is not symmetric; real signals need F = -F")
    reps, selfconj = [], []
    for k, nk in zip(keys, negkeys):
        if k == nk:
            reps.append(k)
            selfconj.append(True)
        elif k > nk:
            reps.append(k)
            selfconj.append(False)
    reps = np.array(reps, dtype=float).reshape(-1, grid.dim)
    selfconj = np.array(selfconj, dtype=bool)
    L = np.asarray(grid.period)
    phase = 2 * np.pi * (np.asarray(positions, float) / L) @ reps.T
    cols, kinds = [], []
    for j in range(len(reps)):
        cols.append(np.cos(phase[:, j]))
        kinds.append((j, "c"))
        if not selfconj[j]:
            cols.append(np.sin(phase[:, j]))
            kinds.append((j, "s"))
    A = np.stack(cols, axis=1) if cols else np.zeros((len(positions), 0))
    repi = reps.astype(int)

    def to_spectrum(c):
        spec = np.zeros(grid.shape, dtype=complex)
        vol = grid.volume
        a = np.zeros(len(reps))
        b = np.zeros(len(reps))
        for (j, kind), cj in zip(kinds, c):
            if kind == "c":
                a[j] = cj
            else:
                b[j] = cj
        for j, k in enumerate(repi):
            idx = tuple(k % N)
            if selfconj[j]:
                spec[idx] = vol * a[j]
            else:
                z = 0.5 * vol * (a[j] - 1j * b[j])
                spec[idx] = z
                spec[tuple((-k) % N)] = np.conj(z)
        return spec

    return A, to_spectrum


class LatticeInterpolator:
    """Least-squares reconstruction of F-band-limited signals from lattice samples.

    Rectangular lattices use an exact FFT solver; other lattices fall back to
    a dense ridge-regularized system.  Construction fails with
    :class:`NotStableSamplingError` when the samples cannot determine every
    band-limited signal.
    """

    def __init__(self, lat, support, dense=False):
        self.lat = lat
        self.grid = lat.grid
        self.support = support
        if support.grid != lat.grid:
            raise GridMismatchError("support and lattice grids differ")
        self.mask = np.asarray(support.mask)
        strides = lat.strides
        self.fast = strides is not None and not dense
        if self.fast:
            self._init_fft(strides)
        else:
            self._init_dense()

    def _init_fft(self, strides):
        grid = self.grid
        self.counts = tuple(n // m for n, m in zip(grid.shape, strides))
        bins = grid.bins()
        folded = [k[self.mask] % p for k, p in zip(bins, self.counts)]
        flat = np.ravel_multi_index(folded, self.counts) if folded[0].size else np.array([], int)
        if len(np.unique(flat)) != len(flat):
            raise NotStableSamplingError()
        self._folded = tuple(folded)
        L = np.asarray(grid.period)
        kv = sum(k[self.mask] * (v / l) for k, v, l in zip(bins, self.lat.shift, L))
        self._phase = np.exp(-2j * np.pi * kv)
        self._scale = grid.volume / np.prod(self.counts)

    def _init_dense(self):
        A, to_spec = _real_basis(self.grid, self.mask, self.lat.positions())
        self._to_spec = to_spec
        if A.shape[1] > A.shape[0]:
            raise NotStableSamplingError()
        if A.shape[1] == 0:
            self._U = np.zeros((A.shape[0], 0))
            self._solve = lambda y: np.zeros(0)
            return
        U, sv, Vt = np.linalg.svd(A, full_matrices=False)
        if sv[-1] < RANK_TOL * sv[0]:
            raise NotStableSamplingError()
        lam = RIDGE * sv[0] ** 2
        filt = sv / (sv**2 + lam)
        self._U = U
        self._solve = lambda y: Vt.T @ (filt * (U.T @ y))

    def spectrum(self, samples):
        y = np.asarray(samples, dtype=float)
        if y.shape != (self.lat.size,):
            raise ValidationError(f"expected {self.lat.size} samples, got {y.shape}")
        if self.fast:
            Y = np.fft.fftn(y.reshape(self.counts))
            spec = np.zeros(self.grid.shape, dtype=complex)
            spec[self.mask] = self._scale * Y[self._folded] * self._phase
            return spec
        return self._to_spec(self._solve(y))

    def __call__(self, samples):
        spec = self.spectrum(samples)
        v = np.fft.ifftn(spec).real / self.grid.cell_volume
        return BandLimitedSignal(self.grid, v, self.support)

    def residual(self, samples):
        """Relative misfit ``||A c - y|| / ||y||`` of the least-squares fit."""
        y = np.asarray(samples, dtype=float)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        if self.fast:
            g = self(y)
            return float(np.linalg.norm(np.asarray(g.values)[self.lat.sites] - y) / ny)
        r = y - self._U @ (self._U.T @ y)
        return float(np.linalg.norm(r) / ny)


def interpolate_from_lattice(samples, lat, support, grid=None):
    """The signal band-limited to ``support`` that best matches ``samples`` on ``lat``."""
    if grid is not None and grid != lat.grid:
        raise GridMismatchError("grid does not match lattice grid")
    return LatticeInterpolator(lat, support)(samples)
