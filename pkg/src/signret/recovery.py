"""Per-band sign retrieval.

Given ``|g|`` on a sign-blind lattice X for a real signal g band-limited to
F, recover g up to a global sign.  Two routes are provided:

* :func:`recover_band_oracle` enumerates every sign pattern (small m only);
* :func:`recover_band` lifts the squared magnitudes to ``g^2`` (which X
  samples stably, since ``F + F`` fits the lattice), takes a polynomial
  square root of ``g^2`` along grid lines, and then settles the sample
  signs by alternating projections.  Randomly initialised projections are
  the fallback when the lifted route does not certify.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree

from .blcore import BandLimitedSignal, FrequencySupport, LatticeInterpolator, minkowski_sum
from .errors import (
    GridMismatchError,
    InconsistentMagnitudesError,
    NotStableSamplingError,
    OracleInfeasibleError,
    RecoveryError,
    ValidationError,
)

ZERO_REL = 1e-9
CANONICAL_REL = 1e-6
ORACLE_MAX_SAMPLES = 22
ORACLE_TOL = 1e-6
TIE_TOL = 1e-10


@dataclass(frozen=True)
class BandMeasurement:
    label: str
    lattice: object
    magnitudes: np.ndarray
    normalization: float

    def __post_init__(self):
        m = np.array(self.magnitudes, dtype=float)
        if m.shape != (self.lattice.size,):
            raise ValidationError(f"band {self.label}: {m.shape} magnitudes for {self.lattice.size} sites")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValidationError(f"band {self.label}: magnitudes must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "magnitudes", m)


@dataclass(frozen=True)
class MeasurementSet:
    bands: tuple

    def __getitem__(self, label):
        for b in self.bands:
            if b.label == label:
                return b
        raise KeyError(label)

    @property
    def labels(self):
        return [b.label for b in self.bands]

    def normalized(self):
        """Concatenated ``|F_lambda|^-1/2 |f_lambda|(X_lambda)``."""
        return np.concatenate([b.normalization * b.magnitudes for b in self.bands])

    def replace(self, label, magnitudes):
        return MeasurementSet(
            tuple(
                BandMeasurement(b.label, b.lattice, magnitudes, b.normalization) if b.label == label else b
                for b in self.bands
            )
        )


def measure(f, frame, lattices):
    """Simulate ``|f * psi_lambda|(X_lambda)`` for every band of ``frame``."""
    from .frames import analyze

    out = []
    for band, part in zip(frame.bands, analyze(f, frame)):
        lat = lattices[band.label]
        mags = np.abs(np.asarray(part.values)[lat.sites])
        out.append(BandMeasurement(band.label, lat, mags, band.support.measure() ** -0.5))
    return MeasurementSet(tuple(out))


def zero_mask(mags, rel=ZERO_REL):
    mags = np.asarray(mags, dtype=float)
    top = mags.max(initial=0.0)
    return mags < rel * top if top > 0 else np.ones(mags.shape, bool)


def sign_pattern(values, mags=None, rel=ZERO_REL):
    """Entries in {-1, 0, +1}; zero where the magnitude is below ``rel * max``."""
    values = np.asarray(values, dtype=float)
    mags = np.abs(values) if mags is None else np.asarray(mags, dtype=float)
    s = np.where(values >= 0, 1, -1).astype(np.int8)
    s[zero_mask(mags, rel)] = 0
    return s


def canonical_sign(values, rel=CANONICAL_REL):
    """+1 or -1 so that the first entry above ``rel * max |values|`` becomes positive."""
    v = np.ravel(np.asarray(values, dtype=float))
    top = np.abs(v).max(initial=0.0)
    if top == 0:
        return 1
    i = int(np.argmax(np.abs(v) > rel * top))
    return 1 if v[i] > 0 else -1


def canonicalize(sig, lattice=None):
    v = np.asarray(sig.values)
    probe = v[lattice.sites] if lattice is not None else v
    return sig if canonical_sign(probe) > 0 else -sig


@dataclass
class RecoveryConfig:
    restarts: int = 32
    max_iter: int = 200
    tol: float = 1e-6
    seed: int = 0
    method: str = "auto"  # "auto", "lift" or "projections"
    strict: bool = True


@dataclass
class RecoveryDiagnostics:
    label: str = ""
    method: str = ""
    restarts: int = 0
    iterations: int = 0
    magnitude_residual: float = float("inf")
    consistency_residual: float = float("inf")
    sqrt_quality: float = float("nan")
    ambiguous: bool = False
    converged: bool = False

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _check(mags, X, F):
    mags = np.asarray(mags, dtype=float)
    if mags.shape != (X.size,):
        raise ValidationError(f"expected {X.size} magnitudes, got {mags.shape}")
    if np.any(mags < 0) or not np.all(np.isfinite(mags)):
        raise ValidationError("magnitudes must be finite and nonnegative")
    if F.grid != X.grid:
        raise GridMismatchError("support and lattice grids differ")
    return mags


def recover_band_oracle(mags, X, F, tol=ORACLE_TOL, max_samples=ORACLE_MAX_SAMPLES):
    """All band-limited signals consistent with ``mags`` on X, one per global-sign class.

    Each of the ``2^(m-1)`` sign patterns on the m nonzero samples is
    interpolated onto F; patterns whose least-squares misfit is within
    ``tol`` (relative) are returned, canonicalised.
    """
    mags = _check(mags, X, F)
    nz = np.flatnonzero(~zero_mask(mags))
    m = len(nz)
    if mags.max(initial=0) == 0:
        return [BandLimitedSignal.zeros(F.grid, F)]
    if m > max_samples:
        raise OracleInfeasibleError(f"oracle infeasible: {m} nonzero samples > {max_samples}")
    interp = LatticeInterpolator(X, F, dense=True)
    U = interp._U
    y0 = np.where(zero_mask(mags), 0.0, mags)
    ny = np.linalg.norm(y0)
    # bit b of the pattern index flips nonzero sample nz[b + 1]; nz[0] stays positive
    n_pat = 1 << (m - 1)
    found = []
    chunk = 1 << 16
    for start in range(0, n_pat, chunk):
        idx = np.arange(start, min(start + chunk, n_pat), dtype=np.int64)
        bits = (idx[:, None] >> np.arange(m - 1)) & 1
        signs = np.ones((len(idx), len(mags)))
        signs[:, nz[1:]] = 1 - 2 * bits
        Y = signs * y0
        R = Y - (Y @ U) @ U.T
        res = np.linalg.norm(R, axis=1) / ny
        for k in np.flatnonzero(res <= tol):
            found.append((res[k], signs[k] * y0))
    if not found:
        raise InconsistentMagnitudesError("inconsistent magnitudes: no sign pattern fits the support")
    found.sort(key=lambda t: t[0])
    return [canonicalize(interp(y), X) for _, y in found]


def _next_pow2(n):
    return 1 << int(np.ceil(np.log2(max(int(n), 2))))


def sqrt_line(wline, K, radii=(1.0, 0.5, 2.0, 0.25, 4.0)):
    """Real ``g`` with bins in ``[-K, K]`` and ``g^2 = wline`` on the line, up to sign.

    ``g`` is ``z^-K p(z)`` with p a polynomial of degree 2K and ``p^2`` the
    known polynomial of degree 4K built from ``wline``.  p is the
    continuous square root of ``p^2`` evaluated on a circle ``|z| = e^eta``
    just off the unit circle (where real zeros of g sit), so the branch is
    fixed by phase unwrapping.  Several radii are tried; the returned
    quality is the worst of the squaring misfit, the non-polynomial leak,
    and the imaginary residue.
    """
    w = np.asarray(wline, dtype=float)
    N = len(w)
    if 4 * K + 1 > N:
        raise ValidationError(f"line of {N} points cannot hold a square of bandwidth {K}")
    c = np.fft.fft(w) / N
    q = c[np.arange(-2 * K, 2 * K + 1) % N]
    nq = np.linalg.norm(q)
    if nq == 0:
        return np.zeros(N), 0.0
    if K == 0:
        return np.full(N, np.sqrt(max(q[0].real, 0.0))), 0.0
    deg = 4 * K
    best = (np.inf, None)
    for t in radii:
        eta = t / (deg + 1)
        Q = _next_pow2(max(1024, 64 * (deg + 1) / min(t, 1.0)))
        vals = np.fft.ifft(q * np.exp(eta * np.arange(deg + 1)), n=Q) * Q
        phase = np.unwrap(np.angle(vals))
        pv = np.sqrt(np.abs(vals)) * np.exp(0.5j * phase)
        coef = np.fft.fft(pv) / Q
        head = coef[: 2 * K + 1]
        leak = np.linalg.norm(coef[2 * K + 1:]) / max(np.linalg.norm(head), 1e-300)
        p = head * np.exp(-eta * np.arange(2 * K + 1))
        sq = fftconvolve(p, p) if K > 32 else np.convolve(p, p)
        err = np.linalg.norm(sq - q) / nq
        spec = np.zeros(N, dtype=complex)
        spec[np.arange(-K, K + 1) % N] = p
        g = np.fft.ifft(spec) * N
        imag = np.abs(g.imag).max() / max(np.abs(g).max(), 1e-300)
        quality = max(err, leak, imag)
        if quality < best[0]:
            best = (quality, g.real)
        if quality < 1e-9:
            break
    return best[1], float(best[0])


def _align_rows_cols(R, C):
    """Signs sigma (rows) and tau (cols) with ``sigma_i R_ij ~ tau_j C_ij``.

    Uses a maximum-weight spanning forest of the bipartite row/column graph,
    weighting each entry by ``|R_ij C_ij|``.
    """
    n0, n1 = R.shape
    W = np.abs(R * C)
    top = W.max(initial=0)
    sigma, tau = np.ones(n0), np.ones(n1)
    if top == 0:
        return sigma, tau
    ii, jj = np.nonzero(W > 1e-14 * top)
    rel = np.sign(R[ii, jj] * C[ii, jj])
    n = n0 + n1
    # MST on top / W picks the strongest links
    graph = coo_matrix((top / W[ii, jj], (ii, n0 + jj)), shape=(n, n)).tocsr()
    tree = minimum_spanning_tree(graph)
    tree = (tree + tree.T).tocsr()
    relmat = coo_matrix((rel, (ii, n0 + jj)), shape=(n, n)).tocsr()
    relmat = (relmat + relmat.T).tocsr()
    signs = np.ones(n)
    ncomp, lab = connected_components(tree, directed=False)
    for comp in range(ncomp):
        root = int(np.flatnonzero(lab == comp)[0])
        order, pred = breadth_first_order(tree, root, directed=False, return_predecessors=True)
        for node in order[1:]:
            signs[node] = signs[pred[node]] * relmat[pred[node], node]
    return signs[:n0], signs[n0:]


def lifted_estimate(mags, X, F):
    """Grid estimate of g (up to sign) from ``|g|(X)`` via the lifted square.

    Returns ``(values, quality)``; raises NotStableSamplingError if X does
    not sample ``F + F`` stably.
    """
    grid = F.grid
    F2 = FrequencySupport(grid, minkowski_sum(grid, F.mask), 2 * np.asarray(F.bounding_matrix))
    w = LatticeInterpolator(X, F2)(np.asarray(mags, float) ** 2).values
    K = F.extent()
    if grid.dim == 1:
        return sqrt_line(w, K[0])
    n0, n1 = grid.shape
    R = np.zeros(grid.shape)
    C = np.zeros(grid.shape)
    qual = 0.0
    for i in range(n0):
        R[i], qi = sqrt_line(w[i], K[1])
        qual = max(qual, qi)
    for j in range(n1):
        C[:, j], qj = sqrt_line(w[:, j], K[0])
        qual = max(qual, qj)
    sigma, tau = _align_rows_cols(R, C)
    return 0.5 * (sigma[:, None] * R + tau[None, :] * C), qual


def _settle(mags, interp, sites, signs, zero, max_iter):
    """Alternate between the magnitude constraint on X and band-limitation to F."""
    grid = interp.grid
    s = signs.astype(float).copy()
    s[zero] = 0
    it = 0
    for it in range(1, max_iter + 1):
        spec = interp.spectrum(mags * s)
        g = np.fft.ifftn(spec).real / grid.cell_volume
        new = np.where(g[sites] >= 0, 1.0, -1.0)
        new[zero] = 0
        if np.array_equal(new, s):
            break
        s = new
    spec = interp.spectrum(mags * s)
    g = np.fft.ifftn(spec).real / grid.cell_volume
    nm = max(np.linalg.norm(mags), 1e-300)
    mres = float(np.linalg.norm(np.abs(g[sites]) - mags) / nm)
    cres = float(np.linalg.norm(g[sites] - mags * s) / nm)
    return g, s, mres, cres, it


def recover_band(mags, X, F, config=None, label=""):
    """Recover g (canonical global sign) from ``|g|(X)``; returns ``(signal, diagnostics)``."""
    cfg = config or RecoveryConfig()
    mags = _check(mags, X, F)
    diag = RecoveryDiagnostics(label=label)
    if mags.max(initial=0) == 0:
        diag.method, diag.converged = "zero", True
        diag.magnitude_residual = diag.consistency_residual = 0.0
        return BandLimitedSignal.zeros(F.grid, F), diag
    interp = LatticeInterpolator(X, F)
    sites = X.sites
    zero = zero_mask(mags)
    best = None

    def accept(g, s, mres, cres, it, method):
        nonlocal best
        if best is None or max(mres, cres) < max(best[2], best[3]):
            best = (g, s, mres, cres, it, method)
        return max(mres, cres) <= cfg.tol

    done = False
    ran = 0
    if cfg.method in ("auto", "lift"):
        try:
            est, quality = lifted_estimate(mags, X, F)
        except NotStableSamplingError:
            # X cannot carry F + F; only the projection route applies
            if cfg.method == "lift":
                raise
            est = None
        if est is not None:
            diag.sqrt_quality = quality
            s0 = np.where(est[sites] >= 0, 1.0, -1.0)
            done = accept(*_settle(mags, interp, sites, s0, zero, cfg.max_iter), "lift")
    if not done and cfg.method in ("auto", "projections"):
        rng = np.random.default_rng(cfg.seed)
        while ran < cfg.restarts and not done:
            ran += 1
            s0 = rng.choice([-1.0, 1.0], size=len(mags))
            done = accept(*_settle(mags, interp, sites, s0, zero, cfg.max_iter), "projections")
        # a few extra restarts look for a distinct solution at the same residual level
        if done:
            ref = best[0] * canonical_sign(best[0][sites])
            ref_res = max(best[2], best[3])
            for _ in range(min(8, cfg.restarts - ran)):
                ran += 1
                s0 = rng.choice([-1.0, 1.0], size=len(mags))
                g2, _, m2, c2, _ = _settle(mags, interp, sites, s0, zero, cfg.max_iter)
                g2 = g2 * canonical_sign(g2[sites])
                if (
                    max(m2, c2) <= cfg.tol
                    and abs(max(m2, c2) - ref_res) <= TIE_TOL
                    and np.linalg.norm(g2 - ref) > 1e-6 * np.linalg.norm(ref)
                ):
                    diag.ambiguous = True
                    break
    g, s, mres, cres, it, method = best
    diag.method, diag.iterations, diag.restarts = method, it, ran
    diag.magnitude_residual, diag.consistency_residual = mres, cres
    diag.converged = bool(max(mres, cres) <= cfg.tol)
    if not diag.converged and cfg.strict:
        raise RecoveryError(f"band {label!r} did not converge", max(mres, cres), diag)
    g = g * canonical_sign(g[sites])
    return BandLimitedSignal(F.grid, g, F), diag
