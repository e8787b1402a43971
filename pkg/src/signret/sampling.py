"""Sign-blind sampling lattices.

A lattice ``X = (M^T)^-1 D[2s]^-1 Z^d`` is sign-blind for a spectral set F
when ``F`` sits inside ``M[-1/2, 1/2]^d`` and every ``s_i >= 1``; its
density is ``2^d |det M| prod(s)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blcore import FrequencySupport, SamplingLattice, containment_excess
from .errors import CommensurabilityError, ContainmentError, ValidationError

MEYER_ALPHA_MAX = 3.0 / 16.0


@dataclass(frozen=True)
class SignBlindSpec:
    support: FrequencySupport
    M: np.ndarray
    s: tuple = None

    def __post_init__(self):
        d = self.support.grid.dim
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if M.shape != (d, d) or abs(np.linalg.det(M)) <= 1e-12:
            raise ValidationError("M must be an invertible d x d matrix")
        s = np.ones(d) if self.s is None else np.broadcast_to(np.asarray(self.s, float), (d,))
        if np.any(s < 1):
            raise ValidationError(f"sub-critical dilation: s = {tuple(s)}")
        worst, where = containment_excess(self.support.grid, self.support.mask, M)
        if worst > 1e-12:
            raise ContainmentError(
                f"F not contained in M[-1/2,1/2]^d: worst bin {where} exceeds by {worst:.3e}"
            )
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "s", tuple(float(v) for v in s))


def sign_blind_generator(M, s=None):
    """Generator ``(M^T)^-1 D[2s]^-1`` of the sign-blind lattice."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    s = np.ones(len(M)) if s is None else np.broadcast_to(np.asarray(s, float), (len(M),))
    return np.linalg.inv(M.T) @ np.diag(1.0 / (2 * s))


def make_sign_blind_lattice(spec, grid=None, shift=None):
    grid = spec.support.grid if grid is None else grid
    return SamplingLattice.build(grid, sign_blind_generator(spec.M, spec.s), shift)


def lattice_density(lat):
    """Sites per unit length (1D) or area (2D)."""
    return lat.density


def sign_blind_density(M, s=None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = len(M)
    s = np.ones(d) if s is None else np.broadcast_to(np.asarray(s, float), (d,))
    return 2**d * abs(np.linalg.det(M)) * float(np.prod(s))


def fit_bounding_box(F, orientation=None):
    """Smallest ``M = R diag(c)`` with F inside ``M[-1/2,1/2]^d``, plus one bin of slack.

    ``c_i = 2 max |(R^T xi)_i| + w`` with ``w`` the smallest bin width, so
    the fit is tight to within one bin and F stays strictly inside the box.
    """
    grid = F.grid
    if not np.any(F.mask):
        raise ValidationError("cannot fit a box to an empty support")
    R = np.eye(grid.dim) if orientation is None else np.atleast_2d(np.asarray(orientation, float))
    xi = np.stack([a[F.mask] for a in grid.frequencies()])
    u = R.T @ xi
    slack = min(1.0 / p for p in grid.period)
    c = 2 * np.abs(u).max(axis=1) + slack
    return R @ np.diag(c)


def commensurate_c(c, grid, axis=0, s=1.0):
    """Smallest ``c' >= c`` whose lattice spacing ``1/(2 s c')`` is a stride dividing the grid."""
    n = grid.shape[axis]
    h = grid.spacing[axis]
    target = 1.0 / (2 * s * c)
    m = n
    while m > 1 and (m * h > target * (1 + 1e-12)):
        m //= 2
    if m * h > target * (1 + 1e-12):
        raise CommensurabilityError(
            f"grid too coarse: spacing {h:.4g} exceeds required lattice spacing {target:.4g}"
        )
    return 1.0 / (2 * s * m * h)


def meyer_alpha_check(alpha):
    """True iff the translation step ``alpha`` satisfies ``alpha <= 3/16``."""
    return bool(alpha > 0 and alpha <= MEYER_ALPHA_MAX + 1e-15)


def meyer_alpha_from_c(j, c):
    return 2.0 ** (j - 1) / c


def meyer_c_from_alpha(j, alpha):
    return 2.0 ** (j - 1) / alpha


def meyer_lattices(frame, alpha, check=True, s=1.0):
    """Per-band lattices ``alpha Z`` (scaling band) and ``alpha 2^-j Z`` (band j), divided by ``s``."""
    if check and not meyer_alpha_check(alpha):
        raise ValidationError(f"alpha = {alpha} exceeds 3/16: sign retrieval not guaranteed")
    out = {}
    for band in frame.bands:
        j = band.meta.get("j")
        c = 1.0 / (2 * alpha) if j is None else meyer_c_from_alpha(j, alpha)
        spec = SignBlindSpec(band.support, [[c]], (s,))
        out[band.label] = make_sign_blind_lattice(spec)
    return out


def curvelet_box_constants(j):
    """Box sides ``(2^(2j+4)/3, (20 pi/9) 2^(j-1))`` quoted for the level-j wedge."""
    return 2.0 ** (2 * j + 4) / 3.0, 20 * np.pi / 9 * 2.0 ** (j - 1)


def axis_aligned_lattices(frame, s=1.0):
    """Per-band axis-aligned sign-blind lattices from fitted boxes, snapped to the grid."""
    out = {}
    for band in frame.bands:
        grid = band.support.grid
        M = fit_bounding_box(band.support)
        c = [commensurate_c(M[i, i], grid, axis=i, s=s) for i in range(grid.dim)]
        out[band.label] = make_sign_blind_lattice(SignBlindSpec(band.support, np.diag(c), (s,) * grid.dim))
    return out
