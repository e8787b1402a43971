import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_bl
from signret.blcore import (
    BandLimitedSignal,
    FrequencySupport,
    Grid,
    LatticeInterpolator,
    SamplingLattice,
    convolve,
    forward_spectrum,
    interpolate_from_lattice,
    inverse_spectrum,
    is_hermitian,
    minkowski_sum,
    sample_on_lattice,
    signal_distance,
)
from signret.errors import (
    CommensurabilityError,
    ContainmentError,
    GridMismatchError,
    NotStableSamplingError,
    ValidationError,
)


def dft_oracle(v, h):
    """Direct O(N^2) evaluation of sum_n v_n exp(-2 pi i k n / N) * h."""
    n = len(v)
    k = np.arange(n)
    return (np.exp(-2j * np.pi * np.outer(k, k) / n) @ v) * h


class TestGrid:
    def test_geometry(self):
        g = Grid((16, 8), (2.0, 1.0))
        assert g.dim == 2
        assert g.spacing == (0.125, 0.125)
        assert g.bin_volume == 0.5
        k0, k1 = g.bins()
        assert k0.min() == -8 and k0.max() == 7
        assert k1.min() == -4 and k1.max() == 3

    @pytest.mark.parametrize("shape", [(6,), (2,), (8, 8, 8), (12, 8)])
    def test_rejects_bad_shapes(self, shape):
        with pytest.raises(ValidationError):
            Grid(shape, (1.0,) * len(shape))

    def test_rejects_bad_period(self):
        with pytest.raises(ValidationError):
            Grid((8,), (0.0,))


class TestSpectrum:
    def test_constant_is_dc(self):
        g = Grid((8,), (1.0,))
        spec = forward_spectrum(BandLimitedSignal(g, np.ones(8)))
        assert abs(spec[0]) == pytest.approx(1.0)
        assert np.abs(spec[1:]).max() < 1e-14

    def test_single_tone(self):
        g = Grid((16,), (1.0,))
        x = g.coordinates()[0]
        spec = forward_spectrum(BandLimitedSignal(g, np.cos(2 * np.pi * x)))
        assert abs(spec[1]) == pytest.approx(0.5)
        assert abs(spec[-1]) == pytest.approx(0.5)
        rest = np.delete(spec, [1, 15])
        assert np.abs(rest).max() < 1e-14

    def test_against_direct_sum(self, rng):
        g = Grid((16,), (3.0,))
        v = rng.normal(size=16)
        spec = forward_spectrum(BandLimitedSignal(g, v))
        assert np.allclose(spec, dft_oracle(v, g.spacing[0]), atol=1e-12)
        assert is_hermitian(spec)
        parseval = np.sum(np.abs(spec) ** 2) * g.bin_volume / (np.sum(v**2) * g.cell_volume)
        assert abs(parseval - 1) < 1e-12

    def test_round_trip(self, rng):
        g = Grid((32, 16), (1.0, 2.0))
        f = BandLimitedSignal(g, rng.normal(size=g.shape))
        back = inverse_spectrum(forward_spectrum(f), g)
        assert signal_distance(back, f, up_to_sign=False) < 1e-12

    def test_rejects_nonfinite(self):
        g = Grid((8,), (1.0,))
        with pytest.raises(ValidationError):
            BandLimitedSignal(g, np.array([np.nan] + [0.0] * 7))

    def test_rejects_complex_signal(self):
        g = Grid((8,), (1.0,))
        with pytest.raises(ValidationError):
            BandLimitedSignal(g, np.ones(8) * (1 + 1j))

    def test_rejects_energy_outside_support(self, small_grid, small_box, rng):
        with pytest.raises(ValidationError):
            BandLimitedSignal(small_grid, rng.normal(size=64), small_box)


class TestSupport:
    def test_containment_error(self, small_grid):
        mask = np.zeros(64, bool)
        mask[[0, 5, -5]] = True
        with pytest.raises(ContainmentError, match="not contained"):
            FrequencySupport(small_grid, mask, [[4 / 64]])

    def test_singular_matrix(self, small_grid):
        with pytest.raises(ValidationError):
            FrequencySupport(small_grid, np.ones(64, bool), [[0.0]])

    def test_extent_and_measure(self, small_box):
        assert small_box.extent() == (3,)
        assert small_box.measure() == pytest.approx(7 / 64)


class TestConvolve:
    def test_identity_filter(self, rng, small_box):
        f = random_bl(small_box, rng)
        assert signal_distance(convolve(f, np.ones(64)), f, up_to_sign=False) < 1e-14

    def test_disjoint_supports(self, rng, small_box, small_grid):
        f = random_bl(small_box, rng)
        filt = np.zeros(64)
        filt[10] = filt[-10] = 1
        out = convolve(f, filt)
        assert np.abs(out.values).max() < 1e-14
        assert not out.support.mask.any()

    def test_against_circular_sum(self, rng):
        g = Grid((8,), (2.0,))
        f = BandLimitedSignal(g, rng.normal(size=8))
        psi = rng.normal(size=8)
        spec = forward_spectrum(BandLimitedSignal(g, psi))
        direct = np.array([sum(f.values[m] * psi[(n - m) % 8] for m in range(8)) for n in range(8)]) * g.spacing[0]
        assert np.allclose(convolve(f, spec).values, direct, rtol=1e-10, atol=1e-12)

    def test_support_intersection(self, rng, small_box):
        f = random_bl(small_box, rng)
        filt = np.zeros(64)
        filt[[0, 1, 2, -1, -2, 30]] = 1
        out = convolve(f, filt)
        assert out.support.mask.sum() == 5

    def test_grid_mismatch(self, rng, small_box):
        with pytest.raises(GridMismatchError):
            convolve(random_bl(small_box, rng), np.ones(32))


class TestLattice:
    def test_full_grid(self, rng):
        g = Grid((8,), (1.0,))
        f = BandLimitedSignal(g, rng.normal(size=8))
        lat = SamplingLattice.rectangular(g, 1)
        assert np.array_equal(sample_on_lattice(f, lat), f.values)

    def test_stride_two(self):
        g = Grid((8,), (1.0,))
        lat = SamplingLattice.rectangular(g, 2)
        assert lat.size == 4
        assert lat.density == pytest.approx(4.0)

    def test_rotated_sites_match_direct_evaluation(self):
        g = Grid((32, 32), (32.0, 32.0))
        G = np.array([[2.0, 2.0], [-2.0, 2.0]])
        lat = SamplingLattice.build(g, G)
        assert lat.size == 32 * 32 // 8
        direct = lat.lattice_coords @ G.T
        assert np.allclose(np.mod(direct, 32), lat.indices)
        assert lat.strides is None

    def test_off_grid_rejected(self):
        g = Grid((16,), (1.0,))
        with pytest.raises(CommensurabilityError):
            SamplingLattice.build(g, [[0.1]])

    def test_non_periodic_rejected(self):
        g = Grid((16,), (1.0,))
        with pytest.raises(CommensurabilityError):
            SamplingLattice.build(g, [[3 / 16]])

    def test_lexicographic_order(self):
        g = Grid((8, 8), (8.0, 8.0))
        lat = SamplingLattice.rectangular(g, (2, 4))
        n = [tuple(r) for r in lat.lattice_coords]
        assert n == sorted(n)


class TestInterpolation:
    def test_oversampled_recovery(self, rng, small_grid, small_box):
        g = random_bl(small_box, rng)
        lat = SamplingLattice.rectangular(small_grid, 4)
        out = interpolate_from_lattice(sample_on_lattice(g, lat), lat, small_box)
        assert signal_distance(out, g, up_to_sign=False) < 1e-8

    def test_zero_samples(self, small_grid, small_box):
        lat = SamplingLattice.rectangular(small_grid, 4)
        out = interpolate_from_lattice(np.zeros(lat.size), lat, small_box)
        assert np.abs(out.values).max() == 0

    def test_undersampled_rejected(self, small_grid, small_box):
        lat = SamplingLattice.rectangular(small_grid, 16)
        with pytest.raises(NotStableSamplingError, match="not a stable sampling set"):
            interpolate_from_lattice(np.zeros(lat.size), lat, small_box)
        with pytest.raises(NotStableSamplingError):
            LatticeInterpolator(lat, small_box, dense=True)

    def test_fast_and_dense_agree(self, rng, small_grid, small_box):
        lat = SamplingLattice.rectangular(small_grid, 4, 1)
        y = rng.normal(size=lat.size)
        a = LatticeInterpolator(lat, small_box)(y)
        b = LatticeInterpolator(lat, small_box, dense=True)(y)
        assert np.allclose(a.values, b.values, atol=1e-10)

    def test_shifted_lattice_smoke(self, rng, small_grid, small_box):
        g = random_bl(small_box, rng)
        lat = SamplingLattice.rectangular(small_grid, 8, 3)
        out = interpolate_from_lattice(sample_on_lattice(g, lat), lat, small_box)
        assert signal_distance(out, g, up_to_sign=False) < 1e-8

    def test_rotated_lattice_2d(self, rng):
        grid = Grid((16, 16), (16.0, 16.0))
        F = FrequencySupport.box(grid, (2.5 / 16, 2.5 / 16))
        lat = SamplingLattice.build(grid, [[1.0, 1.0], [-1.0, 1.0]])
        g = random_bl(F, rng)
        out = interpolate_from_lattice(sample_on_lattice(g, lat), lat, F)
        assert signal_distance(out, g, up_to_sign=False) < 1e-8

    def test_round_trip_100_signals(self, rng):
        grid = Grid((32, 32), (8.0, 8.0))
        F = FrequencySupport.box(grid, (0.8, 0.55))
        lat = SamplingLattice.rectangular(grid, (2, 2))
        interp = LatticeInterpolator(lat, F)
        worst = 0.0
        for _ in range(100):
            g = random_bl(F, rng)
            worst = max(worst, signal_distance(interp(sample_on_lattice(g, lat)), g, up_to_sign=False))
        assert worst < 1e-8


class TestMinkowski:
    def test_interval(self, small_grid, small_box):
        s = minkowski_sum(small_grid, small_box.mask)
        k = small_grid.bins()[0]
        assert set(k[s]) == set(range(-6, 7))

    def test_wrap_rejected(self, small_grid):
        F = FrequencySupport.box(small_grid, 20 / 64)
        with pytest.raises(ValidationError):
            minkowski_sum(small_grid, F.mask)


@settings(max_examples=40, deadline=None)
@given(
    K=st.integers(0, 7),
    stride=st.sampled_from([1, 2, 4]),
    shift=st.integers(0, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_interpolation_reproduces_band_limited_signals(K, stride, shift, seed):
    grid = Grid((64,), (64.0,))
    F = FrequencySupport.box(grid, (K + 0.5) / 64)
    lat = SamplingLattice.rectangular(grid, stride, shift % stride)
    g = random_bl(F, np.random.default_rng(seed))
    out = interpolate_from_lattice(sample_on_lattice(g, lat), lat, F)
    assert signal_distance(out, g, up_to_sign=False) < 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([4, 8, 16]))
def test_convolution_theorem(seed, n):
    r = np.random.default_rng(seed)
    g = Grid((n,), (1.5,))
    f = BandLimitedSignal(g, r.normal(size=n))
    psi = r.normal(size=n)
    spec = forward_spectrum(BandLimitedSignal(g, psi))
    direct = np.array([sum(f.values[m] * psi[(k - m) % n] for m in range(n)) for k in range(n)]) * g.spacing[0]
    out = convolve(f, spec).values
    assert np.linalg.norm(out - direct) <= 1e-10 * np.linalg.norm(direct)
