import numpy as np
import pytest

from conftest import random_bl
from signret.blcore import FrequencySupport, Grid, LatticeInterpolator, sample_on_lattice, signal_distance
from signret.errors import CommensurabilityError, ContainmentError, ValidationError
from signret.sampling import (
    MEYER_ALPHA_MAX,
    SignBlindSpec,
    commensurate_c,
    containment_excess,
    curvelet_box_constants,
    fit_bounding_box,
    lattice_density,
    make_sign_blind_lattice,
    meyer_alpha_check,
    meyer_alpha_from_c,
    meyer_c_from_alpha,
    meyer_lattices,
    sign_blind_density,
    sign_blind_generator,
)


def test_unit_box_gives_half_integers():
    grid = Grid((64,), (16.0,))
    F = FrequencySupport.box(grid, 0.5)
    lat = make_sign_blind_lattice(SignBlindSpec(F, [[1.0]]))
    assert lat.generator[0, 0] == 0.5
    assert lattice_density(lat) == pytest.approx(2.0)
    assert lat.size == 32


def test_meyer_lattice_spacing(meyer):
    fr, lats, _ = meyer
    assert lats["phi"].generator[0, 0] == pytest.approx(MEYER_ALPHA_MAX)
    for j in range(4):
        c = 2.0 ** (j + 3) / 3
        assert lats[f"psi{j}"].generator[0, 0] == pytest.approx(3 * 2.0 ** (-j - 4))
        assert meyer_alpha_from_c(j, c) == pytest.approx(3 / 16)
        assert meyer_c_from_alpha(j, 3 / 16) == pytest.approx(c)


def test_curvelet_level_one_generator():
    G = sign_blind_generator(np.diag(curvelet_box_constants(1)))
    assert np.allclose(G, np.diag([3 * 2.0**-7, 9 / (40 * np.pi)]))


def test_curvelet_generator_formula():
    for j in range(1, 5):
        G = sign_blind_generator(np.diag(curvelet_box_constants(j)))
        assert np.allclose(np.diag(G), [3 * 2.0 ** (-2 * j - 5), 9 / (20 * np.pi) * 2.0**-j])


class TestDensity:
    def test_1d(self):
        assert sign_blind_density([[3.0]]) == pytest.approx(6.0)

    def test_2d(self):
        assert sign_blind_density(np.diag([2.0, 5.0])) == pytest.approx(40.0)

    def test_rotation_invariant(self):
        t = 0.3
        R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        assert sign_blind_density(R @ np.diag([2.0, 5.0])) == pytest.approx(40.0)

    def test_lattice_density_matches_formula(self):
        grid = Grid((128, 128), (8.0, 8.0))
        F = FrequencySupport.box(grid, (0.9, 1.9))
        spec = SignBlindSpec(F, np.diag([2.0, 4.0]), (1.0, 2.0))
        lat = make_sign_blind_lattice(spec)
        assert abs(lattice_density(lat) / sign_blind_density(spec.M, spec.s) - 1) < 1e-9


class TestSpecValidation:
    def test_containment_reports_worst_bin(self):
        grid = Grid((64,), (16.0,))
        F = FrequencySupport.box(grid, 0.5)
        with pytest.raises(ContainmentError, match=r"worst bin \(7,\)"):
            SignBlindSpec(F, [[0.5]])

    def test_subcritical(self):
        grid = Grid((64,), (16.0,))
        F = FrequencySupport.box(grid, 0.5)
        with pytest.raises(ValidationError, match="sub-critical dilation"):
            SignBlindSpec(F, [[1.0]], (0.9,))

    def test_subcritical_one_axis(self):
        grid = Grid((32, 32), (8.0, 8.0))
        F = FrequencySupport.box(grid, 0.5)
        with pytest.raises(ValidationError, match="sub-critical"):
            SignBlindSpec(F, np.eye(2), (1.0, 0.9))


class TestBoxFit:
    def test_meyer_scaling_band(self, meyer):
        F = meyer[0]["phi"].support
        c = fit_bounding_box(F)[0, 0]
        bin_w = 1 / 24
        assert 4 / 3 - 2 * bin_w <= c <= 4 / 3 + bin_w
        assert containment_excess(F.grid, F.mask, [[c]])[0] <= 0
        assert containment_excess(F.grid, F.mask, [[c - 2 * bin_w]])[0] > 0

    def test_rectangle(self):
        grid = Grid((64, 64), (16.0, 16.0))
        F = FrequencySupport.box(grid, (1.0, 0.5))
        M = fit_bounding_box(F)
        assert np.count_nonzero(M - np.diag(np.diag(M))) == 0
        assert np.allclose(np.diag(M), [2.0, 1.0], atol=1 / 16 + 1e-12)

    def test_rotated_strip(self):
        grid = Grid((64, 64), (16.0, 16.0))
        x1, x2 = grid.frequencies()
        strip = (np.abs(x1 - x2) < 0.2) & (np.abs(x1 + x2) < 2.5)
        F = FrequencySupport(grid, strip, np.diag([4.0, 4.0]))
        t = np.pi / 4
        R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        aligned = fit_bounding_box(F)
        rotated = fit_bounding_box(F, R)
        assert abs(np.linalg.det(rotated)) < 0.5 * abs(np.linalg.det(aligned))
        assert containment_excess(grid, strip, rotated)[0] <= 0

    def test_tightness_duality(self, curvelet):
        for b in curvelet[0].bands:
            M = fit_bounding_box(b.support)
            assert containment_excess(b.support.grid, b.support.mask, M)[0] <= 0
            for i in range(2):
                D = M.copy()
                D[i, i] -= 2 / 1.5
                assert containment_excess(b.support.grid, b.support.mask, D)[0] > 0

    def test_empty(self):
        grid = Grid((8,), (1.0,))
        with pytest.raises(ValidationError):
            fit_bounding_box(FrequencySupport(grid, np.zeros(8, bool), [[8.0]]))


class TestAlpha:
    @pytest.mark.parametrize("alpha,ok", [(3 / 16, True), (0.2, False), (3 / 32, True), (0.25, False)])
    def test_gate(self, alpha, ok):
        assert meyer_alpha_check(alpha) is ok

    def test_lattices_refuse_large_alpha(self, meyer):
        with pytest.raises(ValidationError, match="exceeds 3/16"):
            meyer_lattices(meyer[0], 0.25)


def test_commensurate_c():
    grid = Grid((1024,), (24.0,))
    c = commensurate_c(2.0, grid)
    h = 24 / 1024
    stride = 1 / (2 * c) / h
    assert c >= 2.0 and stride == int(stride) and int(stride) & (int(stride) - 1) == 0
    with pytest.raises(CommensurabilityError):
        commensurate_c(1e4, grid)


@pytest.mark.parametrize("which", ["meyer", "curvelet"])
def test_signed_samples_interpolate(which, meyer, curvelet, rng):
    fr, lats, _ = meyer if which == "meyer" else curvelet
    for b in fr.bands:
        g = random_bl(b.support, rng)
        X = lats[b.label]
        out = LatticeInterpolator(X, b.support)(sample_on_lattice(g, X))
        assert signal_distance(out, g, up_to_sign=False) < 1e-8
