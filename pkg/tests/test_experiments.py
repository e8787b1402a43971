import csv
import io
import json
import math

import numpy as np
import pytest

from signret.blcore import Grid, signal_distance
from signret.errors import CommensurabilityError, ValidationError
from signret.experiments import (
    counterexample_pair,
    random_decaying_signal,
    redundancy_report,
    sharpness_bracket,
    single_band_instability,
    stability_probe,
    tensor_counterexample,
)
from signret.frames import SemiDiscreteFrame
from signret.recovery import recover_band_oracle


class TestCounterexample:
    @pytest.mark.parametrize("s", [0.5, 0.25, 15 / 16])
    def test_pair(self, s):
        ce = counterexample_pair(s)
        assert ce.discrepancy <= 1e-10
        assert ce.separation >= 0.5
        assert ce.passed

    def test_half_is_integer_lattice(self):
        ce = counterexample_pair(0.5)
        assert ce.lattice.generator[0, 0] == 1.0
        x = ce.h1.grid.coordinates()[0]
        assert np.allclose(ce.u, np.sin(np.pi * x / 2))

    def test_identity(self):
        for s in (0.5, 15 / 16):
            ce = counterexample_pair(s)
            lhs = np.abs(ce.h1.values) ** 2 - np.abs(ce.h2.values) ** 2
            assert np.abs(lhs - ce.u * ce.v).max() <= 1e-10

    def test_oracle_finds_both(self):
        ce = counterexample_pair(0.5)
        cands = recover_band_oracle(np.abs(ce.h1.values[ce.lattice.sites]), ce.lattice, ce.support)
        assert len(cands) >= 2
        assert any(signal_distance(c, ce.h2) < 1e-8 for c in cands)

    def test_sharpness_bracket(self):
        counts = sharpness_bracket()
        assert counts["critical"] == 1
        assert counts["undersampled"] >= 2

    @pytest.mark.parametrize("s", [0.0, 1.0, 1.5])
    def test_rejects_s(self, s):
        with pytest.raises(ValidationError):
            counterexample_pair(s)

    def test_incommensurate_grid(self):
        with pytest.raises(CommensurabilityError):
            counterexample_pair(0.5, grid=Grid((64,), (10.0,)))


class TestTensor:
    def test_one_half(self):
        tc = tensor_counterexample((1, 0.5))
        assert tc.discrepancy <= 1e-10 and tc.separation >= 0.5 and tc.axis == 1

    def test_refuses_critical(self):
        with pytest.raises(ValidationError, match="no sub-critical axis"):
            tensor_counterexample((1, 1))

    def test_swap_symmetry(self):
        a = tensor_counterexample((1, 0.5))
        b = tensor_counterexample((0.5, 1))
        assert b.axis == 0
        assert np.allclose(a.g1.values, b.g1.values.T)
        assert a.separation == pytest.approx(b.separation)


class TestInstability:
    def test_meyer_psi1(self, meyer, rng):
        fr, _, wb = meyer
        f = random_decaying_signal(wb, rng)
        r = single_band_instability(f, fr, "psi1", 1e-6)
        assert r.difference_norm == pytest.approx(1.0)
        assert r.filtered_norm <= 1e-6
        assert r.ratio >= 1e5
        assert np.allclose(r.f_tilde.values - f.values, r.p.values)

    def test_all_pass_filter(self, rng):
        grid = Grid((32,), (32.0,))
        fr = SemiDiscreteFrame(grid, [("one", np.ones(32))])
        from signret.blcore import BandLimitedSignal

        with pytest.raises(ValidationError, match="no off-band room"):
            single_band_instability(BandLimitedSignal(grid, rng.normal(size=32)), fr, "one", 1e-6)

    def test_ratio_grows(self, meyer, rng):
        fr, _, wb = meyer
        f = random_decaying_signal(wb, rng)
        ratios = [single_band_instability(f, fr, "psi1", e).ratio for e in (1e-1, 1e-2, 1e-3)]
        assert ratios[0] <= ratios[1] <= ratios[2]
        assert all(r >= 1 / e for r, e in zip(ratios, (1e-1, 1e-2, 1e-3)))


class TestRedundancy:
    def test_curvelet(self):
        r = redundancy_report((3 * 2.0**-5, 9 / (20 * math.pi)), "curvelet")
        assert r.factors[0] == pytest.approx(2.29, rel=0.01)
        assert r.factors[1] == pytest.approx(2.0, rel=0.01)
        assert r.value <= 4.58 and r.value == pytest.approx(4.58, rel=0.01)

    def test_meyer(self):
        assert float(redundancy_report(3 / 16, "meyer")) == pytest.approx(16 / 3)

    def test_bad(self):
        with pytest.raises(ValidationError):
            redundancy_report(0.1, "gabor")
        with pytest.raises(ValidationError):
            redundancy_report(-1.0, "meyer")


class TestProbe:
    def test_noiseless_and_noisy(self, meyer, rng):
        fr, lats, wb = meyer
        f = random_decaying_signal(wb, rng)
        res = stability_probe(f, fr, lats, [0.0, 1e-3], trials=4, seed=5)
        per = res.summary["per_delta"]
        assert per["0.0"]["median_error"] <= 1e-4
        assert math.isfinite(per["0.001"]["median_error"])
        rows = list(csv.DictReader(io.StringIO(res.to_csv())))
        assert len(rows) == 1 + 4
        assert len(res.plot_data().splitlines()) == 2
        json.loads(res.to_json())

    def test_zeroed_band_flags_propagation(self, meyer, rng):
        fr, lats, wb = meyer
        f = random_decaying_signal(wb, rng)
        res = stability_probe(f, fr, lats, [1.0], trials=2, kind="attenuate", targets=["psi1"])
        assert all(r["status"] == "failed:propagation" for r in res.rows)
        assert res.summary["per_delta"]["1.0"]["failures"] == 2

    def test_reproducible(self, meyer, rng):
        fr, lats, wb = meyer
        f = random_decaying_signal(wb, rng)
        a = stability_probe(f, fr, lats, [1e-3], trials=3, seed=9)
        b = stability_probe(f, fr, lats, [1e-3], trials=3, seed=9, jobs=3)
        assert a.to_csv() == b.to_csv()
