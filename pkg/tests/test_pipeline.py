import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kcmd.data import (
    CategoricalColumn,
    Dataset,
    FunctionalColumn,
    ScalarColumn,
    VectorColumn,
)
from kcmd.errors import BandwidthError, ConfigError, StageError
from kcmd.pipeline import (
    TestConfig,
    backward_eliminate,
    independence_test,
    resolve_bandwidths,
    run_significance_test,
)
from kcmd.simulation import DgpSpec, generate

FAST = TestConfig(n_boot=200, seed=5)


def s1(n, q_w, seed):
    return generate(DgpSpec("S.1", n, q_w=q_w), np.random.default_rng(seed))


class TestDeterminism:
    def test_identical_reports(self):
        d = s1(60, 1, 0)
        a = run_significance_test(d, FAST)
        b = run_significance_test(d, FAST)
        assert a.statistic == b.statistic and a.bandwidths == b.bandwidths
        assert a.sigma_c2 == b.sigma_c2 and a.p_value == b.p_value
        assert np.array_equal(a.bootstrap.replicates, b.bootstrap.replicates)
        assert a.statistic.n_u_n == b.statistic.n_u_n

    def test_seed_changes_only_bootstrap(self):
        d = s1(60, 0, 1)
        a = run_significance_test(d, FAST)
        b = run_significance_test(d, replace(FAST, seed=6))
        assert a.statistic == b.statistic
        assert not np.array_equal(a.bootstrap.replicates, b.bootstrap.replicates)


class TestInvariance:
    def test_shift_and_scale(self):
        d = s1(50, 1, 2)
        ref = run_significance_test(d, FAST)
        rng = np.random.default_rng(0)
        x2 = d.x_cont * rng.uniform(0.1, 10, d.d_c) + rng.standard_normal(d.d_c)
        w2 = tuple(FunctionalColumn(c.grid, c.values * 3.7 - 2.0, c.name) for c in d.w)
        rep = run_significance_test(Dataset(d.y, x2, d.x_disc, w2), FAST)
        assert abs(rep.statistic.n_u_n - ref.statistic.n_u_n) <= 1e-10 * abs(ref.statistic.n_u_n)
        assert_allclose(rep.bootstrap.replicates, ref.bootstrap.replicates,
                        rtol=1e-10, atol=1e-10 * np.abs(ref.bootstrap.replicates).max())
        assert rep.p_value == ref.p_value

    def test_row_permutation(self):
        d = s1(40, 1, 3)
        p = np.random.default_rng(1).permutation(40)
        a = run_significance_test(d, FAST).statistic
        b = run_significance_test(d.take(p), FAST).statistic
        assert abs(a.n_u_n - b.n_u_n) <= 1e-10 * abs(a.n_u_n)


class TestBandwidths:
    def dataset(self, d):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((80, d)) if d else None
        y = ScalarColumn(rng.standard_normal(80))
        disc = () if d else (CategoricalColumn(rng.integers(0, 3, 80), 3),)
        return Dataset(y, x, disc, (ScalarColumn(rng.standard_normal(80)),))

    def test_two_dims(self):
        bw = resolve_bandwidths(self.dataset(2), TestConfig())
        assert bw.nu == 2
        assert_allclose(bw.h_tilde, 1.25 * bw.h_gcv, rtol=1e-15)
        assert_allclose(bw.h, 1.1 * bw.h_tilde * 80 ** (-1 / 6), rtol=1e-14)
        assert_allclose(bw.kappa_n, 500 * math.log(80), rtol=1e-15)

    def test_gcv_base(self):
        bw = resolve_bandwidths(self.dataset(1), TestConfig(h_base="gcv", m_h=1.0))
        assert_allclose(bw.h, bw.h_gcv * 80 ** (-1 / 5), rtol=1e-14)

    def test_four_dims_order_four(self):
        bw = resolve_bandwidths(self.dataset(4), TestConfig())
        assert bw.nu == 4
        assert_allclose(bw.h, bw.h_tilde * 80 ** (-1 / 12), rtol=1e-14)

    def test_discrete(self):
        bw = resolve_bandwidths(self.dataset(0), TestConfig())
        assert bw.discrete and bw.h is None

    def test_too_many_dims(self):
        with pytest.raises(BandwidthError, match="insufficient"):
            resolve_bandwidths(self.dataset(8), TestConfig())

    def test_discrete_pipeline_runs(self):
        rep = run_significance_test(self.dataset(0), FAST)
        assert rep.bandwidths.discrete and 0 < rep.p_value <= 1


class TestErrors:
    def test_validation_stage(self):
        d = Dataset(ScalarColumn(np.zeros(3)), np.arange(3.0), w=(ScalarColumn(np.arange(3.0)),))
        with pytest.raises(StageError) as info:
            run_significance_test(d, FAST)
        assert info.value.stage == "validate"
        assert "n<4" in str(info.value)

    def test_scaling_stage(self):
        d = Dataset(ScalarColumn(np.arange(6.0)), np.arange(6.0),
                    w=(ScalarColumn(np.ones(6), "flat"),))
        with pytest.raises(StageError, match=r"\[scaling\].*'flat'"):
            run_significance_test(d, FAST)

    def test_bandwidth_stage(self):
        rng = np.random.default_rng(0)
        d = Dataset(ScalarColumn(rng.standard_normal(20)), rng.standard_normal((20, 8)),
                    w=(ScalarColumn(rng.standard_normal(20)),))
        with pytest.raises(StageError) as info:
            run_significance_test(d, FAST)
        assert info.value.stage == "bandwidth"

    @pytest.mark.parametrize("kw", [dict(alpha=1.5), dict(n_boot=0), dict(p_sigma=0),
                                    dict(quantile="type6"), dict(nu=3), dict(seed=-1)])
    def test_config(self, kw):
        with pytest.raises(ConfigError):
            TestConfig(**kw)


class TestIndependence:
    def independent(self, seed, effect):
        rng = np.random.default_rng(seed)
        n = 80
        x = rng.standard_normal(n)
        w = rng.standard_normal(n)
        y = x + effect * w + 0.5 * rng.standard_normal(n)
        return Dataset(ScalarColumn(y), x, w=(ScalarColumn(w, "w"),))

    def test_detects(self):
        rep = independence_test(self.independent(0, 1.0), FAST)
        assert rep.reject and rep.p_value < 0.01

    def test_null_p_values_spread(self):
        p = [independence_test(self.independent(s, 0.0), FAST).p_value for s in range(20)]
        assert np.mean(np.array(p) < 0.05) <= 0.2
        assert max(p) > 0.3


def elimination_data(seed, n=100):
    rng = np.random.default_rng(seed)
    x1, x2, e1, e2 = rng.standard_normal((4, n))
    y = x1 + np.sin(2 * x2) + 0.3 * rng.standard_normal(n)
    groups = {
        "x1": [ScalarColumn(x1, "x1")],
        "x2": [ScalarColumn(x2, "x2")],
        "noise1": [ScalarColumn(e1, "e1")],
        "noise2": [ScalarColumn(e2, "e2")],
    }
    return ScalarColumn(y, "y"), groups


class TestElimination:
    @pytest.mark.slow
    def test_two_groups_noise_first(self):
        hits = 0
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            x, e = rng.standard_normal((2, 80))
            y = ScalarColumn(2 * x + rng.standard_normal(80), "y")
            groups = {"x": [ScalarColumn(x, "x")], "noise": [ScalarColumn(e, "e")]}
            res = backward_eliminate(y, groups, TestConfig(n_boot=200, seed=seed))
            hits += res.removed[:1] == ("noise",)
        assert hits >= 40

    @pytest.mark.slow
    def test_removes_noise(self):
        cfg = TestConfig(n_boot=200)
        hits, total = 0, 0
        kept = 0
        for seed in range(50):
            y, groups = elimination_data(seed)
            res = backward_eliminate(y, groups, replace(cfg, seed=seed))
            assert res.error is None
            hits += sum(g in res.removed for g in ("noise1", "noise2"))
            kept += all(g in res.remaining for g in ("x1", "x2"))
            total += 2
        assert hits / total >= 0.8
        assert kept >= 40

    def test_alpha_zero_keeps_one(self):
        # every p-value exceeds 0, so groups go until one remains
        y, groups = elimination_data(0, 60)
        res = backward_eliminate(y, groups, FAST, alpha_step=0.0)
        assert len(res.remaining) == 1 and len(res.removed) == 3
        assert res.trace[-1].step == 3
        assert len(res.trace) == 4 + 3 + 2

    def test_alpha_one_removes_nothing(self):
        # removal needs a p-value strictly above alpha_step
        y, groups = elimination_data(0, 60)
        res = backward_eliminate(y, groups, FAST, alpha_step=1.0)
        assert res.removed == () and len(res.trace) == 4

    def test_first_step_p_values(self):
        y, groups = elimination_data(1, 60)
        res = backward_eliminate(y, groups, FAST)
        first = {s.group: s.p_value for s in res.trace if s.step == 1}
        x = np.column_stack([groups[g][0].values for g in ("x1", "x2", "noise2")])
        d = Dataset(y, x, (), tuple(groups["noise1"]))
        assert first["noise1"] == run_significance_test(d, FAST).p_value

    def test_mixed_columns(self):
        rng = np.random.default_rng(2)
        n = 50
        groups = {"v": [VectorColumn(rng.standard_normal((n, 2)), "v")],
                  "c": [CategoricalColumn(rng.integers(0, 2, n), 2, "c")],
                  "s": [ScalarColumn(rng.standard_normal(n), "s")]}
        res = backward_eliminate(ScalarColumn(rng.standard_normal(n)), groups, FAST)
        assert res.error is None and len(res.trace) >= 3

    def test_error_reported(self):
        rng = np.random.default_rng(3)
        groups = {"a": [ScalarColumn(rng.standard_normal(30), "a")],
                  "flat": [ScalarColumn(np.ones(30), "flat")]}
        res = backward_eliminate(ScalarColumn(rng.standard_normal(30)), groups, FAST)
        assert res.error is not None and "flat" in res.error
