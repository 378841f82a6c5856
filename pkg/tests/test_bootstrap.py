import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kcmd.bootstrap import (
    MAMMEN_PROBS,
    MAMMEN_VALUES,
    BootstrapRun,
    boot_stat,
    mammen_moments,
    mammen_sample,
    p_value_and_quantile,
    replicate_rng,
    run_bootstrap,
)
from kcmd.errors import ShapeError, ValidationError

from oracles import boot_loop


def sym(rng, n):
    A = rng.standard_normal((n, n))
    return (A + A.T) / 2


class TestMammen:
    def test_probabilities(self):
        assert_allclose(sum(MAMMEN_PROBS), 1.0, rtol=1e-15)
        assert MAMMEN_PROBS[0] > 0.72

    @pytest.mark.parametrize("order,value", [(1, 0.0), (2, 1.0), (3, 1.0)])
    def test_moments(self, order, value):
        assert abs(mammen_moments(order) - value) < 1e-14

    def test_draws(self):
        r = mammen_sample(1_000_000, replicate_rng(123, 0))
        assert set(np.unique(r)) == set(MAMMEN_VALUES)
        se = 1 / np.sqrt(r.size)
        assert abs(r.mean()) < 4 * se
        # var(r^2) and var(r^3) are 1 and 3 for this law
        assert abs((r ** 2).mean() - 1) < 4 * se
        assert abs((r ** 3).mean() - 1) < 4 * np.sqrt(3) * se

    def test_streams_differ(self):
        a = mammen_sample(50, replicate_rng(1, 0))
        b = mammen_sample(50, replicate_rng(1, 1))
        c = mammen_sample(50, replicate_rng(2, 0))
        assert not np.array_equal(a, b) and not np.array_equal(a, c)

    def test_stream_reproducible(self):
        assert np.array_equal(mammen_sample(20, replicate_rng(9, 4)),
                              mammen_sample(20, replicate_rng(9, 4)))

    def test_negative_seed_accepted(self):
        mammen_sample(3, replicate_rng(-5, 0))


class TestBootStat:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 12))
    def test_matches_loop(self, seed, n):
        rng = np.random.default_rng(seed)
        D, GE, r = sym(rng, n), sym(rng, n), rng.standard_normal(n)
        v = boot_stat(D, GE, r)
        assert abs(v - boot_loop(D, GE, r)) <= 1e-12 * (1 + abs(v))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_sign_flip(self, seed):
        rng = np.random.default_rng(seed)
        D, GE, r = sym(rng, 7), sym(rng, 7), rng.standard_normal(7)
        assert boot_stat(D, GE, -r) == boot_stat(D, GE, r)

    def test_diagonal_ignored(self):
        rng = np.random.default_rng(0)
        D, GE, r = sym(rng, 5), sym(rng, 5), rng.standard_normal(5)
        D2 = D + np.diag(rng.standard_normal(5))
        assert_allclose(boot_stat(D2, GE, r), boot_stat(D, GE, r), rtol=1e-12)

    def test_zero_d(self):
        rng = np.random.default_rng(0)
        assert boot_stat(np.zeros((4, 4)), sym(rng, 4), rng.standard_normal(4)) == 0.0

    def test_shapes(self):
        with pytest.raises(ShapeError):
            boot_stat(np.eye(3), np.eye(4), np.ones(3))
        with pytest.raises(ShapeError):
            boot_stat(np.eye(3), np.eye(3), np.ones(4))


class TestRun:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.D, self.GE = sym(rng, 9), sym(rng, 9)

    def test_replicates_match_boot_stat(self):
        run = run_bootstrap(self.D, self.GE, 6, seed=3)
        for b in range(6):
            r = mammen_sample(9, replicate_rng(3, b))
            assert_allclose(run.replicates[b], boot_stat(self.D, self.GE, r), rtol=1e-12)

    def test_deterministic(self):
        a = run_bootstrap(self.D, self.GE, 50, seed=7)
        b = run_bootstrap(self.D, self.GE, 50, seed=7)
        assert np.array_equal(a.replicates, b.replicates)
        c = run_bootstrap(self.D, self.GE, 50, seed=8)
        assert not np.array_equal(a.replicates, c.replicates)

    def test_prefix_stable(self):
        a = run_bootstrap(self.D, self.GE, 20, seed=7)
        b = run_bootstrap(self.D, self.GE, 40, seed=7)
        assert np.array_equal(a.replicates, b.replicates[:20])

    def test_centered(self):
        reps = run_bootstrap(self.D, self.GE, 20_000, seed=1).replicates
        assert abs(reps.mean()) < 5 * reps.std() / np.sqrt(reps.size)

    def test_n_boot(self):
        with pytest.raises(ValidationError):
            run_bootstrap(self.D, self.GE, 0, seed=0)


class TestPValue:
    def run(self, reps):
        return BootstrapRun(np.asarray(reps, dtype=float), 0, len(reps))

    def test_example(self):
        out = p_value_and_quantile(self.run([1, 2, 3, 4]), 2.5, 0.25)
        assert out.p_value == 0.6
        assert_allclose(out.q_alpha, 3.25, rtol=1e-15)
        assert out.reject is False

    def test_reject(self):
        out = p_value_and_quantile(self.run([1, 2, 3, 4]), 5.0, 0.25)
        assert out.p_value == 0.2 and out.reject is True

    def test_ties_count(self):
        out = p_value_and_quantile(self.run([1, 1, 1]), 1.0, 0.5)
        assert out.p_value == 1.0 and out.reject is False

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(-10, 10))
    def test_range(self, reps, obs):
        out = p_value_and_quantile(self.run(reps), obs, 0.05)
        assert 1 / (len(reps) + 1) <= out.p_value <= 1

    def test_bad_alpha(self):
        with pytest.raises(ValidationError):
            p_value_and_quantile(self.run([1.0]), 0.0, 1.0)
