import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kcmd.data import (
    Categorical,
    CategoricalColumn,
    Curve,
    Dataset,
    FunctionalColumn,
    ScalarColumn,
    VectorColumn,
    as_column,
    inner_product,
    response_gram,
    trapezoid_weights,
    validate,
)
from kcmd.errors import ShapeError, ValidationError

from oracles import trapezoid_loop


def random_grid(rng, m):
    g = np.sort(rng.uniform(0, 1, m))
    g[0], g[-1] = 0.0, 1.0
    return np.unique(g)


class TestCurve:
    def test_rejects_decreasing_grid(self):
        with pytest.raises(ValidationError, match="strictly increasing"):
            Curve([0.0, 0.5, 0.4], [1, 2, 3])

    def test_rejects_grid_outside_unit_interval(self):
        with pytest.raises(ValidationError, match=r"\[0, 1\]"):
            Curve([0.0, 1.5], [1, 2])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError):
            Curve([0.0, 1.0], [1, 2, 3])

    def test_rejects_single_point(self):
        with pytest.raises(ValidationError):
            Curve([0.5], [1.0])

    def test_is_immutable(self):
        c = Curve([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            c.values[0] = 3.0


class TestInnerProduct:
    def test_constant_curve(self):
        g = np.linspace(0, 1, 11)
        one = Curve(g, np.ones(11))
        assert inner_product(one, one) == 1.0

    def test_linear_exact_on_any_grid(self):
        g = random_grid(np.random.default_rng(0), 17)
        assert_allclose(inner_product(Curve(g, g), Curve(g, np.ones_like(g))), 0.5, rtol=0,
                        atol=1e-15)

    def test_t_squared_fine_grid(self):
        g = np.linspace(0, 1, 1001)
        assert abs(inner_product(Curve(g, g), Curve(g, g)) - 1 / 3) < 1e-5

    def test_scalar_vector_categorical(self):
        assert inner_product(2.0, -3.0) == -6.0
        assert inner_product(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0
        assert inner_product(Categorical(1, 3), Categorical(1, 3)) == 1.0
        assert inner_product(Categorical(1, 3), Categorical(2, 3)) == 0.0

    def test_grid_mismatch_names_column(self):
        a = Curve([0.0, 1.0], [1.0, 1.0])
        b = Curve([0.0, 0.5, 1.0], [1.0, 1.0, 1.0])
        with pytest.raises(ShapeError, match="'w'"):
            inner_product(a, b, name="w")

    def test_variant_mismatch(self):
        with pytest.raises(ShapeError):
            inner_product(1.0, Curve([0.0, 1.0], [1.0, 1.0]))
        with pytest.raises(ShapeError):
            inner_product(np.ones(2), np.ones(3))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 30))
    def test_symmetric_and_matches_loop(self, seed, m):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, m)
        if g.size < 2:
            return
        f, h = rng.standard_normal(g.size), rng.standard_normal(g.size)
        a, b = Curve(g, f), Curve(g, h)
        assert inner_product(a, b) == inner_product(b, a)
        assert_allclose(inner_product(a, b), trapezoid_loop(g, f, h), rtol=1e-12, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_trapezoid_exact_for_degree_one(self, seed):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, 9)
        a, b = rng.standard_normal(2)
        w = trapezoid_weights(g)
        exact = a * (g[-1] - g[0]) + b * (g[-1] ** 2 - g[0] ** 2) / 2
        assert_allclose(w @ (a + b * g), exact, rtol=1e-13, atol=1e-14)


class TestColumns:
    def test_response_gram_constant(self):
        d = Dataset(ScalarColumn(np.full(4, 2.0)), np.arange(4.0), w=(ScalarColumn(np.arange(4.0)),))
        assert np.all(response_gram(d) == 4.0)

    def test_response_gram_signs(self):
        G = ScalarColumn(np.array([1.0, -1.0])).gram()
        assert np.array_equal(G, [[1.0, -1.0], [-1.0, 1.0]])

    def test_functional_gram_matches_pairwise(self):
        rng = np.random.default_rng(3)
        g = random_grid(rng, 12)
        vals = rng.standard_normal((5, g.size))
        col = FunctionalColumn(g, vals, "y")
        G = col.gram()
        ref = np.array([[trapezoid_loop(g, vals[i], vals[j]) for j in range(5)] for i in range(5)])
        assert_allclose(G, ref, rtol=1e-12, atol=1e-14)
        assert np.array_equal(G, G.T)

    def test_categorical_one_hot(self):
        col = CategoricalColumn.from_labels(["a", "b", "a"], "w")
        assert col.n_levels == 2
        assert np.array_equal(col.gram(), [[1, 0, 1], [0, 1, 0], [1, 0, 1]])
        F, w = col.features()
        assert np.array_equal((F * w) @ F.T, col.gram())

    def test_categorical_rejects_bad_codes(self):
        with pytest.raises(ValidationError):
            CategoricalColumn([0, 3], 3)

    def test_as_column_dispatch(self):
        g = np.linspace(0, 1, 3)
        assert isinstance(as_column([1.0, 2.0]), ScalarColumn)
        assert isinstance(as_column([np.ones(2), np.zeros(2)]), VectorColumn)
        assert isinstance(as_column([Curve(g, g), Curve(g, g)]), FunctionalColumn)
        assert isinstance(as_column([Categorical(0, 2), Categorical(1, 2)]), CategoricalColumn)
        with pytest.raises(ShapeError):
            as_column([Curve(g, g), Curve([0.0, 1.0], [0.0, 1.0])])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(["scalar", "vector", "functional"]))
    def test_gram_is_psd(self, seed, kind):
        rng = np.random.default_rng(seed)
        n = 8
        if kind == "scalar":
            col = ScalarColumn(rng.standard_normal(n))
        elif kind == "vector":
            col = VectorColumn(rng.standard_normal((n, 3)))
        else:
            g = random_grid(rng, 10)
            col = FunctionalColumn(g, rng.standard_normal((n, g.size)))
        G = col.gram()
        v = rng.standard_normal(n)
        assert v @ G @ v >= -1e-10 * (v @ v) * np.abs(G).max()


def small_dataset(n=10, seed=0):
    rng = np.random.default_rng(seed)
    g = np.linspace(0, 1, 5)
    return Dataset(ScalarColumn(rng.standard_normal(n), "y"), rng.standard_normal((n, 2)),
                   w=(FunctionalColumn(g, rng.standard_normal((n, 5)), "w"),))


class TestValidate:
    def test_ok(self):
        validate(small_dataset())

    def test_n_below_four(self):
        with pytest.raises(ValidationError, match="n<4"):
            validate(small_dataset(3))

    def test_nan_location(self):
        d = small_dataset()
        x = d.x_cont.copy()
        x[4, 1] = np.nan
        bad = Dataset(d.y, x, w=d.w)
        with pytest.raises(ValidationError, match="row 4, column 1"):
            validate(bad)

    def test_collects_every_violation(self):
        d = small_dataset()
        y = d.y.values.copy()
        y[2] = np.inf
        x = d.x_cont.copy()
        x[0, 0] = np.nan
        with pytest.raises(ValidationError) as info:
            validate(Dataset(ScalarColumn(y, "y"), x, w=()))
        assert len(info.value.violations) == 3

    def test_row_count_mismatch(self):
        d = small_dataset()
        with pytest.raises(ValidationError, match="rows"):
            validate(Dataset(d.y, d.x_cont, w=(ScalarColumn(np.zeros(4)),)))

    def test_take_permutes_all_columns(self):
        d = small_dataset()
        p = np.random.default_rng(1).permutation(d.n)
        t = d.take(p)
        assert np.array_equal(t.y.values, d.y.values[p])
        assert np.array_equal(t.w[0].values, d.w[0].values[p])
