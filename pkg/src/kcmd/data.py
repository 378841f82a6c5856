"""Observations, covariate blocks and Hilbert-space inner products.

Single observations are plain Python/numpy values:

* a real number (scalar),
* a 1-d array (vector),
* a :class:`Curve` (function sampled on a grid in [0, 1]),
* a :class:`Categorical` level (one-hot embedded).

Columns of ``n`` such values share a common shape and know how to embed
themselves as a feature matrix ``F`` plus quadrature weights ``w`` so that
``<v_i, v_j> = sum_t w_t F[i, t] F[j, t]``.  Every Gram matrix in the package
is built from that embedding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real
from typing import Sequence

import numpy as np

from .errors import ShapeError, ValidationError

__all__ = [
    "Curve",
    "Categorical",
    "Column",
    "ScalarColumn",
    "VectorColumn",
    "FunctionalColumn",
    "CategoricalColumn",
    "Dataset",
    "trapezoid_weights",
    "inner_product",
    "response_gram",
    "validate",
    "as_column",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def trapezoid_weights(grid):
    """Quadrature weights reproducing the trapezoidal rule on ``grid``.

    ``sum(w * f(grid))`` equals the composite trapezoid approximation of
    the integral of ``f`` over ``[grid[0], grid[-1]]``; the grid need not be
    uniform.
    """
    grid = np.asarray(grid, dtype=float)
    dt = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def _check_grid(grid, what="grid"):
    grid = np.asarray(grid, dtype=float)
    problems = []
    if grid.ndim != 1 or grid.size < 2:
        problems.append(f"{what} must be 1-d with at least 2 points")
        return problems
    if not np.all(np.isfinite(grid)):
        problems.append(f"{what} has non-finite points")
    elif not np.all(np.diff(grid) > 0):
        problems.append(f"{what} is not strictly increasing")
    elif grid[0] < 0 or grid[-1] > 1:
        problems.append(f"{what} leaves [0, 1]")
    return problems


@dataclass(frozen=True)
class Curve:
    """A function on [0, 1] evaluated on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(self.values)
        problems = _check_grid(grid)
        if values.shape != grid.shape:
            problems.append(
                f"values length {values.shape} does not match grid {grid.shape}"
            )
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Categorical:
    """One level of a nominal variable with ``n_levels`` levels."""

    level: int
    n_levels: int

    def __post_init__(self):
        if not 0 <= self.level < self.n_levels:
            raise ValidationError(
                f"level {self.level} outside [0, {self.n_levels})"
            )


def inner_product(a, b, name=None):
    """Inner product of two observations of the same kind.

    Scalars multiply, vectors use the dot product, curves use the
    trapezoidal rule on their (shared) grid and categorical levels give the
    equality indicator (dot product of one-hot vectors).
    """
    where = f" in column {name!r}" if name else ""
    if isinstance(a, Curve) or isinstance(b, Curve):
        if not (isinstance(a, Curve) and isinstance(b, Curve)):
            raise ShapeError(f"cannot pair a curve with a non-curve{where}")
        if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
            raise ShapeError(f"curves live on different grids{where}")
        return float(np.trapezoid(a.values * b.values, a.grid))
    if isinstance(a, Categorical) or isinstance(b, Categorical):
        if not (isinstance(a, Categorical) and isinstance(b, Categorical)):
            raise ShapeError(f"cannot pair a categorical with a non-categorical{where}")
        if a.n_levels != b.n_levels:
            raise ShapeError(f"level counts differ ({a.n_levels} vs {b.n_levels}){where}")
        return 1.0 if a.level == b.level else 0.0
    if isinstance(a, Real) and isinstance(b, Real):
        return float(a) * float(b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"vector shapes {a.shape} and {b.shape} differ{where}")
    return float(a @ b)


class Column:
    """Base class for a column of ``n`` observations of one kind."""

    kind = "abstract"
    name: str

    def __len__(self):
        return self.n

    @property
    def n(self) -> int:
        raise NotImplementedError

    def features(self):
        """Return ``(F, w)``: embedded features ``(n, p)`` and weights ``(p,)``."""
        raise NotImplementedError

    def value(self, i):
        """The ``i``-th observation as a standalone value."""
        raise NotImplementedError

    def take(self, index) -> "Column":
        """Rows ``index`` (any integer index array) as a new column."""
        raise NotImplementedError

    def with_features(self, F, name=None) -> "Column":
        """A column of the same geometry holding the feature rows ``F``.

        Used to carry residuals and fitted values; categorical columns map
        to vectors since fitted class probabilities are not levels.
        """
        raise NotImplementedError

    def gram(self):
        """``G[i, j] = <v_i, v_j>``, symmetric to the last bit."""
        F, w = self.features()
        G = (F * w) @ F.T
        return (G + G.T) / 2

    def problems(self):
        F, _ = self.features()
        if not np.all(np.isfinite(F)):
            rows = np.unique(np.nonzero(~np.isfinite(F))[0])
            return [f"column {self.name!r}: non-finite values at rows {rows[:10].tolist()}"]
        return []


@dataclass(frozen=True)
class ScalarColumn(Column):
    values: np.ndarray
    name: str = "scalar"
    kind = "scalar"

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise ShapeError(f"scalar column {self.name!r} must be 1-d, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    def features(self):
        return self.values[:, None], np.ones(1)

    def value(self, i):
        return float(self.values[i])

    def take(self, index):
        return ScalarColumn(self.values[index], self.name)

    def with_features(self, F, name=None):
        return ScalarColumn(np.asarray(F).reshape(-1), name or self.name)

    def gram(self):
        v = self.values
        return np.multiply.outer(v, v)


@dataclass(frozen=True)
class VectorColumn(Column):
    values: np.ndarray
    name: str = "vector"
    kind = "vector"

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise ShapeError(f"vector column {self.name!r} must be (n, k), got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    def features(self):
        return self.values, np.ones(self.values.shape[1])

    def value(self, i):
        return self.values[i].copy()

    def take(self, index):
        return VectorColumn(self.values[index], self.name)

    def with_features(self, F, name=None):
        return VectorColumn(F, name or self.name)


@dataclass(frozen=True)
class FunctionalColumn(Column):
    """Curves sharing one grid; ``values`` has shape ``(n, len(grid))``."""

    grid: np.ndarray
    values: np.ndarray
    name: str = "functional"
    kind = "functional"
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(self.values)
        problems = _check_grid(grid, f"grid of column {self.name!r}")
        if values.ndim != 2 or values.shape[1] != grid.shape[0]:
            problems.append(
                f"column {self.name!r}: values {values.shape} do not match grid of "
                f"{grid.shape[0]} points"
            )
        if problems:
            raise ShapeError(problems)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_weights", _frozen(trapezoid_weights(grid)))

    @property
    def n(self):
        return self.values.shape[0]

    def features(self):
        return self.values, self._weights

    def value(self, i):
        return Curve(self.grid, self.values[i])

    def take(self, index):
        return FunctionalColumn(self.grid, self.values[index], self.name)

    def with_features(self, F, name=None):
        return FunctionalColumn(self.grid, F, name or self.name)


@dataclass(frozen=True)
class CategoricalColumn(Column):
    """Nominal variable stored as integer codes in ``[0, n_levels)``."""

    codes: np.ndarray
    n_levels: int
    name: str = "categorical"
    labels: tuple | None = None
    kind = "categorical"

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 1:
            raise ShapeError(f"categorical column {self.name!r} must be 1-d")
        if codes.size and not np.issubdtype(codes.dtype, np.integer):
            if not np.all(np.equal(np.mod(codes, 1), 0)):
                raise ValidationError(f"column {self.name!r}: non-integer level codes")
        codes = _frozen(codes, dtype=np.int64)
        if codes.size and (codes.min() < 0 or codes.max() >= self.n_levels):
            raise ValidationError(
                f"column {self.name!r}: level codes outside [0, {self.n_levels})"
            )
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_labels(cls, labels: Sequence, name="categorical"):
        """Encode arbitrary hashable labels; levels are sorted."""
        levels, codes = np.unique(np.asarray(labels), return_inverse=True)
        return cls(codes, len(levels), name, tuple(levels.tolist()))

    @property
    def n(self):
        return self.codes.shape[0]

    def features(self):
        F = np.zeros((self.n, self.n_levels))
        F[np.arange(self.n), self.codes] = 1.0
        return F, np.ones(self.n_levels)

    def value(self, i):
        return Categorical(int(self.codes[i]), self.n_levels)

    def take(self, index):
        return CategoricalColumn(self.codes[index], self.n_levels, self.name, self.labels)

    def with_features(self, F, name=None):
        return VectorColumn(F, name or self.name)

    def gram(self):
        c = self.codes
        return (c[:, None] == c[None, :]).astype(float)

    def problems(self):
        return []


def as_column(values, name="column"):
    """Build a column from a sequence of observations of one kind."""
    values = list(values)
    if not values:
        raise ValidationError(f"column {name!r} is empty")
    first = values[0]
    if isinstance(first, Curve):
        for v in values:
            if not isinstance(v, Curve) or not np.array_equal(v.grid, first.grid):
                raise ShapeError(f"column {name!r}: curves must share one grid")
        return FunctionalColumn(first.grid, np.stack([v.values for v in values]), name)
    if isinstance(first, Categorical):
        if any(not isinstance(v, Categorical) or v.n_levels != first.n_levels for v in values):
            raise ShapeError(f"column {name!r}: mixed categorical level counts")
        return CategoricalColumn([v.level for v in values], first.n_levels, name)
    if isinstance(first, Real):
        return ScalarColumn(np.array(values, dtype=float), name)
    arr = [np.asarray(v, dtype=float) for v in values]
    if any(a.shape != arr[0].shape or a.ndim != 1 for a in arr):
        raise ShapeError(f"column {name!r}: vector lengths differ")
    return VectorColumn(np.stack(arr), name)


@dataclass(frozen=True)
class Dataset:
    """Response ``y``, covariates under the null ``X = (x_cont, x_disc)`` and
    the covariates under test ``w`` (one column per block)."""

    y: Column
    x_cont: np.ndarray = None
    x_disc: tuple = ()
    w: tuple = ()
    x_names: tuple = ()

    def __post_init__(self):
        n = len(self.y)
        x = np.zeros((n, 0)) if self.x_cont is None else np.asarray(self.x_cont, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "x_cont", _frozen(x))
        object.__setattr__(self, "x_disc", tuple(self.x_disc))
        object.__setattr__(self, "w", tuple(self.w))
        if not self.x_names:
            names = tuple(f"x{j + 1}" for j in range(x.shape[1]))
            object.__setattr__(self, "x_names", names)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d_c(self) -> int:
        return self.x_cont.shape[1]

    @property
    def d_d(self) -> int:
        return len(self.x_disc)

    def take(self, index) -> "Dataset":
        """Rows ``index`` of every column (e.g. a permutation)."""
        index = np.asarray(index)
        return Dataset(
            self.y.take(index),
            self.x_cont[index],
            tuple(c.take(index) for c in self.x_disc),
            tuple(c.take(index) for c in self.w),
            self.x_names,
        )

    def disc_cells(self):
        """Integer id of each observation's discrete cell (``None`` if ``d_d == 0``)."""
        if not self.x_disc:
            return None
        codes = np.stack([c.codes for c in self.x_disc], axis=1)
        _, cells = np.unique(codes, axis=0, return_inverse=True)
        return cells.reshape(-1)


def response_gram(dataset: Dataset):
    """Gram matrix of the responses, ``G[i, j] = <Y_i, Y_j>``."""
    return dataset.y.gram()


def validate(dataset: Dataset):
    """Check every dataset invariant; raise one error listing all violations."""
    problems = []
    n = dataset.n
    if n < 4:
        problems.append(f"n<4 (n={n}): U-statistic needs four distinct indices")
    x = dataset.x_cont
    if x.shape[0] != n:
        problems.append(f"x_cont has {x.shape[0]} rows, expected {n}")
    bad = np.argwhere(~np.isfinite(x))
    for r, c in bad[:10]:
        problems.append(f"x_cont: non-finite value at row {r}, column {c} ({dataset.x_names[c]})")
    if dataset.d_c + dataset.d_d < 1:
        problems.append("X needs at least one continuous or discrete component")
    if not dataset.w:
        problems.append("at least one W column is required")
    for role, cols in (("y", (dataset.y,)), ("x_disc", dataset.x_disc), ("w", dataset.w)):
        for col in cols:
            if len(col) != n:
                problems.append(f"{role} column {col.name!r} has {len(col)} rows, expected {n}")
            problems.extend(col.problems())
    for col in dataset.x_disc:
        if not isinstance(col, CategoricalColumn):
            problems.append(f"x_disc column {col.name!r} must be categorical")
    if problems:
        raise ValidationError(problems)
