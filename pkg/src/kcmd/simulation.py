"""Simulation models, Gaussian-process paths and the Monte Carlo harness.

Every model returns a :class:`~kcmd.data.Dataset` with covariates under test
in ``w``; ``q_w = 0`` gives data satisfying the null hypothesis.
Functional values live on ``grid`` (default: step 0.001 on [0, 1]).
"""
from __future__ import annotations

import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import (
    CategoricalColumn,
    Curve,
    Dataset,
    FunctionalColumn,
    ScalarColumn,
    trapezoid_weights,
)
from .errors import KcmdError, StageError, ValidationError
from .pipeline import TestConfig, run_significance_test

__all__ = [
    "DGP_NAMES",
    "DEFAULT_GRID",
    "OU_THETA",
    "OU_SIGMA",
    "DgpSpec",
    "McResult",
    "gaussian_paths",
    "gen_gaussian_process",
    "upsilon_coefficients",
    "gen_upsilon",
    "UPSILON_SCALE",
    "upsilon_sine",
    "generate",
    "trial_seed",
    "monte_carlo",
]

DGP_NAMES = ("S.1", "S.2", "S.3", "S.4", "S.5", "S.6",
             "F.1", "F.2", "F.3", "F.4", "F.5", "F.6", "DGP1", "DGP2")
DEFAULT_GRID = np.linspace(0.0, 1.0, 1001)
DEFAULT_GRID.setflags(write=False)
OU_THETA = 4.5
OU_SIGMA = 3.0


def _canonical(name: str) -> str:
    key = str(name).upper().replace(".", "").replace("_", "")
    for cand in DGP_NAMES:
        if cand.replace(".", "") == key:
            return cand
    raise ValidationError(f"unknown DGP {name!r}; choose from {', '.join(DGP_NAMES)}")


@dataclass(frozen=True)
class DgpSpec:
    name: str
    n: int
    q_w: float = 0.0
    q_x: float = 1.0
    grid: np.ndarray | None = None
    upsilon: str = "orthonormal"

    def __post_init__(self):
        object.__setattr__(self, "name", _canonical(self.name))
        if self.n < 4:
            raise ValidationError(f"n must be >= 4, got {self.n}")
        if self.upsilon not in UPSILON_SCALE:
            raise ValidationError(f"unknown Upsilon basis {self.upsilon!r}")

    @property
    def grid_values(self):
        return DEFAULT_GRID if self.grid is None else np.asarray(self.grid, dtype=float)


def gaussian_paths(kind: str, grid, rng, size: int):
    """``size`` sample paths on ``grid`` of a Brownian motion (``"bm"``),
    Brownian bridge (``"bb"``) or Ornstein-Uhlenbeck process (``"ou"``,
    mean reversion 4.5, volatility 3), all started at 0 at time 0."""
    grid = np.asarray(grid, dtype=float)
    steps = np.diff(np.concatenate(([0.0], grid)))
    if kind in ("bm", "bb"):
        inc = rng.standard_normal((size, grid.size)) * np.sqrt(steps)
        B = np.cumsum(inc, axis=1)
        if kind == "bm":
            return B
        if grid[-1] == 1.0:
            b1 = B[:, -1]
        else:
            b1 = B[:, -1] + np.sqrt(1.0 - grid[-1]) * rng.standard_normal(size)
        return B - grid[None, :] * b1[:, None]
    if kind == "ou":
        xi = rng.standard_normal((size, grid.size))
        decay = np.exp(-OU_THETA * steps)
        sd = OU_SIGMA * np.sqrt((1.0 - np.exp(-2.0 * OU_THETA * steps)) / (2.0 * OU_THETA))
        out = np.empty((size, grid.size))
        prev = np.zeros(size)
        for k in range(grid.size):
            prev = decay[k] * prev + sd[k] * xi[:, k]
            out[:, k] = prev
        return out
    raise ValidationError(f"unknown process kind {kind!r}")


def gen_gaussian_process(kind: str, grid, rng) -> Curve:
    """One path as a :class:`Curve`."""
    return Curve(grid, gaussian_paths(kind, grid, rng, 1)[0])


def upsilon_coefficients():
    """The 100 coefficients ``0.3, 4(-1)^l / l^2 (l >= 2)``."""
    l = np.arange(1, 101)
    v = 4.0 * (-1.0) ** l / l ** 2
    v[0] = 0.3
    return v


UPSILON_SCALE = {"orthonormal": np.sqrt(2.0), "half": 0.5}


@functools.lru_cache(maxsize=16)
def _upsilon_cached(grid_bytes, basis):
    grid = np.frombuffer(grid_bytes)
    v = upsilon_coefficients()
    B = UPSILON_SCALE[basis] * np.cos(np.outer(np.arange(100), np.pi * grid))
    B[0] = 1.0
    vals = (v @ B) / np.linalg.norm(v)
    vals.setflags(write=False)
    return vals


def gen_upsilon(grid=DEFAULT_GRID, basis="orthonormal") -> Curve:
    """Direction of the cosine-series alternative.

    ``Upsilon = sum_l v_l xi_l / ||v||`` with ``xi_1 = 1`` and
    ``xi_l(t) = s cos((l - 1) pi t)``.  ``basis="orthonormal"`` takes
    ``s = sqrt(2)``, so ``||Upsilon||_{L2} = 1`` and the S-model signal
    variances match their signal-to-noise targets; ``basis="half"`` takes
    ``s = 1/2``.
    """
    if basis not in UPSILON_SCALE:
        raise ValidationError(f"unknown Upsilon basis {basis!r}; use one of {sorted(UPSILON_SCALE)}")
    grid = np.ascontiguousarray(grid, dtype=float)
    return Curve(grid, _upsilon_cached(grid.tobytes(), basis))


def upsilon_sine(grid=DEFAULT_GRID) -> Curve:
    """``sin(0.5 t)``, the direction used by DGP1 and DGP2."""
    grid = np.asarray(grid, dtype=float)
    return Curve(grid, np.sin(0.5 * grid))


def _chi2_err(rng, n):
    return (rng.standard_normal(n) ** 2 - 1.0) / np.sqrt(2.0)


def _proj(paths, curve_values, w):
    return paths @ (w * curve_values)


def _corr_normal2(rng, n, mean, rho):
    z = rng.standard_normal((n, 2))
    z2 = rho * z[:, 0] + np.sqrt(1.0 - rho * rho) * z[:, 1]
    return np.column_stack((z[:, 0], z2)) + np.asarray(mean, dtype=float)


def _scalar_linear(spec, rng, d, coef_fn):
    grid = spec.grid_values
    w = trapezoid_weights(grid)
    n = spec.n
    X = rng.standard_normal((n, d))
    W = gaussian_paths("bb", grid, rng, n)
    E = _chi2_err(rng, n)
    y = coef_fn(X) + spec.q_w * 4.3 * _proj(W, gen_upsilon(grid, spec.upsilon).values, w) + E
    return X, W, y


def generate(spec: DgpSpec, rng) -> Dataset:
    """Draw one sample of ``spec.n`` observations."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    name, n, q = spec.name, spec.n, spec.q_w
    grid = spec.grid_values
    tw = trapezoid_weights(grid)
    x_disc = ()

    if name == "S.1":
        X, W, y = _scalar_linear(spec, rng, 1, lambda X: 2.0 * X[:, 0])
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "S.2":
        X, W, y = _scalar_linear(spec, rng, 4, lambda X: X.sum(axis=1))
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "S.3":
        X, W, y = _scalar_linear(spec, rng, 7, lambda X: 2.0 * X.sum(axis=1) / np.sqrt(7.0))
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "S.4":
        Z = gaussian_paths("ou", grid, rng, n)
        E = rng.standard_normal(n)
        basis = np.stack([np.ones_like(grid),
                          np.sqrt(2.0) * np.cos(2.0 * np.pi * grid),
                          np.sqrt(2.0) * np.sin(2.0 * np.pi * grid)])
        X = Z @ (basis * tw).T
        W = Z - X @ basis
        wn2 = (W * W) @ tw
        y = 3.35 * ((X * X).sum(axis=1) - 2.0 / 3.0) + q * 4.4 * (wn2 - 1.0 / 3.0) + E
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "S.5":
        X = (rng.standard_normal(n) / rng.standard_normal(n))[:, None]
        W = gaussian_paths("ou", grid, rng, n)
        E = rng.standard_normal(n)
        wn2 = (W * W) @ tw
        y = 5.2 * np.exp(-X[:, 0] ** 2) + q * 3.8 * (np.exp(-wn2) - 0.42) + E
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "S.6":
        X = _corr_normal2(rng, n, (0.0, 0.0), 0.9)
        W = gaussian_paths("ou", grid, rng, n)
        E = 1.7 / (1.0 + (X * X).sum(axis=1)) * rng.standard_normal(n)
        m = 2.0 * (np.sin(np.pi * X[:, 0]) + 2.0 * np.cos(np.pi * X[:, 1]))
        y = m + q * np.sin(np.pi * _proj(W, gen_upsilon(grid, spec.upsilon).values, tw)) + E
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "F.1":
        Z = -np.log(_corr_normal2(rng, n, (1.0, 1.0), 0.9) ** 2)
        X, Wv = Z[:, :1], Z[:, 1]
        E = 2.45 * gaussian_paths("bb", grid, rng, n)
        y = (1.3 * np.exp(-4.0 * (grid - 0.3) ** 2)[None, :] * X
             + q * 0.55 * grid[None, :] * Wv[:, None] + E)
        Y, wcols = FunctionalColumn(grid, y, "y"), (ScalarColumn(Wv, "w"),)
    elif name == "F.2":
        Wv = rng.standard_normal(n)
        X = rng.standard_normal((n, 2))
        E = 2.45 * gaussian_paths("bb", grid, rng, n)
        m = 25.5 * (grid - 0.5) ** 2 * (X[:, :1] / (1.0 + X[:, 1:] ** 2))
        g = 1.1 * X[:, :1] * np.sin(1.75 * np.pi * grid[None, :] * Wv[:, None])
        y = m + q * g + E
        Y, wcols = FunctionalColumn(grid, y, "y"), (ScalarColumn(Wv, "w"),)
    elif name == "F.3":
        X = rng.standard_normal((n, 1))
        W = gaussian_paths("bb", grid, rng, n)
        E = 2.45 * gaussian_paths("bb", grid, rng, n)
        integ = (W * np.exp(grid ** 2 / 2.0)) @ tw
        g = 1.75 * np.exp(grid ** 2 / 2.0)[None, :] * integ[:, None]
        y = 6.6 * grid[None, :] * np.sin(2.0 * X ** 2) + q * g + E
        Y, wcols = FunctionalColumn(grid, y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "F.4":
        X = rng.standard_normal((n, 3))
        W = gaussian_paths("ou", grid, rng, n)
        E = gaussian_paths("ou", grid, rng, n)
        integ = (W * W * np.exp(grid ** 2 / 2.0)) @ tw
        y = q * 0.8 * np.exp(grid ** 2 / 2.0)[None, :] * integ[:, None] + E
        Y, wcols = FunctionalColumn(grid, y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "F.5":
        X = rng.standard_normal((n, 2))
        W = gaussian_paths("ou", grid, rng, n)
        E = gaussian_paths("ou", grid, rng, n)
        m = 2.3 * (1.0 - grid[None, :] * X[:, :1] - grid[None, :] ** 2 * X[:, 1:] ** 2)
        y = m + q * 0.33 * np.exp(W) + E
        Y, wcols = FunctionalColumn(grid, y, "y"), (FunctionalColumn(grid, W, "w"),)
    elif name == "F.6":
        x1 = (rng.random(n) < 0.3).astype(np.int64)
        x2 = np.exp(3.0 + np.sqrt(0.5) * rng.standard_normal(n))
        wlev = rng.choice(4, size=n, p=[0.5, 0.25, 0.15, 0.1])
        E = gaussian_paths("ou", grid, rng, n)
        sign = np.where(wlev == 0, 1.0, -1.0)
        amp = x1 * x2 * (0.95 + 0.3 * q * sign)
        y = 0.23 * np.exp(-4.0 * (grid - 0.3) ** 2)[None, :] * amp[:, None] + E
        X = x2[:, None]
        x_disc = (CategoricalColumn(x1, 2, "x1"),)
        Y = FunctionalColumn(grid, y, "y")
        wcols = (CategoricalColumn(wlev, 4, "w"),)
        return Dataset(Y, X, x_disc, wcols, ("x2",))
    else:  # DGP1, DGP2
        X = rng.standard_normal((n, 2))
        W = gaussian_paths("bm", grid, rng, n)
        E = rng.standard_normal(n)
        m = spec.q_x * (0.7 * X[:, 0] + 2.0 * np.cos(X[:, 1]) ** 2)
        proj = _proj(W, upsilon_sine(grid).values, tw)
        g = 1.5 * proj if name == "DGP1" else 2.0 * np.sin(np.pi * proj ** 2)
        y = m + q * g + E
        Y, wcols = ScalarColumn(y, "y"), (FunctionalColumn(grid, W, "w"),)
    return Dataset(Y, X, x_disc, wcols)


def trial_seed(master_seed: int, index: int) -> int:
    """64-bit seed of Monte Carlo trial ``index``."""
    ss = np.random.SeedSequence(int(master_seed) & ((1 << 64) - 1), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class McResult:
    spec: DgpSpec
    config: TestConfig
    master_seed: int
    rejections: int
    trials: int
    seeds: tuple
    p_values: tuple

    @property
    def rate(self) -> float:
        return self.rejections / self.trials


def _one_trial(args):
    spec, config, index, seed = args
    try:
        data = generate(spec, np.random.default_rng(seed))
        rep = run_significance_test(data, replace(config, seed=seed))
    except KcmdError as exc:
        raise StageError(f"trial {index}", exc) from exc
    return rep.reject, rep.p_value


def monte_carlo(spec: DgpSpec, config: TestConfig | None = None, n_mc: int = 100,
                master_seed: int = 0, workers: int = 1) -> McResult:
    """Rejection rate of the test over ``n_mc`` simulated datasets.

    Trial ``i`` draws its data and bootstrap multipliers from
    :func:`trial_seed` ``(master_seed, i)``, so results do not depend on
    ``workers``.
    """
    if n_mc < 1:
        raise ValidationError(f"n_mc must be >= 1, got {n_mc}")
    config = config or TestConfig()
    seeds = [trial_seed(master_seed, i) for i in range(n_mc)]
    tasks = [(spec, config, i, s) for i, s in enumerate(seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_one_trial, tasks, chunksize=max(1, n_mc // (4 * workers))))
    else:
        out = [_one_trial(t) for t in tasks]
    rej = sum(1 for r, _ in out if r)
    return McResult(spec, config, int(master_seed), rej, n_mc, tuple(seeds),
                    tuple(p for _, p in out))
