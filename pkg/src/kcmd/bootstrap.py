"""Multiplier bootstrap with Mammen's two-point weights."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeError, ValidationError
from .preprocessing import quantile

__all__ = [
    "MAMMEN_VALUES",
    "MAMMEN_PROBS",
    "mammen_moments",
    "replicate_rng",
    "mammen_sample",
    "boot_stat",
    "BootstrapRun",
    "run_bootstrap",
    "p_value_and_quantile",
]

_SQ5 = math.sqrt(5.0)
MAMMEN_VALUES = ((1.0 - _SQ5) / 2.0, (1.0 + _SQ5) / 2.0)
MAMMEN_PROBS = ((5.0 + _SQ5) / 10.0, (5.0 - _SQ5) / 10.0)
_MASK64 = (1 << 64) - 1


def mammen_moments(order: int) -> float:
    """Closed-form ``E r^order`` of the two-point law."""
    (a, b), (pa, pb) = MAMMEN_VALUES, MAMMEN_PROBS
    return pa * a ** order + pb * b ** order


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a run seeded with ``seed``.

    Streams depend only on ``(seed, index)``, never on scheduling.
    """
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def mammen_sample(n: int, rng: np.random.Generator):
    """``n`` i.i.d. draws with mean 0, variance 1 and third moment 1."""
    u = rng.random(n)
    return np.where(u < MAMMEN_PROBS[0], MAMMEN_VALUES[0], MAMMEN_VALUES[1])


def _coef(D, GE):
    D = np.asarray(D.d if hasattr(D, "d") else D, dtype=float)
    GE = np.asarray(GE, dtype=float)
    if D.shape != GE.shape or D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeError(f"D {D.shape} and residual Gram {GE.shape} must be equal squares")
    return D * GE


def boot_stat(D, GE, r) -> float:
    """``(1/(n-1)) sum_{i != j} r_i r_j D_ij <E_i, E_j>``."""
    A = _coef(D, GE)
    r = np.asarray(r, dtype=float)
    if r.shape != (A.shape[0],):
        raise ShapeError(f"multipliers of shape {r.shape} for n={A.shape[0]}")
    n = A.shape[0]
    return float((r @ A @ r - np.sum(r * r * np.diag(A))) / (n - 1))


@dataclass(frozen=True)
class BootstrapRun:
    replicates: np.ndarray
    seed: int
    n_boot: int
    observed: float | None = None
    p_value: float | None = None
    q_alpha: float | None = None
    reject: bool | None = None


def run_bootstrap(D, GE, n_boot: int, seed: int) -> BootstrapRun:
    """Draw ``n_boot`` replicates of the bootstrap statistic.

    Multipliers for replicate ``b`` come from :func:`replicate_rng`, so the
    vector of replicates depends only on the inputs and ``seed``.
    """
    if n_boot < 1:
        raise ValidationError(f"n_boot must be >= 1, got {n_boot}")
    A = _coef(D, GE)
    n = A.shape[0]
    R = np.stack([mammen_sample(n, replicate_rng(seed, b)) for b in range(n_boot)])
    Ad = A.copy()
    np.fill_diagonal(Ad, 0.0)
    reps = np.einsum("bi,bi->b", R @ Ad, R) / (n - 1)
    return BootstrapRun(reps, int(seed), int(n_boot))


def p_value_and_quantile(run: BootstrapRun, observed: float, alpha: float) -> BootstrapRun:
    """Complete ``run`` with the p-value ``(1 + #{rep >= obs}) / (n_B + 1)``,
    the ``1 - alpha`` replicate quantile and the rejection flag
    ``observed > q_alpha``."""
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    reps = np.asarray(run.replicates, dtype=float)
    if reps.size == 0:
        raise ValidationError("no bootstrap replicates")
    p = (1 + int(np.sum(reps >= observed))) / (reps.size + 1)
    q = quantile(reps, 1.0 - alpha)
    return replace(run, observed=float(observed), p_value=p, q_alpha=q,
                   reject=bool(observed > q))
