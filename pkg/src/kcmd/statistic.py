"""KCMD statistics computed from Gram matrices.

Notation: ``C`` is the characteristic-kernel Gram of ``Z``, ``K`` the
smoothing Gram of ``X`` and ``G`` the Gram of the responses.  Every quantity
below is built from four-term increments such as
``C_ij - C_il - C_kj + C_kl``, which vanish under a constant shift, so the
inputs are shifted by their ``[0, 0]`` entry first: constant inputs then
yield exact zeros and cancellation is reduced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import _backend
from .errors import ShapeError, ValidationError

__all__ = [
    "StatisticValue",
    "BootCoefficients",
    "v_stat",
    "u_stat",
    "u_stat_bruteforce",
    "d_matrix",
    "c_tilde",
    "kcmd_known",
    "independence_gram",
    "center_gram",
]


@dataclass(frozen=True)
class StatisticValue:
    """``u_n``, ``v_n``, the test statistic ``n u_n`` and the bridge term
    ``n^4 v_n - n(n-1)(n-2)(n-3) u_n``."""

    u_n: float
    v_n: float
    n_u_n: float
    collision_correction: float


@dataclass(frozen=True)
class BootCoefficients:
    d: np.ndarray


def _square(*mats):
    mats = [np.asarray(m, dtype=float) for m in mats]
    n = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape != (n, n):
            raise ShapeError(f"expected {n}x{n} matrices, got {[x.shape for x in mats]}")
    return mats


def _shift(M):
    return np.ascontiguousarray(M - M[0, 0])


def _lap(K):
    # L = diag(K 1) - K, so (L M L)_ij = sum_kl K_ik K_jl (M_ij - M_il - M_kj + M_kl)
    return np.diag(K.sum(axis=1)) - K


def _fsum(a):
    return math.fsum(np.asarray(a).ravel().tolist())


def _v_n4(Cs, K, Gs):
    L = _lap(K)
    return _fsum(Cs * (L @ Gs @ L))


def v_stat(C, K, G) -> float:
    """Plug-in statistic ``(1/n^4) sum_{ijkl} C_ij K_ik K_jl <Y_i - Y_k, Y_j - Y_l>``."""
    C, K, G = _square(C, K, G)
    n = C.shape[0]
    return _v_n4(_shift(C), K, _shift(G)) / n ** 4


def u_stat(C, K, G) -> StatisticValue:
    """U-statistic over pairwise distinct ``(i, j, k, l)``.

    The plug-in sum over all index tuples exceeds the distinct-index sum by
    ``T3 + T2/2``, where ``T3`` sums the ``i = j`` tuples with ``i, k, l``
    distinct and ``T2`` sums the ``i = j, k = l`` tuples.  Both come from
    the per-row sums of :func:`kcmd._backend.collision_sums`, whose ``A``
    equals ``T3 + T2``.
    """
    C, K, G = _square(C, K, G)
    n = C.shape[0]
    if n < 4:
        raise ValidationError(f"n<4 (n={n}): U-statistic needs four distinct indices")
    Cs, Gs = _shift(C), _shift(G)
    Kc = np.ascontiguousarray(K)
    vn4 = _v_n4(Cs, Kc, Gs)
    A, T2 = _backend.collision_sums(Cs, Kc, Gs)
    corr = _fsum(A) - 0.5 * _fsum(T2)
    denom = n * (n - 1) * (n - 2) * (n - 3)
    u = (vn4 - corr) / denom
    return StatisticValue(u, vn4 / n ** 4, n * u, corr)


def u_stat_bruteforce(C, K, G) -> float:
    """Literal sum over distinct index tuples (test reference, small ``n``)."""
    C, K, G = _square(C, K, G)
    n = C.shape[0]
    if n < 4:
        raise ValidationError(f"n<4 (n={n}): U-statistic needs four distinct indices")
    terms = [
        C[i, j] * K[i, k] * K[j, l] * (G[i, j] - G[i, l] - G[k, j] + G[k, l])
        for i, j, k, l in permutations(range(n), 4)
    ]
    return math.fsum(terms) / (n * (n - 1) * (n - 2) * (n - 3))


def d_matrix(C, K) -> BootCoefficients:
    """``D_ij = (1/n^2) sum_{k,l} K_ik K_jl (C_ij - C_il - C_kj + C_kl)``."""
    C, K = _square(C, K)
    n = C.shape[0]
    L = _lap(K)
    M = L @ _shift(C) @ L / n ** 2
    return BootCoefficients((M + M.T) / 2)


def c_tilde(C):
    """``C~_ij`` averaging the four-term increment over ordered pairs
    ``k != l`` outside ``{i, j}``; diagonal set to zero."""
    (C,) = _square(C)
    n = C.shape[0]
    if n < 4:
        raise ValidationError(f"n<4 (n={n}): U-statistic needs four distinct indices")
    C = _shift(C)
    m = n - 2
    r = C.sum(axis=1)
    S = r.sum()
    d = np.diag(C)
    tr = d.sum()
    ri, rj = r[:, None], r[None, :]
    di, dj = d[:, None], d[None, :]
    inner = S - 2 * ri - 2 * rj + di + dj + 2 * C - (tr - di - dj)
    num = (m * (m - 1) * C
           - (m - 1) * (ri - di - C)
           - (m - 1) * (rj - C - dj)
           + inner)
    Ct = num / ((n - 2) * (n - 3))
    Ct = (Ct + Ct.T) / 2
    np.fill_diagonal(Ct, 0.0)
    return Ct


def kcmd_known(C, Gr) -> float:
    """Estimator ``(1/(n(n-1))) sum_{i != j} C~_ij Gr_ij`` for known regression
    and density, with ``Gr`` the Gram of ``f(X)(Y - m(X))``."""
    C, Gr = _square(C, Gr)
    n = C.shape[0]
    Ct = c_tilde(C)
    return _fsum(Ct * Gr) / (n * (n - 1))


def independence_gram(C_x, G):
    """Gram of ``c_X(X_i, .) (x) Y_i``: the entrywise product ``C_x * G``."""
    C_x, G = _square(C_x, G)
    return C_x * G


def center_gram(H):
    """Double-centred Gram ``H_ij - mean_i - mean_j + grand mean``."""
    (H,) = _square(H)
    rm = H.mean(axis=1)
    Hc = H - rm[:, None] - rm[None, :] + H.mean()
    return (Hc + Hc.T) / 2
