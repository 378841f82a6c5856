"""Nadaraya-Watson smoothing, GCV bandwidth choice and modified residuals.

All fits work on precomputed smoothing Grams ``K~`` (see
:func:`kcmd.kernels.smoothing_gram`) and a response :class:`~kcmd.data.Column`.
Fitted values are computed as ``Y_i + sum_k w_ik (Y_k - Y_i)`` with
row-normalised weights, which returns a constant response and isolated
points exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _backend
from .data import Column, Dataset
from .errors import BandwidthError, DegenerateDensityError, GcvDegenerateError
from .kernels import BandwidthSet, SmoothingKernel, smoothing_gram

log = logging.getLogger(__name__)

__all__ = [
    "EPS_DENSITY",
    "GCV_DENOM_FLOOR",
    "SmootherFit",
    "ModifiedResiduals",
    "density_hat",
    "density_hat_abs",
    "nw_fit",
    "nw_fit_abs",
    "gcv_score",
    "gcv_candidates",
    "gcv_curve",
    "select_bandwidth",
    "modified_residuals",
]

EPS_DENSITY = 1e-12
GCV_DENOM_FLOOR = 0.05


@dataclass(frozen=True)
class SmootherFit:
    fitted: Column
    density: np.ndarray
    density_abs: np.ndarray
    bandwidth: float | None = None


@dataclass(frozen=True)
class ModifiedResiduals:
    residuals: Column
    switch_mask: np.ndarray


def density_hat(K):
    """Kernel density at the sample points: row means of ``K~``."""
    K = np.asarray(K, dtype=float)
    return K.sum(axis=1) / K.shape[0]


def density_hat_abs(K):
    """Row means of ``|K~|``; equals :func:`density_hat` for nonnegative kernels."""
    K = np.asarray(K, dtype=float)
    return np.abs(K).sum(axis=1) / K.shape[0]


def _fit_features(K, F):
    """Fitted feature rows and a mask of rows with degenerate density."""
    n = K.shape[0]
    rs = K.sum(axis=1)
    bad = np.abs(rs / n) < EPS_DENSITY
    W = K / np.where(bad, 1.0, rs)[:, None]
    W[bad] = 0.0
    out = F + _backend.weighted_diff(np.ascontiguousarray(W), np.ascontiguousarray(F))
    out[bad] = np.nan
    return out, bad


def _fit(K, y: Column, bandwidth, absolute):
    Kabs = np.abs(K)
    Kw = Kabs if absolute else K
    F, _ = y.features()
    fitted, bad = _fit_features(Kw, F)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DegenerateDensityError(i, Kw[i].sum() / K.shape[0])
    n = K.shape[0]
    return SmootherFit(y.with_features(fitted), K.sum(axis=1) / n,
                       Kabs.sum(axis=1) / n, bandwidth)


def nw_fit(K, y: Column, bandwidth=None) -> SmootherFit:
    """Nadaraya-Watson fit ``sum_k K_ik Y_k / sum_k K_ik`` at every sample point.

    Raises
    ------
    DegenerateDensityError
        If ``|f_hat(X_i)| < 1e-12`` for some ``i``.
    """
    return _fit(np.asarray(K, dtype=float), y, bandwidth, absolute=False)


def nw_fit_abs(K, y: Column, bandwidth=None) -> SmootherFit:
    """Nadaraya-Watson fit with weights ``|K_ik|``."""
    return _fit(np.asarray(K, dtype=float), y, bandwidth, absolute=True)


def _sq_norms(F, w):
    return (F * F) @ w


def gcv_score(dataset: Dataset, h0, kernel: SmoothingKernel) -> float:
    """Generalised cross-validation score of bandwidth ``h0``.

    ``mean_i ||Y_i - m_h0(X_i)||^2 / (1 - tr(S)/n)^2`` where the hat-matrix
    trace is ``sum_j K~_jj / sum_k K~_jk``, i.e. ``K(0) / (n h0^d f_h0(X_j))``.
    Returns ``inf`` when the denominator is within 0.05 of zero or the
    density degenerates.
    """
    if not (h0 is not None and h0 > 0):
        raise BandwidthError(f"bandwidth must be positive, got {h0}")
    K = smoothing_gram(dataset, h0, kernel)
    n = K.shape[0]
    F, w = dataset.y.features()
    fitted, bad = _fit_features(K, F)
    if bad.any():
        log.debug("gcv: h0=%g rejected, degenerate density", h0)
        return np.inf
    rs = K.sum(axis=1)
    denom = 1.0 - np.sum(np.diag(K) / rs) / n
    if abs(denom) < GCV_DENOM_FLOOR:
        log.debug("gcv: h0=%g rejected, denominator %g", h0, denom)
        return np.inf
    res = F - fitted
    return float(np.mean(_sq_norms(res, w)) / denom ** 2)


def gcv_candidates(n, d_c, order, m_lower=None, m_upper=None, n_grid=40):
    """Log-spaced candidate bandwidths between ``m_lower n^r`` and ``m_upper n^r``
    with ``r = -1/(2 nu + d_c)``."""
    if d_c < 1:
        raise BandwidthError("bandwidth selection needs a continuous covariate")
    m_lower = 0.25 * d_c if m_lower is None else m_lower
    m_upper = 3.0 + d_c if m_upper is None else m_upper
    if not 0 < m_lower < m_upper:
        raise BandwidthError(f"need 0 < M_l < M_u, got {m_lower}, {m_upper}")
    rate = float(n) ** (-1.0 / (2 * order + d_c))
    return np.geomspace(m_lower * rate, m_upper * rate, n_grid)


def gcv_curve(dataset, kernel, m_lower=None, m_upper=None, n_grid=40):
    hs = gcv_candidates(dataset.n, dataset.d_c, kernel.order, m_lower, m_upper, n_grid)
    return hs, np.array([gcv_score(dataset, h, kernel) for h in hs])


def select_bandwidth(dataset, kernel, m_lower=None, m_upper=None, n_grid=40) -> float:
    """GCV minimiser over the candidate grid; ties go to the smaller bandwidth."""
    hs, scores = gcv_curve(dataset, kernel, m_lower, m_upper, n_grid)
    if not np.any(np.isfinite(scores)):
        raise GcvDegenerateError(
            f"GCV degenerate: all {len(hs)} candidates in [{hs[0]:.4g}, {hs[-1]:.4g}] rejected"
        )
    return float(hs[int(np.argmin(scores))])


def modified_residuals(dataset, bandwidths: BandwidthSet, kernel, K_h=None,
                       K_htilde=None) -> ModifiedResiduals:
    """Residuals ``Y_i - m_{h,h~}(X_i)`` for the bootstrap.

    The pilot fit at ``h~`` is used where ``f'_h(X_i) <= |f_h~(X_i)| kappa_n``
    and the absolute-weight fit at ``h`` elsewhere; ``switch_mask`` flags the
    latter.  Precomputed Grams may be passed to avoid rebuilding them.
    """
    if K_h is None:
        K_h = smoothing_gram(dataset, bandwidths.h, kernel)
    if K_htilde is None:
        K_htilde = smoothing_gram(dataset, bandwidths.h_tilde, kernel)
    n = dataset.n
    F, _ = dataset.y.features()
    pilot, bad_pilot = _fit_features(K_htilde, F)
    Kabs = np.abs(K_h)
    alt, _ = _fit_features(Kabs, F)
    f_abs = Kabs.sum(axis=1) / n
    f_pilot = K_htilde.sum(axis=1) / n
    mask = f_abs > np.abs(f_pilot) * bandwidths.kappa_n
    bad = bad_pilot & ~mask
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DegenerateDensityError(i, f_pilot[i])
    fitted = np.where(mask[:, None], alt, pilot)
    return ModifiedResiduals(dataset.y.with_features(F - fitted), mask)
