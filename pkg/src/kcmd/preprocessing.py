"""Two-step covariate scaling and the kernel-scale quantile heuristic.

Step 1 divides every covariate component by the square root of a typical
pairwise squared distance (median, or mean for categorical components whose
median may vanish).  Step 2 divides the summed squared distances of each
block, ``X`` and ``W``, by their own typical value, so both blocks
contribute on the same scale to ``||Z_i - Z_j||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .data import CategoricalColumn, Column, Dataset
from .errors import DegenerateCovariateError, ValidationError
from .kernels import CharKernelParams

__all__ = [
    "quantile",
    "upper_triangle",
    "ScalingReport",
    "DistanceDecomposition",
    "discrete_scale_policy",
    "column_sq_dist",
    "scale_covariates",
    "sigma_c_quantile",
]


def quantile(values, p):
    """Empirical ``p``-quantile with linear interpolation between order
    statistics at rank ``p (m - 1)`` (zero-based)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("quantile of an empty set")
    return float(np.quantile(values, p, method="linear"))


def upper_triangle(M):
    """Strict upper-triangle entries of a square matrix, row-major."""
    return M[np.triu_indices(M.shape[0], 1)]


@dataclass(frozen=True)
class ScalingReport:
    """Scales used by :func:`scale_covariates`.

    ``component_scales_x`` covers the continuous columns followed by the
    discrete ones; ``component_scales_w`` has one entry per ``W`` column.
    Block scales divide the summed squared distances (they are not square
    rooted).
    """

    component_scales_x: np.ndarray
    component_scales_w: np.ndarray
    block_scale_x: float
    block_scale_w: float
    estimator_x: str
    estimator_w: str
    component_estimators_x: tuple = ()
    component_estimators_w: tuple = ()

    def scaled_x_cont(self, dataset: Dataset):
        """Continuous ``X`` block after step 1 (what the smoother sees)."""
        return dataset.x_cont / self.component_scales_x[: dataset.d_c]


@dataclass(frozen=True)
class DistanceDecomposition:
    dist2_x: np.ndarray
    dist2_w: np.ndarray

    @property
    def dist2_z(self):
        return self.dist2_x + self.dist2_w


def discrete_scale_policy(block) -> str:
    """``"mean"`` if any column of ``block`` is categorical, else ``"median"``."""
    return "mean" if any(isinstance(c, CategoricalColumn) for c in block) else "median"


def column_sq_dist(col):
    """Pairwise squared distances of one column (``Column`` or 1-d array)."""
    if isinstance(col, CategoricalColumn):
        c = col.codes
        return 2.0 * (c[:, None] != c[None, :])
    if isinstance(col, Column):
        F, w = col.features()
    else:
        F, w = np.asarray(col, dtype=float)[:, None], np.ones(1)
    return _backend.pairwise_sq_dist(np.ascontiguousarray(F, dtype=float),
                                     np.ascontiguousarray(w, dtype=float))


def _typical(vals, estimator, what):
    if not np.any(vals > 0):
        raise DegenerateCovariateError(
            f"{what}: all pairwise distances are zero; "
            "degenerate covariate; remove or declare discrete"
        )
    if estimator == "median":
        med = quantile(vals, 0.5)
        if med > 0:
            return med, "median"
    # ties can zero the median of a non-constant column
    return float(np.mean(vals)), "mean"


def _scale_block(columns, names, block_name):
    scales = []
    ests = []
    total = None
    for col, name in zip(columns, names):
        d2 = column_sq_dist(col)
        est = "mean" if isinstance(col, CategoricalColumn) else "median"
        s2, est = _typical(upper_triangle(d2), est, f"column {name!r}")
        scales.append(np.sqrt(s2))
        ests.append(est)
        part = d2 / s2
        total = part if total is None else total + part
    b, block_est = _typical(upper_triangle(total), discrete_scale_policy(columns),
                            f"block {block_name}")
    return np.array(scales), total / b, b, block_est, tuple(ests)


def scale_covariates(dataset: Dataset):
    """Scale ``X`` and ``W`` and return ``(ScalingReport, DistanceDecomposition)``.

    Raises :class:`DegenerateCovariateError` naming any constant column.
    """
    if dataset.n < 2:
        raise ValidationError("scaling needs at least two observations")
    x_cols = [dataset.x_cont[:, j] for j in range(dataset.d_c)] + list(dataset.x_disc)
    x_names = list(dataset.x_names[: dataset.d_c]) + [c.name for c in dataset.x_disc]
    sx, dx, bx, ex, cex = _scale_block(x_cols, x_names, "X")
    sw, dw, bw, ew, cew = _scale_block(list(dataset.w), [c.name for c in dataset.w], "W")
    report = ScalingReport(sx, sw, bx, bw, ex, ew, cex, cew)
    return report, DistanceDecomposition(dx, dw)


def sigma_c_quantile(dist2_z, p) -> CharKernelParams:
    """Gaussian scale set to the ``p``-quantile of the off-diagonal squared
    distances."""
    if not 0 < p < 1:
        raise ValidationError(f"quantile order must lie in (0, 1), got {p}")
    vals = upper_triangle(np.asarray(dist2_z, dtype=float))
    if not np.any(vals > 0):
        raise DegenerateCovariateError("all pairwise distances of Z are zero")
    q = quantile(vals, p)
    if not q > 0:
        # many exact ties at zero; fall back to the smallest positive distance
        q = float(vals[vals > 0].min())
    return CharKernelParams(q)
