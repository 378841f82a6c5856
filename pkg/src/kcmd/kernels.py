"""Smoothing kernels, product kernels and the Gaussian characteristic kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import BandwidthError, ValidationError

__all__ = [
    "epanechnikov",
    "poly4",
    "SmoothingKernel",
    "EPANECHNIKOV",
    "POLY4",
    "kernel_for_dimension",
    "order_for_dimension",
    "product_kernel",
    "smoothing_gram",
    "CharKernelParams",
    "BandwidthSet",
    "gaussian_c",
    "characteristic_gram",
]


def _epan(t2):
    return np.where(t2 <= 1.0, 0.75 * (1.0 - t2), 0.0)


def _poly4(t2):
    return np.where(t2 <= 1.0, (15.0 / 32.0) * (1.0 - t2) * (3.0 - 7.0 * t2), 0.0)


def _scalar_or_array(fn, t):
    t = np.asarray(t, dtype=float)
    out = fn(t * t)
    return float(out) if out.ndim == 0 else out


def epanechnikov(t):
    """Second-order kernel ``(3/4)(1 - t^2)`` on ``[-1, 1]``."""
    return _scalar_or_array(_epan, t)


def poly4(t):
    """Fourth-order polynomial kernel ``(15/32)(1 - t^2)(3 - 7t^2)`` on ``[-1, 1]``.

    Its second moment vanishes, so it takes negative values for
    ``3/7 < t^2 < 1``.
    """
    return _scalar_or_array(_poly4, t)


@dataclass(frozen=True)
class SmoothingKernel:
    """Univariate compactly supported kernel ``K^u`` of even order ``nu``."""

    order: int

    def __post_init__(self):
        if self.order not in (2, 4):
            raise BandwidthError(f"kernel order must be 2 or 4, got {self.order}")

    def __call__(self, t):
        return epanechnikov(t) if self.order == 2 else poly4(t)

    @property
    def k0(self) -> float:
        """``K^u(0)``."""
        return 0.75 if self.order == 2 else 45.0 / 32.0


EPANECHNIKOV = SmoothingKernel(2)
POLY4 = SmoothingKernel(4)


def order_for_dimension(d_c: int) -> int:
    """Kernel order needed for ``d_c`` continuous covariates (``d_c < 2 nu``)."""
    if d_c <= 3:
        return 2
    if d_c <= 7:
        return 4
    raise BandwidthError(
        f"kernel order insufficient for this dimension: d_C={d_c} needs order > {d_c / 2}"
        " but only orders 2 and 4 are available"
    )


def kernel_for_dimension(d_c: int) -> SmoothingKernel:
    return SmoothingKernel(order_for_dimension(d_c))


def product_kernel(x, h, kernel: SmoothingKernel):
    """Scaled product kernel ``prod_j K^u(x_j / h) / h^d``."""
    if not h > 0:
        raise BandwidthError(f"bandwidth must be positive, got {h}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val = 1.0
    for xj in x:
        val *= kernel(xj / h)
    return val / h ** x.size


def smoothing_gram(dataset, h0, kernel: SmoothingKernel, absolute=False):
    """Matrix ``K~[i, k] = K_h0(X_i^C - X_k^C) 1{X_i^D = X_k^D}``.

    Uses ``dataset.x_cont`` as given; callers wanting the scaled smoother
    pass a dataset whose continuous block is already scaled.  With
    ``d_C = 0`` only the discrete indicator remains and ``h0`` is ignored.
    ``absolute=True`` returns ``|K~|`` (identical for order 2).
    """
    x = dataset.x_cont
    n, d = x.shape
    if d > 0:
        if h0 is None or not h0 > 0:
            raise BandwidthError(f"bandwidth must be positive, got {h0}")
        K = _backend.smoothing_gram_cont(np.ascontiguousarray(x), float(h0), kernel.order)
        if absolute and kernel.order != 2:
            K = np.abs(K)
    else:
        K = np.ones((n, n))
    cells = dataset.disc_cells()
    if cells is not None:
        K = K * (cells[:, None] == cells[None, :])
    return K


@dataclass(frozen=True)
class CharKernelParams:
    """Scale of the Gaussian characteristic kernel ``exp(-d^2 / sigma_c2)``."""

    sigma_c2: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma_c2) and self.sigma_c2 > 0):
            raise ValidationError(f"sigma_c2 must be positive and finite, got {self.sigma_c2}")


@dataclass(frozen=True)
class BandwidthSet:
    """Bandwidths of one test.

    ``discrete`` is set when ``d_c == 0``; the real-valued fields are then
    ``None`` because every kernel weight is an equality indicator.
    """

    h: float | None
    h_tilde: float | None
    kappa_n: float
    h_gcv: float | None
    nu: int | None
    d_c: int
    discrete: bool = False

    def __post_init__(self):
        if self.discrete:
            return
        bad = [k for k in ("h", "h_tilde", "h_gcv")
               if not (getattr(self, k) is not None and getattr(self, k) > 0)]
        # kappa_n = 0 is allowed: it forces the absolute-weight residual branch
        if not self.kappa_n >= 0:
            bad.append("kappa_n")
        if bad:
            raise BandwidthError(f"non-positive bandwidth fields: {bad}")
        if self.nu not in (2, 4) or self.d_c >= 2 * self.nu:
            raise BandwidthError(f"kernel order {self.nu} insufficient for d_C={self.d_c}")


def gaussian_c(z_dist2, params: CharKernelParams):
    """Gaussian characteristic kernel evaluated on squared distances."""
    z = np.asarray(z_dist2, dtype=float)
    if np.any(z < 0):
        raise ValidationError("squared distances must be nonnegative")
    out = np.exp(-z / params.sigma_c2)
    return float(out) if out.ndim == 0 else out


def characteristic_gram(dist2, params: CharKernelParams):
    """``C[i, j] = exp(-dist2[i, j] / sigma_c2)`` with unit diagonal."""
    dist2 = np.asarray(dist2, dtype=float)
    problems = []
    if dist2.ndim != 2 or dist2.shape[0] != dist2.shape[1]:
        raise ValidationError(f"distance matrix must be square, got {dist2.shape}")
    if not np.all(np.isfinite(dist2)):
        problems.append("distance matrix has non-finite entries")
    if np.any(dist2 < 0):
        problems.append("distance matrix has negative entries")
    if np.any(np.diag(dist2) != 0):
        problems.append("distance matrix has a nonzero diagonal")
    if not np.array_equal(dist2, dist2.T):
        problems.append("distance matrix is not symmetric")
    if problems:
        raise ValidationError(problems)
    return np.exp(-dist2 / params.sigma_c2)
