"""Pure numpy implementations of the hot kernels.

Each function here has a compiled twin in ``_core.pyx`` with the same
signature; ``_backend`` picks one at import time.
"""
import numpy as np

_CHUNK_ELEMS = 1 << 22


def _rows_per_chunk(n, p):
    return max(1, _CHUNK_ELEMS // max(1, n * p))


def smoothing_gram_cont(x, h, order):
    """Product kernel matrix ``prod_j K^u((x_ij - x_kj)/h) / h^d``."""
    n, d = x.shape
    K = np.ones((n, n))
    for j in range(d):
        t = (x[:, None, j] - x[None, :, j]) / h
        t2 = t * t
        inside = t2 <= 1.0
        if order == 2:
            kj = 0.75 * (1.0 - t2)
        else:
            kj = (15.0 / 32.0) * (1.0 - t2) * (3.0 - 7.0 * t2)
        K *= np.where(inside, kj, 0.0)
    return K / h ** d


def pairwise_sq_dist(F, w):
    """``D[i, j] = sum_t w_t (F_it - F_jt)^2`` by direct differences."""
    n, p = F.shape
    D = np.empty((n, n))
    step = _rows_per_chunk(n, p)
    for a in range(0, n, step):
        diff = F[a:a + step, None, :] - F[None, :, :]
        D[a:a + step] = (diff * diff) @ w
    np.fill_diagonal(D, 0.0)
    # mirror so the result is bitwise symmetric
    iu = np.triu_indices(n, 1)
    D[(iu[1], iu[0])] = D[iu]
    return D


def weighted_diff(W, F):
    """``out[i] = sum_k W_ik (F_k - F_i)`` row by row."""
    n, p = F.shape
    out = np.empty_like(F)
    step = _rows_per_chunk(n, p)
    for a in range(0, n, step):
        diff = F[None, :, :] - F[a:a + step, None, :]
        out[a:a + step] = np.einsum("ik,ikp->ip", W[a:a + step], diff)
    return out


def collision_sums(C, K, G):
    """Per-row collision sums.

    Returns ``(A, T2)`` with ``A[i] = sum_{k,l} dC_ikl K_ik K_il dG_ikl`` where
    ``dC_ikl = C_ii - C_il - C_ki + C_kl`` (likewise ``dG``), and
    ``T2[i] = sum_k (C_ii - 2C_ik + C_kk) K_ik^2 (G_ii - 2G_ik + G_kk)``.
    """
    s = K.sum(axis=1)
    cd = np.diag(C)
    gd = np.diag(G)
    Wc = (K * C).sum(axis=1)
    Wg = (K * G).sum(axis=1)
    Wcg = (K * C * G).sum(axis=1)
    KC = K @ C
    KG = K @ G
    wCw = (K * KC).sum(axis=1)
    wGw = (K * KG).sum(axis=1)
    uGw = (K * C * KG).sum(axis=1)
    gCw = (K * G * KC).sum(axis=1)
    wCGw = (K * (K @ (C * G))).sum(axis=1)
    A = (
        cd * gd * s * s
        - 2.0 * cd * s * Wg
        - 2.0 * gd * s * Wc
        + cd * wGw
        + gd * wCw
        + 2.0 * (s * Wcg + Wc * Wg)
        - 2.0 * uGw
        - 2.0 * gCw
        + wCGw
    )
    dc = cd[:, None] - 2.0 * C + cd[None, :]
    dg = gd[:, None] - 2.0 * G + gd[None, :]
    T2 = (dc * K * K * dg).sum(axis=1)
    return A, T2
