# cython: language_level=3
"""Compiled hot kernels; see ``_fallback`` for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _ku(double t2, int order) noexcept nogil:
    if t2 > 1.0:
        return 0.0
    if order == 2:
        return 0.75 * (1.0 - t2)
    return (15.0 / 32.0) * (1.0 - t2) * (3.0 - 7.0 * t2)


def smoothing_gram_cont(const double[:, ::1] x, double h, int order):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, k, j
    cdef double prod, t, hd = h ** d
    out = np.empty((n, n))
    cdef double[:, ::1] K = out
    with nogil:
        for i in range(n):
            for k in range(i, n):
                prod = 1.0
                for j in range(d):
                    t = (x[i, j] - x[k, j]) / h
                    prod = prod * _ku(t * t, order)
                    if prod == 0.0:
                        break
                K[i, k] = prod / hd
                K[k, i] = K[i, k]
    return out


def pairwise_sq_dist(const double[:, ::1] F, const double[::1] w):
    cdef Py_ssize_t n = F.shape[0], p = F.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double acc, diff
    out = np.zeros((n, n))
    cdef double[:, ::1] D = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for t in range(p):
                    diff = F[i, t] - F[j, t]
                    acc = acc + w[t] * diff * diff
                D[i, j] = acc
                D[j, i] = acc
    return out


def weighted_diff(const double[:, ::1] W, const double[:, ::1] F):
    cdef Py_ssize_t n = F.shape[0], p = F.shape[1]
    cdef Py_ssize_t i, k, t
    cdef double wik
    out = np.zeros((n, p))
    cdef double[:, ::1] R = out
    with nogil:
        for i in range(n):
            for k in range(n):
                wik = W[i, k]
                if wik == 0.0 or k == i:
                    continue
                for t in range(p):
                    R[i, t] = R[i, t] + wik * (F[k, t] - F[i, t])
    return out


def collision_sums(const double[:, ::1] C, const double[:, ::1] K, const double[:, ::1] G):
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t i, k, l
    cdef double cii, gii, kik, kil, acc, dc, dg, t2
    A_arr = np.zeros(n)
    T2_arr = np.zeros(n)
    cdef double[::1] A = A_arr
    cdef double[::1] T2 = T2_arr
    with nogil:
        for i in range(n):
            cii = C[i, i]
            gii = G[i, i]
            acc = 0.0
            t2 = 0.0
            for k in range(n):
                kik = K[i, k]
                if kik == 0.0 or k == i:
                    continue
                dc = cii - 2.0 * C[i, k] + C[k, k]
                dg = gii - 2.0 * G[i, k] + G[k, k]
                t2 = t2 + dc * kik * kik * dg
                for l in range(n):
                    kil = K[i, l]
                    if kil == 0.0 or l == i:
                        continue
                    acc = acc + (cii - C[i, l] - C[k, i] + C[k, l]) * kik * kil \
                        * (gii - G[i, l] - G[k, i] + G[k, l])
            A[i] = acc
            T2[i] = t2
    return A_arr, T2_arr
