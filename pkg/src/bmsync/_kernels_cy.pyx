# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Same contracts as ``_kernels_py``; hand-written loops tuned for small block
edge d (1..8 at desk scale) with arbitrary width k. The per-block symmetric
eigensolve uses cyclic Jacobi sweeps, which is exact enough (machine
precision) and avoids any LAPACK binding in the extension.
"""

import numpy as np

cimport numpy as cnp

from .errors import SingularBlockError

cnp.import_array()

BACKEND = "cy"

cdef double _SINGULAR_RTOL = 1e-13
cdef int _MAX_D = 32


def bdg(const double[:, ::1] X, int n, int d):
    cdef Py_ssize_t i, a, b, off
    out_arr = np.zeros((n * d, n * d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        off = i * d
        for a in range(d):
            for b in range(d):
                out[off + a, off + b] = 0.5 * (X[off + a, off + b] + X[off + b, off + a])
    return out_arr


def block_sym_outer(const double[:, ::1] Z, const double[:, ::1] S, int n, int d):
    cdef Py_ssize_t i, a, b, c, off
    cdef int k = S.shape[1]
    cdef double acc
    out_arr = np.empty((n, d, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    for i in range(n):
        off = i * d
        for a in range(d):
            for b in range(a, d):
                acc = 0.0
                for c in range(k):
                    acc += Z[off + a, c] * S[off + b, c] + S[off + a, c] * Z[off + b, c]
                acc *= 0.5
                out[i, a, b] = acc
                out[i, b, a] = acc
    return out_arr


def project_tangent(const double[:, ::1] S, const double[:, ::1] Z, int n, int d):
    cdef Py_ssize_t i, a, b, c, off
    cdef int k = S.shape[1]
    cdef double acc
    cdef double lam[32 * 32]
    if d > _MAX_D:
        raise ValueError(f"block edge {d} exceeds compiled kernel limit {_MAX_D}")
    out_arr = np.empty((n * d, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        off = i * d
        for a in range(d):
            for b in range(a, d):
                acc = 0.0
                for c in range(k):
                    acc += Z[off + a, c] * S[off + b, c] + S[off + a, c] * Z[off + b, c]
                acc *= 0.5
                lam[a * d + b] = acc
                lam[b * d + a] = acc
        for a in range(d):
            for c in range(k):
                acc = Z[off + a, c]
                for b in range(d):
                    acc -= lam[a * d + b] * S[off + b, c]
                out[off + a, c] = acc
    return out_arr


cdef int _jacobi_eigh(double* M, double* V, int d) noexcept:
    """In-place Jacobi eigendecomposition of the symmetric d x d matrix M
    (row-major). On return the diagonal of M holds the eigenvalues and V the
    eigenvectors (columns). Returns the sweep count."""
    cdef int sweeps = 0, p, q, r
    cdef double off, norm, theta, t, c, s, mpq, mpp, mqq, vrp, vrq, mrp, mrq
    for p in range(d):
        for q in range(d):
            V[p * d + q] = 1.0 if p == q else 0.0
    while sweeps < 50:
        off = 0.0
        norm = 0.0
        for p in range(d):
            for q in range(d):
                norm += M[p * d + q] * M[p * d + q]
                if p != q:
                    off += M[p * d + q] * M[p * d + q]
        if off <= 1e-30 * (norm + 1e-300):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                mpq = M[p * d + q]
                if mpq == 0.0:
                    continue
                mpp = M[p * d + p]
                mqq = M[q * d + q]
                theta = 0.5 * (mqq - mpp) / mpq
                if theta >= 0.0:
                    t = 1.0 / (theta + (1.0 + theta * theta) ** 0.5)
                else:
                    t = -1.0 / (-theta + (1.0 + theta * theta) ** 0.5)
                c = 1.0 / (1.0 + t * t) ** 0.5
                s = t * c
                for r in range(d):
                    mrp = M[r * d + p]
                    mrq = M[r * d + q]
                    M[r * d + p] = c * mrp - s * mrq
                    M[r * d + q] = s * mrp + c * mrq
                for r in range(d):
                    mrp = M[p * d + r]
                    mrq = M[q * d + r]
                    M[p * d + r] = c * mrp - s * mrq
                    M[q * d + r] = s * mrp + c * mrq
                for r in range(d):
                    vrp = V[r * d + p]
                    vrq = V[r * d + q]
                    V[r * d + p] = c * vrp - s * vrq
                    V[r * d + q] = s * vrp + c * vrq
        sweeps += 1
    return sweeps


def polar_factor(const double[:, ::1] Y, int n, int d):
    cdef Py_ssize_t i, a, b, c, off
    cdef int k = Y.shape[1]
    cdef double M[32 * 32]
    cdef double V[32 * 32]
    cdef double B[32 * 32]
    cdef double w[32]
    cdef double acc, wmax, wmin, nrm
    if d > _MAX_D:
        raise ValueError(f"block edge {d} exceeds compiled kernel limit {_MAX_D}")
    out_arr = np.empty((n * d, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if d == 1:
        for i in range(n):
            acc = 0.0
            for c in range(k):
                acc += Y[i, c] * Y[i, c]
            nrm = acc ** 0.5
            if nrm <= _SINGULAR_RTOL:
                raise SingularBlockError(i)
            for c in range(k):
                out[i, c] = Y[i, c] / nrm
        return out_arr
    for i in range(n):
        off = i * d
        for a in range(d):
            for b in range(a, d):
                acc = 0.0
                for c in range(k):
                    acc += Y[off + a, c] * Y[off + b, c]
                M[a * d + b] = acc
                M[b * d + a] = acc
        _jacobi_eigh(M, V, d)
        wmax = M[0]
        wmin = M[0]
        for a in range(1, d):
            if M[a * d + a] > wmax:
                wmax = M[a * d + a]
            if M[a * d + a] < wmin:
                wmin = M[a * d + a]
        if wmin <= _SINGULAR_RTOL * (wmax if wmax > 1.0 else 1.0):
            raise SingularBlockError(i)
        for a in range(d):
            w[a] = 1.0 / (M[a * d + a] ** 0.5)
        # B = V diag(1/sqrt(w)) V^T
        for a in range(d):
            for b in range(a, d):
                acc = 0.0
                for c in range(d):
                    acc += V[a * d + c] * w[c] * V[b * d + c]
                B[a * d + b] = acc
                B[b * d + a] = acc
        for a in range(d):
            for c in range(k):
                acc = 0.0
                for b in range(d):
                    acc += B[a * d + b] * Y[off + b, c]
                out[off + a, c] = acc
    return out_arr
