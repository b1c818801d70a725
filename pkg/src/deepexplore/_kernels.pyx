# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the MLP value network and the Adam-family updates.

Every function here has a drop-in numpy twin in ``_fallback.py`` with the
same signature. Arrays are row-major float64; the parameter layout is
``[W_0, b_0, W_1, b_1, ...]`` with ``W_l`` of shape ``(fan_in, fan_out)``.

The first layer reads its inputs straight out of an observation table by row
index and skips zero entries, so one-hot encoded states cost O(fan_out) per
sample instead of O(fan_in * fan_out). Dense layers go through BLAS.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _act(double x, double slope) noexcept nogil:
    return x if x > 0.0 else slope * x


cdef inline double _dact(double x, double slope) noexcept nogil:
    return 1.0 if x > 0.0 else slope


cdef void _gemm_rowmajor(int rows, int inner, int cols, double* A, double* W,
                         double* C, double beta) noexcept nogil:
    # C[rows, cols] = A[rows, inner] @ W[inner, cols] + beta * C
    cdef char ta = b'N'
    cdef char tb = b'N'
    cdef double one = 1.0
    dgemm(&ta, &tb, &cols, &rows, &inner, &one, W, &cols, A, &inner, &beta, C, &cols)


cdef void _gemm_backprop(int rows, int inner, int cols, double* D, double* W,
                         double* out) noexcept nogil:
    # out[rows, inner] = D[rows, cols] @ W[inner, cols].T
    cdef char ta = b'T'
    cdef char tb = b'N'
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &inner, &rows, &cols, &one, W, &cols, D, &cols, &zero, out, &inner)


cdef void _gemm_weight_grad(int rows, int inner, int cols, double* A, double* D,
                            double* gW) noexcept nogil:
    # gW[inner, cols] = A[rows, inner].T @ D[rows, cols]
    cdef char ta = b'N'
    cdef char tb = b'T'
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &cols, &inner, &rows, &one, D, &cols, A, &inner, &zero, gW, &cols)


cdef void _first_layer(const double[:, ::1] table, const cnp.int64_t[::1] rows,
                       const double* W, const double* b, int fan_in, int fan_out,
                       double* Z) noexcept nogil:
    cdef Py_ssize_t n, i, j
    cdef Py_ssize_t B = rows.shape[0]
    cdef double x
    cdef double* zrow
    cdef const double* wrow
    cdef const double* xrow
    for n in range(B):
        xrow = &table[rows[n], 0]
        zrow = Z + n * fan_out
        for j in range(fan_out):
            zrow[j] = b[j]
        for i in range(fan_in):
            x = xrow[i]
            if x != 0.0:
                wrow = W + i * fan_out
                for j in range(fan_out):
                    zrow[j] += x * wrow[j]


cdef void _bias_fill(double* Z, const double* b, int B, int width) noexcept nogil:
    cdef Py_ssize_t n, j
    for n in range(B):
        for j in range(width):
            Z[n * width + j] = b[j]


cdef void _activate(const double* Z, double* H, Py_ssize_t size, double slope) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(size):
        H[k] = _act(Z[k], slope)


cdef list _forward_pass(const double[::1] params, const cnp.int64_t[::1] dims, double slope,
                        const double[:, ::1] table, const cnp.int64_t[::1] rows):
    """Pre-activations and activations, ``[Z_0, H_0, Z_1, H_1, ..., Z_L]``."""
    cdef int L = dims.shape[0] - 1
    cdef int B = rows.shape[0]
    cdef int l, fan_in, fan_out
    cdef Py_ssize_t off = 0
    cdef double[:, ::1] Z
    cdef double[:, ::1] H
    cdef list pre = []
    cdef const double* Wp
    cdef const double* bp
    for l in range(L):
        fan_in = dims[l]
        fan_out = dims[l + 1]
        Z_arr = np.empty((B, fan_out))
        Z = Z_arr
        Wp = &params[off]
        bp = &params[off + fan_in * fan_out]
        if l == 0:
            _first_layer(table, rows, Wp, bp, fan_in, fan_out, &Z[0, 0])
        else:
            _bias_fill(&Z[0, 0], bp, B, fan_out)
            _gemm_rowmajor(B, fan_in, fan_out, &H[0, 0], <double*>Wp, &Z[0, 0], 1.0)
        pre.append(Z_arr)
        if l < L - 1:
            H_arr = np.empty((B, fan_out))
            H = H_arr
            _activate(&Z[0, 0], &H[0, 0], B * fan_out, slope)
            pre.append(H_arr)
        off += fan_in * fan_out + fan_out
    return pre


def mlp_forward(const double[::1] params, const cnp.int64_t[::1] dims, double slope,
                const double[:, ::1] table, const cnp.int64_t[::1] rows):
    """Output layer values for ``table[rows]``, shape ``(len(rows), dims[-1])``."""
    if rows.shape[0] == 0:
        return np.zeros((0, dims[dims.shape[0] - 1]))
    cdef list pre = _forward_pass(params, dims, slope, table, rows)
    return pre[len(pre) - 1]


def mlp_td_grad(const double[::1] params, const cnp.int64_t[::1] dims, double slope,
                const double[:, ::1] table, const cnp.int64_t[::1] rows,
                const cnp.int64_t[::1] actions, const double[::1] targets,
                double reg, double[::1] grad):
    """Squared-residual loss on the chosen outputs plus ``reg * |params|^2``.

    loss = mean_n (Q(x_n)[a_n] - y_n)^2 + reg * sum(params^2); the gradient is
    written into ``grad`` and the loss is returned.
    """
    cdef int L = dims.shape[0] - 1
    cdef int B = rows.shape[0]
    cdef int A = dims[L]
    cdef int l, fan_in, fan_out
    cdef Py_ssize_t n, i, j, r, k
    cdef Py_ssize_t P = params.shape[0]
    cdef double loss = 0.0, res, x, sq = 0.0
    cdef double inv_b = 1.0 / B
    cdef list pre = _forward_pass(params, dims, slope, table, rows)
    cdef double[:, ::1] Q = pre[len(pre) - 1]
    cdef double[:, ::1] D = np.zeros((B, A))
    cdef double[:, ::1] Dprev
    cdef double[:, ::1] Zprev
    cdef double[:, ::1] Hprev
    cdef Py_ssize_t[::1] offsets = np.empty(L, dtype=np.intp)
    cdef Py_ssize_t off = 0
    cdef double* gWrow
    cdef double* drow
    cdef double* Dp
    cdef double* gb
    cdef double* dp
    cdef const double* zp
    cdef const double* xrow

    for n in range(B):
        res = Q[n, actions[n]] - targets[n]
        loss += res * res
        D[n, actions[n]] = 2.0 * res * inv_b
    loss *= inv_b

    for l in range(L):
        offsets[l] = off
        off += dims[l] * dims[l + 1] + dims[l + 1]

    for l in range(L - 1, -1, -1):
        fan_in = dims[l]
        fan_out = dims[l + 1]
        off = offsets[l]
        Dp = &D[0, 0]
        gb = &grad[off + fan_in * fan_out]
        for j in range(fan_out):
            gb[j] = 0.0
        for n in range(B):
            drow = Dp + n * fan_out
            for j in range(fan_out):
                gb[j] += drow[j]
        if l == 0:
            for i in range(fan_in * fan_out):
                grad[off + i] = 0.0
            for n in range(B):
                xrow = &table[rows[n], 0]
                drow = Dp + n * fan_out
                for i in range(fan_in):
                    x = xrow[i]
                    if x != 0.0:
                        gWrow = &grad[off + i * fan_out]
                        for j in range(fan_out):
                            gWrow[j] += x * drow[j]
        else:
            Hprev = pre[2 * l - 1]
            Zprev = pre[2 * l - 2]
            _gemm_weight_grad(B, fan_in, fan_out, &Hprev[0, 0], Dp, &grad[off])
            Dprev = np.empty((B, fan_in))
            _gemm_backprop(B, fan_in, fan_out, Dp, <double*>&params[off], &Dprev[0, 0])
            zp = &Zprev[0, 0]
            dp = &Dprev[0, 0]
            for k in range(B * fan_in):
                dp[k] *= _dact(zp[k], slope)
            D = Dprev

    if reg != 0.0:
        for k in range(P):
            sq += params[k] * params[k]
            grad[k] += 2.0 * reg * params[k]
        loss += reg * sq
    return loss


def adam_update(double[::1] theta, const double[::1] g, double[::1] m,
                double[::1] v, double alpha_k, double beta1, double beta2,
                double eps, double noise_scale, z):
    """In-place Adam step; adds sqrt(noise_scale * alpha_k / (sqrt(v)+eps)) * z when z is given."""
    cdef Py_ssize_t i, P = theta.shape[0]
    cdef double denom, gi
    cdef bint noisy = z is not None
    cdef const double[::1] zz = z if noisy else g
    for i in range(P):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi
        denom = sqrt(v[i]) + eps
        theta[i] = theta[i] - alpha_k * m[i] / denom
        if noisy:
            theta[i] = theta[i] + sqrt(noise_scale * alpha_k / denom) * zz[i]
