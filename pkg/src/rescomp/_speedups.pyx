# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory kernels.

One fused loop per time step: BLAS dgemm for the dense matmuls, a C loop for
the CSR matmul, and in-place activation + leaky blend without temporaries.
Signatures match the NumPy fallback in ``_pyref``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ACT_ERF = 0
ACT_RELU = 1
ACT_SIGN = 2


cdef inline double _act(int act_id, double z) nogil:
    # NaN falls through every comparison and is returned unchanged, so a
    # diverged pre-activation stays visible (matching np.maximum/np.sign).
    if act_id == 0:
        return erf(z)
    if act_id == 1:
        if z > 0.0:
            return z
        if z <= 0.0:
            return 0.0
        return z
    if z > 0.0:
        return 1.0
    if z < 0.0:
        return -1.0
    if z == 0.0:
        return 0.0
    return z


cdef void _gemm_c_order(double* a, double* b, double* c,
                        int m, int k, int n, double beta) nogil:
    # C(m,n) = A(m,k) @ B(k,n) + beta*C with all arrays C-contiguous:
    # computed as the column-major product B^T A^T.
    cdef double one = 1.0
    cdef char no_trans = b'n'
    dgemm(&no_trans, &no_trans, &n, &m, &k, &one, b, &n, a, &k, &beta, c, &n)


cdef void _blend(double[:, ::1] prev, double[:, ::1] z, double[:, ::1] nxt,
                 double keep, double gain, int act_id) nogil:
    cdef Py_ssize_t i, j
    for i in range(prev.shape[0]):
        for j in range(prev.shape[1]):
            nxt[i, j] = keep * prev[i, j] + gain * _act(act_id, z[i, j])


def run_dense(double[:, ::1] wr_scaled, double[:, ::1] wi_scaled,
              double[:, :, ::1] inputs, double[:, ::1] x0,
              double leak, double inv_sqrt_n, int act_id):
    cdef Py_ssize_t t_len = inputs.shape[0]
    cdef int n = <int> x0.shape[0]
    cdef int m = <int> x0.shape[1]
    cdef int d = <int> wi_scaled.shape[1]
    states_arr = np.empty((t_len + 1, n, m))
    cdef double[:, :, ::1] states = states_arr
    z_arr = np.empty((n, m))
    cdef double[:, ::1] z = z_arr
    cdef double keep = 1.0 - leak
    cdef double gain = leak * inv_sqrt_n
    cdef Py_ssize_t t
    states[0, :, :] = x0
    with nogil:
        for t in range(t_len):
            _gemm_c_order(&wr_scaled[0, 0], &states[t, 0, 0], &z[0, 0], n, n, m, 0.0)
            _gemm_c_order(&wi_scaled[0, 0], &inputs[t, 0, 0], &z[0, 0], n, d, m, 1.0)
            _blend(states[t], z, states[t + 1], keep, gain, act_id)
    return states_arr


def run_csr(double[::1] data_scaled, cnp.int32_t[::1] indices, cnp.int32_t[::1] indptr,
            double[:, ::1] wi_scaled, double[:, :, ::1] inputs, double[:, ::1] x0,
            double leak, double inv_sqrt_n, int act_id):
    cdef Py_ssize_t t_len = inputs.shape[0]
    cdef int n = <int> x0.shape[0]
    cdef int m = <int> x0.shape[1]
    cdef int d = <int> wi_scaled.shape[1]
    states_arr = np.empty((t_len + 1, n, m))
    cdef double[:, :, ::1] states = states_arr
    z_arr = np.empty((n, m))
    cdef double[:, ::1] z = z_arr
    cdef double keep = 1.0 - leak
    cdef double gain = leak * inv_sqrt_n
    cdef Py_ssize_t t, i, j, p
    cdef cnp.int32_t col
    cdef double w
    states[0, :, :] = x0
    with nogil:
        for t in range(t_len):
            for i in range(n):
                for j in range(m):
                    z[i, j] = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    col = indices[p]
                    w = data_scaled[p]
                    for j in range(m):
                        z[i, j] += w * states[t, col, j]
            _gemm_c_order(&wi_scaled[0, 0], &inputs[t, 0, 0], &z[0, 0], n, d, m, 1.0)
            _blend(states[t], z, states[t + 1], keep, gain, act_id)
    return states_arr
