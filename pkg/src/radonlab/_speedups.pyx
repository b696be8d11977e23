# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for oscillatory lattice operators.

Per output point the phase polynomial is evaluated term by term, reduced mod
one, and fed to a complex exponential; the kernel value comes from a dense
offset table.  Mirrors _slowpath exactly up to floating-point association.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, floor, sin

cnp.import_array()

DEF TWO_PI = 6.283185307179586476925286766559


cdef inline double ipow(double base, long e) noexcept nogil:
    cdef double r = 1.0
    cdef long i
    for i in range(e):
        r *= base
    return r


cdef void _fill_products(const long[:, ::1] coords, const long[:, ::1] exps,
                         double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t T = exps.shape[0]
    cdef Py_ssize_t N = coords.shape[0]
    cdef Py_ssize_t K = coords.shape[1]
    cdef Py_ssize_t t, i, d
    cdef double acc
    for t in range(T):
        for i in range(N):
            acc = 1.0
            for d in range(K):
                if exps[t, d]:
                    acc *= ipow(<double> coords[i, d], exps[t, d])
            out[t, i] = acc


def osc_apply(out_coords, in_coords, fvals, coeffs, alphas, betas, kern, origin):
    """y[i] = sum_j e(phase(n_i, m_j)) K[n_i - m_j] f[j], phase reduced mod 1."""
    cdef long[:, ::1] oc = np.ascontiguousarray(out_coords, dtype=np.int64)
    cdef long[:, ::1] ic = np.ascontiguousarray(in_coords, dtype=np.int64)
    cdef double complex[::1] f = np.ascontiguousarray(fvals, dtype=np.complex128)
    cdef double[::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef long[:, ::1] al = np.ascontiguousarray(alphas, dtype=np.int64)
    cdef long[:, ::1] be = np.ascontiguousarray(betas, dtype=np.int64)
    kern_arr = np.ascontiguousarray(kern, dtype=np.float64)
    cdef double[::1] kv = kern_arr.ravel()
    cdef long[::1] org = np.ascontiguousarray(origin, dtype=np.int64)

    cdef Py_ssize_t N = oc.shape[0], M = ic.shape[0], K = oc.shape[1]
    cdef Py_ssize_t T = cf.shape[0]
    cdef long[::1] strides = np.ascontiguousarray(
        np.cumprod((kern_arr.shape + (1,))[::-1])[::-1][1:], dtype=np.int64)

    pn_arr = np.empty((T, N), dtype=np.float64)
    pm_arr = np.empty((T, M), dtype=np.float64)
    cdef double[:, ::1] pn = pn_arr
    cdef double[:, ::1] pm = pm_arr
    _fill_products(oc, al, pn)
    _fill_products(ic, be, pm)

    out = np.zeros(N, dtype=np.complex128)
    cdef double complex[::1] y = out
    cdef Py_ssize_t i, j, t, d
    cdef double ph, arg
    cdef long flat
    cdef double complex acc
    with nogil:
        for i in range(N):
            acc = 0
            for j in range(M):
                flat = 0
                for d in range(K):
                    flat += (oc[i, d] - ic[j, d] + org[d]) * strides[d]
                if kv[flat] == 0.0:
                    continue
                ph = 0.0
                for t in range(T):
                    ph += cf[t] * pn[t, i] * pm[t, j]
                arg = TWO_PI * (ph - floor(ph))
                acc += (cos(arg) + 1j * sin(arg)) * kv[flat] * f[j]
            y[i] = acc
    return out


def osc_materialize(out_coords, in_coords, coeffs, alphas, betas, kern, origin):
    """Dense matrix M[i, j] = e(phase(n_i, m_j)) K[n_i - m_j]."""
    cdef long[:, ::1] oc = np.ascontiguousarray(out_coords, dtype=np.int64)
    cdef long[:, ::1] ic = np.ascontiguousarray(in_coords, dtype=np.int64)
    cdef double[::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef long[:, ::1] al = np.ascontiguousarray(alphas, dtype=np.int64)
    cdef long[:, ::1] be = np.ascontiguousarray(betas, dtype=np.int64)
    kern_arr = np.ascontiguousarray(kern, dtype=np.float64)
    cdef double[::1] kv = kern_arr.ravel()
    cdef long[::1] org = np.ascontiguousarray(origin, dtype=np.int64)

    cdef Py_ssize_t N = oc.shape[0], M = ic.shape[0], K = oc.shape[1]
    cdef Py_ssize_t T = cf.shape[0]
    cdef long[::1] strides = np.ascontiguousarray(
        np.cumprod((kern_arr.shape + (1,))[::-1])[::-1][1:], dtype=np.int64)

    pn_arr = np.empty((T, N), dtype=np.float64)
    pm_arr = np.empty((T, M), dtype=np.float64)
    cdef double[:, ::1] pn = pn_arr
    cdef double[:, ::1] pm = pm_arr
    _fill_products(oc, al, pn)
    _fill_products(ic, be, pm)

    out = np.zeros((N, M), dtype=np.complex128)
    cdef double complex[:, ::1] mat = out
    cdef Py_ssize_t i, j, t, d
    cdef double ph, arg, kval
    cdef long flat
    with nogil:
        for i in range(N):
            for j in range(M):
                flat = 0
                for d in range(K):
                    flat += (oc[i, d] - ic[j, d] + org[d]) * strides[d]
                kval = kv[flat]
                if kval == 0.0:
                    continue
                ph = 0.0
                for t in range(T):
                    ph += cf[t] * pn[t, i] * pm[t, j]
                arg = TWO_PI * (ph - floor(ph))
                mat[i, j] = (cos(arg) + 1j * sin(arg)) * kval
    return out
