# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs
from libc.stdint cimport int64_t, uint64_t, int8_t, uint8_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def sieve_block(int64_t lo, int64_t hi, primes):
    cdef int64_t size = hi - lo
    mu_arr = np.ones(size, dtype=np.int8)
    lam_arr = np.zeros(size, dtype=np.float64)
    rad_arr = np.ones(size, dtype=np.int64)
    cdef int8_t[::1] mu = mu_arr
    cdef double[::1] lam = lam_arr
    cdef int64_t[::1] rad = rad_arr
    cdef const int64_t[::1] ps = np.ascontiguousarray(primes, dtype=np.int64)
    cdef Py_ssize_t i, npr = ps.shape[0]
    cdef int64_t p, p2, j, pk, n
    cdef double logp
    for i in range(npr):
        p = ps[i]
        if p * p >= hi:
            break
        j = (p - lo % p) % p
        while j < size:
            mu[j] = -mu[j]
            rad[j] *= p
            j += p
        p2 = p * p
        j = (p2 - lo % p2) % p2
        while j < size:
            mu[j] = 0
            j += p2
        logp = log(<double>p)
        pk = p
        while pk < hi:
            if pk >= lo:
                lam[pk - lo] = logp
            if pk > hi // p:
                break
            pk *= p
    for j in range(size):
        n = lo + j
        if mu[j] != 0 and rad[j] != n:
            mu[j] = -mu[j]
        if rad[j] == 1 and n > 1:
            lam[j] = log(<double>n)
    if lo == 0 and size > 0:
        mu[0] = 0
    return mu_arr, lam_arr


def neumaier_cumsum(x, double s=0.0, double c=0.0):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out_arr = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double v, t
    for i in range(xv.shape[0]):
        v = xv[i]
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out_arr, s, c


def thue_morse_bits(n):
    cdef const uint64_t[::1] nv = np.ascontiguousarray(n, dtype=np.uint64)
    out_arr = np.empty(nv.shape[0], dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(nv.shape[0]):
        out[i] = __builtin_popcountll(nv[i]) & 1
    return out_arr

