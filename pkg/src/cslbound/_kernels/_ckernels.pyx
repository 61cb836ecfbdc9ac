# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, erfc, sqrt, INFINITY

cnp.import_array()


def profile_transform(q, centers, halfwidths, weights, bint times_q=False):
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[::1] h = np.ascontiguousarray(halfwidths, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0], ns = c.shape[0], i, s
    re_arr = np.empty(n)
    im_arr = np.empty(n)
    cdef double[::1] re = re_arr
    cdef double[::1] im = im_arr
    cdef double qi, x, x2, amp, ph, sr, si
    with nogil:
        for i in range(n):
            qi = qv[i]
            sr = 0.0
            si = 0.0
            for s in range(ns):
                x = qi * h[s]
                if times_q:
                    amp = 2.0 * w[s] * sin(x)
                elif fabs(x) < 1e-6:
                    x2 = x * x
                    amp = 2.0 * h[s] * w[s] * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
                else:
                    amp = 2.0 * h[s] * w[s] * sin(x) / x
                ph = qi * c[s]
                sr += amp * cos(ph)
                si -= amp * sin(ph)
            re[i] = sr
            im[i] = si
    return re_arr, im_arr


def multilayer_bracket_sq(u, int n_lay, double rho1, double rho2):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uv.shape[0], i
    cdef int k, m1 = n_lay + 1
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double v, g, s1, s2, c2, sk, skm1, tmp
    with nogil:
        for i in range(n):
            v = 0.5 * uv[i]
            # sin((2k+1) v) = 2 cos(2v) sin((2k-1) v) - sin((2k-3) v)
            c2 = 2.0 * cos(2.0 * v)
            sk = sin(v)
            skm1 = -sk
            g = 0.0
            for k in range(1, m1 + 1):
                s1 = 1.0 if (m1 - k) % 2 == 0 else -1.0
                if k <= n_lay:
                    s2 = 1.0 if (n_lay - k) % 2 == 0 else -1.0
                else:
                    s2 = 0.0
                g += (rho1 * s1 + rho2 * s2) * sk
                tmp = c2 * sk - skm1
                skm1 = sk
                sk = tmp
            g *= 2.0
            out[i] = g * g
    return out_arr


cdef inline double _ndtr(double x) nogil:
    return 0.5 * erfc(-x / sqrt(2.0))


cdef inline double _x1(double t, double mu) nogil:
    if mu <= 0.0:
        return -INFINITY
    if t <= mu:
        return mu - t
    return 0.5 * (mu * mu - t * t) / mu


def fc_acceptance(mu, double cl, double tol=1e-12):
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t n = mv.shape[0], i
    lo_arr = np.empty(n)
    hi_arr = np.empty(n)
    cdef double[::1] xlo = lo_arr
    cdef double[::1] xhi = hi_arr
    cdef double a, b, mid, m, cov
    with nogil:
        for i in range(n):
            m = mv[i]
            a = 0.0
            b = 40.0
            while b - a > tol:
                mid = 0.5 * (a + b)
                cov = _ndtr(mid) - _ndtr(_x1(mid, m) - m)
                if cov < cl:
                    a = mid
                else:
                    b = mid
            mid = 0.5 * (a + b)
            xlo[i] = _x1(mid, m)
            xhi[i] = m + mid
    return lo_arr, hi_arr
