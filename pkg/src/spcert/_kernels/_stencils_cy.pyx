# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels; same contract as _stencils_np (the reference)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow, sqrt


cdef inline double _modpow(double m2, double half_pm2, bint quarter) nogil:
    # p = 3/2 gives exponent -1/4: two square roots beat libm pow
    if quarter:
        return 1.0 / sqrt(sqrt(m2))
    return pow(m2, half_pm2)


def flux_arrays_1d(double[::1] wpad, double h, double p, double eps2):
    cdef Py_ssize_t n = wpad.shape[0] - 2
    cdef Py_ssize_t f, i
    cdef double g, m2, half_pm2 = 0.5 * (p - 2.0)
    cdef bint quarter = half_pm2 == -0.25

    div_arr = np.empty(n, dtype=np.float64)
    D_arr = np.empty(n + 1, dtype=np.float64)
    G_arr = np.empty(n + 1, dtype=np.float64)
    M2_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] div = div_arr
    cdef double[::1] D = D_arr
    cdef double[::1] G = G_arr
    cdef double[::1] M2 = M2_arr

    for f in range(n + 1):
        g = (wpad[f + 1] - wpad[f]) / h
        m2 = g * g + eps2
        G[f] = g
        M2[f] = m2
        D[f] = _modpow(m2, half_pm2, quarter)
    for i in range(n):
        div[i] = (D[i + 1] * G[i + 1] - D[i] * G[i]) / h
    return div_arr, D_arr, G_arr, M2_arr


def flux_arrays_2d(double[:, ::1] wpad, double h, double p, double eps2):
    cdef Py_ssize_t n0 = wpad.shape[0] - 2
    cdef Py_ssize_t n1 = wpad.shape[1] - 2
    cdef Py_ssize_t i, j
    cdef double g, t, m2, d, half_pm2 = 0.5 * (p - 2.0)
    cdef bint quarter = half_pm2 == -0.25

    div_arr = np.empty((n0, n1), dtype=np.float64)
    Dx_arr = np.empty((n0 + 1, n1), dtype=np.float64)
    Gx_arr = np.empty((n0 + 1, n1), dtype=np.float64)
    M2x_arr = np.empty((n0 + 1, n1), dtype=np.float64)
    Dy_arr = np.empty((n0, n1 + 1), dtype=np.float64)
    Gy_arr = np.empty((n0, n1 + 1), dtype=np.float64)
    M2y_arr = np.empty((n0, n1 + 1), dtype=np.float64)
    cdef double[:, ::1] div = div_arr
    cdef double[:, ::1] Dx = Dx_arr, Gx = Gx_arr, M2x = M2x_arr
    cdef double[:, ::1] Dy = Dy_arr, Gy = Gy_arr, M2y = M2y_arr

    for i in range(n0 + 1):
        for j in range(n1):
            g = (wpad[i + 1, j + 1] - wpad[i, j + 1]) / h
            t = (wpad[i, j + 2] - wpad[i, j] + wpad[i + 1, j + 2] - wpad[i + 1, j]) / (4.0 * h)
            m2 = g * g + t * t + eps2
            Gx[i, j] = g
            M2x[i, j] = m2
            Dx[i, j] = _modpow(m2, half_pm2, quarter)
    for i in range(n0):
        for j in range(n1 + 1):
            g = (wpad[i + 1, j + 1] - wpad[i + 1, j]) / h
            t = (wpad[i + 2, j] - wpad[i, j] + wpad[i + 2, j + 1] - wpad[i, j + 1]) / (4.0 * h)
            m2 = g * g + t * t + eps2
            Gy[i, j] = g
            M2y[i, j] = m2
            Dy[i, j] = _modpow(m2, half_pm2, quarter)
    for i in range(n0):
        for j in range(n1):
            div[i, j] = (Dx[i + 1, j] * Gx[i + 1, j] - Dx[i, j] * Gx[i, j]) / h \
                + (Dy[i, j + 1] * Gy[i, j + 1] - Dy[i, j] * Gy[i, j]) / h
    return div_arr, Dx_arr, Gx_arr, M2x_arr, Dy_arr, Gy_arr, M2y_arr
