# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see py_backend.py for contracts)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, isfinite

cnp.import_array()

BACKEND = "cython"


def bilinear_sample(image, xs, ys):
    image = np.ascontiguousarray(image, dtype=np.float64)
    xs = np.ascontiguousarray(np.asarray(xs, dtype=np.float64).ravel())
    ys = np.ascontiguousarray(np.asarray(ys, dtype=np.float64).ravel())

    cdef double[:, :, ::1] img = image
    cdef double[::1] x_arr = xs
    cdef double[::1] y_arr = ys
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t c = img.shape[2]
    cdef Py_ssize_t n = x_arr.shape[0]

    out_np = np.zeros((n, c), dtype=np.float64)
    valid_np = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] out = out_np
    cdef cnp.uint8_t[::1] valid = valid_np

    cdef Py_ssize_t i, ch, x0, y0
    cdef double x, y, fx, fy, w00, w01, w10, w11
    with nogil:
        for i in range(n):
            x = x_arr[i]
            y = y_arr[i]
            if not (isfinite(x) and isfinite(y)):
                continue
            if x < 0.0 or x > w - 1.0 or y < 0.0 or y > h - 1.0:
                continue
            valid[i] = 1
            x0 = <Py_ssize_t>floor(x)
            y0 = <Py_ssize_t>floor(y)
            if x0 > w - 2:
                x0 = w - 2
            if y0 > h - 2:
                y0 = h - 2
            if x0 < 0:
                x0 = 0
            if y0 < 0:
                y0 = 0
            fx = x - x0
            fy = y - y0
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            for ch in range(c):
                out[i, ch] = (
                    w00 * img[y0, x0, ch]
                    + w01 * img[y0, x0 + 1, ch]
                    + w10 * img[y0 + 1, x0, ch]
                    + w11 * img[y0 + 1, x0 + 1, ch]
                )
    return out_np, valid_np.astype(bool)


def covariance_chain(phis, qds, p0):
    phis = np.ascontiguousarray(phis, dtype=np.float64)
    qds = np.ascontiguousarray(qds, dtype=np.float64)

    cdef double[:, :, ::1] phi = phis
    cdef double[:, :, ::1] qd = qds
    cdef Py_ssize_t t = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]

    out_np = np.empty((t + 1, n, n), dtype=np.float64)
    out_np[0] = p0
    cdef double[:, :, ::1] out = out_np

    tmp_np = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_np

    cdef Py_ssize_t k, i, j, l
    cdef double acc
    with nogil:
        for k in range(t):
            # tmp = Phi_k @ P_k
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += phi[k, i, l] * out[k, l, j]
                    tmp[i, j] = acc
            # P_{k+1} = tmp @ Phi_k^T + Qd_k
            for i in range(n):
                for j in range(n):
                    acc = qd[k, i, j]
                    for l in range(n):
                        acc += tmp[i, l] * phi[k, j, l]
                    out[k + 1, i, j] = acc
            # re-symmetrize
            for i in range(n):
                for j in range(i + 1, n):
                    acc = 0.5 * (out[k + 1, i, j] + out[k + 1, j, i])
                    out[k + 1, i, j] = acc
                    out[k + 1, j, i] = acc
    return out_np
