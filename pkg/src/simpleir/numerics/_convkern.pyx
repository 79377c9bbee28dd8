# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels: direct cross-correlation loops.

Same contracts as the numpy backend in ``_conv_np.py``; inputs arrive
pre-padded and C-contiguous, weights are (cout, cin_per_group, kh, kw).
"""

import numpy as np


def conv_forward(double[:, :, :, ::1] xp, double[:, :, :, ::1] w,
                 Py_ssize_t stride, Py_ssize_t groups):
    cdef Py_ssize_t n = xp.shape[0], cin = xp.shape[1]
    cdef Py_ssize_t hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t cout = w.shape[0], cig = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (hp - kh) // stride + 1
    cdef Py_ssize_t wo = (wp - kw) // stride + 1
    cdef Py_ssize_t cog = cout // groups

    out_arr = np.zeros((n, cout, ho, wo))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, g, oc, ic, i, j, u, v, co, ci
    cdef double acc

    with nogil:
        for b in range(n):
            for g in range(groups):
                for oc in range(cog):
                    co = g * cog + oc
                    for i in range(ho):
                        for j in range(wo):
                            acc = 0.0
                            for ic in range(cig):
                                ci = g * cig + ic
                                for u in range(kh):
                                    for v in range(kw):
                                        acc += xp[b, ci, i * stride + u, j * stride + v] * w[co, ic, u, v]
                            out[b, co, i, j] = acc
    return out_arr


def conv_grad_weight(double[:, :, :, ::1] xp, double[:, :, :, ::1] gy,
                     Py_ssize_t kh, Py_ssize_t kw,
                     Py_ssize_t stride, Py_ssize_t groups):
    cdef Py_ssize_t n = xp.shape[0], cin = xp.shape[1]
    cdef Py_ssize_t cout = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t cig = cin // groups
    cdef Py_ssize_t cog = cout // groups

    dw_arr = np.zeros((cout, cig, kh, kw))
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t b, g, oc, ic, i, j, u, v, co, ci
    cdef double acc

    with nogil:
        for g in range(groups):
            for oc in range(cog):
                co = g * cog + oc
                for ic in range(cig):
                    ci = g * cig + ic
                    for u in range(kh):
                        for v in range(kw):
                            acc = 0.0
                            for b in range(n):
                                for i in range(ho):
                                    for j in range(wo):
                                        acc += gy[b, co, i, j] * xp[b, ci, i * stride + u, j * stride + v]
                            dw[co, ic, u, v] = acc
    return dw_arr


def conv_grad_input(double[:, :, :, ::1] gy, double[:, :, :, ::1] w,
                    Py_ssize_t hp, Py_ssize_t wp,
                    Py_ssize_t stride, Py_ssize_t groups):
    cdef Py_ssize_t n = gy.shape[0], cout = gy.shape[1]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t cig = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t cin = cig * groups
    cdef Py_ssize_t cog = cout // groups

    dx_arr = np.zeros((n, cin, hp, wp))
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, g, oc, ic, i, j, u, v, co, ci
    cdef double gval

    with nogil:
        for b in range(n):
            for g in range(groups):
                for oc in range(cog):
                    co = g * cog + oc
                    for i in range(ho):
                        for j in range(wo):
                            gval = gy[b, co, i, j]
                            for ic in range(cig):
                                ci = g * cig + ic
                                for u in range(kh):
                                    for v in range(kw):
                                        dx[b, ci, i * stride + u, j * stride + v] += gval * w[co, ic, u, v]
    return dx_arr
