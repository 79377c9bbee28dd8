"""Pure-numpy convolution kernels (im2col + einsum).

Fallback backend for :mod:`simpleir.numerics.kernels`.  All functions see
pre-padded inputs; padding and its gradient live with the caller so both
backends share them.  Weight layout is (out_channels,
in_channels_per_group, kh, kw); grouped channels are consecutive.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (n, c, Ho, Wo, kh, kw) view of every kernel-sized patch
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    if stride != 1:
        win = win[:, :, ::stride, ::stride]
    return win


def conv_forward(xp: np.ndarray, w: np.ndarray, stride: int, groups: int) -> np.ndarray:
    n, cin, hp, wp = xp.shape
    cout, cig, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    win = _windows(xp, kh, kw, stride)
    win_g = win.reshape(n, groups, cig, ho, wo, kh, kw)
    w_g = w.reshape(groups, cout // groups, cig, kh, kw)
    out = np.einsum("ngihwuv,goiuv->ngohw", win_g, w_g, optimize=True)
    return np.ascontiguousarray(out.reshape(n, cout, ho, wo))


def conv_grad_weight(xp: np.ndarray, gy: np.ndarray, kh: int, kw: int,
                     stride: int, groups: int) -> np.ndarray:
    n, cin, hp, wp = xp.shape
    _, cout, ho, wo = gy.shape
    cig = cin // groups
    win = _windows(xp, kh, kw, stride)
    win_g = win.reshape(n, groups, cig, ho, wo, kh, kw)
    gy_g = gy.reshape(n, groups, cout // groups, ho, wo)
    dw = np.einsum("ngohw,ngihwuv->goiuv", gy_g, win_g, optimize=True)
    return np.ascontiguousarray(dw.reshape(cout, cig, kh, kw))


def conv_grad_input(gy: np.ndarray, w: np.ndarray, hp: int, wp: int,
                    stride: int, groups: int) -> np.ndarray:
    n, cout, ho, wo = gy.shape
    _, cig, kh, kw = w.shape
    cin = cig * groups
    gy_g = gy.reshape(n, groups, cout // groups, ho, wo)
    w_g = w.reshape(groups, cout // groups, cig, kh, kw)
    dxp = np.zeros((n, groups, cig, hp, wp))
    for u in range(kh):
        for v in range(kw):
            patch = np.einsum("ngohw,goi->ngihw", gy_g, w_g[:, :, :, u, v], optimize=True)
            dxp[:, :, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += patch
    return dxp.reshape(n, cin, hp, wp)
