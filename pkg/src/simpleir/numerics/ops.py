"""Differentiable primitives over NCHW tensors.

Every operation validates its contract, computes the forward value with
float64 numpy, checks the result for NaN/Inf, and (when a
:class:`~simpleir.numerics.tensor.DiffGraph` is active) records a node
whose closure produces the exact vector-Jacobian products used by
:func:`~simpleir.numerics.tensor.backward`.

Convolution padding convention: ``"same"`` reflect-pads so stride-1
convolutions preserve the spatial extent; ``"valid"`` applies no padding.
"""

from __future__ import annotations

from typing import Literal, Sequence

import numpy as np
from scipy import special as _sp

from ..errors import ConfigurationError, ContractError, DimensionError, NumericError
from . import kernels
from .tensor import ComplexTensor, Tensor, record

__all__ = [
    "conv2d", "layer_norm", "activation", "relu", "gelu", "sigmoid",
    "global_avg_pool", "fully_connected", "pixel_shuffle", "pixel_unshuffle",
    "fft2", "ifft2", "complex_l1", "l1_sum",
    "add", "sub", "mul", "scale", "concat_channels", "split_channels",
    "channel_slice", "reflect_pad", "crop",
]

PaddingSpec = Literal["same", "valid"]


def _check_tensor(t, name: str) -> Tensor:
    if not isinstance(t, Tensor):
        raise ContractError(f"{name} must be a Tensor, got {type(t).__name__}")
    return t


def _emit(name: str, arr: np.ndarray) -> Tensor:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"operation '{name}' produced NaN or Inf")
    return Tensor._wrap(np.ascontiguousarray(arr))


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    axes = tuple(i for i in range(4) if shape[i] == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise / structural


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_tensor(a, "a"), _check_tensor(b, "b")
    out = _emit("add", a.data + b.data)

    def vjp(gy):
        return _reduce_to(gy, a.data.shape), _reduce_to(gy, b.data.shape)

    record("add", out, (a, b), vjp, lambda: a.data + b.data)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_tensor(a, "a"), _check_tensor(b, "b")
    out = _emit("sub", a.data - b.data)

    def vjp(gy):
        return _reduce_to(gy, a.data.shape), _reduce_to(-gy, b.data.shape)

    record("sub", out, (a, b), vjp, lambda: a.data - b.data)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product with numpy broadcasting."""
    _check_tensor(a, "a"), _check_tensor(b, "b")
    out = _emit("mul", a.data * b.data)

    def vjp(gy):
        return _reduce_to(gy * b.data, a.data.shape), _reduce_to(gy * a.data, b.data.shape)

    record("mul", out, (a, b), vjp, lambda: a.data * b.data)
    return out


def scale(x: Tensor, s: float) -> Tensor:
    _check_tensor(x, "x")
    s = float(s)
    out = _emit("scale", x.data * s)
    record("scale", out, (x,), lambda gy: (gy * s,), lambda: x.data * s)
    return out


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractError("concat_channels needs at least one tensor")
    for p in parts:
        _check_tensor(p, "part")
    sizes = [p.shape.c for p in parts]
    out = _emit("concat", np.concatenate([p.data for p in parts], axis=1))

    def vjp(gy):
        grads, at = [], 0
        for s in sizes:
            grads.append(np.ascontiguousarray(gy[:, at:at + s]))
            at += s
        return tuple(grads)

    record("concat", out, tuple(parts), vjp,
           lambda: np.concatenate([p.data for p in parts], axis=1))
    return out


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    _check_tensor(x, "x")
    if not (0 <= start < stop <= x.shape.c):
        raise DimensionError(f"channel slice [{start}:{stop}] outside 0..{x.shape.c}")
    out = _emit("channel_slice", x.data[:, start:stop])

    def vjp(gy):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = gy
        return (gx,)

    record("channel_slice", out, (x,), vjp, lambda: np.ascontiguousarray(x.data[:, start:stop]))
    return out


def split_channels(x: Tensor, sizes: Sequence[int]) -> tuple[Tensor, ...]:
    if sum(sizes) != x.shape.c:
        raise DimensionError(f"split sizes {list(sizes)} do not sum to {x.shape.c} channels")
    parts, at = [], 0
    for s in sizes:
        parts.append(channel_slice(x, at, at + s))
        at += s
    return tuple(parts)


# ---------------------------------------------------------------------------
# padding / cropping


def _pad_ok(dim: int, pad: int, axis: str) -> None:
    if pad >= dim and pad > 0:
        raise DimensionError(f"reflect pad {pad} needs {axis} > {pad}, have {dim}")


def _reflect(arr: np.ndarray, pt: int, pb: int, pl: int, pr: int) -> np.ndarray:
    return np.pad(arr, ((0, 0), (0, 0), (pt, pb), (pl, pr)), mode="reflect")


def _fold_axis(g: np.ndarray, lo: int, hi: int, axis: int) -> np.ndarray:
    """Adjoint of single-axis reflect padding: scatter pad rows back."""
    length = g.shape[axis] - lo - hi
    sl: list = [slice(None)] * 4
    sl[axis] = slice(lo, lo + length)
    core = np.ascontiguousarray(g[tuple(sl)])
    if lo:
        sl[axis] = slice(0, lo)
        left = np.flip(g[tuple(sl)], axis=axis)
        csl: list = [slice(None)] * 4
        csl[axis] = slice(1, lo + 1)
        core[tuple(csl)] += left
    if hi:
        sl[axis] = slice(lo + length, lo + length + hi)
        right = np.flip(g[tuple(sl)], axis=axis)
        csl = [slice(None)] * 4
        csl[axis] = slice(length - 1 - hi, length - 1)
        core[tuple(csl)] += right
    return core


def _fold(g: np.ndarray, pt: int, pb: int, pl: int, pr: int) -> np.ndarray:
    if pt or pb:
        g = _fold_axis(g, pt, pb, axis=2)
    if pl or pr:
        g = _fold_axis(g, pl, pr, axis=3)
    return g


def reflect_pad(x: Tensor, pads: tuple[int, int, int, int]) -> Tensor:
    """Reflect-pad spatial axes by (top, bottom, left, right)."""
    _check_tensor(x, "x")
    pt, pb, pl, pr = (int(p) for p in pads)
    if min(pt, pb, pl, pr) < 0:
        raise ConfigurationError(f"pad amounts must be non-negative, got {pads}")
    _, _, h, w = x.data.shape
    _pad_ok(h, max(pt, pb), "height")
    _pad_ok(w, max(pl, pr), "width")
    out = _emit("reflect_pad", _reflect(x.data, pt, pb, pl, pr))
    record("reflect_pad", out, (x,), lambda gy: (_fold(gy, pt, pb, pl, pr),),
           lambda: _reflect(x.data, pt, pb, pl, pr))
    return out


def crop(x: Tensor, top: int, left: int, h: int, w: int) -> Tensor:
    _check_tensor(x, "x")
    _, _, xh, xw = x.data.shape
    if top < 0 or left < 0 or top + h > xh or left + w > xw:
        raise DimensionError(f"crop [{top}:{top + h}, {left}:{left + w}] outside {xh}x{xw}")
    out = _emit("crop", x.data[:, :, top:top + h, left:left + w])

    def vjp(gy):
        gx = np.zeros_like(x.data)
        gx[:, :, top:top + h, left:left + w] = gy
        return (gx,)

    record("crop", out, (x,), vjp,
           lambda: np.ascontiguousarray(x.data[:, :, top:top + h, left:left + w]))
    return out


# ---------------------------------------------------------------------------
# convolution


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, *,
           stride: int = 1, padding: PaddingSpec = "same", groups: int = 1) -> Tensor:
    """2-D cross-correlation over NCHW input.

    ``weight`` is (out_channels, in_channels // groups, kh, kw); grouped
    channels are consecutive, so ``groups == in_channels`` is a depth-wise
    convolution.  ``"same"`` reflect-pads odd kernels at stride 1.
    """
    _check_tensor(x, "x"), _check_tensor(weight, "weight")
    n, cin, h, w = x.data.shape
    cout, cig, kh, kw = weight.data.shape
    if groups < 1 or cin % groups != 0:
        raise ConfigurationError(f"groups={groups} does not divide in-channels {cin}")
    if cout % groups != 0:
        raise ConfigurationError(f"groups={groups} does not divide out-channels {cout}")
    if cig != cin // groups:
        raise DimensionError(
            f"weight in-channel axis is {cig}, expected {cin // groups} "
            f"(in-channels {cin} / groups {groups})")
    if bias is not None:
        _check_tensor(bias, "bias")
        if bias.data.shape != (1, cout, 1, 1):
            raise DimensionError(f"bias must have shape (1, {cout}, 1, 1), got {bias.shape}")
    if padding == "same":
        if stride != 1:
            raise ConfigurationError("same padding requires stride 1")
        if kh % 2 == 0 or kw % 2 == 0:
            raise ConfigurationError(f"same padding requires odd kernels, got {kh}x{kw}")
        pt = pb = (kh - 1) // 2
        pl = pr = (kw - 1) // 2
    elif padding == "valid":
        pt = pb = pl = pr = 0
    else:
        raise ConfigurationError(f"unknown padding spec {padding!r}")
    _pad_ok(h, pt, "height")
    _pad_ok(w, pl, "width")
    if kh > h + pt + pb:
        raise DimensionError(f"kernel height {kh} exceeds padded input height {h + pt + pb}")
    if kw > w + pl + pr:
        raise DimensionError(f"kernel width {kw} exceeds padded input width {w + pl + pr}")

    xp = _reflect(x.data, pt, pb, pl, pr) if (pt or pl) else x.data
    hp, wp = xp.shape[2], xp.shape[3]
    raw = kernels.conv_forward(xp, weight.data, stride, groups)
    arr = raw + bias.data if bias is not None else raw
    out = _emit("conv2d", arr)

    def vjp(gy):
        gy = np.ascontiguousarray(gy)
        dw = kernels.conv_grad_weight(xp, gy, kh, kw, stride, groups)
        dxp = kernels.conv_grad_input(gy, weight.data, hp, wp, stride, groups)
        dx = _fold(dxp, pt, pb, pl, pr) if (pt or pl) else dxp
        if bias is None:
            return dx, dw
        return dx, dw, gy.sum(axis=(0, 2, 3)).reshape(1, cout, 1, 1)

    def fwd():
        xq = _reflect(x.data, pt, pb, pl, pr) if (pt or pl) else x.data
        r = kernels.conv_forward(xq, weight.data, stride, groups)
        return r + bias.data if bias is not None else r

    inputs = (x, weight) if bias is None else (x, weight, bias)
    record("conv2d", out, inputs, vjp, fwd)
    return out


# ---------------------------------------------------------------------------
# normalization / activations


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize across the channel axis at each spatial position."""
    _check_tensor(x, "x"), _check_tensor(gamma, "gamma"), _check_tensor(beta, "beta")
    c = x.shape.c
    if c == 0:
        raise ConfigurationError("layer_norm over a zero-length channel axis")
    for name, t in (("gamma", gamma), ("beta", beta)):
        if t.data.shape != (1, c, 1, 1):
            raise DimensionError(f"{name} must have shape (1, {c}, 1, 1), got {t.shape}")
    eps = float(eps)

    def compute():
        mu = x.data.mean(axis=1, keepdims=True)
        xc = x.data - mu
        var = (xc * xc).mean(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
        return xhat, inv, gamma.data * xhat + beta.data

    xhat, inv, y = compute()
    out = _emit("layer_norm", y)

    def vjp(gy):
        dgamma = (gy * xhat).sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
        dbeta = gy.sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
        dxhat = gy * gamma.data
        m1 = dxhat.mean(axis=1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgamma, dbeta

    record("layer_norm", out, (x, gamma, beta), vjp, lambda: compute()[2])
    return out


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def activation(kind: str, x: Tensor) -> Tensor:
    """Elementwise nonlinearity: ``relu``, ``gelu`` (exact erf form), or ``sigmoid``."""
    _check_tensor(x, "x")
    a = x.data
    if kind == "relu":
        y = np.maximum(a, 0.0)
        grad_local = lambda: (a > 0.0).astype(np.float64)
    elif kind == "gelu":
        phi_cdf = 0.5 * (1.0 + _sp.erf(a / _SQRT2))
        y = a * phi_cdf
        grad_local = lambda: phi_cdf + a * _INV_SQRT_2PI * np.exp(-0.5 * a * a)
    elif kind == "sigmoid":
        y = _sp.expit(a)
        grad_local = lambda: y * (1.0 - y)
    else:
        raise ConfigurationError(f"unknown activation {kind!r}")
    out = _emit(kind, y)
    record(kind, out, (x,), lambda gy: (gy * grad_local(),), lambda: activation_value(kind, a))
    return out


def activation_value(kind: str, a: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "gelu":
        return a * 0.5 * (1.0 + _sp.erf(a / _SQRT2))
    return _sp.expit(a)


def relu(x: Tensor) -> Tensor:
    return activation("relu", x)


def gelu(x: Tensor) -> Tensor:
    return activation("gelu", x)


def sigmoid(x: Tensor) -> Tensor:
    return activation("sigmoid", x)


# ---------------------------------------------------------------------------
# pooling / fully connected


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel; output is (n, c, 1, 1)."""
    _check_tensor(x, "x")
    n, c, h, w = x.data.shape
    if h * w == 0:
        raise DimensionError("global_avg_pool over an empty spatial extent")
    out = _emit("gap", x.data.mean(axis=(2, 3), keepdims=True))
    k = 1.0 / (h * w)
    record("gap", out, (x,),
           lambda gy: (np.broadcast_to(gy * k, x.data.shape).copy(),),
           lambda: x.data.mean(axis=(2, 3), keepdims=True))
    return out


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map on channel descriptors: (n, c_in, 1, 1) -> (n, c_out, 1, 1)."""
    _check_tensor(x, "x"), _check_tensor(weight, "weight")
    n, cin, h, w = x.data.shape
    if (h, w) != (1, 1):
        raise DimensionError(f"fully_connected input must be (n, c, 1, 1), got {x.shape}")
    cout, wc, wh, ww = weight.data.shape
    if (wc, wh, ww) != (cin, 1, 1):
        raise DimensionError(f"weight must have shape ({cout}, {cin}, 1, 1), got {weight.shape}")
    if bias is not None:
        _check_tensor(bias, "bias")
        if bias.data.shape != (1, cout, 1, 1):
            raise DimensionError(f"bias must have shape (1, {cout}, 1, 1), got {bias.shape}")

    w2 = weight.data.reshape(cout, cin)
    x2 = x.data.reshape(n, cin)

    def compute():
        y = x2 @ w2.T
        if bias is not None:
            y = y + bias.data.reshape(1, cout)
        return y.reshape(n, cout, 1, 1)

    out = _emit("fully_connected", compute())

    def vjp(gy):
        g2 = gy.reshape(n, cout)
        dx = (g2 @ w2).reshape(n, cin, 1, 1)
        dw = (g2.T @ x2).reshape(cout, cin, 1, 1)
        if bias is None:
            return dx, dw
        return dx, dw, g2.sum(axis=0).reshape(1, cout, 1, 1)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    record("fully_connected", out, inputs, vjp, compute)
    return out


# ---------------------------------------------------------------------------
# pixel shuffle


def _shuffle(arr: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = arr.shape
    co = c // (r * r)
    t = arr.reshape(n, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(t.reshape(n, co, h * r, w * r))


def _unshuffle(arr: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = arr.shape
    t = arr.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(t.reshape(n, c * r * r, h // r, w // r))


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space: (n, c*r*r, h, w) -> (n, c, h*r, w*r)."""
    _check_tensor(x, "x")
    r = int(r)
    if r < 1:
        raise ConfigurationError(f"shuffle factor must be >= 1, got {r}")
    if x.shape.c % (r * r) != 0:
        raise DimensionError(f"channels {x.shape.c} not divisible by r^2 = {r * r}")
    out = _emit("pixel_shuffle", _shuffle(x.data, r))
    record("pixel_shuffle", out, (x,), lambda gy: (_unshuffle(gy, r),),
           lambda: _shuffle(x.data, r))
    return out


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Space-to-depth: (n, c, h*r, w*r) -> (n, c*r*r, h, w)."""
    _check_tensor(x, "x")
    r = int(r)
    if r < 1:
        raise ConfigurationError(f"shuffle factor must be >= 1, got {r}")
    if x.shape.h % r != 0 or x.shape.w % r != 0:
        raise DimensionError(f"spatial dims {x.shape.h}x{x.shape.w} not divisible by r = {r}")
    out = _emit("pixel_unshuffle", _unshuffle(x.data, r))
    record("pixel_unshuffle", out, (x,), lambda gy: (_shuffle(gy, r),),
           lambda: _unshuffle(x.data, r))
    return out


# ---------------------------------------------------------------------------
# frequency domain


def fft2(x: Tensor) -> ComplexTensor:
    """Unnormalized forward 2-D DFT per channel."""
    _check_tensor(x, "x")
    n, c, h, w = x.data.shape
    if h < 1 or w < 1:
        raise DimensionError("fft2 needs a non-empty spatial extent")
    spec = np.fft.fft2(x.data, axes=(2, 3))
    out = ComplexTensor._wrap(np.ascontiguousarray(spec))
    hw = float(h * w)
    record("fft2", out, (x,),
           lambda gc: ((np.fft.ifft2(gc, axes=(2, 3)) * hw).real,),
           lambda: np.fft.fft2(x.data, axes=(2, 3)))
    return out


def ifft2(spec: ComplexTensor) -> Tensor:
    """(1 / hw)-normalized inverse of :func:`fft2`; diagnostic, not recorded."""
    if not isinstance(spec, ComplexTensor):
        raise ContractError("ifft2 expects a ComplexTensor")
    return _emit("ifft2", np.fft.ifft2(spec.data, axes=(2, 3)).real)


def complex_l1(a: ComplexTensor, b: ComplexTensor) -> Tensor:
    """Sum of |Re(a - b)| + |Im(a - b)| over every bin; scalar tensor."""
    for name, t in (("a", a), ("b", b)):
        if not isinstance(t, ComplexTensor):
            raise ContractError(f"{name} must be a ComplexTensor")
    if a.data.shape != b.data.shape:
        raise DimensionError(f"complex_l1 shape mismatch: {a.shape} vs {b.shape}")
    d = a.data - b.data
    val = np.abs(d.real).sum() + np.abs(d.imag).sum()
    out = _emit("complex_l1", np.full((1, 1, 1, 1), val))

    def vjp(gy):
        g = float(gy.reshape(()))
        ga = g * (np.sign(d.real) + 1j * np.sign(d.imag))
        return ga, -ga

    record("complex_l1", out, (a, b), vjp,
           lambda: np.full((1, 1, 1, 1),
                           np.abs((a.data - b.data).real).sum()
                           + np.abs((a.data - b.data).imag).sum()))
    return out


def l1_sum(a: Tensor, b: Tensor) -> Tensor:
    """Sum of absolute differences; subgradient uses sign(0) = 0."""
    _check_tensor(a, "a"), _check_tensor(b, "b")
    if a.data.shape != b.data.shape:
        raise DimensionError(f"l1_sum shape mismatch: {a.shape} vs {b.shape}")
    d = a.data - b.data
    out = _emit("l1_sum", np.full((1, 1, 1, 1), np.abs(d).sum()))

    def vjp(gy):
        g = float(gy.reshape(())) * np.sign(d)
        return g, -g

    record("l1_sum", out, (a, b), vjp,
           lambda: np.full((1, 1, 1, 1), np.abs(a.data - b.data).sum()))
    return out
