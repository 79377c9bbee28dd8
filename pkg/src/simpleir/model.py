"""The SimpleIR restoration network.

The network restores a degraded RGB image at its original resolution.  A
space-to-depth head produces shallow features at 1/4 scale, a chain of
feature interaction blocks (FIBs) refines them, and a depth-to-space tail
projects the sum of deep and shallow features back to pixels.

Each FIB is a hybrid attention block followed by a feed-forward branch,
both with residual connections.  The hybrid attention block runs two
streams over the same normalized features: dual-stream attention (DSA),
which gates a query stream by squeeze-derived channel weights and
modulates a key stream with it, and a local detail aggregation module
(LDAM), which splits channels four ways into square-kernel, horizontal
band, vertical band, and identity branches.  A 1x1 convolution merges the
concatenated streams.

All forward functions are pure compositions of :mod:`simpleir.numerics`
ops, so they record onto any active DiffGraph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import ConfigurationError, ContractError, DimensionError
from .numerics import (
    Tensor,
    add,
    concat_channels,
    conv2d,
    crop,
    fully_connected,
    gelu,
    global_avg_pool,
    layer_norm,
    mul,
    pixel_shuffle,
    pixel_unshuffle,
    reflect_pad,
    relu,
    sigmoid,
    split_channels,
)

__all__ = [
    "ModelConfig", "ParameterSet", "DsaIntermediates", "LdamIntermediates",
    "NetworkTrace", "TINY_PRESET", "DESK_PRESET", "FULL_PRESET",
    "parameter_shapes", "param_count", "init_params",
    "dsa_forward", "ldam_forward", "ffn_forward", "hab_forward",
    "fib_forward", "simpleir_forward", "restore_image", "pad_to_multiple",
]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``base_channels`` is the working feature width; it must divide into
    the four LDAM branches and the squeeze bottleneck.  ``square_kernel``
    and ``band_kernel``  are the LDAM kernel extents (both odd).
    ``down_factor`` is the space-to-depth factor and is fixed at 4.
    """

    base_channels: int = 16
    num_fibs: int = 4
    square_kernel: int = 3
    band_kernel: int = 11
    reduction_ratio: int = 4
    down_factor: int = 4

    def __post_init__(self):
        c = self.base_channels
        if c < 4 or c % 4 != 0:
            raise ConfigurationError(f"base_channels must be a positive multiple of 4, got {c}")
        if self.num_fibs < 0:
            raise ConfigurationError(f"num_fibs must be >= 0, got {self.num_fibs}")
        for name in ("square_kernel", "band_kernel"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ConfigurationError(f"{name} must be odd and >= 1, got {k}")
        r = self.reduction_ratio
        if r < 1 or c % r != 0:
            raise ConfigurationError(
                f"reduction_ratio must be >= 1 and divide base_channels, got {r} for {c}")
        if self.down_factor != 4:
            raise ConfigurationError(f"down_factor is fixed at 4, got {self.down_factor}")

    @property
    def image_channels(self) -> int:
        return 3

    @property
    def shuffle_channels(self) -> int:
        """Channel count right after space-to-depth: 3 * down_factor^2."""
        return self.image_channels * self.down_factor * self.down_factor


TINY_PRESET = ModelConfig(base_channels=8, num_fibs=2, band_kernel=5)
DESK_PRESET = ModelConfig()
FULL_PRESET = ModelConfig(base_channels=128, num_fibs=17)


class ParameterSet:
    """Ordered, named learnable tensors.

    Iteration order is the declaration order of :func:`parameter_shapes`
    and is the contract for serialization and optimizer state.  The set
    is treated as read-only during forward passes; the optimizer is the
    single writer and updates buffers in place between graphs.
    """

    def __init__(self, entries: Mapping[str, Tensor]):
        self._entries: dict[str, Tensor] = dict(entries)
        for name, t in self._entries.items():
            if not isinstance(t, Tensor):
                raise ContractError(f"parameter {name!r} is not a Tensor")

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._entries[name]
        except KeyError:
            raise ContractError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._entries.items())

    def tensors(self) -> list[Tensor]:
        return list(self._entries.values())

    def scope(self, prefix: str) -> dict[str, Tensor]:
        """Sub-view with ``prefix.`` stripped from matching names."""
        head = prefix + "."
        out = {n[len(head):]: t for n, t in self._entries.items() if n.startswith(head)}
        if not out:
            raise ContractError(f"no parameters under scope {prefix!r}")
        return out

    def total_size(self) -> int:
        return sum(t.size for t in self._entries.values())

    def copy(self) -> "ParameterSet":
        return ParameterSet({n: t.copy() for n, t in self._entries.items()})


@dataclass
class DsaIntermediates:
    """Probe sink for the attention stream; filled by :func:`dsa_forward`."""

    query: Tensor | None = None        # depth-wise projected query stream
    key: Tensor | None = None          # depth-wise projected key stream
    pooled: Tensor | None = None       # per-channel spatial mean of the query
    attention: Tensor | None = None    # sigmoid channel weights, in (0, 1)
    modulated: Tensor | None = None    # attention * query
    out: Tensor | None = None


@dataclass
class LdamIntermediates:
    """Probe sink for the four-branch local detail module."""

    square_in: Tensor | None = None
    band_w_in: Tensor | None = None
    band_h_in: Tensor | None = None
    identity_in: Tensor | None = None
    square_out: Tensor | None = None
    band_w_out: Tensor | None = None
    band_h_out: Tensor | None = None
    identity_out: Tensor | None = None


@dataclass
class NetworkTrace:
    """All stage outputs of one restoration forward pass."""

    shallow: Tensor
    fib_outputs: tuple[Tensor, ...]
    deep: Tensor
    restored: Tensor


# ---------------------------------------------------------------------------
# parameter bookkeeping


def _dsa_shapes(c: int, r: int) -> dict[str, tuple]:
    return {
        "q_pw.weight": (c, c, 1, 1), "q_pw.bias": (1, c, 1, 1),
        "q_dw.weight": (c, 1, 3, 3), "q_dw.bias": (1, c, 1, 1),
        "k_pw.weight": (c, c, 1, 1), "k_pw.bias": (1, c, 1, 1),
        "k_dw.weight": (c, 1, 3, 3), "k_dw.bias": (1, c, 1, 1),
        "fc1.weight": (c // r, c, 1, 1), "fc1.bias": (1, c // r, 1, 1),
        "fc2.weight": (c, c // r, 1, 1), "fc2.bias": (1, c, 1, 1),
        "out.weight": (c, c, 1, 1), "out.bias": (1, c, 1, 1),
    }


def _ldam_shapes(c: int, k_s: int, k_b: int) -> dict[str, tuple]:
    q = c // 4
    return {
        "square.weight": (q, 1, k_s, k_s),
        "band_w.weight": (q, 1, 1, k_b),
        "band_h.weight": (q, 1, k_b, 1),
    }


def _ffn_shapes(c: int) -> dict[str, tuple]:
    return {
        "conv3.weight": (c, c, 3, 3), "conv3.bias": (1, c, 1, 1),
        "conv1.weight": (c, c, 1, 1), "conv1.bias": (1, c, 1, 1),
    }


def _fib_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    c = cfg.base_channels
    shapes: dict[str, tuple] = {
        "ln1.gamma": (1, c, 1, 1), "ln1.beta": (1, c, 1, 1),
    }
    shapes.update({f"dsa.{k}": v for k, v in _dsa_shapes(c, cfg.reduction_ratio).items()})
    shapes.update({f"ldam.{k}": v
                   for k, v in _ldam_shapes(c, cfg.square_kernel, cfg.band_kernel).items()})
    shapes.update({
        "merge.weight": (c, 2 * c, 1, 1), "merge.bias": (1, c, 1, 1),
        "ln2.gamma": (1, c, 1, 1), "ln2.beta": (1, c, 1, 1),
    })
    shapes.update({f"ffn.{k}": v for k, v in _ffn_shapes(c).items()})
    return shapes


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Every learnable tensor's name and shape, in canonical order."""
    c, s = cfg.base_channels, cfg.shuffle_channels
    shapes: dict[str, tuple] = {
        "head.conv.weight": (c, s, 3, 3),
        "head.conv.bias": (1, c, 1, 1),
    }
    for i in range(cfg.num_fibs):
        shapes.update({f"fib{i}.{k}": v for k, v in _fib_shapes(cfg).items()})
    shapes.update({
        "tail.conv.weight": (s, c, 3, 3),
        "tail.conv.bias": (1, s, 1, 1),
    })
    return shapes


def param_count(cfg: ModelConfig) -> int:
    """Closed-form learnable parameter count for a configuration."""
    c, r = cfg.base_channels, cfg.reduction_ratio
    s = cfg.shuffle_channels
    k_s, k_b = cfg.square_kernel, cfg.band_kernel
    head = 9 * s * c + c
    tail = 9 * c * s + s
    per_fib = (
        c * c * 15 + 2 * (c * c) // r          # point-wise conv and FC weights
        + 31 * c + c // r                       # biases, norm affines, 3x3 depth-wise
        + (c // 4) * (k_s * k_s + 2 * k_b)      # LDAM branch kernels
    )
    return head + tail + cfg.num_fibs * per_fib


def init_params(cfg: ModelConfig, seed: int) -> ParameterSet:
    """Deterministic initialization: He-normal weights scaled by fan-in,
    zero biases, unit norm scales, zero norm shifts."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    entries: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf == "gamma":
            arr = np.ones(shape)
        elif leaf in ("beta", "bias"):
            arr = np.zeros(shape)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            arr = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        entries[name] = Tensor(arr)
    return ParameterSet(entries)


# ---------------------------------------------------------------------------
# forward passes


def dsa_forward(x: Tensor, params: Mapping[str, Tensor],
                probe: DsaIntermediates | None = None) -> Tensor:
    """Dual-stream attention over C-channel features.

    Query and key streams are point-wise then depth-wise projections of
    the input.  A squeeze pair (pool, FC bottleneck, sigmoid) turns the
    query into per-channel weights that gate it; the gated query
    modulates the key, and a 1x1 projection plus the query residual
    forms the output.
    """
    c = x.shape.c
    if params["q_pw.weight"].shape.n != c:
        raise DimensionError(
            f"attention parameters are for {params['q_pw.weight'].shape.n} channels, "
            f"input has {c}")
    query = conv2d(conv2d(x, params["q_pw.weight"], params["q_pw.bias"], padding="same"),
                   params["q_dw.weight"], params["q_dw.bias"], padding="same", groups=c)
    key = conv2d(conv2d(x, params["k_pw.weight"], params["k_pw.bias"], padding="same"),
                 params["k_dw.weight"], params["k_dw.bias"], padding="same", groups=c)
    pooled = global_avg_pool(query)
    squeezed = relu(fully_connected(pooled, params["fc1.weight"], params["fc1.bias"]))
    attention = sigmoid(fully_connected(squeezed, params["fc2.weight"], params["fc2.bias"]))
    modulated = mul(query, attention)
    out = add(conv2d(mul(modulated, key), params["out.weight"], params["out.bias"],
                     padding="same"),
              query)
    if probe is not None:
        probe.query, probe.key, probe.pooled = query, key, pooled
        probe.attention, probe.modulated, probe.out = attention, modulated, out
    return out


def ldam_forward(x: Tensor, params: Mapping[str, Tensor],
                 probe: LdamIntermediates | None = None) -> Tensor:
    """Local detail aggregation: four-way channel split into square-kernel,
    horizontal-band, vertical-band, and identity branches, re-concatenated
    in input channel order."""
    c = x.shape.c
    if c % 4 != 0:
        raise ConfigurationError(f"channel count {c} is not divisible by 4")
    q = c // 4
    square_in, band_w_in, band_h_in, identity_in = split_channels(x, [q, q, q, q])
    square_out = conv2d(square_in, params["square.weight"], padding="same", groups=q)
    band_w_out = conv2d(band_w_in, params["band_w.weight"], padding="same", groups=q)
    band_h_out = conv2d(band_h_in, params["band_h.weight"], padding="same", groups=q)
    out = concat_channels([square_out, band_w_out, band_h_out, identity_in])
    if probe is not None:
        probe.square_in, probe.band_w_in = square_in, band_w_in
        probe.band_h_in, probe.identity_in = band_h_in, identity_in
        probe.square_out, probe.band_w_out = square_out, band_w_out
        probe.band_h_out, probe.identity_out = band_h_out, identity_in
    return out


def ffn_forward(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Feed-forward branch: 3x3 conv, exact GELU, 1x1 conv."""
    inner = gelu(conv2d(x, params["conv3.weight"], params["conv3.bias"], padding="same"))
    return conv2d(inner, params["conv1.weight"], params["conv1.bias"], padding="same")


def hab_forward(x: Tensor, params: Mapping[str, Tensor],
                dsa_probe: DsaIntermediates | None = None,
                ldam_probe: LdamIntermediates | None = None) -> Tensor:
    """Hybrid attention block: both streams over the same normalized
    features, channel-concatenated (doubling channels), merged 2C -> C."""
    z = layer_norm(x, params["ln1.gamma"], params["ln1.beta"])
    streams = concat_channels([
        dsa_forward(z, _scope(params, "dsa"), dsa_probe),
        ldam_forward(z, _scope(params, "ldam"), ldam_probe),
    ])
    return conv2d(streams, params["merge.weight"], params["merge.bias"], padding="same")


def fib_forward(x: Tensor, params: Mapping[str, Tensor],
                dsa_probe: DsaIntermediates | None = None,
                ldam_probe: LdamIntermediates | None = None) -> Tensor:
    """Feature interaction block: residual hybrid attention, then a
    residual feed-forward branch over re-normalized features."""
    attended = add(hab_forward(x, params, dsa_probe, ldam_probe), x)
    z = layer_norm(attended, params["ln2.gamma"], params["ln2.beta"])
    return add(ffn_forward(z, _scope(params, "ffn")), attended)


def _scope(params: Mapping[str, Tensor], prefix: str) -> dict[str, Tensor]:
    head = prefix + "."
    return {k[len(head):]: v for k, v in params.items() if k.startswith(head)}


def simpleir_forward(image: Tensor, params: ParameterSet, cfg: ModelConfig) -> NetworkTrace:
    """Full restoration pass over an RGB image whose spatial dims are
    multiples of the down factor (use :func:`restore_image` otherwise)."""
    n, c, h, w = image.shape
    if c != cfg.image_channels:
        raise DimensionError(f"expected {cfg.image_channels} image channels, got {c}")
    df = cfg.down_factor
    if h % df != 0 or w % df != 0:
        raise DimensionError(f"spatial dims {h}x{w} are not multiples of {df}")
    packed = pixel_unshuffle(image, df)
    shallow = conv2d(packed, params["head.conv.weight"], params["head.conv.bias"],
                     padding="same")
    x = shallow
    fib_outputs = []
    for i in range(cfg.num_fibs):
        x = fib_forward(x, params.scope(f"fib{i}"))
        fib_outputs.append(x)
    deep = x
    merged = add(deep, shallow)
    unpacked = conv2d(merged, params["tail.conv.weight"], params["tail.conv.bias"],
                      padding="same")
    restored = pixel_shuffle(unpacked, df)
    return NetworkTrace(shallow=shallow, fib_outputs=tuple(fib_outputs),
                        deep=deep, restored=restored)


def pad_to_multiple(image: Tensor, factor: int) -> tuple[Tensor, int, int]:
    """Reflect-pad bottom/right so both spatial dims are multiples of
    ``factor``; returns (padded, original_h, original_w)."""
    _, _, h, w = image.shape
    pb = (-h) % factor
    pr = (-w) % factor
    if pb == 0 and pr == 0:
        return image, h, w
    return reflect_pad(image, (0, pb, 0, pr)), h, w


def restore_image(image: Tensor, params: ParameterSet, cfg: ModelConfig) -> Tensor:
    """Restore an image of any size: pad to the down-factor grid, run the
    network, crop back to the original extent."""
    padded, h, w = pad_to_multiple(image, cfg.down_factor)
    trace = simpleir_forward(padded, params, cfg)
    restored = trace.restored
    if restored.shape.h != h or restored.shape.w != w:
        restored = crop(restored, 0, 0, h, w)
    return restored
