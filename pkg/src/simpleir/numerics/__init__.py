"""Float64 NCHW tensor core: containers, tape, and differentiable ops."""

from .kernels import backend_name
from .ops import (
    activation,
    add,
    channel_slice,
    complex_l1,
    concat_channels,
    conv2d,
    crop,
    fft2,
    fully_connected,
    gelu,
    global_avg_pool,
    ifft2,
    l1_sum,
    layer_norm,
    mul,
    pixel_shuffle,
    pixel_unshuffle,
    reflect_pad,
    relu,
    scale,
    sigmoid,
    split_channels,
    sub,
)
from .tensor import (
    ComplexTensor,
    DiffGraph,
    Tensor,
    TensorShape,
    active_graph,
    backward,
    finite_diff,
)

__all__ = [
    "Tensor", "ComplexTensor", "TensorShape", "DiffGraph",
    "active_graph", "backward", "finite_diff", "backend_name",
    "conv2d", "layer_norm", "activation", "relu", "gelu", "sigmoid",
    "global_avg_pool", "fully_connected", "pixel_shuffle", "pixel_unshuffle",
    "fft2", "ifft2", "complex_l1", "l1_sum",
    "add", "sub", "mul", "scale", "concat_channels", "split_channels",
    "channel_slice", "reflect_pad", "crop",
]
