"""Paired crop-and-flip augmentation for training samples."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..numerics import Tensor
from ..objective import ImagePair

__all__ = ["crop_and_flip"]


def crop_and_flip(pair: ImagePair, size: int, rng: np.random.Generator) -> ImagePair:
    """Take the same random ``size`` x ``size`` window from both members
    of the pair, then apply the same random horizontal and vertical
    flips.  During training the pair holds (network input, target).

    Exactly four draws are consumed in a fixed order (top, left, flip_h,
    flip_v) so the stream position after the call never depends on the
    image contents.
    """
    _, _, h, w = pair.restored.shape
    if size > h or size > w:
        raise DimensionError(f"crop size {size} exceeds image dims {h}x{w}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    flip_h = bool(rng.integers(0, 2))
    flip_v = bool(rng.integers(0, 2))

    def cut(t: Tensor) -> Tensor:
        a = t.data[:, :, top:top + size, left:left + size]
        if flip_h:
            a = a[:, :, :, ::-1]
        if flip_v:
            a = a[:, :, ::-1, :]
        return Tensor(np.ascontiguousarray(a))

    return ImagePair(restored=cut(pair.restored), reference=cut(pair.reference))
