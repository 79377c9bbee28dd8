"""Training loss and image quality metrics.

The training objective combines a spatial mean absolute error with a
frequency-domain term: the restored and reference images are transformed
with an unnormalized 2-D DFT and the mean L1 distance over real and
imaginary parts is added, weighted by ``freq_weight``.  Both terms are
means over all n*c*h*w elements so the weight is resolution-free.

PSNR and SSIM are evaluation metrics over clamped [0, 1] images; they
are plain floats, not differentiable tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError
from .numerics import Tensor, add, complex_l1, fft2, l1_sum, scale

__all__ = [
    "LossConfig", "ImagePair", "MetricReport",
    "restoration_loss", "psnr", "ssim", "SSIM_WINDOW",
]


@dataclass(frozen=True)
class LossConfig:
    """Objective weights; ``freq_weight`` scales the frequency term."""

    freq_weight: float = 0.1

    def __post_init__(self):
        if not (self.freq_weight >= 0.0 and math.isfinite(self.freq_weight)):
            raise ConfigurationError(f"freq_weight must be >= 0, got {self.freq_weight}")


@dataclass(frozen=True)
class ImagePair:
    """A restored/reference image pair of identical shape.

    Values are nominally in [0, 1]; metrics clamp before computing, the
    differentiable loss uses the raw values.
    """

    restored: Tensor
    reference: Tensor

    def __post_init__(self):
        if self.restored.shape != self.reference.shape:
            raise DimensionError(
                f"pair shapes differ: {self.restored.shape} vs {self.reference.shape}")


@dataclass(frozen=True)
class MetricReport:
    """Arithmetic means over an evaluated sample set."""

    psnr: float
    ssim: float
    loss: float
    sample_count: int

    def render_text(self) -> str:
        """Flat key-value block; infinities render as ``inf``."""
        return (f"psnr_db: {_fmt(self.psnr)}\n"
                f"ssim: {_fmt(self.ssim)}\n"
                f"loss: {_fmt(self.loss)}\n"
                f"sample_count: {self.sample_count}\n")

    def machine_line(self, stage: int, dataset: str) -> str:
        return (f"metric stage {stage} dataset {dataset} psnr {_fmt(self.psnr)} "
                f"ssim {_fmt(self.ssim)} loss {_fmt(self.loss)} samples {self.sample_count}")


def _fmt(v: float) -> str:
    return repr(float(v))


def restoration_loss(pair: ImagePair, cfg: LossConfig) -> Tensor:
    """Differentiable scalar objective: spatial + weighted frequency L1.

    With ``freq_weight`` zero the result is exactly the mean absolute
    error (the frequency branch is skipped entirely).
    """
    inv_n = 1.0 / pair.restored.size
    spatial = scale(l1_sum(pair.restored, pair.reference), inv_n)
    if cfg.freq_weight == 0.0:
        return spatial
    freq = scale(complex_l1(fft2(pair.restored), fft2(pair.reference)), inv_n)
    return add(spatial, scale(freq, cfg.freq_weight))


def psnr(pair: ImagePair, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over [0, max_val]-clamped images.

    Identical images return ``math.inf`` (rendered as ``inf`` in reports).
    """
    if max_val <= 0:
        raise ConfigurationError(f"max_val must be positive, got {max_val}")
    a = np.clip(pair.restored.data, 0.0, max_val)
    b = np.clip(pair.reference.data, 0.0, max_val)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _gauss1d() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * _SSIM_SIGMA * _SSIM_SIGMA))
    return g / g.sum()


_SSIM_KERNEL = _gauss1d()


def _filter_valid(plane: np.ndarray) -> np.ndarray:
    """Separable Gaussian filter, valid region only (symmetric kernel)."""
    t = np.apply_along_axis(np.convolve, 0, plane, _SSIM_KERNEL, "valid")
    return np.apply_along_axis(np.convolve, 1, t, _SSIM_KERNEL, "valid")


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    c1 = _SSIM_K1 * _SSIM_K1
    c2 = _SSIM_K2 * _SSIM_K2
    ux = _filter_valid(x)
    uy = _filter_valid(y)
    uxx = _filter_valid(x * x)
    uyy = _filter_valid(y * y)
    uxy = _filter_valid(x * y)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    cxy = uxy - ux * uy
    s = ((2 * ux * uy + c1) * (2 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(s.mean())


def ssim(pair: ImagePair) -> float:
    """Mean structural similarity over [0, 1]-clamped images.

    Local statistics use an 11x11 Gaussian window (sigma 1.5), population
    covariance, and stability constants K1=0.01, K2=0.03 at unit dynamic
    range.  Only fully valid windows contribute; the per-channel values
    are averaged.
    """
    n, c, h, w = pair.restored.shape
    if min(h, w) < SSIM_WINDOW:
        raise DimensionError(f"image {h}x{w} smaller than the {SSIM_WINDOW}px SSIM window")
    a = np.clip(pair.restored.data, 0.0, 1.0)
    b = np.clip(pair.reference.data, 0.0, 1.0)
    vals = [_ssim_plane(a[i, j], b[i, j]) for i in range(n) for j in range(c)]
    return float(np.mean(vals))
