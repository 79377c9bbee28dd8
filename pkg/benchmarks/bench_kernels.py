"""Benchmark the compiled convolution backend against the numpy fallback.

Times the three raw kernel entry points on the shapes the network
actually runs (dense 3x3 head/tail, pointwise mixers, depthwise square
and band kernels) and checks that both backends agree bitwise-closely.

Usage: python3 benchmarks/bench_kernels.py [--spatial 16] [--repeats 30]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from simpleir.numerics import _conv_np  # noqa: E402

try:
    from simpleir.numerics import _convkern
except ImportError:
    _convkern = None


def _pad(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def cases(spatial: int, channels: int) -> list[tuple[str, np.ndarray, np.ndarray, int, int]]:
    rng = np.random.default_rng(0)
    s, c = spatial, channels

    def arr(*shape):
        return rng.standard_normal(shape)

    return [
        ("dense 3x3 48->C", _pad(arr(1, 48, s, s), 1, 1), arr(c, 48, 3, 3), 1, 1),
        ("dense 3x3 C->48", _pad(arr(1, c, s, s), 1, 1), arr(48, c, 3, 3), 1, 1),
        ("pointwise C->2C", arr(1, c, s, s), arr(2 * c, c, 1, 1), 1, 1),
        ("depthwise 3x3", _pad(arr(1, c, s, s), 1, 1), arr(c, 1, 3, 3), 1, c),
        ("band 1x5 depthwise", _pad(arr(1, c, s, s), 0, 2), arr(c, 1, 1, 5), 1, c),
        ("band 5x1 depthwise", _pad(arr(1, c, s, s), 2, 0), arr(c, 1, 5, 1), 1, c),
    ]


def time_op(fn, repeats: int) -> float:
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spatial", type=int, default=16,
                    help="feature-map side length after 4x unshuffle")
    ap.add_argument("--channels", type=int, default=16, help="model width C")
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    if _convkern is None:
        print("compiled backend unavailable; nothing to compare")
        return 0

    header = f"{'op':>22} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} {'max|diff|':>10}"
    print(header)
    print("-" * len(header))
    for name, xp, w, stride, groups in cases(args.spatial, args.channels):
        cout, cig, kh, kw = w.shape
        ho = xp.shape[2] - kh + 1
        wo = xp.shape[3] - kw + 1
        gy = np.random.default_rng(1).standard_normal((xp.shape[0], cout, ho, wo))
        for op, np_fn, cy_fn in [
            ("fwd", lambda: _conv_np.conv_forward(xp, w, stride, groups),
             lambda: _convkern.conv_forward(xp, w, stride, groups)),
            ("dW", lambda: _conv_np.conv_grad_weight(xp, gy, kh, kw, stride, groups),
             lambda: _convkern.conv_grad_weight(xp, gy, kh, kw, stride, groups)),
            ("dX", lambda: _conv_np.conv_grad_input(gy, w, xp.shape[2], xp.shape[3],
                                                    stride, groups),
             lambda: _convkern.conv_grad_input(gy, w, xp.shape[2], xp.shape[3],
                                               stride, groups)),
        ]:
            diff = float(np.max(np.abs(np_fn() - cy_fn())))
            t_np = time_op(np_fn, args.repeats) * 1e3
            t_cy = time_op(cy_fn, args.repeats) * 1e3
            print(f"{name + ' ' + op:>22} {t_np:>10.3f} {t_cy:>10.3f} "
                  f"{t_np / t_cy:>7.1f}x {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
