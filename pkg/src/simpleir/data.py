"""Dataset manifests, image I/O, and synthetic degradation generators.

The package trains on self-contained synthetic corpora: procedurally
generated texture images paired with deterministic degradations (blur,
lowlight, rain, snow).  The degradation models are simple documented
closed forms chosen to exercise the curriculum machinery, not to imitate
real capture physics.

A manifest is a versioned whitespace-separated text file listing every
dataset, split, and sample with relative image paths and a precomputed
entropy difference.  Images are 8-bit PNG or binary PPM (P6); 16-bit
sources are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import ConfigurationError, DataError, DimensionError, FormatError
from .numerics import Tensor

__all__ = [
    "ImageBuffer", "SampleRecord", "ManifestDataset", "Manifest",
    "load_image", "save_image", "generate_texture", "synthesize",
    "build_manifest", "DEGRADATION_KINDS", "TASK_TAGS",
]

DEGRADATION_KINDS = ("blur", "lowlight", "rain", "snow")
TASK_TAGS = {"blur": "deblur", "lowlight": "llie", "rain": "derain", "snow": "desnow"}
_VALID_TAGS = {"desnow", "deblur", "derain", "llie", "custom"}

# seed-domain constants so distinct generators never share streams
_DOM_TEXTURE = 101
_DOM_DEGRADE = {"blur": 111, "lowlight": 112, "rain": 113, "snow": 114}
_DOM_PAIRING = 120


class ImageBuffer:
    """An (h, w, c) float64 image with values clamped to [0, 1]; c is 1 or 3."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionError(f"image must be (h, w, 1|3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"image dimensions must be positive, got {arr.shape}")
        self.data = np.clip(arr, 0.0, 1.0)

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def luma(self) -> np.ndarray:
        """Rec. 601 luma plane (the sole channel for grayscale images)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        r, g, b = self.data[:, :, 0], self.data[:, :, 1], self.data[:, :, 2]
        return 0.299 * r + 0.587 * g + 0.114 * b

    def to_tensor(self) -> Tensor:
        return Tensor(np.transpose(self.data, (2, 0, 1))[None, :, :, :])

    @classmethod
    def from_tensor(cls, t: Tensor) -> "ImageBuffer":
        if t.shape.n != 1:
            raise DimensionError(f"expected a single-image tensor, got batch {t.shape.n}")
        return cls(np.transpose(t.data[0], (1, 2, 0)))

    def copy(self) -> "ImageBuffer":
        out = object.__new__(ImageBuffer)
        out.data = self.data.copy()
        return out

    def __repr__(self) -> str:
        return f"ImageBuffer(h={self.h}, w={self.w}, channels={self.channels})"


# ---------------------------------------------------------------------------
# image I/O


def load_image(path) -> ImageBuffer:
    """Read an 8-bit PNG or binary PPM (P6) scaled to [0, 1]."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        return _load_png(path)
    if suffix == ".ppm":
        return _load_ppm(path)
    raise FormatError(f"unsupported image format {suffix!r} ({path})")


def _load_png(path: Path) -> ImageBuffer:
    try:
        with Image.open(path) as im:
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
                raise FormatError(f"16-bit PNG is not supported ({path})")
            if im.mode not in ("L", "RGB"):
                raise FormatError(f"PNG mode {im.mode!r} is not supported ({path})")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except UnidentifiedImageError as e:
        raise FormatError(f"not a readable PNG: {path}") from e
    except OSError as e:
        raise DataError(f"failed reading PNG {path}: {e}") from e
    return ImageBuffer(arr)


def _load_ppm(path: Path) -> ImageBuffer:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"failed reading PPM {path}: {e}") from e
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            ch = raw[pos:pos + 1]
            if ch == b"#":
                while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"truncated PPM header: {path}")
        return raw[start:pos]

    if token() != b"P6":
        raise FormatError(f"not a binary PPM (P6): {path}")
    try:
        w, h, maxval = int(token()), int(token()), int(token())
    except ValueError as e:
        raise FormatError(f"malformed PPM header: {path}") from e
    if maxval != 255:
        raise FormatError(f"only 8-bit PPM (maxval 255) is supported, got {maxval} ({path})")
    pos += 1  # single whitespace byte after maxval
    need = w * h * 3
    body = raw[pos:pos + need]
    if len(body) < need:
        raise DataError(f"truncated PPM pixel data: {path}")
    arr = np.frombuffer(body, dtype=np.uint8).astype(np.float64).reshape(h, w, 3)
    return ImageBuffer(arr / 255.0)


def save_image(buffer: ImageBuffer, path) -> None:
    """Write an 8-bit PNG or binary PPM; quantization is round-to-nearest."""
    path = Path(path)
    q = np.rint(np.clip(buffer.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    suffix = path.suffix.lower()
    path.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".png":
        if buffer.channels == 1:
            Image.fromarray(q[:, :, 0], mode="L").save(path, format="PNG")
        else:
            Image.fromarray(q, mode="RGB").save(path, format="PNG")
    elif suffix == ".ppm":
        if buffer.channels != 3:
            raise FormatError("PPM (P6) stores RGB only")
        header = f"P6\n{buffer.w} {buffer.h}\n255\n".encode("ascii")
        path.write_bytes(header + q.tobytes())
    else:
        raise FormatError(f"unsupported image format {suffix!r} ({path})")


# ---------------------------------------------------------------------------
# procedural sources


def generate_texture(h: int, w: int, seed: int) -> ImageBuffer:
    """Deterministic multi-octave value-noise texture with step edges.

    The mix of smooth gradients, fine grain, and hard bars gives the luma
    histogram enough spread that degradations move its entropy.
    """
    if h < 4 or w < 4:
        raise DimensionError(f"texture must be at least 4x4, got {h}x{w}")
    rng = np.random.default_rng(np.random.SeedSequence([_DOM_TEXTURE, int(seed)]))
    acc = np.zeros((h, w, 3))
    amp, total = 1.0, 0.0
    res = 4
    while res <= min(h, w):
        grid = rng.uniform(-1.0, 1.0, size=(res, res, 3))
        up = ndimage.zoom(grid, (h / res, w / res, 1.0), order=1)
        acc += amp * up[:h, :w, :]
        total += amp
        amp *= 0.55
        res *= 2
    acc /= total

    # hard-edged bars add high-contrast structure
    for _ in range(int(rng.integers(2, 5))):
        vertical = bool(rng.integers(2))
        extent = w if vertical else h
        start = int(rng.integers(0, extent))
        width = int(rng.integers(1, max(2, extent // 8)))
        level = rng.uniform(-0.8, 0.8)
        if vertical:
            acc[:, start:start + width, :] += level
        else:
            acc[start:start + width, :, :] += level

    lo, hi = acc.min(), acc.max()
    if hi - lo < 1e-12:
        return ImageBuffer(np.full((h, w, 3), 0.5))
    return ImageBuffer(0.05 + 0.9 * (acc - lo) / (hi - lo))


# ---------------------------------------------------------------------------
# degradations


def synthesize(kind: str, clean: ImageBuffer, seed: int, strength: float) -> ImageBuffer:
    """Apply a deterministic degradation; ``strength`` 0 is the identity.

    Models (x is the clean image, s the strength, u uniform draws):
      blur      Gaussian filter, sigma = 2.5 * s.
      lowlight  clip((1 - 0.6*s) * x^(1 + 1.5*s) + noise), noise ~ N(0, (0.02*s)^2).
      rain      additive near-vertical bright streaks, count ~ area * s.
      snow      additive Gaussian particle blobs, count ~ area * s.
    """
    if kind not in DEGRADATION_KINDS:
        raise ConfigurationError(f"unknown degradation kind {kind!r}")
    if not (0.0 <= strength <= 1.0) or not math.isfinite(strength):
        raise ConfigurationError(f"strength must be in [0, 1], got {strength}")
    if strength == 0.0:
        return clean.copy()
    rng = np.random.default_rng(np.random.SeedSequence([_DOM_DEGRADE[kind], int(seed)]))
    if kind == "blur":
        out = np.stack([ndimage.gaussian_filter(clean.data[:, :, c], 2.5 * strength,
                                                mode="reflect")
                        for c in range(clean.channels)], axis=2)
        return ImageBuffer(out)
    if kind == "lowlight":
        gain = 1.0 - 0.6 * strength
        gamma = 1.0 + 1.5 * strength
        noise = rng.normal(0.0, 0.02 * strength, size=clean.data.shape)
        return ImageBuffer(gain * np.power(clean.data, gamma) + noise)
    if kind == "rain":
        return _rain(clean, rng, strength)
    return _snow(clean, rng, strength)


def _rain(clean: ImageBuffer, rng: np.random.Generator, s: float) -> ImageBuffer:
    h, w = clean.h, clean.w
    out = clean.data.copy()
    count = max(1, round(0.004 * h * w * s))
    for _ in range(count):
        x0 = rng.uniform(0, w)
        y0 = rng.uniform(0, h)
        angle = rng.uniform(-0.26, 0.26)  # radians off vertical
        length = rng.uniform(0.15, 0.35) * h
        bright = 0.15 + 0.3 * rng.uniform()
        steps = max(2, int(length * 2))
        t = np.linspace(0.0, length, steps)
        ys = np.clip(np.rint(y0 + t * np.cos(angle)), 0, h - 1).astype(int)
        xs = np.clip(np.rint(x0 + t * np.sin(angle)), 0, w - 1).astype(int)
        out[ys, xs, :] += bright
    return ImageBuffer(out)


def _snow(clean: ImageBuffer, rng: np.random.Generator, s: float) -> ImageBuffer:
    h, w = clean.h, clean.w
    out = clean.data.copy()
    count = max(1, round(0.003 * h * w * s))
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(count):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        radius = 0.8 + 2.5 * s * rng.uniform()
        bright = 0.4 + 0.4 * rng.uniform()
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        blob = bright * np.exp(-d2 / (2.0 * (radius / 1.5) ** 2))
        out += blob[:, :, None]
    return ImageBuffer(out)


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class SampleRecord:
    """One degraded/reference pair; paths are relative to the manifest."""

    sample_id: str
    degraded: str
    reference: str
    entropy_diff: float | None = None


@dataclass(frozen=True)
class ManifestDataset:
    name: str
    task: str
    train: tuple[SampleRecord, ...]
    test: tuple[SampleRecord, ...]

    def split(self, name: str) -> tuple[SampleRecord, ...]:
        if name == "train":
            return self.train
        if name == "test":
            return self.test
        raise ConfigurationError(f"unknown split {name!r}")


@dataclass(frozen=True)
class Manifest:
    """All datasets of one corpus, rooted at the manifest file's directory."""

    root: Path
    datasets: tuple[ManifestDataset, ...]

    def dataset(self, name: str) -> ManifestDataset:
        for d in self.datasets:
            if d.name == name:
                return d
        raise DataError(f"manifest has no dataset {name!r}")

    def names(self) -> list[str]:
        return [d.name for d in self.datasets]

    def resolve(self, record: SampleRecord) -> tuple[Path, Path]:
        return self.root / record.degraded, self.root / record.reference

    def save(self, path) -> None:
        path = Path(path)
        lines = ["simpleir-manifest v1"]
        for d in self.datasets:
            lines.append(f"dataset {d.name} task {d.task}")
            for split_name in ("train", "test"):
                for r in d.split(split_name):
                    ent = repr(float(r.entropy_diff)) if r.entropy_diff is not None else "-"
                    lines.append(
                        f"sample {split_name} {r.sample_id} {r.degraded} {r.reference} {ent}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot read manifest {path}: {e}") from e
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].split() != ["simpleir-manifest", "v1"]:
            raise FormatError(f"not a v1 manifest: {path}")
        root = path.parent
        datasets: list[ManifestDataset] = []
        current: dict | None = None

        def flush():
            if current is not None:
                datasets.append(ManifestDataset(
                    name=current["name"], task=current["task"],
                    train=tuple(current["train"]), test=tuple(current["test"])))

        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "dataset":
                if len(parts) != 4 or parts[2] != "task":
                    raise FormatError(f"malformed dataset line: {ln!r}")
                if parts[3] not in _VALID_TAGS:
                    raise FormatError(f"unknown task tag {parts[3]!r}")
                flush()
                current = {"name": parts[1], "task": parts[3], "train": [], "test": []}
            elif parts[0] == "sample":
                if current is None:
                    raise FormatError(f"sample before any dataset: {ln!r}")
                if len(parts) != 6:
                    raise FormatError(f"malformed sample line: {ln!r}")
                _, split_name, sid, deg, ref, ent = parts
                if split_name not in ("train", "test"):
                    raise FormatError(f"unknown split {split_name!r} in {ln!r}")
                rec = SampleRecord(sid, deg, ref,
                                   None if ent == "-" else float(ent))
                current[split_name].append(rec)
            else:
                raise FormatError(f"unrecognized manifest line: {ln!r}")
        flush()
        manifest = cls(root=root, datasets=tuple(datasets))
        manifest.validate()
        return manifest

    def validate(self) -> None:
        for d in self.datasets:
            seen: set[str] = set()
            for r in d.train + d.test:
                if r.sample_id in seen:
                    raise DataError(f"duplicate sample id {r.sample_id!r} in {d.name}")
                seen.add(r.sample_id)
                for rel in (r.degraded, r.reference):
                    if not (self.root / rel).exists():
                        raise DataError(f"missing file {rel!r} referenced by {r.sample_id}")


def _strength_schedule(count: int, rng: np.random.Generator) -> np.ndarray:
    """Per-sample strengths: a smooth easy-to-moderate ramp with the top
    decile pinned hard, then shuffled.  The hard tail makes per-sample
    losses heavy-tailed, which the loss-rule harvest relies on."""
    u = (np.arange(count) + 0.5) / count
    s = np.where(u >= 0.9, 0.95, 0.4 + 0.35 * (u / 0.9))
    return rng.permutation(s)


def build_manifest(out_dir, kinds: Sequence[str] = DEGRADATION_KINDS, *,
                   train_count: int | Mapping[str, int] = 30, test_count: int = 3,
                   size: int = 64, seed: int = 0) -> Manifest:
    """Generate a synthetic corpus on disk and return its manifest.

    Each sample pairs a fresh procedural texture with its degraded copy;
    all sources are disjoint across samples, splits, and kinds.  Mean
    entropy differences of the generated kinds must come out pairwise
    distinct (that strict order is what dataset ranking consumes); a
    collision raises a data error.  ``train_count`` may be a mapping from
    kind to count for datasets of unequal size.
    """
    from .curriculum import entropy_difference  # local import, no cycle at module load

    out_dir = Path(out_dir)
    for kind in kinds:
        if kind not in DEGRADATION_KINDS:
            raise ConfigurationError(f"unknown degradation kind {kind!r}")
    per_kind = ({k: int(train_count) for k in kinds} if isinstance(train_count, int)
                else {k: int(train_count[k]) for k in kinds})
    if test_count < 1 or any(n < 1 for n in per_kind.values()):
        raise ConfigurationError("train_count and test_count must be >= 1")
    datasets: list[ManifestDataset] = []
    means: dict[str, float] = {}
    for ki, kind in enumerate(kinds):
        pair_rng = np.random.default_rng(
            np.random.SeedSequence([_DOM_PAIRING, int(seed), ki]))
        records: dict[str, list[SampleRecord]] = {"train": [], "test": []}
        diffs: list[float] = []
        counters = {"train": per_kind[kind], "test": test_count}
        strengths = {s: _strength_schedule(n, pair_rng) for s, n in counters.items()}
        index = 0
        for split_name in ("train", "test"):
            for j in range(counters[split_name]):
                sid = f"{kind}:{index:04d}"
                sample_seed = (int(seed) * 100003 + ki * 1009 + index) & 0x7FFFFFFF
                clean = generate_texture(size, size, sample_seed)
                degraded = synthesize(kind, clean, sample_seed,
                                      float(strengths[split_name][j]))
                rel_ref = f"{kind}/{split_name}/{index:04d}_ref.png"
                rel_deg = f"{kind}/{split_name}/{index:04d}_deg.png"
                save_image(clean, out_dir / rel_ref)
                save_image(degraded, out_dir / rel_deg)
                # entropy is computed on the quantized files actually shipped
                diff = entropy_difference(load_image(out_dir / rel_ref),
                                          load_image(out_dir / rel_deg))
                records[split_name].append(
                    SampleRecord(sid, rel_deg, rel_ref, diff))
                if split_name == "train":
                    diffs.append(diff)
                index += 1
        datasets.append(ManifestDataset(name=kind, task=TASK_TAGS[kind],
                                        train=tuple(records["train"]),
                                        test=tuple(records["test"])))
        means[kind] = float(np.mean(diffs))
    _check_separation(means)
    manifest = Manifest(root=out_dir, datasets=tuple(datasets))
    manifest.save(out_dir / "manifest.txt")
    return manifest


def _check_separation(means: dict[str, float]) -> None:
    names = sorted(means)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if abs(means[a] - means[b]) < 1e-3:
                raise DataError(
                    f"mean entropy differences of {a!r} and {b!r} coincide "
                    f"({means[a]:.4f} vs {means[b]:.4f}); ranking needs a strict order")
