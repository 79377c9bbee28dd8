"""Review-driven curriculum machinery.

Datasets are ordered easiest-first by mean entropy difference (the gap
between a clean image's luma entropy and its degraded copy's).  During
stage 1 the trainer watches a trailing loss window and archives samples
whose windowed loss exceeds mean + kappa * std; later stages archive the
top fraction by entropy difference instead.  Each subsequent stage mixes
a geometrically decaying share of every earlier archive back into its
training roster.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, DataError, FormatError, NumericError
from .data import ImageBuffer, Manifest, ManifestDataset, load_image

__all__ = [
    "image_entropy", "entropy_difference",
    "EntropyStats", "DatasetDescriptor", "CurriculumPlan", "HarvestConfig",
    "LossStats", "ArchiveEntry", "ChallengeArchive", "StageSpec", "TrainSchedule",
    "compute_entropy_stats", "rank_datasets",
    "harvest_by_loss", "harvest_by_entropy", "review_mix", "plan_stages",
    "write_plan", "read_plan", "write_archive", "read_archive",
    "HIST_BINS", "HIST_RANGE",
]

HIST_BINS = 50
HIST_RANGE = (0.0, 8.0)

_DOM_ROSTER = 130


# ---------------------------------------------------------------------------
# entropy statistics


def image_entropy(img: ImageBuffer) -> float:
    """Shannon entropy in bits of the 256-bin 8-bit luma histogram."""
    luma = img.luma()
    if luma.size == 0:
        raise DataError("cannot take the entropy of an empty image")
    q = np.clip(np.rint(luma * 255.0), 0, 255).astype(np.int64)
    counts = np.bincount(q.ravel(), minlength=256)
    p = counts[counts > 0] / luma.size
    return float(-(p * np.log2(p)).sum() + 0.0)


def entropy_difference(clean: ImageBuffer, degraded: ImageBuffer) -> float:
    """Absolute luma-entropy gap between a clean image and its degraded copy."""
    return abs(image_entropy(clean) - image_entropy(degraded))


@dataclass(frozen=True)
class EntropyStats:
    """Per-sample entropy differences plus their mean and histogram."""

    per_sample: dict[str, float]
    mean: float
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    @classmethod
    def from_samples(cls, values: Mapping[str, float]) -> "EntropyStats":
        if not values:
            raise ContractError("entropy stats need at least one sample")
        arr = np.array(list(values.values()), dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DataError("entropy differences must be finite and non-negative")
        counts, edges = np.histogram(np.clip(arr, *HIST_RANGE),
                                     bins=HIST_BINS, range=HIST_RANGE)
        return cls(per_sample=dict(values), mean=float(arr.mean()),
                   bin_edges=tuple(float(e) for e in edges),
                   counts=tuple(int(c) for c in counts))

    @property
    def sample_count(self) -> int:
        return len(self.per_sample)


@dataclass(frozen=True)
class DatasetDescriptor:
    """Identity and train-split roster of one dataset."""

    name: str
    task: str
    sample_ids: tuple[str, ...]
    train_count: int
    test_count: int

    def __post_init__(self):
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise DataError(f"dataset {self.name!r} has duplicate sample ids")
        if self.train_count != len(self.sample_ids):
            raise ContractError(
                f"train_count {self.train_count} does not match "
                f"{len(self.sample_ids)} sample ids")

    @classmethod
    def from_dataset(cls, d: ManifestDataset) -> "DatasetDescriptor":
        return cls(name=d.name, task=d.task,
                   sample_ids=tuple(r.sample_id for r in d.train),
                   train_count=len(d.train), test_count=len(d.test))


def compute_entropy_stats(manifest: Manifest, dataset_name: str,
                          split: str = "train") -> EntropyStats:
    """Entropy differences for one split, preferring manifest-precomputed
    values and loading image pairs only where they are absent."""
    values: dict[str, float] = {}
    for record in manifest.dataset(dataset_name).split(split):
        if record.entropy_diff is not None:
            values[record.sample_id] = record.entropy_diff
        else:
            deg_path, ref_path = manifest.resolve(record)
            values[record.sample_id] = entropy_difference(
                load_image(ref_path), load_image(deg_path))
    return EntropyStats.from_samples(values)


# ---------------------------------------------------------------------------
# harvesting configuration and state


@dataclass(frozen=True)
class HarvestConfig:
    """Challenge-harvest knobs.

    ``kappa`` sets the loss-rule threshold mean + kappa * std.
    ``top_fraction`` is the entropy-rule share.  ``decay`` halves review
    quotas per elapsed stage at its default.  ``stage1_fraction_target``
    documents the stage-1 harvest share the loss rule is tuned to land
    near; it is asserted by tests, not enforced at run time.
    ``override_fraction`` replaces both rules with a fixed top-fraction
    cut when set (0 disables harvesting entirely).
    """

    kappa: float = 1.0
    top_fraction: float = 0.2
    decay: float = 0.5
    stage1_fraction_target: float = 0.1
    override_fraction: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.kappa):
            raise ConfigurationError("kappa must be finite")
        if not (0.0 <= self.top_fraction <= 1.0):
            raise ConfigurationError(f"top_fraction must be in [0, 1], got {self.top_fraction}")
        if not (0.0 < self.decay <= 1.0):
            raise ConfigurationError(f"decay must be in (0, 1], got {self.decay}")
        if not (0.0 <= self.stage1_fraction_target <= 1.0):
            raise ConfigurationError("stage1_fraction_target must be in [0, 1]")
        if self.override_fraction is not None and not (0.0 <= self.override_fraction <= 1.0):
            raise ConfigurationError(
                f"override_fraction must be in [0, 1], got {self.override_fraction}")


class LossStats:
    """Trailing loss window with per-sample windowed means.

    Single-writer: the training loop calls :meth:`observe` once per
    iteration.  Mean and standard deviation are population statistics
    over the raw window observations; a sample's windowed loss is the
    mean of its observations still inside the window, which damps the
    crop-to-crop noise of any single draw.  Samples that have aged out
    of the window keep their last observed loss so they stay eligible
    for harvesting.
    """

    def __init__(self, window: int):
        if window < 2:
            raise ConfigurationError(f"loss window must be >= 2, got {window}")
        self.window = window
        self._window_obs: deque[tuple[str, float]] = deque(maxlen=window)
        self._last_seen: dict[str, float] = {}

    def observe(self, sample_id: str, loss: float) -> None:
        loss = float(loss)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite loss observed for {sample_id!r}")
        self._window_obs.append((str(sample_id), loss))
        self._last_seen[str(sample_id)] = loss

    @property
    def count(self) -> int:
        return len(self._window_obs)

    def mean(self) -> float:
        if not self._window_obs:
            raise ContractError("no loss observations yet")
        return float(np.mean([v for _, v in self._window_obs]))

    def std(self) -> float:
        if not self._window_obs:
            raise ContractError("no loss observations yet")
        return float(np.std([v for _, v in self._window_obs]))

    def recent_by_sample(self) -> dict[str, float]:
        """Windowed mean per sample, falling back to the last observed
        loss for samples no longer inside the window."""
        out = dict(self._last_seen)
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for sid, v in self._window_obs:
            sums[sid] = sums.get(sid, 0.0) + v
            counts[sid] = counts.get(sid, 0) + 1
        for sid, total in sums.items():
            out[sid] = total / counts[sid]
        return out

    def to_state(self) -> dict:
        return {"window": self.window,
                "losses": [[sid, v] for sid, v in self._window_obs],
                "by_sample": dict(self._last_seen)}

    @classmethod
    def from_state(cls, state: dict) -> "LossStats":
        out = cls(int(state["window"]))
        for sid, v in state["losses"]:
            out._window_obs.append((str(sid), float(v)))
        out._last_seen = {str(k): float(v) for k, v in state["by_sample"].items()}
        return out


# ---------------------------------------------------------------------------
# archives


@dataclass(frozen=True)
class ArchiveEntry:
    sample_id: str
    score: float
    rule: str  # "loss" or "entropy"


@dataclass(frozen=True)
class ChallengeArchive:
    """Harvested challenging samples, highest score first."""

    source_stage: int
    entries: tuple[ArchiveEntry, ...]

    @classmethod
    def build(cls, source_stage: int, scored: Mapping[str, float],
              rule: str) -> "ChallengeArchive":
        if rule not in ("loss", "entropy"):
            raise ConfigurationError(f"unknown harvest rule {rule!r}")
        ordered = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(source_stage=source_stage,
                   entries=tuple(ArchiveEntry(sid, float(s), rule) for sid, s in ordered))

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.sample_id for e in self.entries]

    def top(self, k: int) -> tuple[ArchiveEntry, ...]:
        return self.entries[:max(0, k)]


def harvest_by_loss(stats: LossStats, kappa: float, source_stage: int = 1,
                    fraction: float | None = None) -> ChallengeArchive:
    """Archive samples whose windowed loss exceeds mean + kappa * std.

    With ``fraction`` given, the statistical rule is replaced by a plain
    top-``ceil(fraction * N)`` cut over per-sample windowed losses (the
    review-quantity override).  Ties resolve by sample id.
    """
    if stats.count < 2:
        raise ContractError("loss harvest needs at least two observations")
    recent = stats.recent_by_sample()
    if fraction is not None:
        if not (0.0 <= fraction <= 1.0):
            raise ConfigurationError(f"fraction must be in [0, 1], got {fraction}")
        k = math.ceil(fraction * len(recent))
        ordered = sorted(recent.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return ChallengeArchive.build(source_stage, dict(ordered), "loss")
    threshold = stats.mean() + kappa * stats.std()
    picked = {sid: loss for sid, loss in recent.items() if loss > threshold}
    return ChallengeArchive.build(source_stage, picked, "loss")


def harvest_by_entropy(stats: EntropyStats, fraction: float,
                       source_stage: int) -> ChallengeArchive:
    """Archive the top ``ceil(fraction * N)`` samples by entropy difference."""
    if not (0.0 <= fraction <= 1.0):
        raise ConfigurationError(f"fraction must be in [0, 1], got {fraction}")
    k = math.ceil(fraction * stats.sample_count)
    ordered = sorted(stats.per_sample.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return ChallengeArchive.build(source_stage, dict(ordered), "entropy")


def review_mix(current: Sequence[str], archives: Sequence[ChallengeArchive],
               stage_index: int, decay: float, seed: int,
               known_ids: set[str] | None = None) -> list[str]:
    """Training roster for one stage: the current dataset plus the top
    floor(len(archive) * decay^(stage_index - source_stage)) entries of
    each earlier archive, deterministically shuffled by (seed, stage)."""
    if stage_index < 1:
        raise ContractError(f"stage_index must be >= 1, got {stage_index}")
    roster = list(current)
    for archive in archives:
        elapsed = stage_index - archive.source_stage
        if elapsed < 1:
            raise ContractError(
                f"archive from stage {archive.source_stage} cannot be reviewed "
                f"at stage {stage_index}")
        quota = math.floor(len(archive) * decay ** elapsed)
        roster.extend(e.sample_id for e in archive.top(quota))
    if known_ids is not None:
        unknown = [sid for sid in roster if sid not in known_ids]
        if unknown:
            raise DataError(f"roster references unknown sample ids: {unknown[:5]}")
    rng = np.random.default_rng(np.random.SeedSequence(
        [_DOM_ROSTER, int(seed), int(stage_index)]))
    order = rng.permutation(len(roster))
    return [roster[i] for i in order]


# ---------------------------------------------------------------------------
# planning


@dataclass(frozen=True)
class CurriculumPlan:
    """Easiest-first dataset ordering with its harvest configuration."""

    order: tuple[str, ...]
    means: dict[str, float]
    harvest: HarvestConfig

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise ContractError("plan ordering contains duplicates")
        for name in self.order:
            if name not in self.means:
                raise ContractError(f"plan is missing the mean for {name!r}")

    def review_fraction(self, stage_index: int, source_stage: int) -> float:
        """Share of a source archive reinjected at a later stage."""
        return self.harvest.decay ** (stage_index - source_stage)


def rank_datasets(stats: Sequence[tuple[DatasetDescriptor, EntropyStats | None]],
                  harvest: HarvestConfig) -> CurriculumPlan:
    """Order datasets by ascending mean entropy difference (ties by name)."""
    if not stats:
        raise ContractError("ranking needs at least one dataset")
    for desc, st in stats:
        if st is None:
            raise ContractError(f"dataset {desc.name!r} has no entropy stats")
    ordered = sorted(stats, key=lambda pair: (pair[1].mean, pair[0].name))
    return CurriculumPlan(order=tuple(d.name for d, _ in ordered),
                          means={d.name: s.mean for d, s in ordered},
                          harvest=harvest)


@dataclass(frozen=True)
class StageSpec:
    """One stage of the training schedule."""

    stage_index: int
    dataset: str
    iterations: int
    learning_rate: float
    crop_size: int
    harvest_rule: str          # "loss" | "entropy" | "none"
    harvest_start: int
    review: bool

    def __post_init__(self):
        if self.stage_index < 1:
            raise ConfigurationError("stage_index must be >= 1")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.harvest_rule not in ("loss", "entropy", "none"):
            raise ConfigurationError(f"unknown harvest rule {self.harvest_rule!r}")
        if not (0 <= self.harvest_start <= max(self.iterations, 0)):
            raise ConfigurationError(
                f"harvest_start {self.harvest_start} outside 0..{self.iterations}")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")


@dataclass(frozen=True)
class TrainSchedule:
    """Full-scale schedule constants and the global scale factor.

    The canonical budgets are 200k first-stage iterations at learning
    rate 2e-4 (loss harvesting from the halfway point) and 10k iterations
    at 1e-4 for every later stage; ``scale`` multiplies all iteration
    budgets for desk-scale runs.
    """

    scale: float = 1.0
    stage1_iterations: int = 200_000
    later_iterations: int = 10_000
    stage1_lr: float = 2e-4
    later_lr: float = 1e-4
    harvest_start_fraction: float = 0.5
    crop_size: int = 32
    loss_window_base: int = 1_000

    def __post_init__(self):
        if not (0.0 < self.scale <= 1.0):
            raise ConfigurationError(f"scale must be in (0, 1], got {self.scale}")
        if self.crop_size < 4 or self.crop_size % 4 != 0:
            raise ConfigurationError(
                f"crop_size must be a positive multiple of 4, got {self.crop_size}")
        if not (0.0 <= self.harvest_start_fraction <= 1.0):
            raise ConfigurationError("harvest_start_fraction must be in [0, 1]")

    def loss_window(self, roster_size: int) -> int:
        """Trailing window: the scaled base, but always at least four full
        passes over the roster so each sample's windowed loss averages
        several augmented crops rather than echoing a single draw."""
        return max(2, round(self.loss_window_base * self.scale), 4 * roster_size)


def plan_stages(plan: CurriculumPlan, harvest: HarvestConfig,
                schedule: TrainSchedule) -> list[StageSpec]:
    """Concrete stage list: one stage per dataset in plan order."""
    if not plan.order:
        raise ContractError("cannot plan stages for an empty curriculum")
    it1 = max(1, round(schedule.stage1_iterations * schedule.scale))
    later = max(1, round(schedule.later_iterations * schedule.scale))
    hstart = min(it1, round(schedule.stage1_iterations
                            * schedule.harvest_start_fraction * schedule.scale))
    stages = [StageSpec(stage_index=1, dataset=plan.order[0], iterations=it1,
                        learning_rate=schedule.stage1_lr, crop_size=schedule.crop_size,
                        harvest_rule="loss", harvest_start=hstart, review=False)]
    for k, name in enumerate(plan.order[1:], start=2):
        stages.append(StageSpec(stage_index=k, dataset=name, iterations=later,
                                learning_rate=schedule.later_lr,
                                crop_size=schedule.crop_size,
                                harvest_rule="entropy", harvest_start=0, review=True))
    return stages


# ---------------------------------------------------------------------------
# file formats


def write_plan(plan: CurriculumPlan, path) -> None:
    path = Path(path)
    h = plan.harvest
    lines = [
        "simpleir-plan v1",
        f"decay {h.decay!r}",
        f"kappa {h.kappa!r}",
        f"top_fraction {h.top_fraction!r}",
        f"stage1_fraction_target {h.stage1_fraction_target!r}",
        f"override_fraction {'-' if h.override_fraction is None else repr(h.override_fraction)}",
        f"stages {len(plan.order)}",
    ]
    for k, name in enumerate(plan.order, start=1):
        line = f"stage {k} dataset {name} mean_entropy_diff {plan.means[name]!r}"
        if k > 1:
            quotas = " ".join(
                f"{src}:{plan.review_fraction(k, i)!r}"
                for i, src in enumerate(plan.order[:k - 1], start=1))
            line += f" review {quotas}"
        lines.append(line)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_plan(path) -> CurriculumPlan:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as e:
        raise DataError(f"cannot read plan {path}: {e}") from e
    if not lines or lines[0].split() != ["simpleir-plan", "v1"]:
        raise FormatError(f"not a v1 plan file: {path}")
    fields: dict[str, str] = {}
    order: list[str] = []
    means: dict[str, float] = {}
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "stage":
            if len(parts) < 6 or parts[2] != "dataset" or parts[4] != "mean_entropy_diff":
                raise FormatError(f"malformed stage line: {ln!r}")
            order.append(parts[3])
            means[parts[3]] = float(parts[5])
        elif len(parts) == 2:
            fields[parts[0]] = parts[1]
        else:
            raise FormatError(f"unrecognized plan line: {ln!r}")
    try:
        harvest = HarvestConfig(
            kappa=float(fields["kappa"]),
            top_fraction=float(fields["top_fraction"]),
            decay=float(fields["decay"]),
            stage1_fraction_target=float(fields["stage1_fraction_target"]),
            override_fraction=(None if fields["override_fraction"] == "-"
                               else float(fields["override_fraction"])),
        )
    except KeyError as e:
        raise FormatError(f"plan file missing field {e}") from e
    if len(order) != int(fields.get("stages", len(order))):
        raise FormatError(f"plan stage count mismatch in {path}")
    return CurriculumPlan(order=tuple(order), means=means, harvest=harvest)


def write_archive(archive: ChallengeArchive, path) -> None:
    path = Path(path)
    lines = ["simpleir-archive v1"]
    for e in archive.entries:
        lines.append(f"{e.sample_id} {e.score!r} {e.rule} {archive.source_stage}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_archive(path) -> ChallengeArchive:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as e:
        raise DataError(f"cannot read archive {path}: {e}") from e
    if not lines or lines[0].split() != ["simpleir-archive", "v1"]:
        raise FormatError(f"not a v1 archive file: {path}")
    entries: list[ArchiveEntry] = []
    stage: int | None = None
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise FormatError(f"malformed archive line: {ln!r}")
        sid, score, rule, src = parts
        if rule not in ("loss", "entropy"):
            raise FormatError(f"unknown rule tag {rule!r} in {ln!r}")
        if stage is None:
            stage = int(src)
        elif stage != int(src):
            raise FormatError(f"archive mixes source stages in {path}")
        entries.append(ArchiveEntry(sid, float(score), rule))
    if stage is None:
        stage = 1
    ordered = sorted(entries, key=lambda e: (-e.score, e.sample_id))
    return ChallengeArchive(source_stage=stage, entries=tuple(ordered))
