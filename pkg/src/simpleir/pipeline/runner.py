"""Stage training loop and whole-run orchestration.

A run directory holds: plan.txt, run.txt, log.txt, metrics.txt, one
stage{k}.ckpt and archive_stage{k}.txt per finished stage, latest.ckpt,
and final.ckpt (a byte copy of the last stage checkpoint).  Every file
is byte-reproducible given the same manifest, plan, and flags.

Each training iteration draws its randomness from a counter-based
stream seeded by (domain, seed, stage, iteration), so a resumed run
replays the identical sample picks, crops, and flips.  Checkpoints
quantize the live state on save; resuming therefore matches the
uninterrupted trajectory exactly as long as both runs save at the same
optimizer steps (use the same --checkpoint-every, and stop on one of
its multiples).
"""

from __future__ import annotations

import shutil
from dataclasses import asdict
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from ..curriculum import (
    ChallengeArchive,
    CurriculumPlan,
    LossStats,
    StageSpec,
    TrainSchedule,
    compute_entropy_stats,
    harvest_by_entropy,
    harvest_by_loss,
    plan_stages,
    read_archive,
    review_mix,
    write_archive,
    write_plan,
)
from ..data import Manifest, SampleRecord, load_image
from ..errors import ConfigurationError, DataError, NumericError
from ..model import ModelConfig, init_params, simpleir_forward
from ..numerics import DiffGraph, Tensor, backward
from ..objective import ImagePair, LossConfig, restoration_loss
from .augment import crop_and_flip
from .checkpoint import file_digest, load_checkpoint, save_checkpoint
from .evaluate import evaluate
from .optimizer import TrainState, adamw_step

__all__ = ["SampleCache", "run_stage", "train_review_learning", "shuffle_plan"]

_DOM_TRAIN = 140
_DOM_ORDER = 150


class SampleCache:
    """Manifest-wide training-sample lookup with memoized decoded pairs.

    Sample ids must be unique across datasets because harvest archives
    reference them without qualification.
    """

    def __init__(self, manifest: Manifest):
        self.manifest = manifest
        self._records: dict[str, SampleRecord] = {}
        for name in manifest.names():
            for record in manifest.dataset(name).split("train"):
                if record.sample_id in self._records:
                    raise DataError(
                        f"sample id {record.sample_id!r} appears in more than "
                        f"one dataset")
                self._records[record.sample_id] = record
        self._pairs: dict[str, tuple[Tensor, Tensor]] = {}

    def ids(self) -> set[str]:
        return set(self._records)

    def train_ids(self, dataset: str) -> list[str]:
        return [r.sample_id for r in self.manifest.dataset(dataset).split("train")]

    def pair(self, sample_id: str) -> tuple[Tensor, Tensor]:
        """(degraded, reference) tensors for one training sample."""
        got = self._pairs.get(sample_id)
        if got is None:
            record = self._records.get(sample_id)
            if record is None:
                raise DataError(f"unknown sample id {sample_id!r}")
            deg_path, ref_path = self.manifest.resolve(record)
            got = (load_image(deg_path).to_tensor(), load_image(ref_path).to_tensor())
            self._pairs[sample_id] = got
        return got


def run_stage(state: TrainState, spec: StageSpec, roster: list[str],
              cache: SampleCache, cfg: ModelConfig, loss_cfg: LossConfig,
              log: TextIO, *, checkpoint_every: int | None = None,
              stop_after: int | None = None,
              save_latest: Callable[[], None] | None = None,
              override_fraction: float | None = None,
              kappa: float = 1.0, top_fraction: float = 0.2,
              ) -> tuple[TrainState, ChallengeArchive | None]:
    """Train one stage from ``state.iteration`` onward and harvest.

    Returns the state and the stage's challenge archive; the archive is
    None when ``stop_after`` global optimizer steps were reached first
    (the caller resumes from latest.ckpt later).
    """
    if not roster:
        raise DataError(f"stage {spec.stage_index} has an empty training roster")
    if stop_after is not None and state.step >= stop_after:
        return state, None
    empty = ChallengeArchive(source_stage=spec.stage_index, entries=())
    if spec.iterations == 0:
        return state, empty
    params = state.params
    for it in range(state.iteration, spec.iterations):
        rng = np.random.default_rng(np.random.SeedSequence(
            [_DOM_TRAIN, state.seed, spec.stage_index, it]))
        sample_id = roster[int(rng.integers(0, len(roster)))]
        degraded, reference = cache.pair(sample_id)
        pair = crop_and_flip(ImagePair(restored=degraded, reference=reference),
                             spec.crop_size, rng)
        with DiffGraph() as graph:
            trace = simpleir_forward(pair.restored, params, cfg)
            loss = restoration_loss(
                ImagePair(restored=trace.restored, reference=pair.reference),
                loss_cfg)
        grads = backward(graph, loss)
        named = {name: grads[t] for name, t in params.items() if t in grads}
        adamw_step(state, named, spec.learning_rate)
        state.iteration = it + 1
        value = loss.item()
        if (spec.harvest_rule == "loss" and it >= spec.harvest_start
                and state.loss_stats is not None):
            state.loss_stats.observe(sample_id, value)
        log.write(f"iter {it + 1} stage {spec.stage_index} sample {sample_id} "
                  f"loss {value!r}\n")
        hit_checkpoint = bool(checkpoint_every) and state.step % checkpoint_every == 0
        hit_stop = stop_after is not None and state.step >= stop_after
        if (hit_checkpoint or hit_stop) and save_latest is not None:
            save_latest()
        if hit_stop:
            return state, None

    if spec.harvest_rule == "loss":
        stats = state.loss_stats
        if stats is None or stats.count < 2:
            return state, empty
        return state, harvest_by_loss(stats, kappa, source_stage=spec.stage_index,
                                      fraction=override_fraction)
    if spec.harvest_rule == "entropy":
        estats = compute_entropy_stats(cache.manifest, spec.dataset, "train")
        fraction = top_fraction if override_fraction is None else override_fraction
        return state, harvest_by_entropy(estats, fraction,
                                         source_stage=spec.stage_index)
    return state, empty


def shuffle_plan(plan: CurriculumPlan, seed: int) -> CurriculumPlan:
    """The same plan with a seed-determined random dataset order, for
    baseline comparisons against the entropy ranking."""
    rng = np.random.default_rng(np.random.SeedSequence([_DOM_ORDER, int(seed)]))
    order = tuple(plan.order[i] for i in rng.permutation(len(plan.order)))
    return CurriculumPlan(order=order, means=dict(plan.means), harvest=plan.harvest)


def _write_run_record(path: Path, cfg: ModelConfig, schedule: TrainSchedule,
                      loss_cfg: LossConfig, seed: int,
                      review_fraction: float | None,
                      checkpoint_every: int | None, order: tuple[str, ...]) -> None:
    lines = [
        "simpleir-run v1",
        f"seed {seed}",
        f"scale {schedule.scale!r}",
        f"crop {schedule.crop_size}",
        f"freq_weight {loss_cfg.freq_weight!r}",
        "review " + ("-" if review_fraction is None else repr(review_fraction)),
        "checkpoint_every " + ("-" if checkpoint_every is None
                               else str(checkpoint_every)),
        "config " + " ".join(f"{k} {v}" for k, v in asdict(cfg).items()),
        "order " + " ".join(order),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def train_review_learning(manifest: Manifest, plan: CurriculumPlan,
                          schedule: TrainSchedule, cfg: ModelConfig,
                          loss_cfg: LossConfig, out_dir, seed: int, *,
                          review_fraction: float | None = None,
                          checkpoint_every: int | None = None,
                          stop_after: int | None = None,
                          resume: bool = False) -> Path:
    """Run the staged curriculum end to end, or continue a stopped run.

    ``review_fraction`` overrides the plan's review decay (0 disables
    review entirely).  A resumed run must be given the same manifest,
    plan, and flags as the original; seed, model config, and plan order
    are cross-checked against the checkpoint.
    """
    if review_fraction is not None and not (0.0 <= review_fraction <= 1.0):
        raise ConfigurationError(
            f"review fraction must be in [0, 1], got {review_fraction}")
    if checkpoint_every is not None and checkpoint_every < 1:
        raise ConfigurationError("checkpoint interval must be >= 1")
    if stop_after is not None and stop_after < 1:
        raise ConfigurationError("stop_after must be >= 1")

    out = Path(out_dir)
    cache = SampleCache(manifest)
    for name in plan.order:
        if name not in manifest.names():
            raise DataError(f"plan references unknown dataset {name!r}")

    archives: dict[int, ChallengeArchive] = {}
    digests: dict[int, str] = {}
    if resume:
        ckpt = out / "latest.ckpt"
        if not ckpt.exists():
            raise DataError(f"nothing to resume: {ckpt} does not exist")
        state, ckpt_cfg, plan_order, digests = load_checkpoint(ckpt)
        if ckpt_cfg != cfg:
            raise ConfigurationError(
                "model config differs from the checkpoint being resumed")
        if plan_order != plan.order:
            raise DataError("plan order differs from the checkpoint being resumed")
        if state.seed != int(seed):
            raise ConfigurationError(
                f"seed {seed} differs from the checkpoint seed {state.seed}")
        for k, want in digests.items():
            apath = out / f"archive_stage{k}.txt"
            if not apath.exists():
                raise DataError(f"missing archive file for stage {k}: {apath}")
            have = file_digest(apath)
            if have != want:
                raise DataError(
                    f"archive file for stage {k} was modified since the "
                    f"checkpoint was written")
            archives[k] = read_archive(apath)
        log = open(out / "log.txt", "a", encoding="utf-8")
        metrics = open(out / "metrics.txt", "a", encoding="utf-8")
    else:
        out.mkdir(parents=True, exist_ok=True)
        state = TrainState.fresh(init_params(cfg, seed), seed)
        write_plan(plan, out / "plan.txt")
        _write_run_record(out / "run.txt", cfg, schedule, loss_cfg, seed,
                          review_fraction, checkpoint_every, plan.order)
        log = open(out / "log.txt", "w", encoding="utf-8")
        metrics = open(out / "metrics.txt", "w", encoding="utf-8")

    stages = plan_stages(plan, plan.harvest, schedule)
    decay = plan.harvest.decay if review_fraction is None else review_fraction

    def save_latest():
        save_checkpoint(out / "latest.ckpt", state, cfg, plan.order, digests)

    with log, metrics:
        for spec in stages:
            if spec.stage_index < state.stage_index:
                continue
            current = cache.train_ids(spec.dataset)
            if not current:
                raise DataError(f"dataset {spec.dataset!r} has no training samples")
            if spec.review:
                prior = [archives[k] for k in sorted(archives)
                         if k < spec.stage_index]
                roster = review_mix(current, prior, spec.stage_index, decay,
                                    state.seed, known_ids=cache.ids())
            else:
                roster = list(current)
            if state.iteration == 0:
                state.loss_stats = (LossStats(schedule.loss_window(len(roster)))
                                    if spec.harvest_rule == "loss" else None)
            try:
                state, archive = run_stage(
                    state, spec, roster, cache, cfg, loss_cfg, log,
                    checkpoint_every=checkpoint_every, stop_after=stop_after,
                    save_latest=save_latest,
                    override_fraction=plan.harvest.override_fraction,
                    kappa=plan.harvest.kappa,
                    top_fraction=plan.harvest.top_fraction)
            except NumericError as e:
                ckpt = out / "latest.ckpt"
                where = ckpt if ckpt.exists() else "none saved"
                raise NumericError(f"{e} (last good checkpoint: {where})") from e
            if archive is None:
                return out
            archives[spec.stage_index] = archive
            apath = out / f"archive_stage{spec.stage_index}.txt"
            write_archive(archive, apath)
            digests[spec.stage_index] = file_digest(apath)
            state.stage_index = spec.stage_index + 1
            state.iteration = 0
            state.loss_stats = None
            stage_ckpt = out / f"stage{spec.stage_index}.ckpt"
            save_checkpoint(stage_ckpt, state, cfg, plan.order, digests)
            shutil.copyfile(stage_ckpt, out / "latest.ckpt")
            for name in manifest.names():
                report = evaluate(manifest, name, "test", state.params, cfg,
                                  loss_cfg)
                metrics.write(report.machine_line(spec.stage_index, name) + "\n")
            metrics.flush()

    shutil.copyfile(out / f"stage{stages[-1].stage_index}.ckpt", out / "final.ckpt")
    return out
