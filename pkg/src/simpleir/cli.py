"""Command-line interface: rank, train, harvest, eval, infer, report, gen.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Commands validate their inputs before writing anything, so a usage
error never leaves partial output files.  ``SIMPLEIR_OUT_DIR`` supplies
the default output directory where ``--out`` names one.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict
from pathlib import Path

from .curriculum import (
    DatasetDescriptor,
    HarvestConfig,
    TrainSchedule,
    compute_entropy_stats,
    harvest_by_entropy,
    harvest_by_loss,
    rank_datasets,
    read_plan,
    write_archive,
    write_plan,
)
from .data import DEGRADATION_KINDS, Manifest, build_manifest, load_image, save_image
from .errors import (
    CheckpointVersionError,
    ConfigurationError,
    ContractError,
    DataError,
    DimensionError,
    NumericError,
)
from .model import DESK_PRESET, FULL_PRESET, TINY_PRESET, ModelConfig
from .objective import LossConfig
from .pipeline import (
    evaluate,
    load_checkpoint,
    restore_tiled,
    shuffle_plan,
    train_review_learning,
)

__all__ = ["main", "read_model_config", "write_model_config"]

_PRESETS = {"tiny": TINY_PRESET, "desk": DESK_PRESET, "full": FULL_PRESET}


def write_model_config(cfg: ModelConfig, path) -> None:
    lines = ["simpleir-config v1"]
    lines += [f"{k} {v}" for k, v in asdict(cfg).items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_model_config(path) -> ModelConfig:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "simpleir-config v1":
        raise DataError(f"{path} is not a model config file")
    fields = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        fields[key] = int(value)
    try:
        return ModelConfig(**fields)
    except TypeError as e:
        raise DataError(f"bad model config {path}: {e}") from e


def _model_config(args) -> ModelConfig:
    if getattr(args, "config", None):
        return read_model_config(args.config)
    return _PRESETS[args.preset]


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("SIMPLEIR_OUT_DIR")
    if not out:
        raise ConfigurationError(
            "no output directory: pass --out or set SIMPLEIR_OUT_DIR")
    return Path(out)


def _harvest_config(args) -> HarvestConfig:
    return HarvestConfig(kappa=args.kappa, top_fraction=args.top_fraction,
                         decay=args.decay,
                         override_fraction=args.override_fraction)


def _ranked_plan(manifest: Manifest, harvest: HarvestConfig):
    stats = [(DatasetDescriptor.from_dataset(manifest.dataset(name)),
              compute_entropy_stats(manifest, name))
             for name in manifest.names()]
    return rank_datasets(stats, harvest)


def _completed_stages(state) -> int:
    """Stages fully finished by a checkpoint: the position points at the
    next stage once a stage wraps up (iteration resets to 0)."""
    return state.stage_index - 1 if state.iteration == 0 else state.stage_index


# ---------------------------------------------------------------------------
# commands


def _cmd_gen(args) -> int:
    out = _out_dir(args)
    kinds = args.kinds.split(",") if args.kinds else list(DEGRADATION_KINDS)
    if "=" in args.train_count:
        counts: dict[str, int] | int = {}
        for part in args.train_count.split(","):
            kind, _, n = part.partition("=")
            if not n:
                raise ConfigurationError(
                    f"bad --train-count entry {part!r}; want kind=count")
            counts[kind] = int(n)
        missing = [k for k in kinds if k not in counts]
        if missing:
            raise ConfigurationError(f"--train-count misses kinds: {missing}")
    else:
        counts = int(args.train_count)
    manifest = build_manifest(out, kinds, train_count=counts,
                              test_count=args.test_count, size=args.size,
                              seed=args.seed)
    total = sum(len(d.train) + len(d.test) for d in manifest.datasets)
    print(f"wrote {total} sample pairs across {len(manifest.datasets)} "
          f"datasets under {out}")
    return 0


def _cmd_rank(args) -> int:
    manifest = Manifest.load(args.manifest)
    out = _out_dir(args)
    harvest = _harvest_config(args)
    stats = [(DatasetDescriptor.from_dataset(manifest.dataset(name)),
              compute_entropy_stats(manifest, name))
             for name in manifest.names()]
    plan = rank_datasets(stats, harvest)
    out.mkdir(parents=True, exist_ok=True)
    write_plan(plan, out / "plan.txt")
    by_name = {d.name: s for d, s in stats}
    rows = ["dataset,bin_start,bin_end,count"]
    for name in plan.order:
        s = by_name[name]
        for b in range(len(s.counts)):
            rows.append(f"{name},{s.bin_edges[b]!r},{s.bin_edges[b + 1]!r},"
                        f"{s.counts[b]}")
    (out / "hist.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    for name in plan.order:
        print(f"{name} mean_entropy_diff {plan.means[name]!r}")
    print(f"plan written to {out / 'plan.txt'}")
    return 0


def _cmd_train(args) -> int:
    manifest = Manifest.load(args.manifest)
    out = _out_dir(args)
    loss_cfg = LossConfig(freq_weight=args.freq_weight)
    schedule = TrainSchedule(scale=args.scale, crop_size=args.crop)
    if args.resume:
        plan_path = out / "plan.txt"
        if not plan_path.exists():
            raise DataError(f"cannot resume: {plan_path} does not exist")
        plan = read_plan(plan_path)
        state, cfg, _, _ = load_checkpoint(out / "latest.ckpt")
        seed = state.seed
    else:
        cfg = _model_config(args)
        seed = args.seed
        if args.plan:
            plan = read_plan(args.plan)
        else:
            plan = _ranked_plan(manifest, _harvest_config(args))
        if args.order == "random":
            plan = shuffle_plan(plan, seed)
    train_review_learning(manifest, plan, schedule, cfg, loss_cfg, out, seed,
                          review_fraction=args.review_fraction,
                          checkpoint_every=args.checkpoint_every,
                          stop_after=args.stop_after, resume=args.resume)
    if (out / "final.ckpt").exists():
        print(f"run complete: {out}")
    else:
        print(f"run stopped early: resume with --resume --out {out}")
    return 0


def _cmd_harvest(args) -> int:
    state, _, _, _ = load_checkpoint(args.checkpoint)
    manifest = Manifest.load(args.manifest)
    if args.dataset not in manifest.names():
        raise DataError(f"manifest has no dataset {args.dataset!r}")
    stage = max(1, _completed_stages(state))
    if args.rule == "loss":
        if state.loss_stats is None:
            raise ContractError(
                "checkpoint holds no loss statistics; train a loss-rule stage "
                "first or use --rule entropy")
        archive = harvest_by_loss(state.loss_stats, args.kappa,
                                  source_stage=stage, fraction=args.fraction)
    else:
        stats = compute_entropy_stats(manifest, args.dataset)
        fraction = 0.2 if args.fraction is None else args.fraction
        archive = harvest_by_entropy(stats, fraction, source_stage=stage)
    write_archive(archive, args.archive_out)
    print(f"archived {len(archive)} samples to {args.archive_out}")
    return 0


def _cmd_eval(args) -> int:
    state, cfg, _, _ = load_checkpoint(args.checkpoint)
    manifest = Manifest.load(args.manifest)
    names = [args.dataset] if args.dataset else manifest.names()
    stage = _completed_stages(state)
    for name in names:
        report = evaluate(manifest, name, args.split, state.params, cfg,
                          LossConfig(freq_weight=args.freq_weight))
        print(report.machine_line(stage, name))
    return 0


def _cmd_infer(args) -> int:
    state, cfg, _, _ = load_checkpoint(args.checkpoint)
    image = load_image(args.image_in)
    restored = restore_tiled(image.to_tensor(), state.params, cfg,
                             tile=args.tile, overlap=args.overlap)
    from .data import ImageBuffer
    save_image(ImageBuffer.from_tensor(restored), args.image_out)
    print(f"restored {args.image_in} -> {args.image_out}")
    return 0


def _cmd_report(args) -> int:
    metrics = Path(args.run) / "metrics.txt"
    if not metrics.exists():
        raise DataError(f"no metrics found at {metrics}")
    rows = []
    for line in metrics.read_text(encoding="utf-8").splitlines():
        f = line.split()
        if len(f) != 13 or f[0] != "metric":
            raise DataError(f"unparseable metric line: {line!r}")
        rows.append((int(f[2]), f[4], float(f[6]), float(f[8]), float(f[10])))
    stages = sorted({r[0] for r in rows})
    names = list(dict.fromkeys(r[1] for r in rows))
    cell = {(r[0], r[1]): r for r in rows}
    width = max(len(n) for n in names) + 2
    for label, pick in (("psnr", 2), ("ssim", 3), ("loss", 4)):
        print(label)
        print("stage  " + "".join(n.ljust(max(width, 12)) for n in names))
        for s in stages:
            vals = []
            for n in names:
                r = cell.get((s, n))
                vals.append("-" if r is None else f"{r[pick]:.6f}")
            print(f"{s:<7d}" + "".join(v.ljust(max(width, 12)) for v in vals))
        print()
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_harvest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=float, default=1.0,
                   help="loss-rule threshold is mean + kappa * std")
    p.add_argument("--top-fraction", type=float, default=0.2,
                   help="entropy-rule harvest share")
    p.add_argument("--decay", type=float, default=0.5,
                   help="per-stage review quota decay")
    p.add_argument("--override-fraction", type=float, default=None,
                   help="replace both harvest rules with a fixed top cut")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simpleir",
        description="Curriculum-trained image restoration at desk scale")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic degradation corpus")
    p.add_argument("--out", help="corpus directory (or SIMPLEIR_OUT_DIR)")
    p.add_argument("--kinds", help="comma-separated degradation kinds")
    p.add_argument("--train-count", default="30",
                   help="samples per kind, or kind=count pairs")
    p.add_argument("--test-count", type=int, default=3)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("rank", help="rank datasets by mean entropy difference")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output directory (or SIMPLEIR_OUT_DIR)")
    _add_harvest_flags(p)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("train", help="run the staged curriculum")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="run directory (or SIMPLEIR_OUT_DIR)")
    p.add_argument("--plan", help="plan file from rank (default: rank now)")
    p.add_argument("--order", choices=("ranked", "random"), default="ranked")
    p.add_argument("--preset", choices=sorted(_PRESETS), default="desk")
    p.add_argument("--config", help="model config file overriding --preset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=0.01,
                   help="multiplier on all iteration budgets")
    p.add_argument("--crop", type=int, default=32)
    p.add_argument("--freq-weight", type=float, default=0.1)
    p.add_argument("--review-fraction", type=float, default=None,
                   help="override review decay; 0 disables review")
    p.add_argument("--checkpoint-every", type=int, default=None,
                   help="save latest.ckpt every N optimizer steps")
    p.add_argument("--stop-after", type=int, default=None,
                   help="halt after N optimizer steps (resume later)")
    p.add_argument("--resume", action="store_true",
                   help="continue the run already in --out")
    _add_harvest_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("harvest", help="build a challenge archive")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--rule", choices=("loss", "entropy"), default="loss")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--archive-out", required=True, metavar="FILE")
    p.set_defaults(func=_cmd_harvest)

    p = sub.add_parser("eval", help="metrics for a checkpoint on a test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--dataset", help="one dataset (default: all)")
    p.add_argument("--split", default="test")
    p.add_argument("--freq-weight", type=float, default=0.1)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("infer", help="restore one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="image_in", required=True)
    p.add_argument("--out", dest="image_out", required=True)
    p.add_argument("--tile", type=int, default=256)
    p.add_argument("--overlap", type=int, default=16)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("report", help="stage x dataset metric tables for a run")
    p.add_argument("--run", required=True, help="run directory with metrics.txt")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except (ConfigurationError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DataError, DimensionError, CheckpointVersionError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
