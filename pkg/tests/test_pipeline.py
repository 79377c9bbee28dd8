"""Optimizer, augmentation, checkpointing, evaluation, and full runs."""

import io
import math
import shutil

import numpy as np
import pytest

from simpleir.curriculum import (CurriculumPlan, HarvestConfig, LossStats,
                                 StageSpec, TrainSchedule)
from simpleir.data import ImageBuffer, Manifest, ManifestDataset, SampleRecord
from simpleir.errors import (CheckpointVersionError, ConfigurationError,
                             DataError, DimensionError, FormatError,
                             NumericError)
from simpleir.model import (TINY_PRESET, ModelConfig, init_params,
                            parameter_shapes, restore_image)
from simpleir.numerics import Tensor
from simpleir.objective import ImagePair, LossConfig, psnr
from simpleir.pipeline import (CHECKPOINT_VERSION, SampleCache, TrainState,
                               adamw_step, crop_and_flip, evaluate,
                               load_checkpoint, restore_tiled, run_stage,
                               save_checkpoint, shuffle_plan,
                               train_review_learning)

QUICK = TrainSchedule(scale=0.0001)  # 20-iteration stage 1, 1-iteration rest


def tiny_state(seed=0) -> TrainState:
    return TrainState.fresh(init_params(TINY_PRESET, seed), seed)


def ranked_plan(manifest) -> CurriculumPlan:
    from simpleir.curriculum import (DatasetDescriptor, compute_entropy_stats,
                                     rank_datasets)
    stats = [(DatasetDescriptor.from_dataset(manifest.dataset(n)),
              compute_entropy_stats(manifest, n, "train"))
             for n in manifest.names()]
    return rank_datasets(stats, HarvestConfig())


# ---------------------------------------------------------------------------
# optimizer


def test_adamw_zero_grads_no_decay_is_identity():
    state = tiny_state()
    before = {n: t.data.copy() for n, t in state.params.items()}
    grads = {n: np.zeros_like(t.data) for n, t in state.params.items()}
    adamw_step(state, grads, lr=0.1, weight_decay=0.0)
    assert state.step == 1
    for n, t in state.params.items():
        assert np.array_equal(t.data, before[n])


def test_adamw_first_step_closed_form():
    state = tiny_state()
    name = "tail.conv.bias"
    theta0 = state.params[name].data.copy()
    grads = {name: np.ones_like(theta0)}
    adamw_step(state, grads, lr=0.1, weight_decay=0.0)
    # m-hat = v-hat = 1 after bias correction: delta = -lr / (1 + eps)
    expect = theta0 - 0.1 / (1.0 + 1e-8)
    assert np.allclose(state.params[name].data, expect, atol=1e-15)
    untouched = "head.conv.weight"
    assert np.array_equal(state.first_moment[untouched],
                          np.zeros_like(state.first_moment[untouched]))


def test_adamw_decoupled_decay_shrinks_parameters():
    state = tiny_state()
    before = {n: t.data.copy() for n, t in state.params.items()}
    grads = {n: np.zeros_like(t.data) for n, t in state.params.items()}
    adamw_step(state, grads, lr=0.5, weight_decay=0.01)
    adamw_step(state, grads, lr=0.5, weight_decay=0.01)
    factor = (1.0 - 0.5 * 0.01) ** 2
    for n, t in state.params.items():
        assert np.allclose(t.data, before[n] * factor, atol=1e-15)


def test_adamw_rejects_nonfinite_before_mutating():
    state = tiny_state()
    before = {n: t.data.copy() for n, t in state.params.items()}
    grads = {n: np.zeros_like(t.data) for n, t in state.params.items()}
    grads["tail.conv.bias"] = np.full_like(grads["tail.conv.bias"], np.nan)
    with pytest.raises(NumericError, match="rejected"):
        adamw_step(state, grads, lr=0.1)
    assert state.step == 0
    for n, t in state.params.items():
        assert np.array_equal(t.data, before[n])
        assert not state.first_moment[n].any()


def test_adamw_validation():
    state = tiny_state()
    with pytest.raises(DimensionError):
        adamw_step(state, {"tail.conv.bias": np.zeros((2, 2))}, lr=0.1)
    with pytest.raises(ConfigurationError):
        adamw_step(state, {}, lr=0.0)
    with pytest.raises(ConfigurationError):
        adamw_step(state, {}, lr=0.1, beta1=1.0)
    with pytest.raises(ConfigurationError):
        adamw_step(state, {}, lr=0.1, weight_decay=-1.0)


def test_train_state_fresh_moments():
    state = tiny_state()
    assert set(state.first_moment) == set(parameter_shapes(TINY_PRESET))
    for n, t in state.params.items():
        assert state.first_moment[n].shape == t.data.shape
        assert not state.first_moment[n].any()
        assert not state.second_moment[n].any()


# ---------------------------------------------------------------------------
# augmentation


def image_pair(h=12, w=10, seed=0) -> ImagePair:
    rng = np.random.default_rng(seed)
    return ImagePair(restored=Tensor(rng.uniform(0, 1, (1, 3, h, w))),
                     reference=Tensor(rng.uniform(0, 1, (1, 3, h, w))))


def test_crop_full_size_no_flip_is_identity():
    pair = image_pair(8, 8)
    chosen = None
    for s in range(200):  # find a seed whose two flip draws are both zero
        probe = np.random.default_rng(s)
        probe.integers(0, 1)
        probe.integers(0, 1)
        if probe.integers(0, 2) == 0 and probe.integers(0, 2) == 0:
            chosen = s
            break
    assert chosen is not None
    out = crop_and_flip(pair, 8, np.random.default_rng(chosen))
    assert np.array_equal(out.restored.data, pair.restored.data)
    assert np.array_equal(out.reference.data, pair.reference.data)


def test_crop_deterministic_for_same_rng_seed():
    pair = image_pair()
    a = crop_and_flip(pair, 6, np.random.default_rng(5))
    b = crop_and_flip(pair, 6, np.random.default_rng(5))
    assert np.array_equal(a.restored.data, b.restored.data)
    assert np.array_equal(a.reference.data, b.reference.data)


def test_crop_members_stay_aligned():
    base = np.random.default_rng(1).uniform(0, 0.5, (1, 3, 12, 10))
    pair = ImagePair(restored=Tensor(base), reference=Tensor(base + 0.25))
    for s in range(10):
        out = crop_and_flip(pair, 5, np.random.default_rng(s))
        assert np.allclose(out.reference.data - out.restored.data, 0.25)


def test_crop_window_independent_of_content():
    a = crop_and_flip(image_pair(seed=2), 6, np.random.default_rng(9))
    b = crop_and_flip(image_pair(seed=3), 6, np.random.default_rng(9))
    assert a.restored.shape == b.restored.shape == (1, 3, 6, 6)


def test_crop_too_large_rejected():
    with pytest.raises(DimensionError):
        crop_and_flip(image_pair(8, 8), 9, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# checkpoints


def populated_state() -> TrainState:
    state = tiny_state(seed=3)
    rng = np.random.default_rng(4)
    for n in state.params.names():
        state.first_moment[n][...] = rng.normal(size=state.first_moment[n].shape)
        state.second_moment[n][...] = rng.uniform(size=state.second_moment[n].shape)
    state.step, state.stage_index, state.iteration = 17, 2, 5
    state.loss_stats = LossStats(window=4)
    state.loss_stats.observe("a", 1.5)
    state.loss_stats.observe("b", 2.5)
    return state


def test_checkpoint_round_trip(tmp_path):
    state = populated_state()
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, state, TINY_PRESET, ("x", "y"), {1: "ab", 2: "cd"})
    loaded, cfg, order, digests = load_checkpoint(path)
    assert cfg == TINY_PRESET
    assert order == ("x", "y")
    assert digests == {1: "ab", 2: "cd"}
    assert (loaded.step, loaded.seed) == (17, 3)
    assert (loaded.stage_index, loaded.iteration) == (2, 5)
    assert loaded.loss_stats.recent_by_sample() == {"a": 1.5, "b": 2.5}
    for n, t in state.params.items():  # live state was quantized on save
        assert np.array_equal(loaded.params[n].data, t.data)
        assert np.array_equal(loaded.first_moment[n], state.first_moment[n])
        assert np.array_equal(loaded.second_moment[n], state.second_moment[n])


def test_checkpoint_quantizes_live_state_and_is_idempotent(tmp_path):
    state = populated_state()
    high = {n: t.data.copy() for n, t in state.params.items()}
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, state, TINY_PRESET, (), {})
    for n, t in state.params.items():
        assert np.array_equal(t.data, high[n].astype(np.float32).astype(np.float64))
    first = path.read_bytes()
    save_checkpoint(path, state, TINY_PRESET, (), {})
    assert path.read_bytes() == first


def test_checkpoint_forward_equivalence(tmp_path):
    state = tiny_state(seed=6)
    img = Tensor(np.random.default_rng(7).uniform(0, 1, (1, 3, 16, 16)))
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, state, TINY_PRESET, (), {})
    live = restore_image(img, state.params, TINY_PRESET)
    loaded, cfg, _, _ = load_checkpoint(path)
    again = restore_image(img, loaded.params, cfg)
    assert np.array_equal(live.data, again.data)


def test_checkpoint_zero_model_keeps_constant_output(tmp_path):
    state = tiny_state()
    for n, t in state.params.items():
        t.data[...] = 1.0 if n.endswith(".gamma") else 0.0
    state.params["tail.conv.bias"].data[...] = 0.125  # exact in float32
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, state, TINY_PRESET, (), {})
    loaded, cfg, _, _ = load_checkpoint(path)
    img = Tensor(np.random.default_rng(8).uniform(0, 1, (1, 3, 16, 16)))
    assert np.allclose(restore_image(img, loaded.params, cfg).data, 0.125)


def test_checkpoint_error_cases(tmp_path):
    state = tiny_state()
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, state, TINY_PRESET, (), {})
    raw = path.read_bytes()

    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"JUNK" + raw[4:])
    with pytest.raises(FormatError):
        load_checkpoint(bad)

    import struct
    bad.write_bytes(raw[:4] + struct.pack("<I", CHECKPOINT_VERSION + 1) + raw[8:])
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(bad)

    bad.write_bytes(raw[:len(raw) // 2])
    with pytest.raises(DataError):
        load_checkpoint(bad)

    bad.write_bytes(raw[:4] + struct.pack("<II", CHECKPOINT_VERSION, 7)
                    + b"not json" + raw[12:])
    with pytest.raises(DataError):
        load_checkpoint(bad)

    extra = struct.pack("<I", 5) + b"ghost" + struct.pack("<II", 1, 1) + b"\x00" * 4
    bad.write_bytes(raw + extra)
    with pytest.raises(DataError, match="unexpected"):
        load_checkpoint(bad)


# ---------------------------------------------------------------------------
# tiled restoration and evaluation


def test_tiled_single_tile_matches_direct():
    cfg = ModelConfig(base_channels=8, num_fibs=1, band_kernel=3)
    params = init_params(cfg, 9)
    img = Tensor(np.random.default_rng(10).uniform(0, 1, (1, 3, 24, 20)))
    tiled = restore_tiled(img, params, cfg, tile=32, overlap=8)
    direct = restore_image(img, params, cfg)
    assert np.array_equal(tiled.data, direct.data)


def test_tiled_blend_is_exact_for_constant_output():
    cfg = ModelConfig(base_channels=8, num_fibs=0)
    params = init_params(cfg, 0)
    for n, t in params.items():
        t.data[...] = 0.0
    params["tail.conv.bias"].data[...] = 0.375
    img = Tensor(np.random.default_rng(11).uniform(0, 1, (1, 3, 50, 70)))
    out = restore_tiled(img, params, cfg, tile=24, overlap=8)
    assert out.shape == img.shape
    assert np.allclose(out.data, 0.375, atol=1e-12)


def test_tiled_deterministic_and_validated():
    cfg = ModelConfig(base_channels=8, num_fibs=1, band_kernel=3)
    params = init_params(cfg, 12)
    img = Tensor(np.random.default_rng(13).uniform(0, 1, (1, 3, 40, 28)))
    a = restore_tiled(img, params, cfg, tile=24, overlap=4)
    b = restore_tiled(img, params, cfg, tile=24, overlap=4)
    assert np.array_equal(a.data, b.data)
    assert a.shape == img.shape
    with pytest.raises(ConfigurationError):
        restore_tiled(img, params, cfg, tile=24, overlap=24)
    with pytest.raises(ConfigurationError):
        restore_tiled(img, params, cfg, tile=24, overlap=-1)


def test_evaluate_zero_model_oracle(unit_corpus):
    params = init_params(TINY_PRESET, 0)
    for n, t in params.items():
        t.data[...] = 1.0 if n.endswith(".gamma") else 0.0
    report = evaluate(unit_corpus, "blur", "test", params, TINY_PRESET,
                      LossConfig())
    from simpleir.data import load_image
    expected = []
    for record in unit_corpus.dataset("blur").test:
        _, ref_path = unit_corpus.resolve(record)
        ref = load_image(ref_path).to_tensor()
        zero = Tensor(np.zeros(tuple(ref.shape)))
        expected.append(psnr(ImagePair(restored=zero, reference=ref)))
    assert report.sample_count == 2
    assert report.psnr == pytest.approx(float(np.mean(expected)), abs=1e-12)


def test_evaluate_empty_split_is_error(tmp_path):
    from simpleir.data import save_image
    save_image(ImageBuffer(np.zeros((4, 4, 3))), tmp_path / "a.png")
    rec = SampleRecord("d:0", "a.png", "a.png", 0.1)
    ds = ManifestDataset(name="d", task="custom", train=(rec,), test=())
    manifest = Manifest(root=tmp_path, datasets=(ds,))
    with pytest.raises(DataError):
        evaluate(manifest, "d", "test", init_params(TINY_PRESET, 0),
                 TINY_PRESET, LossConfig())


# ---------------------------------------------------------------------------
# sample cache and stage runner


def test_sample_cache_lookup(unit_corpus):
    cache = SampleCache(unit_corpus)
    assert len(cache.ids()) == 4 * 6
    ids = cache.train_ids("snow")
    assert len(ids) == 6 and all(i.startswith("snow:") for i in ids)
    pair1 = cache.pair(ids[0])
    assert pair1[0].shape == (1, 3, 48, 48)
    assert cache.pair(ids[0]) is pair1  # memoized
    with pytest.raises(DataError):
        cache.pair("nowhere:0000")


def test_sample_cache_rejects_duplicate_ids(tmp_path):
    from simpleir.data import save_image
    save_image(ImageBuffer(np.zeros((4, 4, 3))), tmp_path / "a.png")
    rec = SampleRecord("dup:0", "a.png", "a.png", 0.1)
    d1 = ManifestDataset(name="one", task="custom", train=(rec,), test=())
    d2 = ManifestDataset(name="two", task="custom", train=(rec,), test=())
    with pytest.raises(DataError, match="more than one"):
        SampleCache(Manifest(root=tmp_path, datasets=(d1, d2)))


def snow_spec(iterations, harvest_start=0) -> StageSpec:
    return StageSpec(stage_index=1, dataset="snow", iterations=iterations,
                     learning_rate=2e-4, crop_size=32, harvest_rule="loss",
                     harvest_start=harvest_start, review=False)


def test_run_stage_zero_iterations(unit_corpus):
    cache = SampleCache(unit_corpus)
    state = tiny_state()
    before = state.step
    out, archive = run_stage(state, snow_spec(0), cache.train_ids("snow"),
                             cache, TINY_PRESET, LossConfig(), io.StringIO())
    assert out.step == before
    assert archive is not None and len(archive) == 0


def test_run_stage_empty_roster(unit_corpus):
    cache = SampleCache(unit_corpus)
    with pytest.raises(DataError):
        run_stage(tiny_state(), snow_spec(1), [], cache, TINY_PRESET,
                  LossConfig(), io.StringIO())


def test_run_stage_deterministic(unit_corpus):
    cache = SampleCache(unit_corpus)
    logs = []
    finals = []
    for _ in range(2):
        state = tiny_state(seed=1)
        state.loss_stats = LossStats(window=24)
        log = io.StringIO()
        state, _ = run_stage(state, snow_spec(5), cache.train_ids("snow"),
                             cache, TINY_PRESET, LossConfig(), log)
        logs.append(log.getvalue())
        finals.append({n: t.data.copy() for n, t in state.params.items()})
    assert logs[0] == logs[1] and logs[0].count("\n") == 5
    for n in finals[0]:
        assert np.array_equal(finals[0][n], finals[1][n])


def test_run_stage_log_format(unit_corpus):
    import re
    cache = SampleCache(unit_corpus)
    state = tiny_state()
    state.loss_stats = LossStats(window=24)
    log = io.StringIO()
    run_stage(state, snow_spec(3), cache.train_ids("snow"), cache,
              TINY_PRESET, LossConfig(), log)
    pattern = re.compile(r"^iter (\d+) stage 1 sample snow:\d{4} loss "
                         r"[0-9.e+-]+$")
    lines = log.getvalue().splitlines()
    assert [int(pattern.match(ln).group(1)) for ln in lines] == [1, 2, 3]


def test_run_stage_stop_before_start(unit_corpus):
    cache = SampleCache(unit_corpus)
    state = tiny_state()
    state.step = 10
    out, archive = run_stage(state, snow_spec(5), cache.train_ids("snow"),
                             cache, TINY_PRESET, LossConfig(), io.StringIO(),
                             stop_after=10)
    assert archive is None and out.step == 10


def test_shuffle_plan_permutes_order():
    plan = CurriculumPlan(order=("a", "b", "c", "d"),
                          means={n: 0.1 for n in "abcd"},
                          harvest=HarvestConfig())
    seen = set()
    for seed in range(6):
        shuffled = shuffle_plan(plan, seed)
        assert sorted(shuffled.order) == ["a", "b", "c", "d"]
        assert shuffled.means == plan.means
        assert shuffled.order == shuffle_plan(plan, seed).order
        seen.add(shuffled.order)
    assert len(seen) > 1


# ---------------------------------------------------------------------------
# end-to-end runs


@pytest.fixture(scope="module")
def quick_run(unit_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "a"
    plan = ranked_plan(unit_corpus)
    train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET, LossConfig(),
                          out, seed=0)
    return out, plan


def run_files(out):
    names = ["plan.txt", "run.txt", "log.txt", "metrics.txt", "latest.ckpt",
             "final.ckpt"]
    names += [f"stage{k}.ckpt" for k in range(1, 5)]
    names += [f"archive_stage{k}.txt" for k in range(1, 5)]
    return names


def test_full_run_file_contract(quick_run, unit_corpus):
    out, plan = quick_run
    for name in run_files(out):
        assert (out / name).exists(), name
    assert (out / "final.ckpt").read_bytes() == (out / "stage4.ckpt").read_bytes()
    lines = (out / "metrics.txt").read_text().splitlines()
    assert len(lines) == 16  # 4 stages x 4 datasets
    grid = {(ln.split()[2], ln.split()[4]) for ln in lines}
    assert grid == {(str(k), n) for k in range(1, 5)
                    for n in unit_corpus.names()}
    log_lines = (out / "log.txt").read_text().splitlines()
    assert len(log_lines) == 20 + 3  # scaled stage-1 budget plus 3 later stages
    from simpleir.curriculum import read_plan
    assert read_plan(out / "plan.txt") == plan


def test_full_run_byte_reproducible(quick_run, unit_corpus, tmp_path):
    out_a, plan = quick_run
    out_b = tmp_path / "b"
    train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET, LossConfig(),
                          out_b, seed=0)
    for name in run_files(out_a):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_stop_and_resume_matches_uninterrupted(quick_run, unit_corpus, tmp_path):
    plan = ranked_plan(unit_corpus)
    base = tmp_path / "base"
    train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET, LossConfig(),
                          base, seed=0, checkpoint_every=5)
    part = tmp_path / "part"
    train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET, LossConfig(),
                          part, seed=0, checkpoint_every=5, stop_after=10)
    assert not (part / "stage1.ckpt").exists()  # stopped inside stage 1
    train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET, LossConfig(),
                          part, seed=0, checkpoint_every=5, resume=True)
    for name in run_files(base):
        assert (base / name).read_bytes() == (part / name).read_bytes(), name


def test_resume_guards(quick_run, unit_corpus, tmp_path):
    out, plan = quick_run
    with pytest.raises(DataError, match="nothing to resume"):
        train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET,
                              LossConfig(), tmp_path / "void", seed=0,
                              resume=True)
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    with pytest.raises(ConfigurationError, match="seed"):
        train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET,
                              LossConfig(), copy, seed=1, resume=True)
    other_cfg = ModelConfig(base_channels=8, num_fibs=1, band_kernel=5)
    with pytest.raises(ConfigurationError, match="config"):
        train_review_learning(unit_corpus, plan, QUICK, other_cfg,
                              LossConfig(), copy, seed=0, resume=True)
    with pytest.raises(DataError, match="plan order"):
        train_review_learning(unit_corpus, shuffle_plan(plan, 1), QUICK,
                              TINY_PRESET, LossConfig(), copy, seed=0,
                              resume=True)
    with open(copy / "archive_stage1.txt", "a", encoding="utf-8") as f:
        f.write("tamper 9.9 loss 1\n")
    with pytest.raises(DataError, match="modified"):
        train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET,
                              LossConfig(), copy, seed=0, resume=True)
    (copy / "archive_stage1.txt").unlink()
    with pytest.raises(DataError, match="missing archive"):
        train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET,
                              LossConfig(), copy, seed=0, resume=True)


def test_run_argument_validation(unit_corpus):
    plan = ranked_plan(unit_corpus)
    args = (unit_corpus, plan, QUICK, TINY_PRESET, LossConfig())
    with pytest.raises(ConfigurationError):
        train_review_learning(*args, "x", seed=0, review_fraction=1.5)
    with pytest.raises(ConfigurationError):
        train_review_learning(*args, "x", seed=0, checkpoint_every=0)
    with pytest.raises(ConfigurationError):
        train_review_learning(*args, "x", seed=0, stop_after=0)
    ghost = CurriculumPlan(order=("ghost",), means={"ghost": 0.1},
                           harvest=HarvestConfig())
    with pytest.raises(DataError, match="unknown dataset"):
        train_review_learning(unit_corpus, ghost, QUICK, TINY_PRESET,
                              LossConfig(), "x", seed=0)


def test_numeric_failure_names_last_checkpoint(unit_corpus, tmp_path,
                                               monkeypatch):
    import simpleir.pipeline.runner as runner
    plan = ranked_plan(unit_corpus)
    calls = {"n": 0}
    real = runner.adamw_step

    def exploding(state, grads, lr, **kw):
        calls["n"] += 1
        if calls["n"] >= 3:
            raise NumericError("synthetic blow-up")
        return real(state, grads, lr, **kw)

    monkeypatch.setattr(runner, "adamw_step", exploding)
    with pytest.raises(NumericError, match=r"latest\.ckpt"):
        train_review_learning(unit_corpus, plan, QUICK, TINY_PRESET,
                              LossConfig(), tmp_path / "boom", seed=0,
                              checkpoint_every=1)
    assert (tmp_path / "boom" / "latest.ckpt").exists()


def test_numeric_failure_without_checkpoint(unit_corpus, tmp_path,
                                            monkeypatch):
    import simpleir.pipeline.runner as runner

    def exploding(state, grads, lr, **kw):
        raise NumericError("synthetic blow-up")

    monkeypatch.setattr(runner, "adamw_step", exploding)
    with pytest.raises(NumericError, match="none saved"):
        train_review_learning(unit_corpus, ranked_plan(unit_corpus), QUICK,
                              TINY_PRESET, LossConfig(), tmp_path / "boom2",
                              seed=0)
