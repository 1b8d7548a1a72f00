"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The directional comparisons train three seeds on the synthetic benchmark
and evaluate three prompt-selection protocols; everything is seeded and
deterministic. Run with plain `pytest` (the training fixture is module
scoped and reused across the two ablation criteria).
"""

import time

import numpy as np
import pytest

import seqclick.autograd as ag
from seqclick import checkpoint as ckpt
from seqclick.clicksim import Click, iou, next_click, render_click_maps
from seqclick.config import DataConfig, EvalProtocol, ModelConfig, TrainConfig
from seqclick.data import SceneDataset, build_sequences
from seqclick.engine import PromptItem, predict, train
from seqclick.evaluation import evaluate, noc
from seqclick.gradchecks import run_layer_gradchecks
from seqclick.heads import FocalParams, focal_loss
from seqclick.model import SegModel
from seqclick.nn import TokenGrid
from seqclick.spt import SequenceTransformer
from seqclick.tps import Embedding, select_topk
from tests.conftest import tiny_model_config
from tests.test_clicksim import (
    disk_pixels_oracle,
    iou_oracle,
    next_click_oracle,
)
from tests.test_tps import brute_force_topk

# Budget for the directional ablations: 3 seeds x (train + 3 protocol arms).
ABLATION_SEEDS = (0, 1, 2)
ABLATION_TRAIN = dict(epochs=30, steps_per_epoch=500, batch_size=1, prompt_len=5, max_clicks=3)
ABLATION_EVAL = dict(max_clicks=10, iou_target=0.95, miou_clicks=5, scenes_per_category=8)


def announce(capsys, name: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# -- criterion: gradient suite ---------------------------------------------------


def test_gradient_suite(capsys):
    start = time.time()
    reports = run_layer_gradchecks(eps=1e-5, tol=1e-4)
    elapsed = time.time() - start
    worst = max(rep.max_rel_err for rep in reports.values())
    ok = all(rep.passed for rep in reports.values()) and elapsed < 120
    announce(
        capsys,
        "gradient-suite",
        ok,
        f"{len(reports)} layers, max rel err {worst:.2e} (tol 1e-4, eps 1e-5), {elapsed:.1f}s < 120s",
    )
    assert elapsed < 120
    for name, rep in reports.items():
        assert rep.passed, f"{name}: {rep.max_rel_err:.3e} > 1e-4 at {rep.worst_param}"


# -- criterion: causality suite ---------------------------------------------------


def test_causality_suite(capsys):
    start = time.time()
    cfg = ModelConfig(image_size=64, patch=8, dim=64, depth=1, spt_depth=2, heads=4, max_seq_len=6)
    spt = SequenceTransformer(cfg, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    grid = cfg.grid

    checked = 0
    for length in range(2, 6):
        base = [rng.normal(size=(cfg.tokens_per_image, cfg.dim)).astype(np.float32) for _ in range(length)]
        ref = spt([TokenGrid(ag.tensor(b), grid) for b in base])
        ref_outs = [t.tokens.data.copy() for t in ref.transformed]

        # perturbing any later item leaves earlier slots bit-identical
        for j in range(1, length):
            for _ in range(2):
                mutated = [b.copy() for b in base]
                mutated[j] = rng.normal(size=mutated[j].shape).astype(np.float32) * 7.0
                out = spt([TokenGrid(ag.tensor(m), grid) for m in mutated])
                for i in range(j):
                    assert np.array_equal(out.transformed[i].tokens.data, ref_outs[i]), (
                        f"len={length} perturbed={j} slot={i}"
                    )
                    checked += 1

        # prefix consistency, bitwise
        for plen in range(1, length + 1):
            prefix = spt([TokenGrid(ag.tensor(b), grid) for b in base[:plen]])
            for i in range(plen):
                assert np.array_equal(prefix.transformed[i].tokens.data, ref_outs[i])
                checked += 1

    elapsed = time.time() - start
    ok = elapsed < 60
    announce(capsys, "causality-suite", ok, f"{checked} bitwise slot comparisons, {elapsed:.1f}s < 60s")
    assert ok


# -- criterion: loss oracle --------------------------------------------------------


def test_loss_oracle(capsys):
    from tests.test_heads import pred_from_probs

    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        p = rng.uniform(0.02, 0.98, size=(1, 6, 6))
        gt = (rng.random((1, 6, 6)) < 0.5).astype(np.float64)
        loss = focal_loss(pred_from_probs(p), gt, FocalParams(alpha=1.0, gamma=0.0)).item()
        bce = float(np.mean(-(gt * np.log(p) + (1 - gt) * np.log(1 - p))))
        worst = max(worst, abs(loss - bce))
    assert worst <= 1e-6

    fg = focal_loss(pred_from_probs([[[0.5]]]), np.ones((1, 1, 1)), FocalParams(1.0, 2.0)).item()
    bg = focal_loss(pred_from_probs([[[0.1]]]), np.zeros((1, 1, 1)), FocalParams(1.0, 2.0)).item()
    assert fg == pytest.approx(0.173287, abs=5e-7)
    assert bg == pytest.approx(0.001054, abs=5e-7)
    announce(
        capsys,
        "loss-oracle",
        True,
        f"gamma=0 vs BCE max |diff| {worst:.2e} <= 1e-6 on 100 instances; scalars {fg:.6f}, {bg:.6f}",
    )


# -- criterion: metric oracles -------------------------------------------------------


def test_metric_oracles(capsys):
    rng = np.random.default_rng(3)
    n_cases = 120

    for _ in range(n_cases):
        a = rng.random((7, 7)) < 0.4
        b = rng.random((7, 7)) < 0.4
        assert iou(a, b) == pytest.approx(iou_oracle(a, b), abs=1e-12)

    for _ in range(n_cases):
        n = int(rng.integers(1, 12))
        ious = rng.random(n).tolist()
        thr = float(rng.random())
        expected = next((i + 1 for i, v in enumerate(ious) if v >= thr), 20)
        assert noc(ious, thr, 20) == expected

    for _ in range(n_cases):
        clicks = [
            Click(int(rng.integers(0, 12)), int(rng.integers(0, 12)), bool(rng.random() < 0.5))
            for _ in range(int(rng.integers(0, 4)))
        ]
        radius = int(rng.integers(1, 4))
        maps = render_click_maps(clicks, 12, 12, radius)
        for plane, positive in ((0, True), (1, False)):
            expected = set()
            for c in clicks:
                if c.positive == positive:
                    expected |= disk_pixels_oracle(c.x, c.y, radius, 12, 12)
            got = {(y, x) for y, x in zip(*np.where(maps[plane] > 0))}
            assert got == expected

    checked = 0
    while checked < n_cases:
        gt = rng.random((10, 10)) < 0.35
        pred = rng.random((10, 10)) < 0.35
        if (gt == pred).all():
            continue
        assert next_click(pred, gt) == next_click_oracle(pred, gt)
        checked += 1

    announce(capsys, "metric-oracles", True, f"iou/noc/render/next_click each match brute force on {n_cases} instances")


# -- criterion: TPS oracle --------------------------------------------------------------


def test_tps_oracle(capsys):
    rng = np.random.default_rng(4)
    for case in range(100):
        n = int(rng.integers(1, 257))
        dim = int(rng.integers(2, 9))
        cands = rng.normal(size=(n, dim))
        test_vec = rng.normal(size=dim)
        k = int(rng.integers(0, n + 5))
        embs = [Embedding(vector=v / np.linalg.norm(v), source_id=str(i)) for i, v in enumerate(cands)]
        test = Embedding(vector=test_vec / np.linalg.norm(test_vec), source_id="t")
        got = select_topk(test, embs, k).indices
        assert got == brute_force_topk(test_vec, cands, k), f"case {case}"

    # tie-break and monotonicity
    same = [Embedding(vector=np.array([1.0, 0.0]), source_id=str(i)) for i in range(6)]
    t = Embedding(vector=np.array([1.0, 0.0]), source_id="t")
    assert select_topk(t, same, 3).indices == [0, 1, 2]
    prev: list[int] = []
    cands = [Embedding(vector=v / np.linalg.norm(v), source_id="") for v in rng.normal(size=(20, 4))]
    test = Embedding(vector=np.array([1.0, 0, 0, 0]), source_id="")
    for k in range(0, 12):
        cur = select_topk(test, cands, k).indices
        assert cur[: len(prev)] == prev
        prev = cur

    announce(capsys, "tps-oracle", True, "select_topk == full sort on 100 random sets (<=256 candidates); ties and monotonicity hold")


# -- criterion: MSH budget ---------------------------------------------------------------


def test_msh_parameter_budget(capsys):
    model = SegModel(ModelConfig(), seed=0)
    msh = model.msh.num_parameters()
    total = model.num_parameters()
    frac = msh / total
    ok = frac <= 0.01
    announce(capsys, "msh-budget", ok, f"mask head {msh} / {total} parameters = {frac:.3%} <= 1%")
    assert ok


# -- criterion: determinism & serialization ----------------------------------------------


def test_determinism_and_serialization(capsys, tiny_dataset, tmp_path):
    smoke = tiny_model_config(dim=16, max_seq_len=4, msh_hidden=1)
    cfg = TrainConfig(epochs=1, steps_per_epoch=20, batch_size=1, prompt_len=1, max_clicks=2, seed=5)

    model_a = SegModel(smoke, seed=5)
    path_a = train(model_a, tiny_dataset, cfg, tmp_path / "a")
    model_b = SegModel(smoke, seed=5)
    train(model_b, tiny_dataset, cfg, tmp_path / "b")
    log_a = (tmp_path / "a" / "train_log.jsonl").read_bytes()
    log_b = (tmp_path / "b" / "train_log.jsonl").read_bytes()
    logs_equal = log_a == log_b

    scene = tiny_dataset.load(tiny_dataset.ids(split="eval")[0])
    clicks = [Click(20, 20, True)]
    before = predict(model_a, [], scene.image, clicks)
    loaded, _ = ckpt.load_model(path_a)
    after = predict(loaded, [], scene.image, clicks)
    roundtrip_equal = np.array_equal(before.probabilities.data, after.probabilities.data)

    ok = logs_equal and roundtrip_equal
    announce(
        capsys,
        "determinism-serialization",
        ok,
        f"fixed-seed loss logs bitwise equal: {logs_equal}; checkpoint round-trip predictions bitwise equal: {roundtrip_equal}",
    )
    assert ok


# -- directional ablations (shared trained fixture) -----------------------------------------


@pytest.fixture(scope="module")
def ablation_results(tmp_path_factory):
    root = tmp_path_factory.mktemp("ablation")
    data_cfg = DataConfig(out_dir=str(root / "bench"), seed=0)
    dataset = SceneDataset(build_sequences(data_cfg))

    results = []
    for seed in ABLATION_SEEDS:
        model = SegModel(ModelConfig(), seed=seed)
        train_cfg = TrainConfig(seed=seed, **ABLATION_TRAIN)
        ckpt_path = train(model, dataset, train_cfg, root / f"seed{seed}")
        model, _ = ckpt.load_model(ckpt_path)

        arms = {}
        for name, selection, k in (("tps", "tps", 5), ("none", "none", 0), ("random", "random", 5)):
            proto = EvalProtocol(selection=selection, prompt_len=k, seed=seed, **ABLATION_EVAL)
            report = evaluate(model, dataset, proto)
            arms[name] = report
        results.append(arms)
    return results


def test_ablation_prompts_beat_promptless(capsys, ablation_results):
    noc_tps = float(np.mean([r["tps"].overall_noc85 for r in ablation_results]))
    noc_none = float(np.mean([r["none"].overall_noc85 for r in ablation_results]))
    miou1_tps = float(np.mean([r["tps"].overall_miou[0] for r in ablation_results]))
    miou1_none = float(np.mean([r["none"].overall_miou[0] for r in ablation_results]))

    ok = (noc_tps < noc_none) and (miou1_tps - miou1_none >= 0.02)
    announce(
        capsys,
        "ablation-prompts-vs-none",
        ok,
        f"NoC85 tps {noc_tps:.3f} < none {noc_none:.3f}; "
        f"mIoU@1 tps {miou1_tps:.3f} vs none {miou1_none:.3f} (gap {miou1_tps - miou1_none:+.3f} >= 0.02), "
        f"{len(ABLATION_SEEDS)} seeds",
    )
    assert noc_tps < noc_none
    assert miou1_tps - miou1_none >= 0.02


def test_ablation_tps_beats_random(capsys, ablation_results):
    noc_tps = float(np.mean([r["tps"].overall_noc85 for r in ablation_results]))
    noc_random = float(np.mean([r["random"].overall_noc85 for r in ablation_results]))
    ok = noc_tps <= noc_random
    announce(
        capsys,
        "ablation-tps-vs-random",
        ok,
        f"NoC85 tps {noc_tps:.3f} <= random {noc_random:.3f} at equal k, {len(ABLATION_SEEDS)} seeds",
    )
    assert ok
