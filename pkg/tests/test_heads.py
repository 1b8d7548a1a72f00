import math

import numpy as np
import pytest

import seqclick.autograd as ag
from seqclick.config import ModelConfig
from seqclick.heads import FeaturePyramid, FocalParams, MaskHead, PredMask, focal_loss
from seqclick.nn import TokenGrid

CFG = ModelConfig(image_size=32, patch=8, dim=16, depth=1, spt_depth=1, heads=2, mlp_ratio=2.0, msh_hidden=2)


def focal_scalar_oracle(p, fg, alpha, gamma):
    """Direct evaluation of -alpha*(1-p_t)^gamma*log(p_t) for one pixel."""
    pt = p if fg else 1.0 - p
    return -alpha * (1.0 - pt) ** gamma * math.log(pt)


def pred_from_probs(probs):
    p = np.asarray(probs, dtype=np.float64)
    logits = np.log(p / (1.0 - p))
    t = ag.tensor(logits, dtype=np.float64)
    return PredMask(logits=t, probabilities=ag.sigmoid(t))


# -- feature pyramid -----------------------------------------------------------


def test_fpm_preserves_shape():
    rng = np.random.default_rng(0)
    fpm = FeaturePyramid(CFG, rng)
    grid = TokenGrid(ag.tensor(rng.normal(size=(64, 16)).astype(np.float32)), (8, 8))
    out = fpm(grid)
    assert out.tokens.shape == (64, 16)
    assert out.grid == (8, 8)


def test_fpm_constant_input_gives_constant_output():
    rng = np.random.default_rng(1)
    fpm = FeaturePyramid(CFG, rng)
    const = np.ones((16, 16), dtype=np.float32) * 0.37
    out = fpm(TokenGrid(ag.tensor(const), (4, 4))).tokens.data
    assert np.allclose(out, out[0], atol=1e-5)


def test_fpm_matches_pooling_oracle_with_identity_projections():
    rng = np.random.default_rng(2)
    with ag.precision("float64"):
        fpm = FeaturePyramid(CFG, rng)
    for proj in fpm.projs:
        proj.weight.data[:] = np.eye(16)
        proj.bias.data[:] = 0.0
    x = rng.normal(size=(4, 4, 16))

    # independent oracle: explicit loops for pool + nearest upsample
    def pool_up(x, s):
        h, w, d = x.shape
        out = np.zeros_like(x)
        for by in range(h // s):
            for bx in range(w // s):
                block = x[by * s : (by + 1) * s, bx * s : (bx + 1) * s]
                out[by * s : (by + 1) * s, bx * s : (bx + 1) * s] = block.mean(axis=(0, 1))
        return out

    expected = x + pool_up(x, 2) + pool_up(x, 4)
    got = fpm(TokenGrid(ag.tensor(x.reshape(16, 16), dtype=np.float64), (4, 4))).tokens.data
    assert np.allclose(got.reshape(4, 4, 16), expected, atol=1e-12)


def test_fpm_rejects_small_grid():
    fpm = FeaturePyramid(CFG, np.random.default_rng(3))
    with pytest.raises(ValueError, match="too small"):
        fpm(TokenGrid(ag.tensor(np.zeros((6, 16), np.float32)), (2, 3)))


# -- mask head ------------------------------------------------------------------


def test_msh_zero_weights_give_half_probabilities():
    rng = np.random.default_rng(4)
    msh = MaskHead(CFG, rng)
    for p in msh.parameters():
        p.data[:] = 0.0
    grid = TokenGrid(ag.tensor(rng.normal(size=(16, 16)).astype(np.float32)), (4, 4))
    pred = msh(grid, 32, 32)
    assert np.all(pred.logits.data == 0.0)
    assert np.all(pred.probabilities.data == 0.5)


def test_msh_shape():
    rng = np.random.default_rng(5)
    msh = MaskHead(CFG, rng)
    grid = TokenGrid(ag.tensor(rng.normal(size=(64, 16)).astype(np.float32)), (8, 8))
    pred = msh(grid, 64, 64)
    assert pred.logits.shape == (1, 64, 64)
    assert pred.probabilities.shape == (1, 64, 64)


def test_msh_patch_layout():
    # token t owns exactly its patch: bump one token, watch its pixels move
    rng = np.random.default_rng(6)
    msh = MaskHead(CFG, rng)
    base = np.zeros((16, 16), dtype=np.float32)
    bumped = base.copy()
    bumped[5] = 1.0  # grid position (1,1) for a 4x4 grid
    a = msh(TokenGrid(ag.tensor(base), (4, 4)), 32, 32).logits.data
    b = msh(TokenGrid(ag.tensor(bumped), (4, 4)), 32, 32).logits.data
    diff = (a != b).reshape(32, 32)
    ys, xs = np.where(diff)
    assert ys.min() >= 8 and ys.max() < 16 and xs.min() >= 8 and xs.max() < 16


def test_msh_rejects_bad_output_size():
    msh = MaskHead(CFG, np.random.default_rng(7))
    grid = TokenGrid(ag.tensor(np.zeros((16, 16), np.float32)), (4, 4))
    with pytest.raises(ValueError, match="patch-multiple"):
        msh(grid, 33, 32)


def test_msh_within_parameter_budget_on_default_config():
    from seqclick.model import SegModel

    model = SegModel(ModelConfig(), seed=0)
    assert model.msh.num_parameters() <= 0.01 * model.num_parameters()


def test_msh_budget_enforced_at_build():
    from seqclick.model import SegModel

    with pytest.raises(ValueError, match="budget"):
        SegModel(ModelConfig(dim=16, depth=1, spt_depth=1, heads=2, msh_hidden=64), seed=0)


# -- focal loss -------------------------------------------------------------------


def test_focal_single_foreground_pixel():
    pred = pred_from_probs([[[0.5]]])
    gt = np.ones((1, 1, 1))
    loss = focal_loss(pred, gt, FocalParams(alpha=1.0, gamma=2.0))
    expected = focal_scalar_oracle(0.5, True, 1.0, 2.0)
    assert loss.item() == pytest.approx(expected, abs=1e-9)
    assert loss.item() == pytest.approx(0.173287, abs=1e-6)


def test_focal_single_background_pixel():
    pred = pred_from_probs([[[0.1]]])
    gt = np.zeros((1, 1, 1))
    loss = focal_loss(pred, gt, FocalParams(alpha=1.0, gamma=2.0))
    expected = focal_scalar_oracle(0.1, False, 1.0, 2.0)
    assert loss.item() == pytest.approx(expected, abs=1e-9)
    assert loss.item() == pytest.approx(0.0010536, abs=1e-7)


def test_focal_perfect_confident_prediction_vanishes():
    probs = np.where(np.eye(4) > 0, 1 - 1e-9, 1e-9)[None]
    pred = pred_from_probs(np.clip(probs, 1e-9, 1 - 1e-9))
    gt = np.eye(4)[None]
    loss = focal_loss(pred, gt, FocalParams())
    assert loss.item() < 1e-10


def test_focal_gamma_zero_equals_bce_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = rng.uniform(0.02, 0.98, size=(1, 5, 5))
        gt = (rng.random((1, 5, 5)) < 0.5).astype(np.float64)
        loss = focal_loss(pred_from_probs(p), gt, FocalParams(alpha=1.0, gamma=0.0)).item()
        bce = float(np.mean(-(gt * np.log(p) + (1 - gt) * np.log(1 - p))))
        assert abs(loss - bce) <= 1e-6


def test_focal_nonnegative_random():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = rng.uniform(0.01, 0.99, size=(1, 4, 4))
        gt = (rng.random((1, 4, 4)) < 0.5).astype(np.float64)
        assert focal_loss(pred_from_probs(p), gt, FocalParams()).item() >= 0.0


def test_focal_rejects_non_binary_gt():
    pred = pred_from_probs([[[0.5]]])
    with pytest.raises(ValueError, match="binary"):
        focal_loss(pred, np.array([[[0.5]]]), FocalParams())


def test_focal_rejects_shape_mismatch():
    pred = pred_from_probs([[[0.5, 0.5]]])
    with pytest.raises(ValueError, match="match"):
        focal_loss(pred, np.ones((1, 1, 1)), FocalParams())


def test_focal_params_validated():
    with pytest.raises(ValueError):
        FocalParams(alpha=-1.0)
    with pytest.raises(ValueError):
        FocalParams(gamma=float("nan"))


def test_focal_loss_grad_check():
    with ag.precision("float64"):
        rng = np.random.default_rng(10)
        logits = ag.parameter(rng.normal(size=(1, 4, 4)))
        gt = (rng.random((1, 4, 4)) < 0.5).astype(np.float64)

        def f():
            return focal_loss(PredMask(logits=logits, probabilities=ag.sigmoid(logits)), gt, FocalParams())

        report = ag.grad_check(f, {"logits": logits}, eps=1e-5, tol=1e-4)
    assert report.passed
