import json

import numpy as np
import pytest

import seqclick.autograd as ag
from seqclick import checkpoint as ckpt
from seqclick.clicksim import Click
from seqclick.config import TrainConfig
from seqclick.engine import (
    Adam,
    PromptItem,
    build_context,
    make_interactive_predictor,
    predict,
    train,
)
from seqclick.model import SegModel
from tests.conftest import tiny_model_config


def test_adam_single_step_matches_hand_oracle():
    with ag.precision("float64"):
        theta = ag.parameter([1.0, -2.0])
        opt = Adam({"theta": theta}, beta1=0.9, beta2=0.999, eps=1e-8)
        # loss = theta[0]^2 + 3*theta[1]  ->  grad = [2*theta0, 3]
        (theta * theta)[0:1].sum().backward()
        grad = theta.grad.copy()
        grad[1] += 3.0
        theta.grad = grad

        lr = 0.1
        opt.step(lr)

        g = np.array([2.0, 3.0])
        m = 0.1 * g
        v = 0.001 * g * g
        m_hat = m / (1 - 0.9)
        v_hat = v / (1 - 0.999)
        expected = np.array([1.0, -2.0]) - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert np.allclose(theta.data, expected, atol=1e-10)


def test_adam_two_steps_bias_correction():
    with ag.precision("float64"):
        theta = ag.parameter([0.5])
        opt = Adam({"theta": theta})
        m = v = 0.0
        value = 0.5
        for t in range(1, 3):
            ag.zero_grads([theta])
            (theta * theta).sum().backward()
            g = 2.0 * value
            opt.step(0.05)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mh = m / (1 - 0.9**t)
            vh = v / (1 - 0.999**t)
            value = value - 0.05 * mh / (np.sqrt(vh) + 1e-8)
            assert theta.data[0] == pytest.approx(value, abs=1e-12)


def test_lr_schedule_boundary():
    cfg = TrainConfig(epochs=55)
    assert cfg.lr_at(0) == 5e-4
    assert cfg.lr_at(49) == 5e-4
    assert cfg.lr_at(50) == 5e-6
    assert cfg.lr_at(54) == 5e-6
    # scaled boundary: 11 epochs -> drop at 10
    short = TrainConfig(epochs=11)
    assert short.lr_at(9) == 5e-4
    assert short.lr_at(10) == 5e-6


def test_empty_prompts_equal_single_image_path(tiny_model, tiny_dataset):
    sid = tiny_dataset.ids(category="tree_crown", split="eval")[0]
    scene = tiny_dataset.load(sid)
    clicks = [Click(30, 30, True)]
    a = predict(tiny_model, [], scene.image, clicks)

    # reference single-image path: encode + sequence-of-one + heads
    with ag.no_grad():
        from seqclick.clicksim import render_click_maps

        maps = render_click_maps(clicks, 64, 64, tiny_model.cfg.click_radius)
        item = tiny_model.encode(scene.image, maps, np.zeros((1, 64, 64), np.float32), index=0)
        b = tiny_model.predict_last([item])
    assert np.array_equal(a.probabilities.data, b.probabilities.data)


def test_prompt_truncation_keeps_front(tiny_model, tiny_dataset):
    sid = tiny_dataset.ids(category="tree_crown", split="eval")[0]
    scene = tiny_dataset.load(sid)
    clicks = [Click(30, 30, True)]
    mask = scene.mask.astype(np.uint8)
    prompts = [PromptItem(scene.image, [Click(10 + i, 10, True)], mask) for i in range(8)]
    capacity = tiny_model.cfg.max_seq_len - 1  # 5 for the tiny config

    full = predict(tiny_model, prompts, scene.image, clicks)
    truncated = predict(tiny_model, prompts[:capacity], scene.image, clicks)
    assert np.array_equal(full.probabilities.data, truncated.probabilities.data)


def test_interactive_predictor_reuses_context(tiny_model, tiny_dataset):
    sid = tiny_dataset.ids(category="mug_handle", split="eval")[0]
    scene = tiny_dataset.load(sid)
    prompts = [PromptItem(scene.image, [Click(5, 5, True)], scene.mask.astype(np.uint8))]
    predictor = make_interactive_predictor(tiny_model, prompts, scene.image)
    clicks = [Click(20, 20, True)]
    zero = np.zeros((1, 64, 64), np.float32)
    a = predictor(clicks, zero)
    b = predict(tiny_model, prompts, scene.image, clicks, zero)
    assert np.array_equal(a.probabilities.data, b.probabilities.data)


def test_checkpoint_roundtrip_preserves_predictions(tiny_model, tiny_dataset, tmp_path):
    sid = tiny_dataset.ids(category="bed_pillow", split="eval")[0]
    scene = tiny_dataset.load(sid)
    clicks = [Click(32, 40, True), Click(10, 10, False)]
    before = predict(tiny_model, [], scene.image, clicks)

    path = tmp_path / "model.ckpt"
    ckpt.save_model(path, tiny_model, meta={"note": "test"})
    loaded, meta = ckpt.load_model(path)
    assert meta["note"] == "test"

    after = predict(loaded, [], scene.image, clicks)
    assert np.array_equal(before.probabilities.data, after.probabilities.data)
    assert np.array_equal(before.logits.data, after.logits.data)


def test_smoke_train_decreases_loss_and_is_deterministic(tiny_dataset, tmp_path):
    # dim-16 smoke shape: two epochs, loss decreases between epoch means
    smoke = tiny_model_config(dim=16, max_seq_len=4, msh_hidden=1)
    cfg = TrainConfig(epochs=2, steps_per_epoch=150, batch_size=2, prompt_len=1, max_clicks=2, seed=2)

    model_a = SegModel(smoke, seed=2)
    train(model_a, tiny_dataset, cfg, tmp_path / "a")
    log_a = (tmp_path / "a" / "train_log.jsonl").read_bytes()

    model_b = SegModel(smoke, seed=2)
    train(model_b, tiny_dataset, cfg, tmp_path / "b")
    log_b = (tmp_path / "b" / "train_log.jsonl").read_bytes()

    assert log_a == log_b  # bitwise-identical loss log

    records = [json.loads(line) for line in log_a.decode().splitlines()]
    first_epoch = np.mean([r["loss"] for r in records if r["epoch"] == 0])
    last_epoch = np.mean([r["loss"] for r in records if r["epoch"] == 1])
    assert last_epoch < first_epoch


def test_resume_from_checkpoint_bitwise(tiny_dataset, tmp_path):
    cfg = TrainConfig(epochs=1, steps_per_epoch=4, batch_size=1, prompt_len=1, max_clicks=1, seed=3)
    model = SegModel(tiny_model_config(), seed=3)
    path = train(model, tiny_dataset, cfg, tmp_path / "run")

    loaded, _ = ckpt.load_model(path)
    sid = tiny_dataset.ids(category="house_door", split="eval")[0]
    scene = tiny_dataset.load(sid)
    clicks = [Click(33, 44, True)]
    a = predict(model, [], scene.image, clicks)
    b = predict(loaded, [], scene.image, clicks)
    assert np.array_equal(a.probabilities.data, b.probabilities.data)


def test_default_config_supports_ten_prompts(tiny_dataset):
    from seqclick.config import ModelConfig

    model = SegModel(ModelConfig(), seed=0)
    scene = tiny_dataset.load(tiny_dataset.ids(category="tree_crown", split="eval")[0])
    mask = scene.mask.astype(np.uint8)
    prompts = [PromptItem(scene.image, [Click(10 + i, 12, True)], mask) for i in range(12)]
    out = predict(model, prompts, scene.image, [Click(30, 30, True)])  # 12 -> truncated to 10
    ten = predict(model, prompts[:10], scene.image, [Click(30, 30, True)])
    assert np.array_equal(out.probabilities.data, ten.probabilities.data)


def test_nonfinite_loss_aborts(tiny_dataset, tmp_path):
    cfg = TrainConfig(epochs=1, steps_per_epoch=1, batch_size=1, seed=0)
    model = SegModel(tiny_model_config(), seed=0)
    for p in model.parameters():
        p.data[:] = np.nan
    with pytest.raises(ag.NumericError, match="non-finite"):
        train(model, tiny_dataset, cfg, tmp_path / "bad")


def test_train_config_validation():
    with pytest.raises(Exception, match="epochs"):
        TrainConfig(epochs=0)
    with pytest.raises(Exception, match="prompt_len"):
        TrainConfig(prompt_len=-1)
