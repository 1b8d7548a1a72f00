"""Training and inference orchestration.

Builds prompt sequences with simulated clicks (each item's final
predicted mask becomes context for the items after it), optimizes with
Adam under the two-phase learning-rate schedule, and serves the full
predict path: encode every item, run the concealed sequence layers with
the test item last, decode only the test slot.

Prompt items are encoded without gradient; the loss reaches the
parameters only through the test item's slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autograd as ag
from . import checkpoint as ckpt
from .autograd import NumericError, Tensor
from .clicksim import Click, binarize, iou, next_click, render_click_maps
from .config import TrainConfig
from .data import Scene, SceneDataset, apply_augment
from .encoder import EncodedItem
from .heads import FocalParams, PredMask, focal_loss
from .model import SegModel


@dataclass
class PromptItem:
    """One completed context item: image, its clicks, its final predicted mask."""

    image: np.ndarray  # [3,H,W] float
    clicks: list[Click]
    mask: np.ndarray  # [1,H,W] binary
    source_id: str = ""


PromptSequence = list  # ordered list[PromptItem], most relevant first


class Adam:
    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * (g * g)
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            p.data -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)

    def zero_grad(self) -> None:
        ag.zero_grads(self.params.values())


@dataclass
class PromptContext:
    """Prompt items encoded once: backbone outputs plus the sequence-layer
    key/value cache. Predictions append the test slot on top."""

    items: list
    spt_cache: object

    def __len__(self) -> int:
        return len(self.items)


def build_context(model: SegModel, prompts: PromptSequence) -> PromptContext:
    """Encode context items without gradient, in their given order."""
    ctx = PromptContext(items=[], spt_cache=model.spt.make_cache())
    with ag.no_grad():
        for item in prompts:
            maps = render_click_maps(item.clicks, *item.image.shape[-2:], model.cfg.click_radius)
            extend_context(model, ctx, item.image, maps, item.mask)
    return ctx


def extend_context(model: SegModel, ctx: PromptContext, image, click_maps, mask) -> None:
    """Append one finished item to the context (call under no_grad)."""
    encoded = model.encode(image, click_maps, mask, index=len(ctx.items))
    model.spt.extend_cache(ctx.spt_cache, encoded.features)
    ctx.items.append(encoded)


def predict_with_context(
    model: SegModel,
    ctx: PromptContext,
    image: np.ndarray,
    clicks: list[Click],
    current_mask: np.ndarray,
    grad: bool = False,
) -> PredMask:
    maps = render_click_maps(clicks, *image.shape[-2:], model.cfg.click_radius)
    if grad:
        test = model.encode(image, maps, current_mask, index=len(ctx.items))
        return model.predict_with_cache(ctx.spt_cache, test)
    with ag.no_grad():
        test = model.encode(image, maps, current_mask, index=len(ctx.items))
        return model.predict_with_cache(ctx.spt_cache, test)


def predict(
    model: SegModel,
    prompts: PromptSequence,
    image: np.ndarray,
    clicks: list[Click],
    current_mask: np.ndarray | None = None,
    grad: bool = False,
) -> PredMask:
    """S_pred for a test item after the given prompt context.

    Prompts beyond the supported sequence length are truncated from the
    back, keeping the most relevant (selection-ordered) front.
    """
    capacity = model.cfg.max_seq_len - 1
    prompts = list(prompts)[:capacity]
    if current_mask is None:
        s = model.cfg.image_size
        current_mask = np.zeros((1, s, s), dtype=np.float32)
    ctx = build_context(model, prompts)
    return predict_with_context(model, ctx, image, clicks, current_mask, grad=grad)


def make_interactive_predictor(model: SegModel, prompts: PromptSequence, image: np.ndarray):
    """Click-loop callback with the prompt context processed once."""
    capacity = model.cfg.max_seq_len - 1
    ctx = build_context(model, list(prompts)[:capacity])

    def _predict(clicks: list[Click], current_mask: np.ndarray) -> PredMask:
        return predict_with_context(model, ctx, image, clicks, current_mask)

    return _predict


def _as_mask_plane(mask2d: np.ndarray) -> np.ndarray:
    return mask2d[None].astype(np.float32)


def _simulate_item(
    model: SegModel,
    ctx: "PromptContext",
    scene: Scene,
    rng: np.random.Generator,
    cfg: TrainConfig,
    budget_cap: int | None = None,
) -> tuple[list[Click], np.ndarray]:
    """Simulated interaction for one item given its context; returns the final
    clicks and binary mask that the following items will see."""
    gt = scene.mask.reshape(scene.mask.shape[-2:])
    top = budget_cap if budget_cap is not None else cfg.max_clicks
    budget = int(rng.integers(1, top + 1))
    clicks: list[Click] = []
    current = np.zeros_like(gt, dtype=np.uint8)
    for _ in range(budget):
        if (current == gt).all():
            break
        clicks.append(next_click(current, gt))
        pred = predict_with_context(model, ctx, scene.image, clicks, _as_mask_plane(current))
        current = binarize(pred.probabilities.data).reshape(gt.shape)
        if iou(current, gt) >= cfg.iou_stop:
            break
    return clicks, current


def _augment_sequence(scenes: list[Scene], rng: np.random.Generator) -> list[Scene]:
    """One augmentation draw for the whole sequence: items of one training
    sequence are transformed identically, preserving the geometric
    correspondence between context masks and the test scene (the identity
    transform at evaluation time is then in-distribution). Draws that crop
    any item's part out of frame are redone."""
    for _ in range(8):
        scale = float(rng.uniform(0.7, 1.4))
        flip = bool(rng.random() < 0.5)
        brightness = float(rng.uniform(0.8, 1.2))
        out = [apply_augment(scene, scale, flip, brightness) for scene in scenes]
        if all(o.mask.sum() >= 8 for o in out):
            return out
    return scenes


def train_step_sample(
    model: SegModel,
    dataset: SceneDataset,
    pools: dict[str, list[str]],
    rng: np.random.Generator,
    cfg: TrainConfig,
    focal: FocalParams,
) -> tuple[Tensor, float]:
    """One training sample: simulate a category sequence, return the focal loss
    on the test item (graph attached) and the test item's train IoU."""
    categories = sorted(pools)
    category = categories[int(rng.integers(0, len(categories)))]
    pool = pools[category]
    if cfg.prompt_len_jitter:
        # skew toward the contrasting regimes: no context at all, or full
        # context; intermediate lengths fill the rest
        draw = rng.random()
        if draw < 0.3:
            n_prompts = 0
        elif draw < 0.7:
            n_prompts = cfg.prompt_len
        else:
            n_prompts = int(rng.integers(1, max(2, cfg.prompt_len)))
    else:
        n_prompts = cfg.prompt_len
    n_prompts = min(n_prompts, len(pool) - 1, model.cfg.max_seq_len - 1)
    chosen = rng.choice(len(pool), size=n_prompts + 1, replace=False)
    scenes = [dataset.load(pool[int(idx)]) for idx in chosen]
    if cfg.augment:
        scenes = _augment_sequence(scenes, rng)

    ctx = PromptContext(items=[], spt_cache=model.spt.make_cache())
    for scene in scenes[:-1]:
        # context items interact with a small click budget, then their final
        # (clicks, predicted mask) state joins the context
        clicks, final_mask = _simulate_item(model, ctx, scene, rng, cfg)
        maps = render_click_maps(clicks, *scene.image.shape[-2:], model.cfg.click_radius)
        with ag.no_grad():
            extend_context(model, ctx, scene.image, maps, _as_mask_plane(final_mask))

    # the test item: all but the last prediction run without gradient;
    # half the samples train the one-click state, where context matters most
    test = scenes[-1]
    gt = test.mask.reshape(test.mask.shape[-2:])
    if cfg.max_clicks == 1 or rng.random() < 0.5:
        budget = 1
    else:
        budget = int(rng.integers(2, cfg.max_clicks + 1))
    clicks = []
    current = np.zeros_like(gt, dtype=np.uint8)
    for t in range(budget):
        if t > 0 and (current == gt).all():
            break
        clicks.append(next_click(current, gt))
        if t == budget - 1:
            break
        pred = predict_with_context(model, ctx, test.image, clicks, _as_mask_plane(current))
        current = binarize(pred.probabilities.data).reshape(gt.shape)
        if iou(current, gt) >= cfg.iou_stop:
            break

    # the final forward runs the sequence layers over (context + test) with
    # gradients: context token grids stay constant (encoder ran no-grad), but
    # the sequence layers' projections and position codes must learn how to
    # expose context content, which the cached inference path cannot teach
    maps = render_click_maps(clicks, *test.image.shape[-2:], model.cfg.click_radius)
    test_encoded = model.encode(test.image, maps, _as_mask_plane(current), index=len(ctx.items))
    pred = model.predict_last(ctx.items + [test_encoded])
    loss = focal_loss(pred, test.mask, focal)
    train_iou = iou(binarize(pred.probabilities.data), test.mask)
    return loss, train_iou


def train(
    model: SegModel,
    dataset: SceneDataset,
    cfg: TrainConfig,
    out_dir: str | Path,
    log_name: str = "train_log.jsonl",
) -> Path:
    """Run the optimization loop; returns the final checkpoint path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = model.named_parameters()
    opt = Adam(params, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    rng = np.random.default_rng(np.random.SeedSequence([0x7A41, cfg.seed]))
    focal = FocalParams()

    pools: dict[str, list[str]] = {}
    for cat in dataset.categories:
        pools[cat] = dataset.ids(category=cat, split="train")
        if len(pools[cat]) < 2:
            raise ValueError(f"category {cat} needs at least 2 training scenes")

    ckpt_path = out / "model.ckpt"
    log_path = out / log_name
    with open(log_path, "w") as log:
        for epoch in range(cfg.epochs):
            lr = cfg.lr_at(epoch)
            for step in range(cfg.steps_per_epoch):
                opt.zero_grad()
                losses, ious = [], []
                for _ in range(cfg.batch_size):
                    loss, sample_iou = train_step_sample(model, dataset, pools, rng, cfg, focal)
                    scaled = loss * (1.0 / cfg.batch_size)
                    scaled.backward()
                    losses.append(loss.item())
                    ious.append(sample_iou)
                mean_loss = float(np.mean(losses))
                if not np.isfinite(mean_loss):
                    raise NumericError(f"non-finite loss {losses} at epoch {epoch} step {step}")
                opt.step(lr)
                record = {"epoch": epoch, "step": step, "loss": mean_loss, "iou": float(np.mean(ious))}
                log.write(json.dumps(record) + "\n")
                log.flush()
            if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
                ckpt.save_model(ckpt_path, model, meta={"epoch": epoch, "train_seed": cfg.seed})
    ckpt.save_model(ckpt_path, model, meta={"epoch": cfg.epochs - 1, "train_seed": cfg.seed})
    return ckpt_path
