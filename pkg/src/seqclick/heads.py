"""Multi-scale feature fusion, the MLP mask head, and focal loss.

The pyramid pools the token grid at strides 1/2/4, projects each level,
upsamples back (nearest) and sums. The mask head is MLP-only and must
stay within 1% of total model parameters; the budget is asserted at
model build time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .config import ModelConfig
from .nn import Linear, Mlp, Module, TokenGrid

PYRAMID_STRIDES = (1, 2, 4)
PROB_CLAMP = 1e-6


@dataclass
class PredMask:
    """Predicted mask as logits plus sigmoid probabilities, both [1,H,W]."""

    logits: Tensor
    probabilities: Tensor


@dataclass
class FocalParams:
    alpha: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.gamma)):
            raise ValueError("focal parameters must be finite")
        if self.alpha < 0 or self.gamma < 0:
            raise ValueError("focal parameters must be non-negative")


class FeaturePyramid(Module):
    """Average-pool the grid at strides 1/2/4, project, upsample, sum."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.projs = [Linear(cfg.dim, cfg.dim, rng) for _ in PYRAMID_STRIDES]

    def __call__(self, item: TokenGrid) -> TokenGrid:
        h, w = item.grid
        s_max = PYRAMID_STRIDES[-1]
        if h < s_max or w < s_max:
            raise ValueError(f"grid {h}x{w} too small for a stride-{s_max} pyramid level")
        if h % s_max != 0 or w % s_max != 0:
            raise ValueError(f"grid {h}x{w} must be divisible by {s_max}")
        dim = item.dim
        x = item.tokens.reshape((h, w, dim))
        fused = None
        for stride, proj in zip(PYRAMID_STRIDES, self.projs):
            if stride == 1:
                level = proj(x)
            else:
                pooled = x.reshape((h // stride, stride, w // stride, stride, dim))
                pooled = pooled.mean(axis=(1, 3))
                level = proj(pooled)
                level = ag.repeat_interleave(level, stride, axis=0)
                level = ag.repeat_interleave(level, stride, axis=1)
            fused = level if fused is None else fused + level
        return TokenGrid(fused.reshape((h * w, dim)), (h, w))


MASK_PRIOR_BIAS = -2.1972246  # log(0.1 / 0.9): start confident-background


class MaskHead(Module):
    """Per-token MLP producing patch*patch logits, reassembled to [1,H,W]."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.patch = cfg.patch
        self.mlp = Mlp(cfg.dim, cfg.msh_hidden, rng, d_out=cfg.patch * cfg.patch)
        # foreground is rare; a negative output prior keeps early training
        # from having to climb out of the all-background minimum
        self.mlp.fc2.bias.data[:] = self.mlp.fc2.bias.data.dtype.type(MASK_PRIOR_BIAS)

    def __call__(self, fused: TokenGrid, out_h: int, out_w: int) -> PredMask:
        h, w = fused.grid
        p = self.patch
        if out_h != h * p or out_w != w * p:
            raise ValueError(f"output {out_h}x{out_w} is not the patch-multiple of grid {h}x{w}")
        logits = self.mlp(fused.tokens)  # [h*w, p*p]
        logits = logits.reshape((h, w, p, p)).transpose((0, 2, 1, 3)).reshape((1, out_h, out_w))
        return PredMask(logits=logits, probabilities=ag.sigmoid(logits))


def focal_loss(pred: PredMask, gt: Tensor | np.ndarray, params: FocalParams) -> Tensor:
    """Mean over pixels of -alpha * (1 - p_t)^gamma * log(p_t)."""
    gt_data = gt.data if isinstance(gt, Tensor) else np.asarray(gt)
    if gt_data.shape != pred.probabilities.shape:
        raise ValueError(f"ground truth {gt_data.shape} does not match prediction {pred.probabilities.shape}")
    if not np.isin(gt_data, (0, 1)).all():
        raise ValueError("ground truth mask must be binary")
    g = gt_data.astype(pred.probabilities.dtype)

    p = ag.clip(pred.probabilities, PROB_CLAMP, 1.0 - PROB_CLAMP)
    gt_t = ag.tensor(g, dtype=p.dtype)
    # p_t = p on foreground, 1-p on background
    pt = p * gt_t + (1.0 - p) * (1.0 - gt_t)
    loss = ag.pow_scalar(1.0 - pt, params.gamma) * ag.log(pt)
    return loss.mean() * (-params.alpha)
