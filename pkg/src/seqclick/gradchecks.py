"""Finite-difference verification of every trainable layer type.

Each check builds a small double-precision instance of one layer, wires
a scalar loss over random (fixed-seed) input, and compares backward
gradients against central differences for every parameter coordinate.
Run via ``seqclick gradcheck`` or the acceptance suite.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import GradReport, grad_check
from .config import ModelConfig
from .heads import FeaturePyramid, FocalParams, MaskHead, PredMask, focal_loss
from .nn import EncoderBlock, LayerNorm, Linear, MultiHeadAttention, PatchEmbed, TokenGrid
from .spt import concealed_mask

_TINY = ModelConfig(
    image_size=16,
    patch=4,
    dim=16,
    depth=1,
    spt_depth=1,
    heads=2,
    mlp_ratio=2.0,
    max_seq_len=4,
    msh_hidden=8,
)


def _sq(t):
    return (t * t).sum()


def _check_linear(eps, tol):
    rng = np.random.default_rng(11)
    layer = Linear(6, 5, rng)
    x = ag.tensor(rng.normal(size=(4, 6)))
    return grad_check(lambda: _sq(layer(x)), layer.named_parameters(), eps, tol)


def _check_layernorm(eps, tol):
    rng = np.random.default_rng(12)
    layer = LayerNorm(8)
    x = ag.parameter(rng.normal(size=(5, 8)))
    params = dict(layer.named_parameters(), x=x)
    return grad_check(lambda: _sq(layer(x)), params, eps, tol)


def _check_masked_attention(eps, tol):
    rng = np.random.default_rng(13)
    layer = MultiHeadAttention(_TINY.dim, _TINY.heads, rng)
    mask = concealed_mask(3, 2).matrix
    x = ag.parameter(rng.normal(size=(6, _TINY.dim)))
    params = dict(layer.named_parameters(), x=x)
    return grad_check(lambda: _sq(layer(x, mask)), params, eps, tol)


def _check_patch_embed(eps, tol):
    rng = np.random.default_rng(14)
    layer = PatchEmbed(2, 4, 8, rng)
    planes = ag.tensor(rng.normal(size=(2, 8, 8)))
    return grad_check(lambda: _sq(layer(planes).tokens), layer.named_parameters(), eps, tol)


def _check_encoder_block(eps, tol):
    rng = np.random.default_rng(15)
    block = EncoderBlock(_TINY.dim, _TINY.heads, 2.0, rng)
    x = ag.tensor(rng.normal(size=(8, _TINY.dim)))
    return grad_check(lambda: _sq(block(x)), block.named_parameters(), eps, tol)


def _check_fpm(eps, tol):
    rng = np.random.default_rng(16)
    layer = FeaturePyramid(_TINY, rng)
    tokens = ag.parameter(rng.normal(size=(16, _TINY.dim)))
    params = dict(layer.named_parameters(), tokens=tokens)

    def f():
        return _sq(layer(TokenGrid(tokens, (4, 4))).tokens)

    return grad_check(f, params, eps, tol)


def _check_msh(eps, tol):
    rng = np.random.default_rng(17)
    layer = MaskHead(_TINY, rng)
    tokens = ag.parameter(rng.normal(size=(16, _TINY.dim)))
    params = dict(layer.named_parameters(), tokens=tokens)

    def f():
        return _sq(layer(TokenGrid(tokens, (4, 4)), 16, 16).logits)

    return grad_check(f, params, eps, tol)


def _check_focal_loss(eps, tol):
    rng = np.random.default_rng(18)
    logits = ag.parameter(rng.normal(size=(1, 4, 4)))
    gt = (rng.random((1, 4, 4)) < 0.5).astype(np.float64)
    focal = FocalParams(alpha=1.0, gamma=2.0)

    def f():
        return focal_loss(PredMask(logits=logits, probabilities=ag.sigmoid(logits)), gt, focal)

    return grad_check(f, {"logits": logits}, eps, tol)


LAYER_CHECKS = {
    "linear": _check_linear,
    "layernorm": _check_layernorm,
    "masked_attention": _check_masked_attention,
    "patch_embed": _check_patch_embed,
    "encoder_block": _check_encoder_block,
    "fpm": _check_fpm,
    "msh": _check_msh,
    "focal_loss": _check_focal_loss,
}


def run_layer_gradchecks(eps: float = 1e-5, tol: float = 1e-4) -> dict[str, GradReport]:
    """All layer checks in double precision; keyed by layer name."""
    reports = {}
    with ag.precision("float64"):
        for name, check in LAYER_CHECKS.items():
            reports[name] = check(eps, tol)
    return reports
