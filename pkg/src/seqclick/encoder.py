"""Backbone fusion: clicks+mask embedded, added to the embedded image,
run through the ViT stack to yield per-image token features.

The click/mask planes (positive clicks, negative clicks, mask — fixed in
that order for checkpoint compatibility) go through their own patch
embedding, independent of the image embedding; the two token grids are
summed with a learned position embedding before the transformer blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .config import ModelConfig
from .nn import EncoderBlock, LayerNorm, Module, PatchEmbed, TokenGrid, trunc_normal


@dataclass
class EncodedItem:
    """Token features of one (image, clicks, mask) item."""

    features: TokenGrid
    index: int


class FusionEncoder(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.image_embed = PatchEmbed(3, cfg.patch, cfg.dim, rng)
        self.aux_embed = PatchEmbed(3, cfg.patch, cfg.dim, rng)
        self.pos_embed = ag.parameter(trunc_normal(rng, (cfg.tokens_per_image, cfg.dim)))
        self.blocks = [EncoderBlock(cfg.dim, cfg.heads, cfg.mlp_ratio, rng) for _ in range(cfg.depth)]
        self.norm = LayerNorm(cfg.dim)

    def encode_item(self, image: ag.Tensor, click_maps: ag.Tensor, mask: ag.Tensor, index: int = 0) -> EncodedItem:
        """ViT(Embed(clicks ⊕ mask) + Embed(image)) for one sequence item."""
        s = self.cfg.image_size
        if image.shape != (3, s, s):
            raise ValueError(f"image must be [3,{s},{s}], got {image.shape}")
        if click_maps.shape != (2, s, s):
            raise ValueError(f"click maps must be [2,{s},{s}], got {click_maps.shape}")
        if mask.shape != (1, s, s):
            raise ValueError(f"mask must be [1,{s},{s}], got {mask.shape}")
        md = mask.data
        if md.min() < 0.0 or md.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")

        aux = ag.concat([click_maps, mask], axis=0)
        tokens = self.image_embed(image).tokens + self.aux_embed(aux).tokens + self.pos_embed
        for block in self.blocks:
            tokens = block(tokens)
        tokens = self.norm(tokens)
        return EncodedItem(TokenGrid(tokens, self.cfg.grid), index)
