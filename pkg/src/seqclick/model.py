"""Full segmentation model: fusion encoder, sequence transformer, heads.

The predict path is S_pred = MaskHead(FeaturePyramid(F_s[last])) where
F_s comes from the concealed sequence transformer over all encoded
items, the test item last.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .config import ModelConfig
from .encoder import EncodedItem, FusionEncoder
from .heads import FeaturePyramid, MaskHead, PredMask
from .nn import Module
from .spt import SequenceTransformer

MSH_BUDGET = 0.01


class SegModel(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(np.random.SeedSequence([0x5E6C, seed]))
        self.cfg = cfg
        self.encoder = FusionEncoder(cfg, rng)
        self.spt = SequenceTransformer(cfg, rng)
        self.fpm = FeaturePyramid(cfg, rng)
        self.msh = MaskHead(cfg, rng)

        total = self.num_parameters()
        msh_params = self.msh.num_parameters()
        if msh_params > MSH_BUDGET * total:
            raise ValueError(
                f"mask head holds {msh_params} of {total} parameters "
                f"({msh_params / total:.2%}), over the {MSH_BUDGET:.0%} budget"
            )

    def encode(self, image: np.ndarray, click_maps: np.ndarray, mask: np.ndarray, index: int = 0) -> EncodedItem:
        """Encode one raw (image, click maps, mask) triple at a sequence slot."""
        dt = ag.default_dtype()
        return self.encoder.encode_item(
            ag.tensor(np.asarray(image, dtype=dt)),
            ag.tensor(np.asarray(click_maps, dtype=dt)),
            ag.tensor(np.asarray(mask, dtype=dt)),
            index=index,
        )

    def predict_last(self, items: list[EncodedItem]) -> PredMask:
        """Run the sequence layers and decode the final item's slot only."""
        seq = self.spt([item.features for item in items])
        return self._decode(seq.transformed[-1])

    def make_context(self, items: list[EncodedItem]):
        """Process context items once; the cache serves every later predict."""
        cache = self.spt.make_cache()
        for item in items:
            self.spt.extend_cache(cache, item.features)
        return cache

    def predict_with_cache(self, cache, test: EncodedItem) -> PredMask:
        """Decode the test slot appended after a cached context prefix."""
        return self._decode(self.spt.run_last(cache, test.features))

    def _decode(self, slot) -> PredMask:
        fused = self.fpm(slot)
        s = self.cfg.image_size
        return self.msh(fused, s, s)
