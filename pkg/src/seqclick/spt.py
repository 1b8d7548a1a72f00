"""Sequence transformer with block-causal concealment.

Attention over the concatenated token grids of an ordered image
sequence, where tokens of image x may attend to tokens of image y only
when x >= y. Concealment is realized by restricting each image's
queries to the key/value prefix of images 0..x, which is equivalent to
an additive 0/-inf bias on the full attention matrix (asserted in
tests) and makes two stronger guarantees hold bitwise: outputs for
image i never read later items at all, and running on a prefix of the
sequence reproduces the full run's outputs exactly.

Because earlier slots never read later ones, a sequence prefix can be
processed once into an SptCache (per-layer keys/values) and reused for
every prediction that appends one item, which is what the interaction
loop does click after click.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .config import ModelConfig
from .nn import LayerNorm, Mlp, Module, MultiHeadAttention, TokenGrid, trunc_normal


@dataclass
class ConcealMask:
    """Additive attention bias: 0 where visible (x >= y), -inf elsewhere."""

    matrix: np.ndarray  # [n_total, n_total]
    n_images: int
    tokens_per_image: int


@dataclass
class FeatureSeq:
    """Per-image token grids before (F) and after (F_s) the sequence layers."""

    source: list[TokenGrid]
    transformed: list[TokenGrid]

    def __post_init__(self):
        if len(self.source) != len(self.transformed):
            raise ValueError("source and transformed lists must align")


@dataclass
class SptCache:
    """Per-layer keys/values of a processed prefix, one entry per image."""

    ks: list[list[Tensor]]  # [layer][image] -> [heads, tokens, head_dim]
    vs: list[list[Tensor]]
    grid: tuple[int, int] | None = None
    n_items: int = 0


def concealed_mask(n_images: int, tokens_per_image: int) -> ConcealMask:
    """Block lower-triangular visibility at image granularity."""
    if n_images <= 0 or tokens_per_image <= 0:
        raise ValueError("n_images and tokens_per_image must be positive")
    n = n_images * tokens_per_image
    image_of = np.arange(n) // tokens_per_image
    visible = image_of[:, None] >= image_of[None, :]
    matrix = np.where(visible, 0.0, -np.inf)
    return ConcealMask(matrix=matrix, n_images=n_images, tokens_per_image=tokens_per_image)


class ConcealedBlock(Module):
    """Pre-norm transformer block evaluated one image slot at a time.

    The slot attends to the key/value prefix plus itself; earlier slots
    are never touched, later slots do not exist yet.
    """

    def __init__(self, dim: int, heads: int, mlp_ratio: float, rng: np.random.Generator):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.ln2 = LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio), rng)

    def run_slot(
        self, x: Tensor, k_prefix: list[Tensor], v_prefix: list[Tensor]
    ) -> tuple[Tensor, Tensor, Tensor]:
        h = self.ln1(x)
        q = self.attn.project_q(h)
        k, v = self.attn.project_kv(h)
        key = k if not k_prefix else ag.concat([*k_prefix, k], axis=1)
        value = v if not v_prefix else ag.concat([*v_prefix, v], axis=1)
        x = x + self.attn.attend(q, key, value)
        x = x + self.mlp(self.ln2(x))
        return x, k, v


class SequenceTransformer(Module):
    """Learned per-position coding plus N concealed attention layers."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.seq_pos_embed = ag.parameter(trunc_normal(rng, (cfg.max_seq_len, cfg.dim)))
        self.blocks = [
            ConcealedBlock(cfg.dim, cfg.heads, cfg.mlp_ratio, rng) for _ in range(cfg.spt_depth)
        ]
        self.norm = LayerNorm(cfg.dim)

    def make_cache(self) -> SptCache:
        return SptCache(ks=[[] for _ in self.blocks], vs=[[] for _ in self.blocks])

    def _run_slot(self, cache: SptCache, grid: TokenGrid, append: bool) -> TokenGrid:
        i = cache.n_items
        if i >= self.cfg.max_seq_len:
            raise ValueError(
                f"sequence length {i + 1} exceeds supported maximum {self.cfg.max_seq_len}"
            )
        if cache.grid is None:
            if append:
                cache.grid = grid.grid
        elif grid.grid != cache.grid:
            raise ValueError("heterogeneous token grids in one sequence")

        x = grid.tokens + self.seq_pos_embed[i]
        for layer, block in enumerate(self.blocks):
            x, k, v = block.run_slot(x, cache.ks[layer], cache.vs[layer])
            if append:
                # graph edges are kept: under no_grad these are constants,
                # in a full-sequence grad pass later slots still reach here
                cache.ks[layer].append(k)
                cache.vs[layer].append(v)
        if append:
            cache.n_items += 1
        return TokenGrid(self.norm(x), grid.grid)

    def extend_cache(self, cache: SptCache, grid: TokenGrid) -> TokenGrid:
        """Process one more context item into the cache; returns its output slot."""
        return self._run_slot(cache, grid, append=True)

    def run_last(self, cache: SptCache, grid: TokenGrid) -> TokenGrid:
        """Output for a candidate final slot; the cache is left untouched."""
        return self._run_slot(cache, grid, append=False)

    def __call__(self, source: list[TokenGrid]) -> FeatureSeq:
        if not source:
            raise ValueError("empty feature sequence")
        if len(source) > self.cfg.max_seq_len:
            raise ValueError(
                f"sequence length {len(source)} exceeds supported maximum {self.cfg.max_seq_len}"
            )
        grid = source[0].grid
        dim = source[0].dim
        for item in source[1:]:
            if item.grid != grid or item.dim != dim:
                raise ValueError("heterogeneous token grids in one sequence")

        cache = self.make_cache()
        transformed = [self.extend_cache(cache, g) for g in source]
        return FeatureSeq(source=list(source), transformed=transformed)
