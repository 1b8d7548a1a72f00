"""Neural layers on top of the autodiff core.

Patch embedding, multi-head self-attention (optionally masked),
pre-norm transformer blocks, MLPs, and a parameter registry with
the standard ViT initialization (truncated normal, std 0.02, zero
biases, unit layer-norm scales).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) redrawn until every sample lies within 2 std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


class Module:
    """Base with a recursive named-parameter walk (insertion order)."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    params[full] = value
            elif isinstance(value, Module):
                params.update(value.named_parameters(f"{full}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        params.update(item.named_parameters(f"{full}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        params[f"{full}.{i}"] = item
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


@dataclass
class TokenGrid:
    """Per-image token matrix plus its 2-d patch layout."""

    tokens: Tensor  # [n_tokens, dim]
    grid: tuple[int, int]

    def __post_init__(self):
        h, w = self.grid
        if self.tokens.shape[0] != h * w:
            raise ValueError(f"{self.tokens.shape[0]} tokens cannot fill a {h}x{w} grid")

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = ag.parameter(trunc_normal(rng, (d_in, d_out)))
        self.bias = ag.parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = ag.parameter(np.ones(dim))
        self.beta = ag.parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ag.layer_norm(x, self.gamma, self.beta, eps=self.eps)


class Mlp(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator, d_out: int | None = None):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, d_out if d_out is not None else dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ag.gelu(self.fc1(x)))


class PatchEmbed(Module):
    """Linear projection of non-overlapping patches to token vectors."""

    def __init__(self, in_ch: int, patch: int, dim: int, rng: np.random.Generator):
        self.in_ch = in_ch
        self.patch = patch
        self.dim = dim
        self.proj = Linear(in_ch * patch * patch, dim, rng)

    def __call__(self, planes: Tensor) -> TokenGrid:
        c, h, w = planes.shape
        p = self.patch
        if c != self.in_ch:
            raise ValueError(f"expected {self.in_ch} planes, got {c}")
        if h % p != 0 or w % p != 0:
            raise ValueError(f"image size {h}x{w} not divisible by patch {p}")
        gh, gw = h // p, w // p
        x = planes.reshape((c, gh, p, gw, p))
        x = x.transpose((1, 3, 0, 2, 4))  # [gh, gw, c, p, p]
        x = x.reshape((gh * gw, c * p * p))
        return TokenGrid(self.proj(x), (gh, gw))


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention with optional additive mask.

    The qkv projection pieces are exposed separately so the sequence
    transformer can attend per visible prefix without ever touching
    concealed tokens.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = 1.0 / np.sqrt(self.head_dim)
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def _split_heads(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        return x.reshape((n, self.heads, self.head_dim)).transpose((1, 0, 2))

    def project_q(self, x: Tensor) -> Tensor:
        return self._split_heads(self.wq(x))

    def project_kv(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return self._split_heads(self.wk(x)), self._split_heads(self.wv(x))

    def attend(self, q: Tensor, k: Tensor, v: Tensor, additive_mask=None) -> Tensor:
        scores = (q @ k.transpose((0, 2, 1))) * self.scale  # [heads, nq, nk]
        weights = ag.masked_softmax(scores, additive_mask)
        out = weights @ v  # [heads, nq, head_dim]
        nq = out.shape[1]
        merged = out.transpose((1, 0, 2)).reshape((nq, self.dim))
        return self.wo(merged)

    def __call__(self, x: Tensor, additive_mask=None) -> Tensor:
        q = self.project_q(x)
        k, v = self.project_kv(x)
        return self.attend(q, k, v, additive_mask)


class EncoderBlock(Module):
    """Pre-norm transformer block: LN -> MHSA -> residual, LN -> MLP -> residual."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float, rng: np.random.Generator):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.ln2 = LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio), rng)

    def __call__(self, x: Tensor, additive_mask=None) -> Tensor:
        x = x + self.attn(self.ln1(x), additive_mask)
        x = x + self.mlp(self.ln2(x))
        return x


def block_param_count(dim: int, mlp_ratio: float) -> int:
    """Parameters in one EncoderBlock; asserted against the registry in tests."""
    hidden = int(dim * mlp_ratio)
    attn = 4 * (dim * dim + dim)
    mlp = dim * hidden + hidden + hidden * dim + dim
    norms = 2 * (2 * dim)
    return attn + mlp + norms
