"""Reverse-mode automatic differentiation over dense n-d arrays.

Provides exactly the operation set the segmentation model needs:
elementwise arithmetic, matmul, shape manipulation, reductions, layer
norm, GELU, sigmoid, and a fused masked softmax whose concealed entries
come out exactly zero. Buffers are row-major numpy arrays; the graph and
every backward rule live in this module.

Element precision is a per-thread mode: float32 by default (training),
float64 inside a ``precision("float64")`` block (verification). A graph
and its tensors belong to one thread; distinct graphs may run in
parallel threads.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special

__all__ = [
    "Tensor",
    "GradReport",
    "NumericError",
    "precision",
    "default_dtype",
    "no_grad",
    "grad_enabled",
    "tensor",
    "parameter",
    "add",
    "mul",
    "matmul",
    "reshape",
    "transpose",
    "concat",
    "tsum",
    "tmean",
    "repeat_interleave",
    "pow_scalar",
    "log",
    "exp",
    "clip",
    "sigmoid",
    "gelu",
    "softmax",
    "masked_softmax",
    "layer_norm",
    "grad_check",
    "zero_grads",
]


class NumericError(RuntimeError):
    """Non-finite values appeared where finite ones are required."""


_state = threading.local()


def _st():
    if not hasattr(_state, "dtype"):
        _state.dtype = np.dtype(np.float32)
        _state.grad = True
    return _state


def default_dtype() -> np.dtype:
    return _st().dtype


@contextmanager
def precision(dtype):
    """Element dtype for tensors created inside the block."""
    st = _st()
    old = st.dtype
    st.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        st.dtype = old


def grad_enabled() -> bool:
    return _st().grad


@contextmanager
def no_grad():
    """Skip graph construction inside the block (cheap inference)."""
    st = _st()
    old = st.grad
    st.grad = False
    try:
        yield
    finally:
        st.grad = old


class Tensor:
    """N-d numeric array with optional gradient and graph linkage.

    ``_prev`` holds the parent tensors and ``_backward`` maps the output
    gradient to one gradient per parent (``None`` for parents that need
    none). Leaves have an empty ``_prev``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        dt = np.dtype(dtype) if dtype is not None else default_dtype()
        self.data = np.array(data, dtype=dt)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._prev: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None

    @classmethod
    def _result(cls, data: np.ndarray, prev: tuple, backward) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data
        t.grad = None
        t.requires_grad = backward is not None
        t._prev = prev
        t._backward = backward
        return t

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor._result(self.data, (), None)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    # -- backward -----------------------------------------------------------

    def backward(self) -> None:
        """Populate grads of every reachable leaf by the chain rule.

        The loss must be scalar. Leaves (parameters, inputs) accumulate
        into ``.grad``; repeated calls without resetting grads accumulate.
        The graph is acyclic and each node is visited exactly once, in
        reverse topological order.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))

        # Per-call flowing gradients; only leaves retain .grad across calls.
        flowing: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = np.zeros_like(node.data)
                    node.grad += g
                continue
            grads = node._backward(g)
            for parent, pg in zip(node._prev, grads):
                if pg is None or not parent.requires_grad:
                    continue
                acc = flowing.get(id(parent))
                flowing[id(parent)] = pg if acc is None else acc + pg


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def parameter(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# -- op plumbing --------------------------------------------------------------


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor:
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor._result(data, parents, backward)
    return Tensor._result(data, (), None)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_same_dtype(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.dtype != b.data.dtype:
        raise ValueError(f"{op}: dtype mismatch {a.data.dtype} vs {b.data.dtype}")


# -- elementwise ---------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = a.data.dtype.type(b)
        out = a.data + c
        return _make(out, (a,), lambda g: (_unbroadcast(g, a.shape),))
    _check_same_dtype(a, b, "add")
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = a.data.dtype.type(b)
        out = a.data * c
        return _make(out, (a,), lambda g: (_unbroadcast(g * c, a.shape),))
    _check_same_dtype(a, b, "mul")
    out = a.data * b.data
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return _make(out, (a, b), backward)


def pow_scalar(a: Tensor, exponent: float) -> Tensor:
    """a ** exponent for a real exponent; base must stay positive when
    exponent is non-integral."""
    e = float(exponent)
    out = a.data**e
    ad = a.data

    def backward(g):
        return (g * e * ad ** (e - 1.0),)

    return _make(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)
    ad = a.data
    return _make(out, (a,), lambda g: (g / ad,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes through the interior."""
    out = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)
    return _make(out, (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), backward)


_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + special.erf(x * x.dtype.type(_INV_SQRT2)))
    out = x * cdf

    def backward(g):
        pdf = np.exp(-0.5 * x * x) * x.dtype.type(_INV_SQRT_2PI)
        return (g * (cdf + x * pdf),)

    return _make(out, (a,), backward)


# -- shape ---------------------------------------------------------------------


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = np.reshape(a.data, shape)
    orig = a.shape
    return _make(out, (a,), lambda g: (np.reshape(g, orig),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    out = np.transpose(a.data, axes)
    inv = tuple(np.argsort(axes))
    return _make(out, (a,), lambda g: (np.transpose(g, inv),))


def getitem(a: Tensor, key) -> Tensor:
    """Basic (slice/int) indexing with scatter-style backward."""
    out = a.data[key]
    shape, dtype = a.shape, a.data.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[key] = g
        return (full,)

    return _make(out, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat of an empty sequence")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), backward)


def repeat_interleave(a: Tensor, repeats: int, axis: int) -> Tensor:
    """Repeat each slice along ``axis`` (nearest-neighbour upsampling)."""
    out = np.repeat(a.data, repeats, axis=axis)
    n = a.shape[axis]

    def backward(g):
        gshape = g.shape[:axis] + (n, repeats) + g.shape[axis + 1 :]
        return (g.reshape(gshape).sum(axis=axis + 1),)

    return _make(out, (a,), backward)


# -- reductions ------------------------------------------------------------------


def _norm_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.data.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)
    shape = a.shape

    def backward(g):
        gk = g
        if not keepdims:
            kshape = tuple(1 if i in axes else n for i, n in enumerate(shape))
            gk = g.reshape(kshape)
        return (np.broadcast_to(gk, shape),)

    return _make(out, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.data.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# -- linear algebra ----------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError(f"matmul requires ndim >= 2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    _check_same_dtype(a, b, "matmul")
    out = np.matmul(a.data, b.data)
    ad, bd = a.data, b.data

    def backward(g):
        ga = np.matmul(g, bd.swapaxes(-1, -2))
        gb = np.matmul(ad.swapaxes(-1, -2), g)
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _make(out, (a, b), backward)


# -- fused neural ops ----------------------------------------------------------------


def softmax(logits: Tensor) -> Tensor:
    """Row softmax over the last axis."""
    return _softmax_impl(logits, None)


def masked_softmax(logits: Tensor, additive_mask: Tensor | np.ndarray | None) -> Tensor:
    """Row softmax with an additive 0 / -inf concealment bias.

    Entries at -inf positions are exactly zero in the output; every row
    must keep at least one visible entry.
    """
    if additive_mask is None:
        return _softmax_impl(logits, None)
    mask = additive_mask.data if isinstance(additive_mask, Tensor) else np.asarray(additive_mask)
    if mask.ndim < 2:
        raise ValueError(f"additive mask must be at least 2-d, got shape {mask.shape}")
    if logits.shape[-2:] != mask.shape[-2:]:
        raise ValueError(f"mask shape {mask.shape} does not match logits {logits.shape}")
    finite_ok = (mask == 0) | np.isneginf(mask)
    if not finite_ok.all():
        raise ValueError("additive mask entries must be 0 or -inf")
    if np.isneginf(mask).all(axis=-1).any():
        raise ValueError("additive mask conceals an entire row")
    return _softmax_impl(logits, mask)


def _softmax_impl(logits: Tensor, mask: np.ndarray | None) -> Tensor:
    z = logits.data
    if mask is not None:
        z = z + mask.astype(z.dtype)  # -inf + finite stays -inf
    zmax = np.max(z, axis=-1, keepdims=True)
    e = np.exp(z - zmax)  # exp(-inf) == 0.0 exactly
    s = e.sum(axis=-1, keepdims=True)
    out = e / s

    def backward(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return ((g - inner) * out,)

    return _make(out, (logits,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis and apply a learned affine map."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError(f"layer_norm affine params must have shape ({d},)")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + xd.dtype.type(eps))
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        dims = tuple(range(g.ndim - 1))
        dbeta = g.sum(axis=dims)
        dgamma = (g * xhat).sum(axis=dims)
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgamma, dbeta

    return _make(out, (x, gamma, beta), backward)


# -- verification ---------------------------------------------------------------------


@dataclass
class GradReport:
    """Backward-vs-central-difference comparison for a parameter set."""

    per_param: dict[str, float]
    eps: float
    tol: float
    max_rel_err: float = field(init=False)
    worst_param: str = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.per_param:
            self.worst_param = max(self.per_param, key=self.per_param.get)
            self.max_rel_err = self.per_param[self.worst_param]
        else:
            self.worst_param = ""
            self.max_rel_err = 0.0
        self.passed = self.max_rel_err <= self.tol


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
) -> GradReport:
    """Compare backward grads of ``f()`` against central differences.

    ``f`` must be a deterministic scalar-graph builder closing over
    ``params``, all of which must be float64 (finite differences are
    unreliable in single precision). Relative error per coordinate is
    ``|a - n| / max(1, |a|, |n|)``.
    """
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 parameters, {name} is {p.data.dtype}")

    zero_grads(params.values())
    loss = f()
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    per_param: dict[str, float] = {}
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            aflat = analytic[name].reshape(-1)
            worst = 0.0
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = float(f().data.reshape(()))
                flat[i] = orig - eps
                fm = float(f().data.reshape(()))
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * eps)
                a = float(aflat[i])
                if not (np.isfinite(numeric) and np.isfinite(a)):
                    raise NumericError(f"non-finite gradient at {name}[{i}]: analytic={a}, numeric={numeric}")
                rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
                worst = max(worst, rel)
            per_param[name] = worst

    return GradReport(per_param=per_param, eps=eps, tol=tol)
