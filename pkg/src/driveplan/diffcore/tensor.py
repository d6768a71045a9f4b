"""Reverse-mode automatic differentiation over dense float64 tensors.

The op set is deliberately small: exactly what the policy network, the
vehicle dynamics and the imitation loss need. Broadcasting is restricted
to scalar-vs-tensor and equal shapes; row-vector bias addition is its own
primitive (`add_rowvec`). Everything is float64.

Recording model: a `Tape` collects operation nodes in creation order,
which is a topological order by construction. A tensor participates in
recording when it was created on a tape (`Tape.leaf`, or as the result of
a recorded op) or when it is a parameter attached to the tape via
`attach`. Ops whose inputs carry no tape are evaluated eagerly without
recording, which is the fast inference path.

`backward` walks the tape once in reverse. Per-call adjoints live in a
scratch table; only leaves (tensors with ``requires_grad``) accumulate
into their persistent ``grad`` buffer, so two backward calls without
zeroing yield exactly doubled gradients.

Any op that produces a non-finite value raises `NumericError` immediately,
naming the op; the same applies to non-finite adjoints during backward.
"""

from __future__ import annotations

import math

import numpy as np


class DiffcoreError(Exception):
    """Base class for diffcore failures."""


class ShapeError(DiffcoreError):
    """Operands have incompatible shapes for the requested op."""


class NumericError(DiffcoreError):
    """A NaN or Inf was produced during forward or backward."""


class TapeError(DiffcoreError):
    """Tape misuse: mixing tapes, empty tape, non-scalar backward root."""


def _arr(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


def _finite(x: np.ndarray) -> bool:
    # single pass: any NaN/Inf poisons the sum (mixed infinities give NaN)
    return math.isfinite(x.sum())


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_tape", "_parents", "_bwd", "_idx")

    def __init__(self, data, requires_grad: bool = False, op: str = "const"):
        self.data = _arr(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self._tape = None
        self._parents = ()
        self._bwd = None
        self._idx = -1

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    # operator sugar; floats are wrapped as constants
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Append-only record of recorded ops, topologically ordered."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, data, requires_grad: bool = True) -> Tensor:
        """A fresh input tensor on this tape; grads accumulate in .grad."""
        t = Tensor(data, requires_grad=requires_grad, op="leaf")
        t._tape = self
        return t

    def _append(self, t: Tensor):
        t._idx = len(self.nodes)
        self.nodes.append(t)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def attach(param: Tensor, tape: Tape) -> Tensor:
    """Alias a tape-less leaf (typically a parameter) onto a tape.

    The returned tensor shares the parameter's data; backward routes its
    adjoint into the parameter's persistent grad buffer.
    """
    out = Tensor.__new__(Tensor)
    out.data = param.data
    out.grad = None
    out.requires_grad = False
    out.op = "attach"
    out._tape = tape
    out._parents = (param,)
    out._bwd = lambda g: (g,)
    tape._append(out)
    return out


def _find_tape(parents) -> Tape | None:
    tape = None
    for p in parents:
        t = p._tape
        if t is not None:
            if tape is None:
                tape = t
            elif tape is not t:
                raise TapeError("operands belong to different tapes")
    return tape


def _result(data: np.ndarray, parents: tuple, bwd, op: str) -> Tensor:
    if not _finite(data):
        raise NumericError(f"non-finite value produced by op '{op}'")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out.op = op
    out._parents = ()
    out._bwd = None
    out._idx = -1
    tape = _find_tape(parents)
    out._tape = tape
    if tape is not None and any(p.requires_grad or p._bwd is not None for p in parents):
        out._parents = parents
        out._bwd = bwd
        tape._append(out)
    return out


def backward(tape: Tape, out: Tensor) -> None:
    """Backpropagate from a scalar output through every tape node once.

    Gradient accumulation into leaves is additive across calls; call
    ``zero_grad`` (or ParamStore.zero_grad) between steps.
    """
    if not isinstance(out, Tensor):
        raise TapeError("backward root must be a Tensor")
    if out.size != 1:
        raise ShapeError(f"backward requires a scalar output, got shape {out.shape}")
    if not tape.nodes:
        raise TapeError("tape is empty; nothing was recorded")
    if out._tape is not tape or out._bwd is None:
        raise TapeError("output was not recorded on this tape")

    adjoint: dict[int, np.ndarray] = {id(out): np.ones_like(out.data)}
    for node in reversed(tape.nodes):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        for p, pg in zip(node._parents, node._bwd(g)):
            if pg is None:
                continue
            if not _finite(pg):
                raise NumericError(
                    f"poisoned gradient produced at tape node {node._idx} "
                    f"(op '{node.op}')")
            if p._bwd is not None:
                prev = adjoint.get(id(p))
                adjoint[id(p)] = pg if prev is None else prev + pg
            elif p.requires_grad:
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
                p.grad += pg


# ---------------------------------------------------------------------------
# elementwise ops (scalar-vs-tensor or equal shapes)

def _binary_shapes(a: Tensor, b: Tensor, op: str):
    if a.shape == b.shape:
        return
    if a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    # collapse a broadcast gradient back onto a size-1 operand
    if g.shape == tuple(shape):
        return g
    return np.sum(g).reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)
    return _result(a.data + b.data, (a, b), bwd, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")
    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)
    return _result(a.data - b.data, (a, b), bwd, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data
    def bwd(g):
        return _reduce_to(g * bd, a.shape), _reduce_to(g * ad, b.shape)
    return _result(ad * bd, (a, b), bwd, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "div")
    ad, bd = a.data, b.data
    def bwd(g):
        return _reduce_to(g / bd, a.shape), _reduce_to(-g * ad / (bd * bd), b.shape)
    return _result(ad / bd, (a, b), bwd, "div")


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: (g * y,), "exp")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _result(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    return _result(y, (a,), lambda g: (g * 0.5 / y,), "sqrt")


def cos(a: Tensor) -> Tensor:
    ad = a.data
    return _result(np.cos(ad), (a,), lambda g: (-g * np.sin(ad),), "cos")


def sin(a: Tensor) -> Tensor:
    ad = a.data
    return _result(np.sin(ad), (a,), lambda g: (g * np.cos(ad),), "sin")


def huber(a: Tensor, delta: float = 1.0) -> Tensor:
    """Elementwise Huber: 0.5 x^2 for |x| <= delta, else delta (|x| - delta/2)."""
    x = a.data
    absx = np.abs(x)
    inside = absx <= delta
    y = np.where(inside, 0.5 * x * x, delta * (absx - 0.5 * delta))
    dydx = np.where(inside, x, delta * np.sign(x))
    return _result(y, (a,), lambda g: (g * dydx,), "huber")


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Hard saturation; gradient is zero outside the open interval (lo, hi)."""
    x = a.data
    mask = (x > lo) & (x < hi)
    return _result(np.clip(x, lo, hi), (a,), lambda g: (g * mask,), "clamp")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    if not (-x.ndim <= axis < x.ndim):
        raise ShapeError(f"softmax: axis {axis} invalid for shape {x.shape}")
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)
    def bwd(g):
        dot = np.sum(g * y, axis=axis, keepdims=True)
        return (y * (g - dot),)
    return _result(y, (a,), bwd, "softmax")


# ---------------------------------------------------------------------------
# linear algebra and layout ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    def bwd(g):
        return g @ bd.T, ad.T @ g
    return _result(ad @ bd, (a, b), bwd, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose expects a 2-D tensor")
    return _result(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """(R, C) + (C,) bias broadcast over rows."""
    if x.data.ndim != 2 or v.data.ndim != 1 or x.shape[1] != v.shape[0]:
        raise ShapeError(f"add_rowvec: shapes {x.shape} and {v.shape}")
    def bwd(g):
        return g, g.sum(axis=0)
    return _result(x.data + v.data, (x, v), bwd, "add_rowvec")


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused affine map x @ w + b for (R, F) x (F, O) + (O,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError(f"linear: shapes {x.shape}, {w.shape}, {b.shape}")
    if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeError(f"linear: shapes {x.shape}, {w.shape}, {b.shape}")
    xd, wd = x.data, w.data
    def bwd(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)
    return _result(xd @ wd + b.data, (x, w, b), bwd, "linear")


def concat(tensors, axis: int = 0) -> Tensor:
    """Concatenate along axis; all other extents must agree exactly.

    Layout: outputs appear in argument order, C-contiguous; the backward
    pass splits the adjoint at the same offsets.
    """
    ts = list(tensors)
    if not ts:
        raise ShapeError("concat of zero tensors")
    nd = ts[0].data.ndim
    for t in ts[1:]:
        if t.data.ndim != nd:
            raise ShapeError("concat: rank mismatch")
        for ax in range(nd):
            if ax != (axis % nd) and t.shape[ax] != ts[0].shape[ax]:
                raise ShapeError(f"concat: extent mismatch on axis {ax}")
    sizes = [t.shape[axis % nd] for t in ts]
    offsets = np.cumsum([0] + sizes)
    def bwd(g):
        slicer = [slice(None)] * nd
        outs = []
        for i in range(len(ts)):
            slicer[axis % nd] = slice(offsets[i], offsets[i + 1])
            outs.append(g[tuple(slicer)])
        return tuple(outs)
    return _result(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), bwd, "concat")


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along axis."""
    nd = a.data.ndim
    ax = axis % nd
    if start < 0 or length <= 0 or start + length > a.shape[ax]:
        raise ShapeError(
            f"narrow: slice [{start}, {start + length}) out of range for axis {ax} of {a.shape}")
    slicer = [slice(None)] * nd
    slicer[ax] = slice(start, start + length)
    slicer = tuple(slicer)
    def bwd(g):
        full = np.zeros(a.shape, dtype=np.float64)
        full[slicer] = g
        return (full,)
    return _result(a.data[slicer].copy(), (a,), bwd, "narrow")


def gather_rows(a: Tensor, idx) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds."""
    if a.data.ndim != 2:
        raise ShapeError("gather_rows expects a 2-D tensor")
    idx = np.asarray(idx, dtype=np.intp)
    def bwd(g):
        full = np.zeros(a.shape, dtype=np.float64)
        np.add.at(full, idx, g)
        return (full,)
    return _result(a.data[idx], (a,), bwd, "gather_rows")


def block_mean_rows(a: Tensor, block: int) -> Tensor:
    """Mean over consecutive blocks of `block` rows: (B*block, C) -> (B, C)."""
    r, c = a.shape
    if r % block != 0:
        raise ShapeError(f"block_mean_rows: {r} rows not divisible by block {block}")
    y = a.data.reshape(r // block, block, c).mean(axis=1)
    def bwd(g):
        return (np.repeat(g / block, block, axis=0),)
    return _result(y, (a,), bwd, "block_mean_rows")


def mean_over(a: Tensor, axis: int) -> Tensor:
    n = a.shape[axis % a.data.ndim]
    y = a.data.mean(axis=axis)
    def bwd(g):
        return (np.expand_dims(g, axis % a.data.ndim).repeat(n, axis % a.data.ndim) / n,)
    return _result(y, (a,), bwd, "mean_over")


def sum_over(a: Tensor, axis: int) -> Tensor:
    n = a.shape[axis % a.data.ndim]
    y = a.data.sum(axis=axis)
    def bwd(g):
        return (np.expand_dims(g, axis % a.data.ndim).repeat(n, axis % a.data.ndim),)
    return _result(y, (a,), bwd, "sum_over")


def sum_all(a: Tensor) -> Tensor:
    def bwd(g):
        return (np.full(a.shape, float(g)),)
    return _result(np.asarray(a.data.sum()), (a,), bwd, "sum_all")


def masked_max_rows(a: Tensor, mask) -> Tensor:
    """Columnwise max over the rows of a 2-D tensor where mask is True.

    Backward routes each column's gradient to the first row attaining the
    max among valid rows; masked rows never receive gradient.
    """
    if a.data.ndim != 2:
        raise ShapeError("masked_max_rows expects a 2-D tensor")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (a.shape[0],):
        raise ShapeError(f"mask shape {mask.shape} does not match {a.shape[0]} rows")
    if not mask.any():
        raise ShapeError("masked_max_rows: no valid rows")
    valid = np.where(mask)[0]
    sub = a.data[valid]
    arg = valid[np.argmax(sub, axis=0)]
    y = a.data[arg, np.arange(a.shape[1])]
    def bwd(g):
        full = np.zeros(a.shape, dtype=np.float64)
        np.add.at(full, (arg, np.arange(a.shape[1])), g)
        return (full,)
    return _result(y, (a,), bwd, "masked_max_rows")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    def bwd(g):
        return (g.reshape(a.shape),)
    return _result(a.data.reshape(shape), (a,), bwd, "reshape")


def custom_op(data: np.ndarray, parents: tuple, bwd, op: str) -> Tensor:
    """Register a fused kernel: a forward value plus a hand-written
    backward mapping the output adjoint to one gradient per parent (None
    for non-differentiable slots). Recording follows the usual rules."""
    return _result(np.asarray(data, dtype=np.float64), tuple(parents), bwd, op)


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, num_heads: int) -> Tensor:
    """Scaled dot-product attention, fused across heads.

    q is (R, D); k and v are (S, D); D splits into num_heads slices of
    d = D / num_heads. Per head: softmax(q k^T / sqrt(d)) v, softmax over
    keys; heads are re-concatenated. One tape node instead of ~7 per head.
    """
    if q.data.ndim != 2 or k.data.ndim != 2 or v.data.ndim != 2:
        raise ShapeError("attention expects 2-D operands")
    R, D = q.shape
    S = k.shape[0]
    if k.shape != (S, D) or v.shape != (S, D):
        raise ShapeError(f"attention: k/v shapes {k.shape}/{v.shape} from q {q.shape}")
    if D % num_heads != 0:
        raise ShapeError(f"attention: {D} dims not divisible by {num_heads} heads")
    d = D // num_heads
    scale = 1.0 / np.sqrt(d)
    qh = q.data.reshape(R, num_heads, d).transpose(1, 0, 2)   # (H, R, d)
    kh = k.data.reshape(S, num_heads, d).transpose(1, 0, 2)
    vh = v.data.reshape(S, num_heads, d).transpose(1, 0, 2)
    scores = np.einsum("hid,hjd->hij", qh, kh) * scale
    scores -= scores.max(axis=2, keepdims=True)
    e = np.exp(scores)
    w = e / e.sum(axis=2, keepdims=True)                      # (H, R, S)
    out = np.einsum("hij,hjd->hid", w, vh)

    def bwd(g):
        gh = g.reshape(R, num_heads, d).transpose(1, 0, 2)
        gv = np.einsum("hij,hid->hjd", w, gh)
        gw = np.einsum("hid,hjd->hij", gh, vh)
        gs = w * (gw - np.sum(gw * w, axis=2, keepdims=True))
        gq = np.einsum("hij,hjd->hid", gs, kh) * scale
        gk = np.einsum("hij,hid->hjd", gs, qh) * scale
        return (gq.transpose(1, 0, 2).reshape(R, D),
                gk.transpose(1, 0, 2).reshape(S, D),
                gv.transpose(1, 0, 2).reshape(S, D))

    return _result(out.transpose(1, 0, 2).reshape(R, D), (q, k, v), bwd, "attention")
