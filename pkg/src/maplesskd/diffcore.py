"""Minimal reverse-mode autodiff over dense numpy arrays.

Operations are recorded onto the innermost active :class:`Tape`. Outside a
tape nothing is recorded, which is how inference and frozen-teacher passes
run. Gradients are computed with :func:`backward` (keyed by trainable
tensor) or :func:`grad` (for an explicit list of tensors).
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Op",
    "NonFiniteError",
    "ShapeError",
    "backward",
    "grad",
    "gradcheck",
    "tensor",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "exp",
    "log",
    "absolute",
    "square",
    "sqrt",
    "relu",
    "tanh",
    "softmax",
    "log_softmax",
    "masked_softmax",
    "attend",
    "concat",
    "stack",
    "reduce_sum",
    "reduce_mean",
    "reduce_max",
    "reshape",
    "transpose",
    "take",
    "clip",
    "stop_gradient",
]


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN/Inf in its output or its input gradient."""

    def __init__(self, op: str, index: int | None, phase: str = "forward"):
        self.op = op
        self.index = index
        self.phase = phase
        where = f"op #{index} ({op})" if index is not None else f"op {op}"
        super().__init__(f"non-finite value in {phase} of {where}")


class ShapeError(ValueError):
    pass


_ids = itertools.count()
_tapes: list["Tape"] = []


class Tensor:
    """A float array with an identity, optionally marked trainable."""

    __slots__ = ("data", "trainable", "requires_grad", "id", "name", "__weakref__")

    def __init__(self, data, trainable: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.trainable = trainable
        self.requires_grad = trainable
        self.id = next(_ids)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.item())

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, trainable={self.trainable})"

    __array_priority__ = 100

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def max(self, axis=-1, keepdims=False):
        return reduce_max(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def abs(self):
        return absolute(self)

    def square(self):
        return square(self)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)

    def softmax(self):
        return softmax(self)

    def clip(self, lo, hi):
        return clip(self, lo, hi)


class Op:
    __slots__ = ("name", "inputs", "output", "backward", "kink")

    def __init__(self, name, inputs, output, backward, kink):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward = backward
        self.kink = kink


class Tape:
    """Ordered record of primitive ops, usable as a context manager.

    ``track_kinks`` keeps a distance-to-nondifferentiable-point probe for
    abs/relu/clip/max ops; only the gradient checker needs it.
    """

    def __init__(self, track_kinks: bool = False):
        self.ops: list[Op] = []
        self.track_kinks = track_kinks

    def __enter__(self) -> "Tape":
        _tapes.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _tapes.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self.ops)

    def min_kink_distance(self) -> float:
        dists = [op.kink() for op in self.ops if op.kink is not None]
        return min(dists) if dists else np.inf


def _active() -> Tape | None:
    return _tapes[-1] if _tapes else None


def tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _emit(name: str, data: np.ndarray, inputs: tuple, bwd: Callable, kink=None) -> Tensor:
    tape = _active()
    if not np.isfinite(data).all():
        raise NonFiniteError(name, len(tape.ops) if tape is not None else None)
    out = Tensor(data)
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.ops.append(Op(name, inputs, out, bwd, kink if tape.track_kinks else None))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    nlead = g.ndim - len(shape)
    if nlead > 0:
        g = g.sum(axis=tuple(range(nlead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(name, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return _emit("add", a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape
    return _emit("sub", a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    _check_broadcast("mul", a, b)
    x, y = a.data, b.data
    return _emit("mul", x * y, (a, b),
                 lambda g: (_unbroadcast(g * y, x.shape) if a.requires_grad else None,
                            _unbroadcast(g * x, y.shape) if b.requires_grad else None))


def div(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    _check_broadcast("div", a, b)
    x, y = a.data, b.data
    out = x / y

    def bwd(g):
        ga = _unbroadcast(g / y, x.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / y, y.shape) if b.requires_grad else None
        return ga, gb

    return _emit("div", out, (a, b), bwd)


def neg(a) -> Tensor:
    a = tensor(a)
    return _emit("neg", -a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = tensor(a)
    out = np.exp(a.data)
    return _emit("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = tensor(a)
    x = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x)
    return _emit("log", out, (a,), lambda g: (g / x,))


def absolute(a) -> Tensor:
    """|x|; the subgradient at exactly 0 is 0."""
    a = tensor(a)
    x = a.data
    return _emit("abs", np.abs(x), (a,), lambda g: (g * np.sign(x),),
                 kink=lambda: float(np.abs(x).min()) if x.size else np.inf)


def square(a) -> Tensor:
    a = tensor(a)
    x = a.data
    return _emit("square", x * x, (a,), lambda g: (2.0 * g * x,))


def sqrt(a) -> Tensor:
    a = tensor(a)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)
    return _emit("sqrt", out, (a,), lambda g: (0.5 * g / out,))


def relu(a) -> Tensor:
    a = tensor(a)
    x = a.data
    pos = x > 0
    return _emit("relu", np.where(pos, x, 0.0).astype(x.dtype, copy=False), (a,),
                 lambda g: (g * pos,),
                 kink=lambda: float(np.abs(x).min()) if x.size else np.inf)


def tanh(a) -> Tensor:
    a = tensor(a)
    out = np.tanh(a.data)
    return _emit("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only strictly inside the interval."""
    a = tensor(a)
    x = a.data
    inside = (x > lo) & (x < hi)
    return _emit("clip", np.clip(x, lo, hi), (a,), lambda g: (g * inside,),
                 kink=lambda: float(np.minimum(np.abs(x - lo), np.abs(x - hi)).min()) if x.size else np.inf)


def stop_gradient(a) -> Tensor:
    a = tensor(a)
    return Tensor(a.data)


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    x, y = a.data, b.data

    def bwd(g):
        ga = _unbroadcast(g @ np.swapaxes(y, -1, -2), x.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(x, -1, -2) @ g, y.shape) if b.requires_grad else None
        return ga, gb

    return _emit("matmul", x @ y, (a, b), bwd)


def attend(weights, values) -> Tensor:
    """Attention-weighted sum: weights (..., Q, N) against values (..., N, D)."""
    return matmul(weights, values)


# ---------------------------------------------------------------- softmax family


def softmax(a, axis: int = -1) -> Tensor:
    a = tensor(a)
    x = a.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)
    return _emit("softmax", out, (a,),
                 lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def log_softmax(a, axis: int = -1) -> Tensor:
    a = tensor(a)
    x = a.data
    z = x - x.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
    p = np.exp(out)
    return _emit("log_softmax", out, (a,),
                 lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


def masked_softmax(a, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to ``mask``; all-masked rows give zeros."""
    a = tensor(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    x = np.where(mask, a.data, -np.inf)
    m = x.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(mask, np.exp(x - m), 0.0)
    s = e.sum(axis=-1, keepdims=True)
    out = (e / np.where(s > 0, s, 1.0)).astype(a.dtype, copy=False)
    return _emit("masked_softmax", out, (a,),
                 lambda g: (out * (g - (g * out).sum(axis=-1, keepdims=True)),))


# ---------------------------------------------------------------- structure


def concat(items: Sequence, axis: int = -1) -> Tensor:
    ts = tuple(tensor(t) for t in items)
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bwd(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _emit("concat", out, ts, bwd)


def stack(items: Sequence, axis: int = 0) -> Tensor:
    ts = tuple(tensor(t) for t in items)
    try:
        out = np.stack([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: {e}") from None

    def bwd(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(ts)))

    return _emit("stack", out, ts, bwd)


def reshape(a, shape) -> Tensor:
    a = tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: {e}") from None
    return _emit("reshape", out, (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None) -> Tensor:
    a = tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _emit("transpose", np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),))


def take(a, index) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate in backward."""
    a = tensor(a)
    if isinstance(index, Tensor):
        raise TypeError("index with numpy arrays, not Tensors")
    shape, dtype = a.shape, a.dtype

    def bwd(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, index, g)
        return (out,)

    return _emit("take", np.asarray(a.data[index]), (a,), bwd)


# ---------------------------------------------------------------- reductions


def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = tensor(a)
    shape = a.shape
    return _emit("sum", np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,),
                 lambda g: (_expand(g, shape, axis, keepdims),))


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = tensor(a)
    shape = a.shape
    n = a.size if axis is None else np.prod([shape[i] for i in np.atleast_1d(axis)])
    return _emit("mean", np.asarray(a.data.mean(axis=axis, keepdims=keepdims)), (a,),
                 lambda g: (_expand(g, shape, axis, keepdims) / n,))


def reduce_max(a, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Max along one axis; the gradient goes to the first maximal entry."""
    a = tensor(a)
    x = a.data
    idx = np.expand_dims(np.argmax(x, axis=axis), axis)
    out = np.take_along_axis(x, idx, axis=axis)

    def bwd(g):
        gi = g if keepdims else np.expand_dims(g, axis)
        full = np.zeros_like(x)
        np.put_along_axis(full, idx, gi, axis=axis)
        return (full,)

    def kink():
        if x.shape[axis] < 2:
            return np.inf
        part = -np.sort(-x, axis=axis)
        top2 = np.take(part, [0, 1], axis=axis)
        return float(np.abs(np.take(top2, 0, axis=axis) - np.take(top2, 1, axis=axis)).min())

    return _emit("max", out if keepdims else np.squeeze(out, axis), (a,), bwd, kink=kink)


# ---------------------------------------------------------------- backward


def _run_backward(tape: Tape, output: Tensor) -> dict[int, np.ndarray]:
    if output.size != 1:
        raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
    grads: dict[int, np.ndarray] = {output.id: np.ones_like(output.data)}
    for index in range(len(tape.ops) - 1, -1, -1):
        op = tape.ops[index]
        g = grads.pop(op.output.id, None)
        if g is None:
            continue
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            in_grads = op.backward(g)
        for inp, gi in zip(op.inputs, in_grads):
            if gi is None or not inp.requires_grad:
                continue
            if not np.isfinite(gi).all():
                raise NonFiniteError(op.name, index, phase="backward")
            prev = grads.get(inp.id)
            grads[inp.id] = gi if prev is None else prev + gi
    return grads


def backward(tape: Tape, output: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``output`` keyed by trainable tensor.

    With ``params`` given, every listed tensor gets an entry (zeros when it is
    unreachable from ``output``); otherwise trainable leaves seen on the tape
    are reported.
    """
    grads = _run_backward(tape, output)
    if params is None:
        seen: dict[int, Tensor] = {}
        for op in tape.ops:
            for t in op.inputs:
                if t.trainable:
                    seen.setdefault(t.id, t)
        params = seen.values()
    result = {}
    for p in params:
        g = grads.get(p.id)
        result[p] = np.zeros_like(p.data) if g is None else np.broadcast_to(g, p.shape).copy()
    return result


def grad(tape: Tape, output: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
    grads = _run_backward(tape, output)
    return [np.zeros_like(t.data) if grads.get(t.id) is None else np.array(grads[t.id]) for t in wrt]


# ---------------------------------------------------------------- gradcheck


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence, step: float = 1e-6,
              rng: np.random.Generator | None = None, max_coords: int | None = None,
              max_resample: int = 20) -> float:
    """Max relative error between backprop and central differences.

    The error per coordinate is ``|analytic - fd| / max(1, |fd|)``. When an
    abs/relu/clip/max op sits within ``10 * step`` of its kink the inputs are
    jittered and the check is retried. ``max_coords`` limits the number of
    coordinates probed per input (sampled with ``rng``).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(0) if rng is None else rng
    arrays = [np.array(x, dtype=np.float64) for x in inputs]

    for _ in range(max_resample + 1):
        ts = [Tensor(a.copy(), trainable=True) for a in arrays]
        with Tape(track_kinks=True) as tape:
            out = fn(*ts)
        if out.size != 1:
            raise ShapeError(f"gradcheck needs a scalar function, got shape {out.shape}")
        if tape.min_kink_distance() >= 10 * step:
            break
        arrays = [a + rng.normal(scale=1e3 * step, size=a.shape) for a in arrays]
    else:
        raise RuntimeError("could not move inputs away from non-differentiable points")
    analytic = grad(tape, out, ts)

    def evaluate(vals):
        v = fn(*[Tensor(x) for x in vals]).data
        if not np.isfinite(v).all():
            raise NonFiniteError("gradcheck", None)
        return float(v)

    worst = 0.0
    for i, a in enumerate(arrays):
        flat = a.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for j in coords:
            orig = flat[j]
            flat[j] = orig + step
            fp = evaluate(arrays)
            flat[j] = orig - step
            fm = evaluate(arrays)
            flat[j] = orig
            fd = (fp - fm) / (2 * step)
            err = abs(analytic[i].reshape(-1)[j] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst
