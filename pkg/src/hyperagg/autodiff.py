"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation works without a tape (pure numpy forward) and registers an
adjoint closure when any operand belongs to a ``GradientTape``. Tapes are
explicit, per-forward-pass objects: there is no global state, so independent
passes can run concurrently on separate tapes.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError, EvaluationError

# Floor applied to x^2 - 1 inside the arcosh derivative; callers are expected
# to clamp arcosh arguments to >= 1 + ARCOSH_EPS themselves.
ARCOSH_EPS = 1e-7


class GradientTape:
    """Ordered record of operations for one forward pass.

    Recording order is a topological order of the computation graph, so the
    backward pass simply walks the node list in reverse, visiting each node
    exactly once. Gradients of tensors never touched by the root are zero.
    """

    def __init__(self):
        self._nodes = []  # (output tensor, backward closure)
        self._grads = None

    def tensor(self, data):
        """Create a leaf tensor tracked by this tape."""
        return Tensor(data, tape=self)

    def _record(self, out, backward):
        self._nodes.append((out, backward))

    def backward(self, root):
        """Accumulate gradients of the scalar ``root`` into this tape."""
        if root.tape is not self:
            raise ValueError("root tensor does not belong to this tape")
        if root.data.size != 1:
            raise DimensionError(
                f"backward root must be scalar, got shape {root.data.shape}")
        grads = {id(root): np.ones_like(root.data)}
        for out, backward in reversed(self._nodes):
            g = grads.get(id(out))
            if g is None:
                continue
            for tensor, gi in backward(g):
                if tensor.tape is not self:
                    continue
                acc = grads.get(id(tensor))
                grads[id(tensor)] = gi if acc is None else acc + gi
        self._grads = grads

    def grad(self, tensor):
        """Gradient of the last backward() root w.r.t. ``tensor`` (zeros if unused)."""
        if self._grads is None:
            raise RuntimeError("backward() has not been called on this tape")
        g = self._grads.get(id(tensor))
        if g is None:
            return np.zeros_like(tensor.data)
        return g.reshape(tensor.data.shape)


class Tensor:
    """Immutable dense float64 array, optionally tracked by a gradient tape."""

    __slots__ = ("data", "tape")

    # keep numpy from absorbing Tensor operands; reflected dunders run instead
    __array_ufunc__ = None

    def __init__(self, data, tape=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tape is not None})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None, keepdims=False):
        return tmax(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def lift(params: dict, tape: GradientTape) -> dict:
    """Wrap a dict of numpy parameter arrays as leaf tensors on ``tape``."""
    return {name: tape.tensor(value) for name, value in params.items()}


def _join(*tensors):
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise ValueError("operands belong to different gradient tapes")
            tape = t.tape
    return tape


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


def _elementwise_pair(a, b, fwd, bwd_a, bwd_b):
    a, b = as_tensor(a), as_tensor(b)
    tape = _join(a, b)
    out = Tensor(fwd(a.data, b.data), tape)
    if tape is not None:
        def backward(g, a=a, b=b):
            return ((a, _unbroadcast(bwd_a(g, a.data, b.data), a.data.shape)),
                    (b, _unbroadcast(bwd_b(g, a.data, b.data), b.data.shape)))
        tape._record(out, backward)
    return out


def add(a, b):
    return _elementwise_pair(a, b, lambda x, y: x + y,
                             lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _elementwise_pair(a, b, lambda x, y: x - y,
                             lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _elementwise_pair(a, b, lambda x, y: x * y,
                             lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b):
    return _elementwise_pair(a, b, lambda x, y: x / y,
                             lambda g, x, y: g / y,
                             lambda g, x, y: -g * x / (y * y))


def neg(a):
    a = as_tensor(a)
    out = Tensor(-a.data, a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a: ((a, -g),))
    return out


def power(a, p):
    a = as_tensor(a)
    p = float(p)
    out = Tensor(a.data ** p, a.tape)
    if a.tape is not None:
        def backward(g, a=a, p=p):
            return ((a, g * p * a.data ** (p - 1.0)),)
        a.tape._record(out, backward)
    return out


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul shapes incompatible: {a.shape} x {b.shape}")
    tape = _join(a, b)
    out = Tensor(np.matmul(a.data, b.data), tape)
    if tape is not None:
        def backward(g, a=a, b=b):
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            return ((a, _unbroadcast(ga, a.data.shape)),
                    (b, _unbroadcast(gb, b.data.shape)))
        tape._record(out, backward)
    return out


def transpose(a):
    a = as_tensor(a)
    out = Tensor(np.swapaxes(a.data, -1, -2), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a: ((a, np.swapaxes(g, -1, -2)),))
    return out


def swapaxes(a, axis1, axis2):
    a = as_tensor(a)
    out = Tensor(np.swapaxes(a.data, axis1, axis2), a.tape)
    if a.tape is not None:
        a.tape._record(
            out, lambda g, a=a: ((a, np.swapaxes(g, axis1, axis2)),))
    return out


def exp(a):
    a = as_tensor(a)
    out = Tensor(np.exp(a.data), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a, d=out.data: ((a, g * d),))
    return out


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log requires strictly positive inputs")
    out = Tensor(np.log(a.data), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a: ((a, g / a.data),))
    return out


def sqrt(a):
    a = as_tensor(a)
    if np.any(a.data < 0.0):
        raise DomainError("sqrt requires nonnegative inputs")
    out = Tensor(np.sqrt(a.data), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a, d=out.data: ((a, g * 0.5 / d),))
    return out


def relu(a):
    """max(x, 0) with the subgradient convention relu'(0) = 0."""
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a: ((a, g * (a.data > 0.0)),))
    return out


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(s, a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a, s=s: ((a, g * s * (1.0 - s)),))
    return out


def arcosh(a):
    """ln(x + sqrt(x^2 - 1)); inputs must already be clamped to >= 1."""
    a = as_tensor(a)
    if np.any(a.data < 1.0):
        raise DomainError("arcosh requires inputs >= 1 (clamp before calling)")
    out = Tensor(np.arccosh(a.data), a.tape)
    if a.tape is not None:
        def backward(g, a=a):
            denom = np.sqrt(np.maximum(a.data * a.data - 1.0, ARCOSH_EPS))
            return ((a, g / denom),)
        a.tape._record(out, backward)
    return out


def clamp_min(a, floor):
    """Elementwise max(x, floor); gradient is zero where the floor is active."""
    a = as_tensor(a)
    floor = float(floor)
    out = Tensor(np.maximum(a.data, floor), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a: ((a, g * (a.data > floor)),))
    return out


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = Tensor(np.sum(a.data, axis=axis, keepdims=keepdims), a.tape)
    if a.tape is not None:
        def backward(g, a=a, axis=axis, keepdims=keepdims):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            # read-only broadcast view; gradients are never mutated in place
            return ((a, np.broadcast_to(g, a.data.shape)),)
        a.tape._record(out, backward)
    return out


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = Tensor(np.mean(a.data, axis=axis, keepdims=keepdims), a.tape)
    if a.tape is not None:
        n = a.data.size if axis is None else a.data.shape[axis]

        def backward(g, a=a, axis=axis, keepdims=keepdims, n=n):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            # read-only broadcast view; gradients are never mutated in place
            return ((a, np.broadcast_to(g / n, a.data.shape)),)
        a.tape._record(out, backward)
    return out


def tmax(a, axis=None, keepdims=False):
    """Max reduction; ties route the gradient to the first maximal entry."""
    a = as_tensor(a)
    out = Tensor(np.max(a.data, axis=axis, keepdims=keepdims), a.tape)
    if a.tape is not None:
        def backward(g, a=a, axis=axis, keepdims=keepdims):
            gx = np.zeros_like(a.data)
            if axis is None:
                gx.flat[np.argmax(a.data)] = np.asarray(g).reshape(())
            else:
                idx = np.expand_dims(np.argmax(a.data, axis=axis), axis)
                gexp = g if keepdims else np.expand_dims(g, axis)
                np.put_along_axis(gx, idx, gexp, axis=axis)
            return ((a, gx),)
        a.tape._record(out, backward)
    return out


def softmax_rows(a):
    """Softmax along the last axis, stabilized by per-row max subtraction."""
    a = as_tensor(a)
    if a.ndim < 1:
        raise DimensionError("softmax_rows requires at least a 1-D input")
    shifted = a.data - np.max(a.data, axis=-1, keepdims=True)
    e = np.exp(shifted, out=shifted)  # shifted is our own temporary
    s = np.divide(e, np.sum(e, axis=-1, keepdims=True), out=e)
    out = Tensor(s, a.tape)
    if a.tape is not None:
        def backward(g, a=a, s=s):
            dot = np.sum(g * s, axis=-1, keepdims=True)
            return ((a, (g - dot) * s),)
        a.tape._record(out, backward)
    return out


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    tape = _join(*tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tape)
    if tape is not None:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def backward(g, tensors=tensors, axis=axis, offsets=offsets):
            pairs = []
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                key = (slice(None),) * (axis % g.ndim) + (slice(lo, hi),)
                pairs.append((t, g[key]))
            return tuple(pairs)
        tape._record(out, backward)
    return out


def reshape(a, shape):
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape), a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g, a=a: ((a, g.reshape(a.data.shape)),))
    return out


def take(a, indices, axis=0):
    """Gather along ``axis`` with an integer index array."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.intp)
    out = Tensor(np.take(a.data, indices, axis=axis), a.tape)
    if a.tape is not None:
        def backward(g, a=a, indices=indices, axis=axis):
            gx = np.zeros_like(a.data)
            key = (slice(None),) * axis + (indices,)
            np.add.at(gx, key, g)
            return ((a, gx),)
        a.tape._record(out, backward)
    return out


def getitem(a, key):
    a = as_tensor(a)
    out = Tensor(a.data[key], a.tape)
    if a.tape is not None:
        def backward(g, a=a, key=key):
            gx = np.zeros_like(a.data)
            np.add.at(gx, key, g)
            return ((a, gx),)
        a.tape._record(out, backward)
    return out


def gradient_check(f, x, h=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps a Tensor to a scalar Tensor. The error per coordinate is
    |analytic - numeric| / max(1, |analytic|); the max over coordinates is
    returned.
    """
    return gradient_check_multi(lambda xs: f(xs[0]), [x], h=h)


def gradient_check_multi(f, xs, h=1e-5):
    """gradient_check over a list of inputs; f maps [Tensor, ...] -> scalar."""
    xs = [np.asarray(x, dtype=np.float64) for x in xs]
    tape = GradientTape()
    leaves = [tape.tensor(x) for x in xs]
    y = f(leaves)
    if not np.all(np.isfinite(y.data)):
        raise EvaluationError("objective evaluated to a non-finite value")
    tape.backward(y)

    def eval_at(vals):
        out = f([Tensor(v) for v in vals]).item()
        if not np.isfinite(out):
            raise EvaluationError("objective evaluated to a non-finite value")
        return out

    worst = 0.0
    for k, x in enumerate(xs):
        ana = tape.grad(leaves[k]).ravel()
        flat = x.ravel()
        for i in range(flat.size):
            orig = flat[i]
            vals = [v.copy() for v in xs]
            vals[k].ravel()[i] = orig + h
            fp = eval_at(vals)
            vals[k].ravel()[i] = orig - h
            fm = eval_at(vals)
            num = (fp - fm) / (2.0 * h)
            err = abs(ana[i] - num) / max(1.0, abs(ana[i]))
            worst = max(worst, err)
    return worst
