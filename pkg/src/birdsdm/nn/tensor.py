"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every differentiable op is a :class:`Function` subclass with ``forward``
and ``backward``. ``backward`` receives the upstream gradient and returns
one gradient per parent (``None`` for parents that need none).
"""
from __future__ import annotations

import numpy as np

from ..errors import DataError


class Tensor:
    def __init__(self, data, requires_grad=False, ctx=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.ctx = ctx

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return Add.apply(self, _lift(other))

    __radd__ = __add__

    def __mul__(self, other):
        return Mul.apply(self, _lift(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return MatMul.apply(self, _lift(other))

    def sum(self):
        return Sum.apply(self)

    def mean(self):
        return Sum.apply(self) * (1.0 / self.data.size)

    def relu(self):
        return ReLU.apply(self)

    def sigmoid(self):
        return Sigmoid.apply(self)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf that
        requires a gradient."""
        if grad is None:
            if self.data.size != 1:
                raise DataError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _toposort(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.ctx is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node.ctx.backward(g)
            for parent, pg in zip(node.ctx.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.data.shape:
                    raise DataError(f"{type(node.ctx).__name__}.backward returned gradient of shape "
                                    f"{pg.shape} for input of shape {parent.data.shape}")
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if node.ctx is not None:
            for p in node.ctx.parents:
                if id(p) not in seen:
                    stack.append((p, False))
    return order


class Function:
    def __init__(self, *parents):
        self.parents = parents

    @classmethod
    def apply(cls, *parents, **kwargs):
        ctx = cls(*parents)
        out = ctx.forward(*[p.data for p in parents], **kwargs)
        needs = any(p.requires_grad for p in parents)
        return Tensor(out, requires_grad=needs, ctx=ctx if needs else None)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Add(Function):
    def forward(self, x, y):
        self.shapes = x.shape, y.shape
        return x + y

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Mul(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return unbroadcast(grad * self.y, self.x.shape), unbroadcast(grad * self.x, self.y.shape)


class MatMul(Function):
    def forward(self, x, w):
        if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
            raise DataError(f"matmul shape mismatch: {x.shape} @ {w.shape}")
        self.x, self.w = x, w
        return x @ w

    def backward(self, grad):
        return grad @ self.w.T, self.x.T @ grad


class Sum(Function):
    def forward(self, x):
        self.shape = x.shape
        return np.array(x.sum())

    def backward(self, grad):
        return (np.broadcast_to(grad, self.shape).copy(),)


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        # NaN must survive so that divergence is detectable downstream
        return np.where(x <= 0, 0.0, x)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, x):
        self.out = _sigmoid(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


class Conv2d(Function):
    """Stride-1 'same' convolution, odd square kernel.

    x: [B, C, H, W]; w: [O, C, k, k]; b: [O].
    """

    def forward(self, x, w, b):
        if x.ndim != 4 or w.ndim != 4 or b.shape != (w.shape[0],):
            raise DataError(f"conv2d expects x[B,C,H,W], w[O,C,k,k], b[O]; got {x.shape}, {w.shape}, {b.shape}")
        if x.shape[1] != w.shape[1]:
            raise DataError(f"conv2d channel mismatch: input has {x.shape[1]}, kernel expects {w.shape[1]}")
        k = w.shape[2]
        if k % 2 != 1 or w.shape[3] != k:
            raise DataError("conv2d kernel must be square with odd size")
        p = k // 2
        B, C, H, W = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        self.xp, self.w, self.hw = xp, w, (H, W)
        out = np.zeros((B, H, W, w.shape[0]))
        for i in range(k):
            for j in range(k):
                out += np.tensordot(xp[:, :, i:i + H, j:j + W], w[:, :, i, j], axes=([1], [1]))
        return out.transpose(0, 3, 1, 2) + b[None, :, None, None]

    def backward(self, grad):
        xp, w = self.xp, self.w
        H, W = self.hw
        k = w.shape[2]
        dw = np.zeros_like(w)
        dxp = np.zeros_like(xp)
        g = grad.transpose(0, 2, 3, 1)  # [B, H, W, O]
        for i in range(k):
            for j in range(k):
                win = xp[:, :, i:i + H, j:j + W]
                dw[:, :, i, j] = np.tensordot(grad, win, axes=([0, 2, 3], [0, 2, 3]))
                dxp[:, :, i:i + H, j:j + W] += np.tensordot(g, w[:, :, i, j], axes=([3], [0])).transpose(0, 3, 1, 2)
        p = k // 2
        dx = dxp[:, :, p:p + H, p:p + W]
        return dx, dw, grad.sum(axis=(0, 2, 3))


class MaxPool2d(Function):
    """2x2 max pooling, stride 2; a trailing odd row/column is dropped.
    Ties send the gradient to the first maximum in row-major window order."""

    def forward(self, x):
        if x.ndim != 4:
            raise DataError(f"maxpool2d expects [B,C,H,W], got {x.shape}")
        B, C, H, W = x.shape
        H2, W2 = H // 2, W // 2
        if H2 == 0 or W2 == 0:
            raise DataError(f"maxpool2d input {H}x{W} too small")
        win = x[:, :, :2 * H2, :2 * W2].reshape(B, C, H2, 2, W2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H2, W2, 4)
        self.arg = win.argmax(axis=-1)
        self.shape = x.shape
        return np.take_along_axis(win, self.arg[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        B, C, H, W = self.shape
        H2, W2 = H // 2, W // 2
        win = np.zeros((B, C, H2, W2, 4))
        np.put_along_axis(win, self.arg[..., None], grad[..., None], axis=-1)
        dx = np.zeros(self.shape)
        dx[:, :, :2 * H2, :2 * W2] = win.reshape(B, C, H2, W2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, 2 * H2, 2 * W2)
        return (dx,)


class GlobalAvgPool(Function):
    def forward(self, x):
        if x.ndim != 4:
            raise DataError(f"global_average_pool expects [B,C,H,W], got {x.shape}")
        self.shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        B, C, H, W = self.shape
        return (np.broadcast_to(grad[:, :, None, None] / (H * W), self.shape).copy(),)


class Dropout(Function):
    """Inverted dropout with an explicit keep-mask."""

    def forward(self, x, mask, p):
        if mask.shape != x.shape:
            raise DataError(f"dropout mask shape {mask.shape} != input shape {x.shape}")
        self.scale = mask / (1.0 - p)
        return x * self.scale

    def backward(self, grad):
        return (grad * self.scale,)


class Concat(Function):
    def forward(self, *xs, axis=1):
        ref = xs[0].shape
        for x in xs[1:]:
            if x.ndim != len(ref) or any(a != b for d, (a, b) in enumerate(zip(x.shape, ref)) if d != axis):
                raise DataError(f"concat shape mismatch along axis {axis}: {[x.shape for x in xs]}")
        self.axis = axis
        self.splits = np.cumsum([x.shape[axis] for x in xs])[:-1]
        return np.concatenate(xs, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


LOGIT_CLAMP = 30.0


class SigmoidCrossEntropy(Function):
    """Per-row soft-label binary cross-entropy on logits.

    Returns ``L[b] = sum_s -y log(sigmoid(z)) - (1 - y) log(1 - sigmoid(z))``.
    Logits are clamped to +-30 before evaluation; the gradient
    ``sigmoid(z) - y`` is passed straight through the clamp.
    """

    def forward(self, z, target):
        if z.shape != target.shape:
            raise DataError(f"prediction shape {z.shape} != target shape {target.shape}")
        if np.any(target < 0) or np.any(target > 1):
            raise DataError("cross-entropy targets must lie in [0, 1]")
        zc = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
        self.delta = _sigmoid(zc) - target
        per_elem = np.maximum(zc, 0) - zc * target + np.log1p(np.exp(-np.abs(zc)))
        return per_elem.sum(axis=1)

    def backward(self, grad):
        return grad[:, None] * self.delta, None


# functional helpers ---------------------------------------------------------

def conv2d(x, w, b):
    return Conv2d.apply(x, w, b)


def maxpool2d(x):
    return MaxPool2d.apply(x)


def global_average_pool(x):
    return GlobalAvgPool.apply(x)


def dense(x, w, b):
    return MatMul.apply(x, w) + b


def relu(x):
    return ReLU.apply(x)


def sigmoid(x):
    return Sigmoid.apply(x)


def concat(tensors, axis=1):
    return Concat.apply(*tensors, axis=axis)


def dropout(x, p, rng=None, training=False):
    """Identity unless ``training``; then zero units with probability ``p``
    (mask drawn from ``rng``) and rescale by ``1 / (1 - p)``."""
    if not training or p == 0:
        return x
    if rng is None:
        raise DataError("dropout in training mode needs an rng")
    mask = (rng.random(x.shape) >= p).astype(np.float64)
    return Dropout.apply(x, mask=mask, p=p)


def sigmoid_cross_entropy(logits, target):
    return SigmoidCrossEntropy.apply(logits, _lift(target))
