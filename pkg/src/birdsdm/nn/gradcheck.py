"""Central finite-difference checks of the backward pass."""
import numpy as np

from .tensor import Tensor

# gradients below this magnitude are compared in absolute terms
GRAD_FLOOR = 1e-6


def relative_error(analytic, numeric, floor=GRAD_FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(f, arrays, eps=1e-5):
    """d f / d array for every array in ``arrays`` (perturbed in place)."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f()
            flat[i] = orig - eps
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def check_function(fn, inputs, eps=1e-5, seed=0) -> float:
    """Max relative gradient error of ``fn`` w.r.t. each array in ``inputs``.

    ``fn`` maps Tensors to a Tensor; it is reduced to a scalar with a fixed
    random projection so every output element is exercised.
    """
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    out_shape = fn(*[Tensor(a) for a in arrays]).shape
    proj = np.random.default_rng(seed).normal(size=out_shape)

    def scalar():
        return float((fn(*[Tensor(a) for a in arrays]).data * proj).sum())

    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    (fn(*leaves) * proj).sum().backward()
    numeric = numeric_gradient(scalar, arrays, eps)
    return max(float(relative_error(t.grad if t.grad is not None else np.zeros_like(a), g).max(initial=0.0))
               for t, a, g in zip(leaves, arrays, numeric))


def gradient_check(model, loss_fn, sample, eps=1e-5, floor=GRAD_FLOOR) -> float:
    """Max relative error between backprop and finite differences over every
    model parameter.

    ``loss_fn(model, sample)`` must return a scalar Tensor and be
    deterministic (e.g. reseed any dropout rng inside it).
    """
    model.zero_grad()
    loss_fn(model, sample).backward()
    worst = 0.0
    for t in model.parameters():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        (numeric,) = numeric_gradient(lambda: float(loss_fn(model, sample).data), [t.data], eps)
        worst = max(worst, float(relative_error(analytic, numeric, floor).max(initial=0.0)))
    model.zero_grad()
    return worst
