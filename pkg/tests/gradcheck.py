"""Central finite-difference checks shared by the unit and acceptance tests."""
import numpy as np

from gazesynth.nn import (BatchNorm, Conv1d, ConvTranspose1d, Dense, Flatten, Identity, LeakyReLU,
                          Reshape, Sigmoid)

H = 1e-5


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def numeric_grad(f, x, h=H):
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def check_layer(layer, x, rng, training=True):
    """Largest relative error over the input gradient and every parameter gradient."""
    x = x.copy()
    out = layer.forward(x, training)
    w = rng.standard_normal(out.shape)

    def loss():
        return float(np.sum(layer.forward(x, training) * w))

    state = {k: b.copy() for k, b in layer.buffers.items()}

    def restore():
        for k, b in state.items():
            layer.buffers[k][...] = b

    restore()
    layer.zero_grad()
    layer.forward(x, training)
    dx = layer.backward(w)
    grads = {k: g.copy() for k, g in layer.grads.items()}

    def wrapped():
        restore()
        v = loss()
        return v

    errs = [rel_err(dx, numeric_grad(wrapped, x))]
    for k, p in layer.params.items():
        errs.append(rel_err(grads[k], numeric_grad(wrapped, p)))
    restore()
    return max(errs)


def random_layer_case(kind, rng):
    """A layer of the given kind with random sizes in 2..8 and a matching input."""
    r = lambda: int(rng.integers(2, 9))
    n = r()
    if kind == "Dense":
        i, o = r(), r()
        return Dense(i, o, rng=rng), rng.standard_normal((n, i))
    if kind == "Conv1d":
        c, o, k, s = r(), r(), int(rng.integers(1, 5)), int(rng.integers(1, 3))
        p = int(rng.integers(0, 3))
        length = k + r()
        layer = Conv1d(c, o, k, stride=s, padding=p, rng=rng)
        layer.params["b"][:] = rng.standard_normal(o)
        return layer, rng.standard_normal((n, c, length))
    if kind == "ConvTranspose1d":
        c, o, k, s = r(), r(), int(rng.integers(1, 5)), int(rng.integers(1, 3))
        layer = ConvTranspose1d(c, o, k, stride=s, rng=rng)
        layer.params["b"][:] = rng.standard_normal(o)
        return layer, rng.standard_normal((n, c, r()))
    if kind == "BatchNorm":
        c = r()
        layer = BatchNorm(c)
        layer.params["gamma"][:] = rng.uniform(0.5, 2.0, c)
        layer.params["beta"][:] = rng.standard_normal(c)
        shape = (n, c) if rng.random() < 0.5 else (n, c, r())
        return layer, rng.standard_normal(shape)
    if kind == "LeakyReLU":
        x = rng.standard_normal((n, r(), r()))
        x[np.abs(x) < 1e-3] = 0.5  # stay away from the kink
        return LeakyReLU(float(rng.uniform(0.05, 0.95))), x
    if kind == "Sigmoid":
        return Sigmoid(), 3 * rng.standard_normal((n, r()))
    if kind == "Reshape":
        a, b = r(), r()
        return Reshape((b, a)), rng.standard_normal((n, a * b))
    if kind == "Flatten":
        return Flatten(), rng.standard_normal((n, r(), r()))
    if kind == "Identity":
        return Identity(), rng.standard_normal((n, r(), r()))
    raise ValueError(kind)


LAYER_KINDS = ("Dense", "Conv1d", "ConvTranspose1d", "BatchNorm", "LeakyReLU", "Sigmoid",
               "Reshape", "Flatten", "Identity")
