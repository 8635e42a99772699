"""Small numpy MLPs with hand-written backprop over a flat parameter vector.

Keeping every parameter of a network in one contiguous array makes Adam,
Polyak averaging, checksums and checkpointing single vector operations.
"""
from __future__ import annotations

import numpy as np


class MLP:
    """ReLU perceptron; ``sizes = (in, h1, ..., out)``, linear output."""

    def __init__(self, sizes, rng=None, dtype=np.float32, params=None):
        self.sizes = tuple(int(s) for s in sizes)
        self.dtype = np.dtype(dtype)
        shapes = []
        for i, o in zip(self.sizes[:-1], self.sizes[1:]):
            shapes += [(i, o), (o,)]
        self.shapes = shapes
        self.n_params = sum(int(np.prod(s)) for s in shapes)
        if params is not None:
            self.params = np.array(params, dtype=self.dtype).ravel()
            if self.params.size != self.n_params:
                raise ValueError(f"expected {self.n_params} parameters, got {self.params.size}")
        else:
            self.params = np.zeros(self.n_params, dtype=self.dtype)
            if rng is not None:
                self.init(rng)
        self._bind()

    def _bind(self):
        self.layers = []
        self.offsets = [0]
        views = []
        for shape in self.shapes:
            n = int(np.prod(shape))
            views.append(self.params[self.offsets[-1]:self.offsets[-1] + n].reshape(shape))
            self.offsets.append(self.offsets[-1] + n)
        for k in range(0, len(views), 2):
            self.layers.append((views[k], views[k + 1]))

    def init(self, rng):
        """Uniform fan-in init (as torch.nn.Linear does)."""
        off = 0
        for k, shape in enumerate(self.shapes):
            n = int(np.prod(shape))
            fan_in = self.shapes[k - k % 2][0]
            bound = 1.0 / np.sqrt(fan_in)
            self.params[off:off + n] = rng.uniform(-bound, bound, size=n)
            off += n

    def set_params(self, flat):
        self.params[...] = flat

    def copy(self) -> "MLP":
        return MLP(self.sizes, dtype=self.dtype, params=self.params.copy())

    def forward(self, x):
        """Return the output and the cache needed by :meth:`backward`."""
        acts = [x]
        h = x
        last = len(self.layers) - 1
        for k, (W, b) in enumerate(self.layers):
            z = h @ W + b
            h = np.maximum(z, 0.0) if k < last else z
            acts.append(h)
        return h, acts

    def __call__(self, x):
        h = x
        last = len(self.layers) - 1
        for k, (W, b) in enumerate(self.layers):
            h = h @ W + b
            if k < last:
                np.maximum(h, 0.0, out=h)
        return h

    def backward(self, acts, grad_out, need_input_grad=False, need_param_grad=True):
        """Backprop ``grad_out`` (dL/d output). Returns (flat_grad, dL/d input)."""
        grads = np.empty(self.n_params, dtype=self.dtype) if need_param_grad else None
        offsets = self.offsets
        g = grad_out
        for k in range(len(self.layers) - 1, -1, -1):
            W, _ = self.layers[k]
            a_in = acts[k]
            if need_param_grad:
                o = offsets[2 * k]
                grads[o:offsets[2 * k + 1]] = (a_in.T @ g).ravel()
                grads[offsets[2 * k + 1]:offsets[2 * k + 2]] = g.sum(axis=0)
            if k == 0 and not need_input_grad:
                break
            g = g @ W.T
            if k > 0:
                g = g * (acts[k] > 0.0)
        return grads, (g if need_input_grad else None)


class Adam:
    """Adam over one flat parameter vector (updated in place)."""

    def __init__(self, n, lr=3e-4, betas=(0.9, 0.999), eps=1e-8, dtype=np.float32):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = np.zeros(n, dtype=dtype)
        self.v = np.zeros(n, dtype=dtype)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m *= self.b1
        self.m += (1 - self.b1) * grad
        self.v *= self.b2
        self.v += (1 - self.b2) * grad * grad
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        params -= (self.lr / c1) * self.m / (np.sqrt(self.v / c2) + self.eps)

    def state(self):
        return {"m": self.m, "v": self.v, "t": self.t}
