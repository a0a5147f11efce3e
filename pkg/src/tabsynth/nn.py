"""Dense networks with hand-written backprop.

Everything the trainer differentiates lives here: fully-connected
layers, the five activations, an adaptive-moment optimizer, and the
generator's output head (tanh over scalar slots, Gumbel-perturbed
temperature softmax over one-hot segments). Gradients are accumulated
per parameter so a batch can receive several backward passes (e.g. the
adversarial and feature-statistics terms of one generator step) before
an optimizer step consumed them.

No autograd: each layer caches its forward tensors and implements its
own vector-Jacobian product, which keeps the whole stack checkable by
central finite differences.
"""

from __future__ import annotations

import json

import numpy as np

CHECKPOINT_FORMAT = "tabsynth-net-v1"


def _check_finite(a, what):
    if not np.isfinite(a).all():
        raise FloatingPointError("non-finite values in %s" % (what,))


def _act_forward(name, pre):
    if name == "identity":
        return pre
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "leaky_relu":
        return np.where(pre > 0, pre, 0.2 * pre)
    if name == "tanh":
        return np.tanh(pre)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre))
    raise ValueError("unknown activation %r" % (name,))


def _act_grad(name, pre, out):
    # derivative wrt pre-activation, expressed from whichever is cheaper
    if name == "identity":
        return np.ones_like(pre)
    if name == "relu":
        return (pre > 0).astype(pre.dtype)
    if name == "leaky_relu":
        return np.where(pre > 0, 1.0, 0.2)
    if name == "tanh":
        return 1.0 - out * out
    if name == "sigmoid":
        return out * (1.0 - out)
    raise ValueError("unknown activation %r" % (name,))


class Dense:
    """Affine map plus activation; caches one batch for backward."""

    def __init__(self, n_in, n_out, activation="identity", rng=None):
        rng = rng or np.random.default_rng(0)
        self.W = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self.activation = activation
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._x = None
        self._pre = None
        self.out = None

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.W.shape[0]:
            raise ValueError("input shape %r does not match layer (%d -> %d)"
                             % (x.shape, *self.W.shape))
        self._x = x
        self._pre = x @ self.W + self.b
        self.out = _act_forward(self.activation, self._pre)
        _check_finite(self.out, "layer output")
        return self.out

    def backward(self, dout):
        if self._x is None:
            raise RuntimeError("backward before forward")
        dpre = dout * _act_grad(self.activation, self._pre, self.out)
        self.gW += self._x.T @ dpre
        self.gb += dpre.sum(axis=0)
        dx = dpre @ self.W.T
        _check_finite(dx, "layer input gradient")
        return dx

    def zero_grad(self):
        self.gW[:] = 0.0
        self.gb[:] = 0.0


class DenseNet:
    """A stack of Dense layers sharing one gradient lifecycle."""

    def __init__(self, layers):
        self.layers = list(layers)
        for a, b in zip(self.layers, self.layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise ValueError("adjacent layer dims disagree")

    @classmethod
    def build(cls, n_in, hidden, n_out, rng, hidden_act="leaky_relu",
              out_act="identity"):
        dims = [n_in] + list(hidden) + [n_out]
        acts = [hidden_act] * len(hidden) + [out_act]
        return cls([Dense(dims[i], dims[i + 1], acts[i], rng)
                    for i in range(len(acts))])

    @property
    def n_in(self):
        return self.layers[0].W.shape[0]

    @property
    def n_out(self):
        return self.layers[-1].W.shape[1]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout, start=None):
        """Backprop from the output of layer `start` (default: the last).

        Returns the gradient with respect to the network input.
        Parameter gradients accumulate across calls until zero_grad.
        """
        if start is None:
            start = len(self.layers) - 1
        for i in range(start, -1, -1):
            dout = self.layers[i].backward(dout)
        return dout

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def gradients(self):
        out = []
        for layer in self.layers:
            out.extend((layer.gW, layer.gb))
        return out

    # checkpointing ---------------------------------------------------------

    def save(self, path):
        meta = {"format": CHECKPOINT_FORMAT,
                "activations": [l.activation for l in self.layers],
                "shapes": [list(l.W.shape) for l in self.layers]}
        arrays = {"meta": np.frombuffer(
            json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
        for i, l in enumerate(self.layers):
            arrays["W%d" % i] = l.W
            arrays["b%d" % i] = l.b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode("utf-8"))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError("not a %s checkpoint" % (CHECKPOINT_FORMAT,))
            layers = []
            for i, act in enumerate(meta["activations"]):
                W = z["W%d" % i]
                layer = Dense(W.shape[0], W.shape[1], act)
                layer.W = W.astype(np.float64)
                layer.b = z["b%d" % i].astype(np.float64)
                layer.gW = np.zeros_like(layer.W)
                layer.gb = np.zeros_like(layer.b)
                layers.append(layer)
        return cls(layers)


class Adam:
    """Bias-corrected adaptive-moment updates over a parameter list."""

    def __init__(self, params, lr=2e-4, beta1=0.5, beta2=0.9, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        grads = list(grads)
        if len(grads) != len(self.params):
            raise ValueError("gradient list length mismatch")
        for g in grads:
            _check_finite(g, "gradient")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


# ---------------------------------------------------------------------------
# soft one-hot sampling

def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def gumbel_one_hot(logits, temperature, rng):
    """Differentiable sample from a categorical relaxation.

    Adds standard Gumbel noise to the logits and softmaxes at the given
    temperature. Hardening the result by argmax recovers an exact
    categorical sample under softmax(logits) (the max location is
    temperature-free).
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logits = np.asarray(logits, dtype=np.float64)
    u = rng.uniform(1e-12, 1.0 - 1e-12, size=logits.shape)
    g = -np.log(-np.log(u))
    return softmax((logits + g) / temperature, axis=-1)


def harden_one_hot(soft):
    soft = np.atleast_2d(soft)
    out = np.zeros_like(soft)
    out[np.arange(soft.shape[0]), np.argmax(soft, axis=1)] = 1.0
    return out


class OutputHead:
    """Maps raw generator output onto the encoded-row structure.

    Scalar (alpha) slots pass through tanh; every mode/class segment is
    sampled as a Gumbel-softmax with a shared temperature. In hard mode
    the one-hot segments are collapsed to argmax one-hots for decoding.
    """

    def __init__(self, layout, temperature=0.2):
        self.layout = layout
        self.temperature = temperature
        self._alpha_cols = np.array(
            [s.offset for s in layout.segments if s.role == "alpha"],
            dtype=np.intp)
        self._onehot_segs = [s for s in layout.segments
                             if s.role in ("mode", "class")]
        self._y = None

    def forward(self, raw, rng, hard=False):
        raw = np.asarray(raw, dtype=np.float64)
        y = np.zeros_like(raw)
        if self._alpha_cols.size:
            y[:, self._alpha_cols] = np.tanh(raw[:, self._alpha_cols])
        for s in self._onehot_segs:
            sl = slice(s.offset, s.offset + s.width)
            soft = gumbel_one_hot(raw[:, sl], self.temperature, rng)
            y[:, sl] = harden_one_hot(soft) if hard else soft
        if not hard:
            self._y = y
        _check_finite(y, "output head")
        return y

    def backward(self, dy):
        """VJP of the soft forward; hard mode is synthesis-only."""
        if self._y is None:
            raise RuntimeError("backward before (soft) forward")
        y = self._y
        draw = np.zeros_like(dy)
        if self._alpha_cols.size:
            ya = y[:, self._alpha_cols]
            draw[:, self._alpha_cols] = dy[:, self._alpha_cols] * (1 - ya * ya)
        for s in self._onehot_segs:
            sl = slice(s.offset, s.offset + s.width)
            ys, ds = y[:, sl], dy[:, sl]
            inner = (ds * ys).sum(axis=1, keepdims=True)
            draw[:, sl] = ys * (ds - inner) / self.temperature
        return draw
