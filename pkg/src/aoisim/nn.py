"""Minimal fully connected networks with explicit reverse-mode gradients.

Double precision throughout so finite-difference checks stay tight.
Hidden layers use the rectifier; the output head is tanh (actors) or
identity (critics).
"""

import json

import numpy as np

from .errors import InterfaceError

CHECKPOINT_VERSION = 1


class Mlp:
    """Feedforward net. Weights W[i] have shape (fan_in, fan_out)."""

    def __init__(self, sizes, out_act="identity", rng=None):
        if len(sizes) < 2:
            raise InterfaceError("need at least input and output sizes")
        if out_act not in ("identity", "tanh"):
            raise InterfaceError(f"unknown output activation {out_act!r}")
        self.sizes = [int(s) for s in sizes]
        self.out_act = out_act
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    # ---------- parameter plumbing ----------
    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_parameters(self, params):
        expected = [p.shape for p in self.parameters()]
        got = [np.asarray(p).shape for p in params]
        if expected != got:
            raise InterfaceError(f"parameter shape mismatch: {expected} vs {got}")
        it = iter(params)
        for i in range(len(self.weights)):
            self.weights[i] = np.array(next(it), dtype=float)
            self.biases[i] = np.array(next(it), dtype=float)

    def num_parameters(self):
        return sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def clone(self):
        net = Mlp.__new__(Mlp)
        net.sizes = list(self.sizes)
        net.out_act = self.out_act
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        net._cache = None
        return net

    # ---------- forward / backward ----------
    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise InterfaceError(
                f"input width {x.shape[1]} != expected {self.sizes[0]}")
        activations = [x]
        h = x
        last = len(self.weights) - 1
        pre_acts = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre_acts.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_act == "tanh":
                h = np.tanh(z)
            else:
                h = z
            activations.append(h)
        self._cache = (activations, pre_acts)
        return h

    def backward(self, upstream):
        """Gradients of sum(upstream * output) w.r.t. parameters and input.

        Requires a preceding forward call. Returns (param_grads, input_grad)
        with param_grads ordered like `parameters()`.
        """
        if self._cache is None:
            raise InterfaceError("backward called before forward")
        activations, pre_acts = self._cache
        upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
        last = len(self.weights) - 1
        if self.out_act == "tanh":
            delta = upstream * (1.0 - activations[-1] ** 2)
        else:
            delta = upstream
        grads = [None] * (2 * len(self.weights))
        for i in range(last, -1, -1):
            grads[2 * i] = activations[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pre_acts[i - 1] > 0.0)
        input_grad = delta @ self.weights[0].T
        return grads, input_grad


class Adam:
    """Bias-corrected adaptive-moment optimizer.

    With `plain=True` the moments are disabled and the update reduces
    exactly to params -= lr * grad.
    """

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8, plain=False):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.plain = plain
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grads):
        if self.plain:
            for p, g in zip(params, grads):
                p -= self.lr * g
            return params
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
        return params

    def state_dict(self):
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "plain": self.plain, "t": self.t,
            "m": None if self.m is None else [a.tolist() for a in self.m],
            "v": None if self.v is None else [a.tolist() for a in self.v],
        }

    @classmethod
    def from_state_dict(cls, state):
        opt = cls(state["lr"], state["beta1"], state["beta2"],
                  state["eps"], state["plain"])
        opt.t = state["t"]
        if state["m"] is not None:
            opt.m = [np.array(a, dtype=float) for a in state["m"]]
            opt.v = [np.array(a, dtype=float) for a in state["v"]]
        return opt


# ---------- checkpoint format ----------
def net_to_dict(net):
    return {
        "sizes": net.sizes,
        "out_act": net.out_act,
        "weights": [w.tolist() for w in net.weights],  # row-major
        "biases": [b.tolist() for b in net.biases],
    }


def net_from_dict(doc):
    net = Mlp(doc["sizes"], out_act=doc["out_act"])
    net.weights = [np.array(w, dtype=float) for w in doc["weights"]]
    net.biases = [np.array(b, dtype=float) for b in doc["biases"]]
    return net


def save_checkpoint(path, payload):
    """Versioned JSON checkpoint; floats round-trip bit-exactly via repr."""
    doc = {"version": CHECKPOINT_VERSION, "payload": payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise InterfaceError(
            f"unsupported checkpoint version {doc.get('version')!r}")
    return doc["payload"]
