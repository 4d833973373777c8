"""Minimal one-hidden-layer fully connected networks with exact backpropagation.

Used for policies (softmax head), critics and value heads (linear head),
the event-probability head (sigmoid head), and the neural causal-variable
model. Everything is plain numpy; batches are row-major (batch, features).

Gradients returned by :meth:`Mlp.backward` are sums over the batch rows, so
a mean loss should fold its 1/n into the output gradient it passes in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

HEADS = ("linear", "sigmoid", "softmax")
HIDDEN_FNS = ("tanh", "relu")


@dataclass
class GradientBuffer:
    """Per-parameter gradient accumulator, shape-congruent with an Mlp."""

    dw1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: np.ndarray
    count: int = 0

    @classmethod
    def zeros_like(cls, net: "Mlp") -> "GradientBuffer":
        return cls(
            dw1=np.zeros_like(net.w1),
            db1=np.zeros_like(net.b1),
            dw2=np.zeros_like(net.w2),
            db2=np.zeros_like(net.b2),
        )

    def add_(self, other: "GradientBuffer") -> "GradientBuffer":
        self.dw1 += other.dw1
        self.db1 += other.db1
        self.dw2 += other.dw2
        self.db2 += other.db2
        self.count += max(other.count, 1)
        return self

    def scale_(self, factor: float) -> "GradientBuffer":
        self.dw1 *= factor
        self.db1 *= factor
        self.dw2 *= factor
        self.db2 *= factor
        return self


class Mlp:
    """input -> hidden (tanh or relu) -> output head (linear, sigmoid or softmax)."""

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        output_dim: int,
        head: str = "linear",
        hidden_fn: str = "tanh",
        rng: Optional[np.random.Generator] = None,
    ):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}, expected one of {HEADS}")
        if hidden_fn not in HIDDEN_FNS:
            raise ValueError(f"unknown hidden_fn {hidden_fn!r}, expected one of {HIDDEN_FNS}")
        rng = rng if rng is not None else np.random.default_rng()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.output_dim = output_dim
        self.head = head
        self.hidden_fn = hidden_fn
        # scaled uniform fan-in initialization, zero biases
        s1 = 1.0 / np.sqrt(input_dim)
        s2 = 1.0 / np.sqrt(hidden_dim)
        self.w1 = rng.uniform(-s1, s1, size=(hidden_dim, input_dim))
        self.b1 = np.zeros(hidden_dim)
        self.w2 = rng.uniform(-s2, s2, size=(output_dim, hidden_dim))
        self.b2 = np.zeros(output_dim)

    # --- forward ---

    def _check_features(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(
                f"feature length {x.shape[-1]} does not match input_dim {self.input_dim}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Deterministic forward pass; accepts a single feature vector or a batch."""
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Forward pass that also returns the activations needed by backward."""
        x = self._check_features(x)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        z1 = xb @ self.w1.T + self.b1
        if self.hidden_fn == "tanh":
            a1 = np.tanh(z1)
        else:
            a1 = np.maximum(z1, 0.0)
        z2 = a1 @ self.w2.T + self.b2
        y = self._apply_head(z2)
        cache = (xb, z1, a1, y, single)
        return (y[0] if single else y), cache

    def _apply_head(self, z2: np.ndarray) -> np.ndarray:
        if self.head == "linear":
            return z2
        if self.head == "sigmoid":
            return 1.0 / (1.0 + np.exp(-z2))
        # softmax, stabilized rowwise
        shifted = z2 - z2.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    # --- backward ---

    def backward(self, x: np.ndarray, output_grad: np.ndarray, cache=None) -> GradientBuffer:
        """Exact parameter gradients of a scalar loss given dL/dy at the head output.

        Gradients are summed over batch rows.
        """
        if cache is None:
            _, cache = self.forward_cached(x)
        xb, z1, a1, y, single = cache
        gy = np.asarray(output_grad, dtype=float)
        if single:
            gy = gy[None, :]
        if gy.shape != y.shape:
            raise ValueError(f"output_grad shape {gy.shape} does not match outputs {y.shape}")

        if self.head == "linear":
            gz2 = gy
        elif self.head == "sigmoid":
            gz2 = gy * y * (1.0 - y)
        else:  # softmax rowwise Jacobian
            gz2 = y * (gy - (gy * y).sum(axis=1, keepdims=True))

        dw2 = gz2.T @ a1
        db2 = gz2.sum(axis=0)
        ga1 = gz2 @ self.w2
        if self.hidden_fn == "tanh":
            gz1 = ga1 * (1.0 - a1 * a1)
        else:
            gz1 = ga1 * (z1 > 0.0)
        dw1 = gz1.T @ xb
        db1 = gz1.sum(axis=0)
        return GradientBuffer(dw1=dw1, db1=db1, dw2=dw2, db2=db2, count=xb.shape[0])

    # --- parameter access ---

    def parameters(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            current = getattr(self, name)
            if current.shape != value.shape:
                raise ValueError(f"shape mismatch for {name}: {current.shape} vs {value.shape}")
            setattr(self, name, np.array(value, dtype=float))

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.input_dim = self.input_dim
        clone.hidden_dim = self.hidden_dim
        clone.output_dim = self.output_dim
        clone.head = self.head
        clone.hidden_fn = self.hidden_fn
        clone.w1 = self.w1.copy()
        clone.b1 = self.b1.copy()
        clone.w2 = self.w2.copy()
        clone.b2 = self.b2.copy()
        return clone


def sgd_step(net: Mlp, grads: GradientBuffer, lr: float, momentum: float = 0.0, state=None):
    """Plain (optionally momentum) gradient descent; returns the velocity state."""
    if momentum == 0.0:
        net.w1 -= lr * grads.dw1
        net.b1 -= lr * grads.db1
        net.w2 -= lr * grads.dw2
        net.b2 -= lr * grads.db2
        return state
    if state is None:
        state = {k: np.zeros_like(v) for k, v in net.parameters().items()}
    for name, g in (("w1", grads.dw1), ("b1", grads.db1), ("w2", grads.dw2), ("b2", grads.db2)):
        state[name] = momentum * state[name] + g
        setattr(net, name, getattr(net, name) - lr * state[name])
    return state


class Adam:
    """Adaptive per-parameter step rule with standard decay constants."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in net.parameters().items()}
        self.v = {k: np.zeros_like(v) for k, v in net.parameters().items()}

    def step(self, net: Mlp, grads: GradientBuffer) -> None:
        self.t += 1
        for name, g in (("w1", grads.dw1), ("b1", grads.db1), ("w2", grads.dw2), ("b2", grads.db2)):
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1**self.t)
            v_hat = self.v[name] / (1 - self.beta2**self.t)
            setattr(net, name, getattr(net, name) - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))


class AdamScalarVector:
    """Adam for a flat parameter vector (used by the tabular causal-variable model)."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# --- checkpoint format: flat binary parameter arrays plus a JSON shape manifest ---

def save_checkpoint(path_prefix, named_params: dict[str, np.ndarray]) -> None:
    """Write params to <prefix>.bin (float64, concatenated) and <prefix>.json (manifest)."""
    import json

    manifest = {}
    offset = 0
    chunks = []
    for name in sorted(named_params):
        arr = np.asarray(named_params[name], dtype=np.float64)
        manifest[name] = {"offset": offset, "shape": list(arr.shape)}
        chunks.append(arr.ravel())
        offset += arr.size
    flat = np.concatenate(chunks) if chunks else np.empty(0)
    with open(f"{path_prefix}.bin", "wb") as fh:
        fh.write(flat.tobytes())
    with open(f"{path_prefix}.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def load_checkpoint(path_prefix) -> dict[str, np.ndarray]:
    import json

    with open(f"{path_prefix}.json") as fh:
        manifest = json.load(fh)
    with open(f"{path_prefix}.bin", "rb") as fh:
        flat = np.frombuffer(fh.read(), dtype=np.float64)
    out = {}
    for name, meta in manifest.items():
        shape = tuple(meta["shape"])
        size = int(np.prod(shape)) if shape else 1
        out[name] = flat[meta["offset"] : meta["offset"] + size].reshape(shape).copy()
    return out
