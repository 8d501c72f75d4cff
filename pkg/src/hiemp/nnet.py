"""Dense feed-forward networks with analytic gradients and Adam updates.

All arithmetic is float64. A ``Net`` is an immutable bundle of parameters;
training replaces it with a new value returned by :func:`opt_step`. Besides
parameter gradients, :func:`backward` also returns the gradient with respect
to the input vector, which the deterministic-policy and value-gradient
updates need to push gradients through a critic's action input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Net:
    """Tanh-hidden, linear-output MLP parameters.

    weights[i] has shape (layer_dims[i], layer_dims[i+1]); forward maps are
    row-vector style, y = x @ W + b.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass(frozen=True)
class Grads:
    """Net-shaped gradient bundle."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class OptState:
    """Adam accumulators, shaped like the Net they update."""

    m_w: tuple[np.ndarray, ...]
    v_w: tuple[np.ndarray, ...]
    m_b: tuple[np.ndarray, ...]
    v_b: tuple[np.ndarray, ...]
    step: int


def init_net(rng: np.random.Generator, layer_dims, *, final_weight_scale: float = 1.0,
             final_bias=None) -> Net:
    """Scaled uniform fan-in init.

    final_weight_scale shrinks the last layer (0.01 for policy nets so the
    initial outputs sit near zero). final_bias, when given, overrides the
    last layer's bias vector.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"need at least two positive layer dims, got {dims}")
    weights, biases = [], []
    last = len(dims) - 2
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(dims[i], dims[i + 1]))
        b = np.zeros(dims[i + 1])
        if i == last:
            w *= final_weight_scale
            if final_bias is not None:
                b = np.asarray(final_bias, dtype=np.float64).copy()
                if b.shape != (dims[-1],):
                    raise ValueError(f"final_bias shape {b.shape} != ({dims[-1]},)")
        weights.append(_frozen(w))
        biases.append(_frozen(b))
    return Net(dims, tuple(weights), tuple(biases))


def init_opt(net: Net) -> OptState:
    zw = tuple(_frozen(np.zeros_like(w)) for w in net.weights)
    zb = tuple(_frozen(np.zeros_like(b)) for b in net.biases)
    return OptState(zw, zw, zb, zb, 0)


def _check_input(net: Net, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.in_dim:
        raise ValueError(f"input shape {x.shape} incompatible with in_dim {net.in_dim}")
    return x


def _forward_acts(net: Net, x2d: np.ndarray) -> list[np.ndarray]:
    # acts[0] is the input; acts[i+1] is layer i's output (tanh on hidden,
    # identity on the final layer).
    acts = [x2d]
    h = x2d
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
        acts.append(h)
    return acts


def forward(net: Net, x) -> np.ndarray:
    """Evaluate the net. Accepts a single input vector or a (B, in_dim) batch."""
    x = _check_input(net, x)
    single = x.ndim == 1
    acts = _forward_acts(net, x[None, :] if single else x)
    out = acts[-1]
    return out[0] if single else out


def backward(net: Net, x, upstream) -> tuple[Grads, np.ndarray]:
    """Gradients of upstream . forward(net, x) w.r.t. parameters and input.

    For batched inputs the parameter gradients are summed over the batch and
    the input gradient is returned per row.
    """
    x = _check_input(net, x)
    u = np.asarray(upstream, dtype=np.float64)
    single = x.ndim == 1
    if single:
        if u.shape != (net.out_dim,):
            raise ValueError(f"upstream shape {u.shape} != ({net.out_dim},)")
        x2d, u2d = x[None, :], u[None, :]
    else:
        if u.shape != (x.shape[0], net.out_dim):
            raise ValueError(f"upstream shape {u.shape} != ({x.shape[0]}, {net.out_dim})")
        x2d, u2d = x, u
    acts = _forward_acts(net, x2d)
    gw = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    g = u2d
    for i in range(len(net.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ net.weights[i].T
        if i > 0:
            g = g * (1.0 - acts[i] ** 2)
    input_grad = g[0] if single else g
    return Grads(tuple(gw), tuple(gb)), input_grad


def scale_grads(grads: Grads, c: float) -> Grads:
    return Grads(tuple(w * c for w in grads.weights), tuple(b * c for b in grads.biases))


def add_grads(a: Grads, b: Grads) -> Grads:
    return Grads(tuple(x + y for x, y in zip(a.weights, b.weights)),
                 tuple(x + y for x, y in zip(a.biases, b.biases)))


def opt_step(net: Net, grads: Grads, state: OptState, lr: float, *,
             beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> tuple[Net, OptState]:
    """One Adam update with bias correction. Returns the new Net and OptState."""
    for i, g in enumerate(grads.weights):
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient in layer {i} weights")
    for i, g in enumerate(grads.biases):
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient in layer {i} biases")
    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t

    def upd(p, g, m, v):
        m2 = beta1 * m + (1.0 - beta1) * g
        v2 = beta2 * v + (1.0 - beta2) * g * g
        p2 = p - lr * (m2 / c1) / (np.sqrt(v2 / c2) + eps)
        return _frozen(p2), _frozen(m2), _frozen(v2)

    new_w, new_mw, new_vw = [], [], []
    for p, g, m, v in zip(net.weights, grads.weights, state.m_w, state.v_w):
        p2, m2, v2 = upd(p, g, m, v)
        new_w.append(p2), new_mw.append(m2), new_vw.append(v2)
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(net.biases, grads.biases, state.m_b, state.v_b):
        p2, m2, v2 = upd(p, g, m, v)
        new_b.append(p2), new_mb.append(m2), new_vb.append(v2)
    net2 = Net(net.layer_dims, tuple(new_w), tuple(new_b))
    st2 = OptState(tuple(new_mw), tuple(new_vw), tuple(new_mb), tuple(new_vb), t)
    return net2, st2


def net_bytes(net: Net) -> bytes:
    """Canonical little-endian byte image of the parameters (for freeze checks)."""
    chunks = []
    for w, b in zip(net.weights, net.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(chunks)
