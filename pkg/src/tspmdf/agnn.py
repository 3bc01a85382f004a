"""Anisotropic (edge-gated) GNN with a hand-written backward pass.

Row-vector convention throughout: a linear map is ``h @ W`` with ``W`` of shape
``(fan_in, fan_out)``. Per layer, with ``N(i)`` the kNN list of node ``i``::

    h_i'  = h_i  + silu(BN(h_i W1 + mean_{j in N(i)} sigmoid(e_ij) * (h_j W2)))
    e_ij' = e_ij + silu(BN(e_ij W3 + h_i W4 + h_j W5))

Batch normalisation always uses the statistics of the graph at hand (nodes or
edges as the batch), in training and in inference alike.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .graph import BaseGraph, DynamicGraph, node_feature_dim

BN_EPS = 1e-5


class ShapeError(ValueError):
    pass


class StaleTapeError(RuntimeError):
    pass


def head_dim(M: int) -> int:
    return 2 * (10 * M + 2)


@dataclass(eq=False)
class ModelParams:
    H: int
    L: int
    M: int
    head: str  # "discrete" or "gaussian"
    tensors: dict[str, np.ndarray]
    version: int = 0

    @property
    def in_dim(self) -> int:
        return self.tensors["embed.node"].shape[0]

    @property
    def out_dim(self) -> int:
        return self.tensors["head.b2"].shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.H, self.L, self.M, self.head,
                           {k: v.copy() for k, v in self.tensors.items()}, self.version)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def output_dim(head: str, M: int) -> int:
    if head == "discrete":
        return head_dim(M)
    if head == "gaussian":
        return 4
    raise ValueError(f"unknown head type {head!r}")


def param_shapes(H: int, L: int, M: int, head: str = "discrete") -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "embed.node": (node_feature_dim(M), H),
        "embed.edge": (1, H),
    }
    for layer in range(L):
        for w in ("W1", "W2", "W3", "W4", "W5"):
            shapes[f"layer{layer}.{w}"] = (H, H)
        for bn in ("bn_node", "bn_edge"):
            shapes[f"layer{layer}.{bn}.gamma"] = (H,)
            shapes[f"layer{layer}.{bn}.beta"] = (H,)
    out = output_dim(head, M)
    shapes.update({"head.W1": (H, H), "head.b1": (H,), "head.W2": (H, out), "head.b2": (out,)})
    return shapes


def init_params(H: int = 32, L: int = 12, M: int = 4, seed=0, head: str = "discrete") -> ModelParams:
    """Glorot-uniform weights, zero biases, BN scale 1 and shift 0."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in param_shapes(H, L, M, head).items():
        if name.endswith(".gamma"):
            tensors[name] = np.ones(shape)
        elif name.endswith((".beta", ".b1", ".b2")):
            tensors[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(H, L, M, head, tensors)


# -- elementwise pieces -------------------------------------------------------


def _silu(x):
    s = expit(x)
    return x * s, s


def _silu_grad(x, s):
    return s * (1.0 + x * (1.0 - s))


def _bn_forward(z, gamma, beta):
    mu = z.mean(axis=0)
    zc = z - mu
    var = np.mean(zc * zc, axis=0)
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = zc * inv
    return xhat * gamma + beta, (xhat, inv)


def _bn_backward(dy, gamma, cache):
    xhat, inv = cache
    dgamma = np.sum(dy * xhat, axis=0)
    dbeta = dy.sum(axis=0)
    dx_hat = dy * gamma
    n = dy.shape[0]
    dz = (inv / n) * (n * dx_hat - dx_hat.sum(axis=0) - xhat * np.sum(dx_hat * xhat, axis=0))
    return dz, dgamma, dbeta


def _incidence(base: BaseGraph):
    cached = base.__dict__.get("_incidence")
    if cached is None:
        E = base.num_edges
        ones = np.ones(E)
        cols = np.arange(E)
        s_src = sp.csr_matrix((ones, (base.src, cols)), shape=(base.n, E))
        s_dst = sp.csr_matrix((ones, (base.dst, cols)), shape=(base.n, E))
        cached = (s_src, s_dst)
        object.__setattr__(base, "_incidence", cached)
    return cached


# -- forward / backward -------------------------------------------------------


@dataclass(eq=False)
class Tape:
    graph: DynamicGraph
    version: int
    x: np.ndarray
    ef: np.ndarray
    pre_h0: np.ndarray
    sig_h0: np.ndarray
    pre_e0: np.ndarray
    sig_e0: np.ndarray
    layers: list = field(default_factory=list)
    head: tuple = ()


def forward(params: ModelParams, g: DynamicGraph, training: bool = True):
    """Return per-node head outputs ``(n, out_dim)`` and, if ``training``, the
    tape needed by :func:`backward` (``None`` otherwise)."""
    t = params.tensors
    x = g.node_features
    if x.shape[1] != params.in_dim:
        raise ShapeError(f"node features have width {x.shape[1]}, model expects {params.in_dim}")
    if g.M != params.M:
        raise ShapeError(f"graph encodes offsets with M={g.M}, model has M={params.M}")
    src, dst = g.src, g.dst
    agg_op = g.base.aggregation_matrix()
    ef = g.edge_features

    pre_h = x @ t["embed.node"]
    h, sig_h = _silu(pre_h)
    pre_e = ef @ t["embed.edge"]
    e, sig_e = _silu(pre_e)
    tape = Tape(g, params.version, x, ef, pre_h, sig_h, pre_e, sig_e) if training else None
    has_edges = src.shape[0] > 0

    for layer in range(params.L):
        p = f"layer{layer}."
        a = h @ t[p + "W1"]
        msg_in = h @ t[p + "W2"]
        gate = expit(e)
        msg_dst = np.take(msg_in, dst, axis=0)
        agg = agg_op @ (gate * msg_dst)
        zn, bn_n = _bn_forward(a + agg, t[p + "bn_node.gamma"], t[p + "bn_node.beta"])
        act_n, sig_n = _silu(zn)

        if has_edges:
            q = e @ t[p + "W3"] + np.take(h @ t[p + "W4"], src, axis=0) + np.take(h @ t[p + "W5"], dst, axis=0)
            qn, bn_e = _bn_forward(q, t[p + "bn_edge.gamma"], t[p + "bn_edge.beta"])
            act_e, sig_e_l = _silu(qn)
            e_new = e + act_e
        else:
            qn = bn_e = sig_e_l = None
            e_new = e
        if training:
            tape.layers.append((h, e, gate, msg_dst, zn, bn_n, sig_n, qn, bn_e, sig_e_l))
        h = h + act_n
        e = e_new

    u = h @ t["head.W1"] + t["head.b1"]
    v, sig_u = _silu(u)
    out = v @ t["head.W2"] + t["head.b2"]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite activation in AGNN forward pass")
    if training:
        tape.head = (h, u, v, sig_u)
    return out, tape


def backward(params: ModelParams, tape: Tape, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every tensor, given its gradient
    ``d_out`` w.r.t. the forward outputs."""
    if tape is None:
        raise StaleTapeError("forward was run with training=False; no tape recorded")
    if tape.version != params.version:
        raise StaleTapeError("parameters changed since this tape was recorded")
    t = params.tensors
    g = tape.graph
    if d_out.shape != (g.n, params.out_dim):
        raise ShapeError(f"output gradient has shape {d_out.shape}, expected {(g.n, params.out_dim)}")
    grads: dict[str, np.ndarray] = {}
    src = g.src
    agg_op = g.base.aggregation_matrix()
    s_src, s_dst = _incidence(g.base)

    h_last, u, v, sig_u = tape.head
    grads["head.W2"] = v.T @ d_out
    grads["head.b2"] = d_out.sum(axis=0)
    du = (d_out @ t["head.W2"].T) * _silu_grad(u, sig_u)
    grads["head.W1"] = h_last.T @ du
    grads["head.b1"] = du.sum(axis=0)
    dh = du @ t["head.W1"].T
    de = np.zeros_like(tape.pre_e0) if src.shape[0] else np.zeros((0, params.H))

    for layer in reversed(range(params.L)):
        p = f"layer{layer}."
        h, e, gate, msg_dst, zn, bn_n, sig_n, qn, bn_e, sig_e_l = tape.layers[layer]
        dh_prev = dh.copy()
        de_prev = de.copy()

        if qn is not None:
            dq, grads[p + "bn_edge.gamma"], grads[p + "bn_edge.beta"] = _bn_backward(
                de * _silu_grad(qn, sig_e_l), t[p + "bn_edge.gamma"], bn_e
            )
            grads[p + "W3"] = e.T @ dq
            de_prev += dq @ t[p + "W3"].T
            dq_src = s_src @ dq
            dq_dst = s_dst @ dq
            grads[p + "W4"] = h.T @ dq_src
            grads[p + "W5"] = h.T @ dq_dst
            dh_prev += dq_src @ t[p + "W4"].T + dq_dst @ t[p + "W5"].T
        else:
            for w in ("W3", "W4", "W5"):
                grads[p + w] = np.zeros_like(t[p + w])
            grads[p + "bn_edge.gamma"] = np.zeros(params.H)
            grads[p + "bn_edge.beta"] = np.zeros(params.H)

        dz, grads[p + "bn_node.gamma"], grads[p + "bn_node.beta"] = _bn_backward(
            dh * _silu_grad(zn, sig_n), t[p + "bn_node.gamma"], bn_n
        )
        grads[p + "W1"] = h.T @ dz
        dh_prev += dz @ t[p + "W1"].T
        dmsg = agg_op.T @ dz
        dp = s_dst @ (dmsg * gate)
        grads[p + "W2"] = h.T @ dp
        dh_prev += dp @ t[p + "W2"].T
        de_prev += dmsg * msg_dst * gate * (1.0 - gate)

        dh, de = dh_prev, de_prev

    d_pre_h = dh * _silu_grad(tape.pre_h0, tape.sig_h0)
    grads["embed.node"] = tape.x.T @ d_pre_h
    if src.shape[0]:
        grads["embed.edge"] = tape.ef.T @ (de * _silu_grad(tape.pre_e0, tape.sig_e0))
    else:
        grads["embed.edge"] = np.zeros_like(t["embed.edge"])
    return {name: grads[name] for name in t}


# -- optimiser ----------------------------------------------------------------


@dataclass(eq=False)
class OptimizerState:
    """AdamW moments and hyper-parameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-3
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_optimizer(params: ModelParams, lr=1e-3, weight_decay=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    zeros = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return OptimizerState(zeros, {k: np.zeros_like(v) for k, v in params.tensors.items()},
                          0, lr, weight_decay, beta1, beta2, eps)


def optimizer_step(params: ModelParams, state: OptimizerState, grads: dict[str, np.ndarray]):
    """One decoupled-weight-decay Adam update, in place. Returns ``(params, state)``."""
    for name, p in params.tensors.items():
        if grads[name].shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {grads[name].shape}, expected {p.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.tensors.items():
        gr = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * gr
        v *= b2
        v += (1.0 - b2) * gr * gr
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        p -= state.lr * update + state.lr * state.weight_decay * p
    params.version += 1
    return params, state
