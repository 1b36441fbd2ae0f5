"""Attention message passing network for node and edge classification.

Hidden states start from an encoder MLP over the node features. One round of
message passing updates every node from the previous round's states
(synchronously, never in place):

    alpha_ij = softmax_j( (W3 h_i) . (W4 h_j) / sqrt(d) )   over neighbours j
    u_i      = W1 h_i + sum_j alpha_ij W2 h_j
    h_i     <- h_i + tanh(u_i)

Edge logits come from ``edge_mlp([h_i | h_j | edge features])`` summed over
both orientations, so they do not depend on how an edge is stored; node
logits from ``node_mlp(h_i)``. All gradients are derived by hand; the test
suite checks each of them against central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..core import make_rng
from ..errors import NoNeighbors, NumericalError, ShapeError
from .graph import EDGE_FEATURES, NODE_FEATURES, GraphBatch, GraphSample
from .mlp import MlpParams, build_mlp, mlp_backward, mlp_forward, variance_scaling


@dataclass(eq=False)
class GnnParams:
    W1: np.ndarray
    W2: np.ndarray
    W3: np.ndarray
    W4: np.ndarray
    encoder: MlpParams
    edge_mlp: MlpParams
    node_mlp: MlpParams
    rounds: int

    @property
    def d(self) -> int:
        return self.W1.shape[0]

    def arrays(self):
        """Every trainable array, in a fixed order shared with the gradients."""
        return ([self.W1, self.W2, self.W3, self.W4] + self.encoder.arrays()
                + self.edge_mlp.arrays() + self.node_mlp.arrays())

    def copy(self) -> "GnnParams":
        return GnnParams(self.W1.copy(), self.W2.copy(), self.W3.copy(), self.W4.copy(),
                         self.encoder.copy(), self.edge_mlp.copy(), self.node_mlp.copy(), self.rounds)


def init_params(d=16, rounds=16, seed=0, activation="tanh", use_layer_norm=False) -> GnnParams:
    if d < 1 or rounds < 0:
        raise ValueError("need d >= 1 and rounds >= 0")
    rng = make_rng(seed)
    Ws = [variance_scaling(rng, d, d) for _ in range(4)]
    sub = rng.integers(0, 2**63, size=3)
    enc = build_mlp([d, d], activation, False, use_layer_norm, int(sub[0]), NODE_FEATURES, "encoder")
    edge = build_mlp([d, d, 1], activation, False, False, int(sub[1]),
                     2 * d + EDGE_FEATURES, "edge_mlp")
    node = build_mlp([d, 1], activation, False, False, int(sub[2]), d, "node_mlp")
    return GnnParams(*Ws, enc, edge, node, rounds)


def zero_params(d=16, rounds=16) -> GnnParams:
    p = init_params(d, rounds)
    for a in p.arrays():
        a[...] = 0.0
    return p


# -- single-node reference operations ------------------------------------------

def attention_coefficients(xi, neighbor_xs, p: GnnParams) -> np.ndarray:
    xi = np.asarray(xi, dtype=np.float64)
    nx = np.asarray(neighbor_xs, dtype=np.float64)
    if nx.size == 0:
        raise NoNeighbors("attention needs at least one neighbour")
    nx = nx.reshape(-1, p.d)
    if xi.shape != (p.d,):
        raise ShapeError(f"node vector must have width {p.d}")
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(nx))):
        raise NumericalError("non-finite attention input")
    s = (nx @ p.W4.T) @ (p.W3 @ xi) / np.sqrt(p.d)
    s = np.exp(s - s.max())
    return s / s.sum()


def node_update(xi, neighbor_xs, alphas, p: GnnParams) -> np.ndarray:
    """``W1 x_i + sum_j alpha_ij W2 x_j``, exactly."""
    xi = np.asarray(xi, dtype=np.float64)
    nx = np.asarray(neighbor_xs, dtype=np.float64).reshape(-1, p.d)
    alphas = np.asarray(alphas, dtype=np.float64)
    if len(alphas) != len(nx):
        raise ShapeError(f"{len(alphas)} weights for {len(nx)} neighbours")
    return p.W1 @ xi + p.W2 @ (alphas @ nx)


# -- batched forward / backward ------------------------------------------------

def _segment_softmax(s, batch: GraphBatch):
    mx = np.zeros(batch.num_nodes)
    if len(s):
        mx[batch.seg_nodes] = np.maximum.reduceat(s, batch.seg_starts)
    e = np.exp(s - mx[batch.dst])
    den = batch.to_dst @ e
    return e / den[batch.dst]


def message_passing_round(batch: GraphBatch, h: np.ndarray, p: GnnParams, cache=None):
    """One synchronous round over every node of ``batch``.

    A node without neighbours only sees its own ``W1`` term. When ``cache`` is
    a list, intermediates for the backward pass are appended to it.
    """
    if h.shape != (batch.num_nodes, p.d):
        raise ShapeError(f"hidden must be ({batch.num_nodes}, {p.d}), got {h.shape}")
    q = h @ p.W3.T
    k = h @ p.W4.T
    v = h @ p.W2.T
    s = np.einsum("ij,ij->i", q[batch.dst], k[batch.src]) / np.sqrt(p.d)
    alpha = _segment_softmax(s, batch)
    m = batch.to_dst @ (alpha[:, None] * v[batch.src])
    t = np.tanh(h @ p.W1.T + m)
    if cache is not None:
        cache.append((h, q, k, v, alpha, t))
    return h + t


def _round_backward(batch, p, c, gout, g):
    h, q, k, v, alpha, t = c
    gu = gout * (1.0 - t * t)
    gh = gout + gu @ p.W1
    g["W1"] += gu.T @ h
    gmsg = gu[batch.dst]
    galpha = np.einsum("ij,ij->i", gmsg, v[batch.src])
    gv = batch.to_src @ (alpha[:, None] * gmsg)
    gs = alpha * (galpha - (batch.to_dst @ (alpha * galpha))[batch.dst])
    scale = 1.0 / np.sqrt(p.d)
    gq = batch.to_dst @ (gs[:, None] * k[batch.src]) * scale
    gk = batch.to_src @ (gs[:, None] * q[batch.dst]) * scale
    g["W2"] += gv.T @ h
    g["W3"] += gq.T @ h
    g["W4"] += gk.T @ h
    return gh + gv @ p.W2 + gq @ p.W3 + gk @ p.W4


def _as_batch(data):
    if isinstance(data, GraphBatch):
        return data
    if isinstance(data, GraphSample):
        return GraphBatch.from_samples([data])
    return GraphBatch.from_samples(list(data))


def embed(batch: GraphBatch, p: GnnParams, caches=None):
    h, enc_cache = mlp_forward(p.encoder, batch.node_features, cache=True)
    rounds = []
    for _ in range(p.rounds):
        h = message_passing_round(batch, h, p, rounds)
    if caches is not None:
        caches["encoder"] = enc_cache
        caches["rounds"] = rounds
    return h


def _edge_inputs(batch, h):
    a, b = batch.edges[:, 0], batch.edges[:, 1]
    ef = batch.edge_features
    return np.concatenate([np.concatenate([h[a], h[b], ef], axis=1),
                           np.concatenate([h[b], h[a], ef], axis=1)])


def forward(data, p: GnnParams, caches=None):
    """Edge and node logits for a sample, list of samples or prepared batch."""
    batch = _as_batch(data)
    h = embed(batch, p, caches)
    E = len(batch.edges)
    if E:
        z2, edge_cache = mlp_forward(p.edge_mlp, _edge_inputs(batch, h), cache=True)
        edge_logits = z2[:E, 0] + z2[E:, 0]
    else:
        edge_cache = None
        edge_logits = np.zeros(0)
    zn, node_cache = mlp_forward(p.node_mlp, h, cache=True)
    if caches is not None:
        caches.update(batch=batch, h=h, edge=edge_cache, node=node_cache)
    return edge_logits, zn[:, 0]


def forward_edge_logits(data, p: GnnParams) -> np.ndarray:
    return forward(data, p)[0]


def forward_node_logits(data, p: GnnParams) -> np.ndarray:
    return forward(data, p)[1]


def backward(p: GnnParams, caches, g_edge, g_node):
    """Gradients of a scalar loss, given its derivatives w.r.t. the edge and node
    logits, for every array in ``p.arrays()`` (same order)."""
    batch = caches["batch"]
    d = p.d
    gh = np.zeros((batch.num_nodes, d))
    E = len(batch.edges)
    if E:
        gz2 = np.concatenate([g_edge, g_edge])[:, None]
        gin, g_edge_mlp = mlp_backward(p.edge_mlp, caches["edge"], gz2)
        a, b = batch.edges[:, 0], batch.edges[:, 1]
        # rows [:E] were [h_a | h_b | ef], rows [E:] were [h_b | h_a | ef]
        g_first = gin[:E, :d] + gin[E:, d:2 * d]
        g_second = gin[:E, d:2 * d] + gin[E:, :d]
        gh += np.stack([np.bincount(a, g_first[:, c], batch.num_nodes) for c in range(d)], axis=1)
        gh += np.stack([np.bincount(b, g_second[:, c], batch.num_nodes) for c in range(d)], axis=1)
    else:
        g_edge_mlp = [np.zeros_like(x) for x in p.edge_mlp.arrays()]
    gnode_in, g_node_mlp = mlp_backward(p.node_mlp, caches["node"], g_node[:, None])
    gh += gnode_in
    g = {name: np.zeros((d, d)) for name in ("W1", "W2", "W3", "W4")}
    for c in reversed(caches["rounds"]):
        gh = _round_backward(batch, p, c, gh, g)
    _, g_enc = mlp_backward(p.encoder, caches["encoder"], gh)
    return [g["W1"], g["W2"], g["W3"], g["W4"]] + g_enc + g_edge_mlp + g_node_mlp


# -- loss -------------------------------------------------------------------------

def supervised_loss(logits, labels, kind="mse"):
    """Loss and its gradient w.r.t. the logits.

    ``mse``: sum of (sigmoid(logit) - label)^2. ``bce``: summed binary
    cross-entropy on the logits.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise ShapeError(f"{z.shape} logits vs {y.shape} labels")
    s = expit(z)
    if kind == "mse":
        r = s - y
        return float(np.sum(r * r)), 2.0 * r * s * (1.0 - s)
    if kind == "bce":
        loss = np.sum(np.logaddexp(0.0, z) - y * z)
        return float(loss), s - y
    raise ValueError(f"unknown loss {kind!r}")
