"""Attention-based message passing over molecular graphs.

Each layer updates every node from its neighborhood plus a self-loop; the
attention logit for an edge is ``att . leaky_relu(W x_i + W x_j + We e_ij)``
softmax-normalized over the neighborhood, and multi-head outputs are
averaged so the embedding width stays fixed. Self-loops carry a zero edge
feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featurize import EDGE_FEATURES, MolGraph
from .tensor import (
    Tensor,
    add,
    as_column,
    gather_rows,
    matmul,
    mul,
    leaky_relu,
    scale,
    segment_softmax,
    segment_sum,
)

LEAKY_SLOPE = 0.2


@dataclass
class GatLayer:
    """One message-passing layer; lists are indexed by attention head."""

    theta_v: list[Tensor]  # (in_dim, out_dim) per head
    theta_e: list[Tensor]  # (edge_dim, out_dim) per head
    att: list[Tensor]  # (out_dim,) per head

    @property
    def heads(self) -> int:
        return len(self.theta_v)

    @property
    def in_dim(self) -> int:
        return self.theta_v[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.theta_v[0].shape[1]


def glorot(rng: np.random.Generator, shape) -> np.ndarray:
    fan = sum(shape) if len(shape) > 1 else shape[0] + 1
    limit = np.sqrt(6.0 / fan)
    return rng.uniform(-limit, limit, size=shape)


def init_gat_layer(rng: np.random.Generator, in_dim: int, out_dim: int = 32,
                   heads: int = 2, edge_dim: int = EDGE_FEATURES,
                   layer_index: int = 0) -> GatLayer:
    theta_v, theta_e, att = [], [], []
    for head in range(heads):
        prefix = f"gat.{layer_index}.{head}"
        theta_v.append(Tensor(glorot(rng, (in_dim, out_dim)), requires_grad=True,
                              name=f"{prefix}.theta_v"))
        theta_e.append(Tensor(glorot(rng, (edge_dim, out_dim)), requires_grad=True,
                              name=f"{prefix}.theta_e"))
        att.append(Tensor(glorot(rng, (out_dim,)), requires_grad=True,
                          name=f"{prefix}.att"))
    return GatLayer(theta_v, theta_e, att)


def _edge_arrays(graph: MolGraph):
    """Directed edges plus one self-loop per node (zero edge features)."""
    n = graph.heavy_atom_count
    loops = np.arange(n, dtype=np.int64)
    if len(graph.edges):
        dst = np.concatenate([graph.edges[:, 0], loops])
        src = np.concatenate([graph.edges[:, 1], loops])
        feats = np.vstack([graph.edge_features,
                           np.zeros((n, graph.edge_features.shape[1]))])
    else:
        dst = src = loops
        feats = np.zeros((n, EDGE_FEATURES))
    return dst, src, feats


def gat_forward(x: Tensor, graph: MolGraph, layer: GatLayer,
                return_attention: bool = False):
    """Run one layer: returns the (N, out_dim) update, optionally with the
    per-head attention weights and their (dst, src) index arrays."""
    n = graph.heavy_atom_count
    if x.shape[0] != n:
        raise ValueError(f"embedding rows {x.shape[0]} != node count {n}")
    if x.shape[1] != layer.in_dim:
        raise ValueError(f"embedding width {x.shape[1]} != layer input "
                         f"{layer.in_dim}")
    dst, src, feats = _edge_arrays(graph)
    feats_t = Tensor(feats)

    head_outputs = []
    attentions = []
    for head in range(layer.heads):
        xv = matmul(x, layer.theta_v[head])
        received = gather_rows(xv, dst)
        sent = gather_rows(xv, src)
        edge_term = matmul(feats_t, layer.theta_e[head])
        pre = leaky_relu(add(add(received, sent), edge_term), LEAKY_SLOPE)
        logits = matmul(pre, layer.att[head])
        alpha = segment_softmax(logits, dst, n)
        weighted = mul(sent, as_column(alpha))
        head_outputs.append(segment_sum(weighted, dst, n))
        attentions.append(alpha)

    out = head_outputs[0]
    for extra in head_outputs[1:]:
        out = add(out, extra)
    if layer.heads > 1:
        out = scale(out, 1.0 / layer.heads)
    if return_attention:
        return out, attentions, (dst, src)
    return out


def encode(graph: MolGraph, layers: list[GatLayer]) -> Tensor:
    """Apply the layer stack to the initial node features."""
    x = Tensor(graph.node_features)
    for layer in layers:
        x = gat_forward(x, graph, layer)
    return x


def attention_scores(graph: MolGraph, layers: list[GatLayer]) -> np.ndarray:
    """Per-atom importance in [0, 1]: mean outgoing attention weight in the
    last layer (heads averaged), min-max normalized per molecule. All-equal
    scores (single atoms, perfect symmetry) map to 1.0."""
    if not layers:
        raise ValueError("attention_scores needs at least one layer")
    x = Tensor(graph.node_features)
    for layer in layers[:-1]:
        x = gat_forward(x, graph, layer)
    _, attentions, (dst, src) = gat_forward(x, graph, layers[-1],
                                            return_attention=True)
    n = graph.heavy_atom_count
    totals = np.zeros(n)
    counts = np.zeros(n)
    for alpha in attentions:
        np.add.at(totals, src, alpha.data)
        np.add.at(counts, src, 1.0)
    scores = totals / counts
    lo, hi = scores.min(), scores.max()
    if hi - lo < 1e-15:
        return np.ones(n)
    return (scores - lo) / (hi - lo)
