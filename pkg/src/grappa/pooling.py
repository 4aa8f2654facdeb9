"""Readouts collapsing the (N, d) node-embedding matrix to one d-vector.

Both variants are invariant to node order: plain summation, and a
self-attention readout that mixes all node pairs before summing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    Tensor,
    matmul,
    row_sum,
    scale,
    softmax_rows,
    transpose,
)


@dataclass
class InteractionPoolParams:
    Wq: Tensor  # (d, k)
    Wk: Tensor  # (d, k)
    Wv: Tensor  # (d, d)

    @property
    def dim(self) -> int:
        return self.Wq.shape[0]


def init_interaction_pool(rng: np.random.Generator, dim: int = 32) -> InteractionPoolParams:
    from .gnn import glorot

    return InteractionPoolParams(
        Wq=Tensor(glorot(rng, (dim, dim)), requires_grad=True, name="pool.Wq"),
        Wk=Tensor(glorot(rng, (dim, dim)), requires_grad=True, name="pool.Wk"),
        Wv=Tensor(glorot(rng, (dim, dim)), requires_grad=True, name="pool.Wv"),
    )


def sum_pool(x: Tensor) -> Tensor:
    """Sum of node embeddings: (N, d) -> (d,)."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("sum_pool needs a non-empty (N, d) matrix")
    return row_sum(x)


def interaction_pool(x: Tensor, params: InteractionPoolParams,
                     return_attention: bool = False):
    """Self-attention readout: softmax(Q K^T / sqrt(k)) V, summed over rows."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("interaction_pool needs a non-empty (N, d) matrix")
    q = matmul(x, params.Wq)
    k = matmul(x, params.Wk)
    v = matmul(x, params.Wv)
    key_dim = params.Wk.shape[1]
    weights = softmax_rows(scale(matmul(q, transpose(k)), 1.0 / np.sqrt(key_dim)))
    context = matmul(weights, v)
    pooled = row_sum(context)
    if return_attention:
        return pooled, weights
    return pooled
