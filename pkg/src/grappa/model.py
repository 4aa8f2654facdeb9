"""Full model: graph attention stack, readout, and the bounded parameter head.

The head maps the pooled embedding plus hydrogen donor/acceptor counts
through hidden layers (linear -> batch norm -> ELU) to three raw outputs,
each squashed into its Antoine range with ``lo + (hi - lo) * sigmoid``, so
every prediction is a valid vapor-pressure curve by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .antoine import PARAM_RANGES, AntoineParams, boiling_temperature, ln_vapor_pressure
from .featurize import EDGE_FEATURES, NODE_FEATURES, MolGraph, featurize, validate_scope, ScopeError
from .gnn import GatLayer, encode, glorot, init_gat_layer
from .pooling import InteractionPoolParams, init_interaction_pool, interaction_pool, sum_pool
from .smiles import parse_smiles
from .tensor import (
    BatchNormState,
    Tensor,
    add,
    batch_norm,
    concat,
    elu,
    matmul,
    scale,
    sigmoid,
    stack_rows,
    take_column,
)

CHECKPOINT_VERSION = 1
EXTRA_HEAD_INPUTS = 2  # hydrogen donor and acceptor counts


@dataclass
class Architecture:
    gat_layers: int = 4
    heads: int = 2
    embed_dim: int = 32
    pooling: str = "interaction"
    hidden_layers: int = 3
    hidden_width: int = 16
    node_features: int = NODE_FEATURES
    edge_features: int = EDGE_FEATURES
    param_ranges: dict = field(default_factory=lambda: {k: list(v) for k, v in PARAM_RANGES.items()})
    count_scale: list | None = None  # (mean_d, std_d, mean_a, std_a), optional

    def validate(self):
        if self.gat_layers < 2:
            raise ValueError("at least two message-passing layers are required")
        if self.heads < 1:
            raise ValueError("heads must be >= 1")
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.pooling not in ("sum", "interaction"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        for key in ("A", "B", "C"):
            lo, hi = self.param_ranges[key]
            if not lo < hi:
                raise ValueError(f"empty range for {key}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Architecture":
        return cls(**data).validate()


@dataclass
class HeadLayer:
    weight: Tensor
    bias: Tensor
    bn_gamma: Tensor
    bn_beta: Tensor
    bn_state: BatchNormState


@dataclass
class GrappaModel:
    arch: Architecture
    gat: list[GatLayer]
    pool: InteractionPoolParams | None
    hidden: list[HeadLayer]
    out_weight: Tensor
    out_bias: Tensor

    def named_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for li, layer in enumerate(self.gat):
            for hi in range(layer.heads):
                params[f"gat.{li}.{hi}.theta_v"] = layer.theta_v[hi]
                params[f"gat.{li}.{hi}.theta_e"] = layer.theta_e[hi]
                params[f"gat.{li}.{hi}.att"] = layer.att[hi]
        if self.pool is not None:
            params["pool.Wq"] = self.pool.Wq
            params["pool.Wk"] = self.pool.Wk
            params["pool.Wv"] = self.pool.Wv
        for i, layer in enumerate(self.hidden):
            params[f"head.{i}.weight"] = layer.weight
            params[f"head.{i}.bias"] = layer.bias
            params[f"head.{i}.bn.gamma"] = layer.bn_gamma
            params[f"head.{i}.bn.beta"] = layer.bn_beta
        params["head.out.weight"] = self.out_weight
        params["head.out.bias"] = self.out_bias
        return params

    def named_buffers(self) -> dict[str, np.ndarray]:
        buffers: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.hidden):
            buffers[f"head.{i}.bn.running_mean"] = layer.bn_state.running_mean
            buffers[f"head.{i}.bn.running_var"] = layer.bn_state.running_var
        return buffers

    def zero_grad(self):
        for tensor in self.named_parameters().values():
            tensor.zero_grad()

    def parameter_count(self) -> int:
        return sum(t.size for t in self.named_parameters().values())

    def accounting(self) -> list[dict]:
        rows = [
            {"name": name, "shape": list(t.shape), "count": int(t.size)}
            for name, t in self.named_parameters().items()
        ]
        return rows


def init_model(arch: Architecture, seed: int | np.random.SeedSequence = 0) -> GrappaModel:
    arch.validate()
    rng = np.random.default_rng(seed)
    gat = []
    in_dim = arch.node_features
    for li in range(arch.gat_layers):
        gat.append(init_gat_layer(rng, in_dim, arch.embed_dim, arch.heads,
                                  arch.edge_features, layer_index=li))
        in_dim = arch.embed_dim
    pool = None
    if arch.pooling == "interaction":
        pool = init_interaction_pool(rng, arch.embed_dim)
    hidden = []
    width_in = arch.embed_dim + EXTRA_HEAD_INPUTS
    for i in range(arch.hidden_layers):
        hidden.append(HeadLayer(
            weight=Tensor(glorot(rng, (width_in, arch.hidden_width)),
                          requires_grad=True, name=f"head.{i}.weight"),
            bias=Tensor(np.zeros(arch.hidden_width), requires_grad=True,
                        name=f"head.{i}.bias"),
            bn_gamma=Tensor(np.ones(arch.hidden_width), requires_grad=True,
                            name=f"head.{i}.bn.gamma"),
            bn_beta=Tensor(np.zeros(arch.hidden_width), requires_grad=True,
                           name=f"head.{i}.bn.beta"),
            bn_state=BatchNormState.fresh(arch.hidden_width),
        ))
        width_in = arch.hidden_width
    out_weight = Tensor(glorot(rng, (width_in, 3)), requires_grad=True,
                        name="head.out.weight")
    out_bias = Tensor(np.zeros(3), requires_grad=True, name="head.out.bias")
    return GrappaModel(arch, gat, pool, hidden, out_weight, out_bias)


# ------------------------------------------------------------------ forward

def pool_graph(model: GrappaModel, graph: MolGraph) -> Tensor:
    """Message passing plus readout: one fixed-size embedding per molecule."""
    embeddings = encode(graph, model.gat)
    if model.arch.pooling == "interaction":
        return interaction_pool(embeddings, model.pool)
    return sum_pool(embeddings)


def _count_features(model: GrappaModel, graphs: list[MolGraph]) -> np.ndarray:
    counts = np.array([[g.h_donors, g.h_acceptors] for g in graphs], dtype=np.float64)
    if model.arch.count_scale is not None:
        mean_d, std_d, mean_a, std_a = model.arch.count_scale
        counts[:, 0] = (counts[:, 0] - mean_d) / std_d
        counts[:, 1] = (counts[:, 1] - mean_a) / std_a
    return counts


def head_raw(model: GrappaModel, pooled: Tensor, counts: np.ndarray,
             mode: str = "infer") -> Tensor:
    """Hidden stack on (B, d + 2) input; returns the (B, 3) raw outputs."""
    z = concat([pooled, Tensor(counts)], axis=1)
    for layer in model.hidden:
        z = matmul(z, layer.weight)
        z = add(z, layer.bias)
        z = batch_norm(z, layer.bn_gamma, layer.bn_beta, layer.bn_state, mode)
        z = elu(z)
    return add(matmul(z, model.out_weight), model.out_bias)


def scale_to_ranges(raw: Tensor, ranges: dict) -> tuple[Tensor, Tensor, Tensor]:
    """Map each raw column into its bounded interval via the sigmoid."""
    outs = []
    for j, key in enumerate(("A", "B", "C")):
        lo, hi = ranges[key]
        outs.append(add(scale(sigmoid(take_column(raw, j)), hi - lo), lo))
    return tuple(outs)


def forward_antoine(model: GrappaModel, graphs: list[MolGraph],
                    mode: str = "infer") -> tuple[Tensor, Tensor, Tensor]:
    """Antoine parameter columns (A, B, C), each of shape (B,)."""
    pooled = stack_rows([pool_graph(model, g) for g in graphs])
    raw = head_raw(model, pooled, _count_features(model, graphs), mode)
    return scale_to_ranges(raw, model.arch.param_ranges)


def head_forward(h, donors: int, acceptors: int, model: GrappaModel,
                 mode: str = "infer") -> AntoineParams:
    """Head only: pooled embedding plus counts to bounded Antoine parameters."""
    pooled = stack_rows([h if isinstance(h, Tensor) else Tensor(h)])
    counts = np.array([[donors, acceptors]], dtype=np.float64)
    if model.arch.count_scale is not None:
        mean_d, std_d, mean_a, std_a = model.arch.count_scale
        counts = np.array([[(donors - mean_d) / std_d, (acceptors - mean_a) / std_a]])
    raw = head_raw(model, pooled, counts, mode)
    a, b, c = scale_to_ranges(raw, model.arch.param_ranges)
    return AntoineParams(a.item(), b.item(), c.item())


@dataclass(frozen=True)
class Prediction:
    params: AntoineParams
    ln_p_kpa: float | np.ndarray | None = None
    p_pa: float | np.ndarray | None = None
    boiling_k: float | None = None


def antoine_params_for_graph(model: GrappaModel, graph: MolGraph) -> AntoineParams:
    a, b, c = forward_antoine(model, [graph], mode="infer")
    return AntoineParams(a.item(), b.item(), c.item())


def predict(model: GrappaModel, smiles: str, temperatures=None,
            boil_pressure_pa: float | None = None) -> Prediction:
    """Parse, check scope, and run the whole pipeline in inference mode."""
    mol = parse_smiles(smiles)
    scope = validate_scope(mol)
    if not scope.accepted:
        raise ScopeError(scope.reasons)
    graph = featurize(mol)
    params = antoine_params_for_graph(model, graph)
    ln_p = p = None
    if temperatures is not None:
        ln_p = ln_vapor_pressure(params, temperatures)
        p = np.exp(ln_p) * 1000.0 if not np.isscalar(ln_p) else float(np.exp(ln_p) * 1000.0)
    boiling = None
    if boil_pressure_pa is not None:
        boiling = boiling_temperature(params, boil_pressure_pa)
    return Prediction(params, ln_p, p, boiling)


def predict_dataset(model: GrappaModel, dataset, split: str | None = None):
    """Inference over every component of a dataset (optionally one split).

    Returns ``(pred_points, params_by_component)`` ready for the metrics
    layer; points whose temperature falls outside a predicted curve's valid
    branch get an infinite predicted pressure.
    """
    from .metrics import PredPoint

    pred_points = []
    params_by_component = {}
    for component, points in sorted(dataset.by_component().items()):
        if split is not None and dataset.split_label(component) != split:
            continue
        graph = featurize(parse_smiles(points[0].smiles))
        params = antoine_params_for_graph(model, graph)
        params_by_component[component] = params
        for pt in points:
            denom = params.C + pt.temperature_k
            if denom > 0:
                p_pred = float(np.exp(params.A - params.B / denom) * 1000.0)
            else:
                p_pred = float("inf")
            pred_points.append(PredPoint(
                component_id=component,
                temperature_k=pt.temperature_k,
                p_exp_pa=pt.pressure_pa,
                p_pred_pa=p_pred,
                mol_weight=graph.mol_weight,
            ))
    return pred_points, params_by_component


# --------------------------------------------------------------- checkpoints

def to_checkpoint(model: GrappaModel) -> dict:
    entries = {}
    for name, tensor in model.named_parameters().items():
        entries[name] = {"shape": list(tensor.shape),
                         "values": tensor.data.ravel().tolist()}
    for name, buf in model.named_buffers().items():
        entries[name] = {"shape": list(buf.shape), "values": buf.ravel().tolist()}
    return {
        "format_version": CHECKPOINT_VERSION,
        "arch": model.arch.to_dict(),
        "params": entries,
    }


def save_checkpoint(model: GrappaModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_checkpoint(model), fh)


def model_from_checkpoint(data: dict) -> GrappaModel:
    version = data.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    arch = Architecture.from_dict(data["arch"])
    model = init_model(arch, seed=0)
    entries = dict(data["params"])
    for name, tensor in model.named_parameters().items():
        if name not in entries:
            raise ValueError(f"checkpoint missing parameter {name!r}")
        entry = entries.pop(name)
        values = np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
        if list(values.shape) != list(tensor.shape):
            raise ValueError(f"parameter {name!r} has shape {values.shape}, "
                             f"expected {tensor.shape}")
        tensor.data = values
    for name, buf in model.named_buffers().items():
        if name not in entries:
            raise ValueError(f"checkpoint missing buffer {name!r}")
        entry = entries.pop(name)
        buf[...] = np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
    if entries:
        raise ValueError(f"checkpoint has unknown entries: {sorted(entries)}")
    return model


def load_checkpoint(path) -> GrappaModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_checkpoint(json.load(fh))


def load_into(model: GrappaModel, checkpoint: dict):
    """Restore parameters and buffers in place from a checkpoint dict."""
    restored = model_from_checkpoint(checkpoint)
    for name, tensor in model.named_parameters().items():
        tensor.data = restored.named_parameters()[name].data
    for (name, buf), (_, src) in zip(model.named_buffers().items(),
                                     restored.named_buffers().items()):
        buf[...] = src
    return model


def parameter_accounting_markdown(model: GrappaModel) -> str:
    """Markdown table of every trainable tensor and the grand total."""
    rows = model.accounting()
    lines = [
        "# Trainable parameter accounting",
        "",
        f"Architecture: {model.arch.gat_layers} message-passing layers x "
        f"{model.arch.heads} heads, embedding {model.arch.embed_dim}, "
        f"{model.arch.pooling} pooling, {model.arch.hidden_layers} hidden "
        f"layers of {model.arch.hidden_width}.",
        "",
        "| parameter | shape | count |",
        "|---|---|---:|",
    ]
    for row in rows:
        shape = "x".join(str(s) for s in row["shape"]) or "scalar"
        lines.append(f"| `{row['name']}` | {shape} | {row['count']} |")
    lines.append(f"| **total** | | **{model.parameter_count()}** |")
    lines.append("")
    lines.append("Batch-norm running statistics are buffers, not trainable, "
                 "and are excluded from the total.")
    return "\n".join(lines) + "\n"
