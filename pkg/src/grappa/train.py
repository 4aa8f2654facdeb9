"""Losses, optimizer, schedulers, the two-phase fit loop, and grid search.

Training runs in two phases: a squared-error warm-up under a one-cycle
learning rate, then a Huber-loss main phase under a reduce-on-plateau rate.
After every epoch the validation median percentage error is computed and the
best checkpoint across all epochs is kept (early-stopping selection).

Losses average over data points; a mini-batch holds whole molecules and is
processed on a single tape so batch normalization sees the molecule batch.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from itertools import product

import numpy as np

from .dataio import VpDataset
from .featurize import MolGraph, featurize
from .model import (
    Architecture,
    GrappaModel,
    antoine_params_for_graph,
    forward_antoine,
    init_model,
    load_into,
    to_checkpoint,
)
from .smiles import parse_smiles
from .tensor import (
    NonFiniteError,
    Tensor,
    abs_,
    add,
    div,
    gather_rows,
    huber,
    mean_all,
    mul,
    sub,
)

GRID_GAT_LAYERS = (2, 3, 4, 5)
GRID_HEADS = (1, 2, 3, 4, 5)
GRID_HIDDEN_LAYERS = (1, 2, 3)
GRID_POOLING = ("sum", "interaction")

HISTORY_COLUMNS = ("epoch", "phase", "lr", "train_loss", "valid_mape_i")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 512
    warmup_epochs: int = 100
    # The main-phase budget; reported values differ between 100 and 200
    # depending on the source, so it stays configurable.
    main_epochs: int = 200
    huber_delta: float = 0.5
    max_lr: float = 0.001
    # Starting rate of the plateau-scheduled main phase; defaults to max_lr.
    main_lr: float | None = None
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    standardize_counts: bool = False
    grid_gat_layers: tuple[int, ...] = GRID_GAT_LAYERS
    grid_heads: tuple[int, ...] = GRID_HEADS
    grid_hidden_layers: tuple[int, ...] = GRID_HIDDEN_LAYERS
    grid_pooling: tuple[str, ...] = GRID_POOLING

    def validate(self):
        for name in ("batch_size", "warmup_epochs", "main_epochs", "huber_delta",
                     "max_lr", "plateau_factor", "plateau_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not set(self.grid_gat_layers) <= set(GRID_GAT_LAYERS):
            raise ValueError("grid_gat_layers outside the supported set")
        if not set(self.grid_heads) <= set(GRID_HEADS):
            raise ValueError("grid_heads outside the supported set")
        if not set(self.grid_hidden_layers) <= set(GRID_HIDDEN_LAYERS):
            raise ValueError("grid_hidden_layers outside the supported set")
        if not set(self.grid_pooling) <= set(GRID_POOLING):
            raise ValueError("grid_pooling outside the supported set")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        cfg = cls(**{k: tuple(v) if isinstance(v, list) else v
                     for k, v in data.items()})
        return cfg.validate()


# -------------------------------------------------------------------- losses

def _residual(pred_ln_p, exp_ln_p) -> Tensor:
    pred = pred_ln_p if isinstance(pred_ln_p, Tensor) else Tensor(pred_ln_p)
    target = np.asarray(exp_ln_p, dtype=np.float64)
    if pred.size == 0:
        raise ValueError("empty batch")
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {target.shape}")
    return sub(pred, Tensor(target))


def loss_mse(pred_ln_p, exp_ln_p) -> Tensor:
    d = _residual(pred_ln_p, exp_ln_p)
    return mean_all(mul(d, d))


def loss_mae(pred_ln_p, exp_ln_p) -> Tensor:
    return mean_all(abs_(_residual(pred_ln_p, exp_ln_p)))


def loss_huber(pred_ln_p, exp_ln_p, delta: float = 0.5) -> Tensor:
    return mean_all(huber(_residual(pred_ln_p, exp_ln_p), delta))


# ------------------------------------------------------------------ optimizer

@dataclass
class AdamWState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict) -> "AdamWState":
        state = cls()
        for name, value in params.items():
            arr = value.data if isinstance(value, Tensor) else np.asarray(value)
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adamw_step(params: dict, grads: dict, state: AdamWState, lr: float,
               betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.01) -> dict:
    """One decoupled-weight-decay Adam update, in place on the param arrays."""
    b1, b2 = betas
    state.step += 1
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, value in params.items():
        p = value.data if isinstance(value, Tensor) else value
        g = grads[name]
        if g is None:
            g = np.zeros_like(p)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name!r}")
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        p *= 1.0 - lr * weight_decay
        p -= lr * (state.m[name] / bc1) / (np.sqrt(state.v[name] / bc2) + eps)
    return params


# ------------------------------------------------------------------ schedules

def one_cycle_peak_step(total_steps: int, pct_start: float = 0.3) -> float:
    return pct_start * (total_steps - 1)


def one_cycle_lr(step: float, total_steps: int, max_lr: float,
                 pct_start: float = 0.3, div_factor: float = 25.0,
                 final_div_factor: float = 1e4) -> float:
    """Cosine warm-up to ``max_lr`` over the first 30% of steps, then cosine
    anneal down to ``max_lr / final_div_factor``."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if total_steps == 1:
        return max_lr
    start = max_lr / div_factor
    final = max_lr / final_div_factor
    peak = one_cycle_peak_step(total_steps, pct_start)
    s = min(max(float(step), 0.0), float(total_steps - 1))
    if s <= peak:
        if peak == 0:
            return max_lr
        frac = s / peak
        return start + (max_lr - start) * (1.0 - math.cos(math.pi * frac)) / 2.0
    frac = (s - peak) / (total_steps - 1 - peak)
    return final + (max_lr - final) * (1.0 + math.cos(math.pi * frac)) / 2.0


@dataclass
class PlateauState:
    lr: float
    factor: float = 0.5
    patience: int = 5
    best: float = math.inf
    num_bad: int = 0


def plateau_lr(state: PlateauState, val_metric: float) -> float:
    """Halve the rate after ``patience`` consecutive epochs without a new best."""
    if val_metric < state.best:
        state.best = val_metric
        state.num_bad = 0
    else:
        state.num_bad += 1
        if state.num_bad > state.patience:
            state.lr *= state.factor
            state.num_bad = 0
    return state.lr


# ------------------------------------------------------------------- fitting

@dataclass
class _CompData:
    component: str
    graph: MolGraph
    temperatures: np.ndarray
    pressures_pa: np.ndarray
    ln_p_kpa: np.ndarray


def _prepare_components(dataset: VpDataset) -> list[_CompData]:
    items = []
    for component, points in sorted(dataset.by_component().items()):
        graph = featurize(parse_smiles(points[0].smiles))
        t = np.array([pt.temperature_k for pt in points])
        p = np.array([pt.pressure_pa for pt in points])
        items.append(_CompData(component, graph, t, p, np.log(p / 1000.0)))
    return items


def _batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    # Batch norm needs at least two molecules; fold a trailing singleton in.
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _batch_loss(model: GrappaModel, items: list[_CompData], kind: str,
                delta: float) -> Tensor:
    a, b, c = forward_antoine(model, [it.graph for it in items], mode="train")
    idx = np.concatenate([np.full(len(it.temperatures), i, dtype=np.int64)
                          for i, it in enumerate(items)])
    temps = np.concatenate([it.temperatures for it in items])
    target = np.concatenate([it.ln_p_kpa for it in items])
    denom = add(gather_rows(c, idx), Tensor(temps))
    pred = sub(gather_rows(a, idx), div(gather_rows(b, idx), denom))
    if kind == "mse":
        return loss_mse(pred, target)
    return loss_huber(pred, target, delta)


def validation_mape_i(model: GrappaModel, items: list[_CompData]) -> float:
    """Median absolute percentage error over all validation points."""
    apes = []
    for it in items:
        params = antoine_params_for_graph(model, it.graph)
        denom = params.C + it.temperatures
        valid = denom > 0
        ln_p = np.where(valid, params.A - params.B / np.where(valid, denom, 1.0),
                        np.nan)
        p_pred = np.exp(ln_p) * 1000.0
        ape = np.where(valid,
                       np.abs(p_pred - it.pressures_pa) / it.pressures_pa * 100.0,
                       np.inf)
        apes.append(ape)
    return float(np.median(np.concatenate(apes)))


@dataclass
class FitResult:
    best_checkpoint: dict
    history: list[dict]
    best_epoch: int
    best_valid_mape_i: float


def history_csv(history: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=HISTORY_COLUMNS)
    writer.writeheader()
    for row in history:
        writer.writerow({key: row[key] for key in HISTORY_COLUMNS})
    return out.getvalue()


def fit(model: GrappaModel, train_set: VpDataset, valid_set: VpDataset,
        cfg: TrainConfig) -> FitResult:
    """Two-phase training; leaves ``model`` restored to the best checkpoint."""
    cfg.validate()
    train_items = _prepare_components(train_set)
    valid_items = _prepare_components(valid_set)
    if not train_items or not valid_items:
        raise ValueError("training and validation sets must be non-empty")
    overlap = {it.component for it in train_items} & {
        it.component for it in valid_items}
    if overlap:
        raise ValueError(f"components in both train and valid: {sorted(overlap)}")

    if cfg.standardize_counts:
        donors = np.array([it.graph.h_donors for it in train_items], dtype=float)
        accept = np.array([it.graph.h_acceptors for it in train_items], dtype=float)
        model.arch.count_scale = [donors.mean(), max(donors.std(), 1e-8),
                                  accept.mean(), max(accept.std(), 1e-8)]

    rng = np.random.default_rng(cfg.seed)
    params = model.named_parameters()
    history: list[dict] = []
    best_valid = math.inf
    best_epoch = -1
    best_checkpoint = to_checkpoint(model)
    epoch = 0
    n_batches = len(_batches(np.arange(len(train_items)), cfg.batch_size))
    total_warm_steps = cfg.warmup_epochs * n_batches

    for phase, n_epochs in (("warmup", cfg.warmup_epochs),
                            ("main", cfg.main_epochs)):
        opt_state = AdamWState.for_params(params)
        plateau = PlateauState(cfg.main_lr if cfg.main_lr is not None
                               else cfg.max_lr,
                               cfg.plateau_factor, cfg.plateau_patience)
        step = 0
        for _ in range(n_epochs):
            epoch += 1
            order = rng.permutation(len(train_items))
            lr = cfg.max_lr
            losses = []
            for batch in _batches(order, cfg.batch_size):
                items = [train_items[i] for i in batch]
                if phase == "warmup":
                    lr = one_cycle_lr(step, total_warm_steps, cfg.max_lr)
                else:
                    lr = plateau.lr
                try:
                    loss = _batch_loss(model, items,
                                       "mse" if phase == "warmup" else "huber",
                                       cfg.huber_delta)
                    loss.backward()
                except NonFiniteError as err:
                    raise TrainingError(
                        f"non-finite loss in {phase} epoch {epoch} "
                        f"(components {[it.component for it in items]}): {err}"
                    ) from err
                grads = {name: t.grad for name, t in params.items()}
                adamw_step(params, grads, opt_state, lr, cfg.betas, cfg.eps,
                           cfg.weight_decay)
                losses.append(loss.item())
                step += 1
            valid_mape = validation_mape_i(model, valid_items)
            if phase == "main":
                plateau_lr(plateau, valid_mape)
            history.append({
                "epoch": epoch,
                "phase": phase,
                "lr": lr,
                "train_loss": float(np.mean(losses)),
                "valid_mape_i": valid_mape,
            })
            if valid_mape < best_valid:
                best_valid = valid_mape
                best_epoch = epoch
                best_checkpoint = to_checkpoint(model)

    load_into(model, best_checkpoint)
    return FitResult(best_checkpoint, history, best_epoch, best_valid)


# ---------------------------------------------------------------- grid search

def grid_cells(cfg: TrainConfig) -> list[dict]:
    return [
        {"gat_layers": l, "heads": h, "hidden_layers": d, "pooling": p}
        for l, h, d, p in product(cfg.grid_gat_layers, cfg.grid_heads,
                                  cfg.grid_hidden_layers, cfg.grid_pooling)
    ]


def _run_cell(args) -> dict:
    index, cell, cfg_dict, train_set, valid_set = args
    cfg = TrainConfig.from_dict(cfg_dict)
    arch = Architecture(gat_layers=cell["gat_layers"], heads=cell["heads"],
                        hidden_layers=cell["hidden_layers"],
                        pooling=cell["pooling"])
    model = init_model(arch, seed=np.random.SeedSequence([cfg.seed, index]))
    result = fit(model, train_set, valid_set, cfg)
    return {
        "cell": index,
        **cell,
        "best_valid_mape_i": result.best_valid_mape_i,
        "best_epoch": result.best_epoch,
    }


def grid_search(cfg: TrainConfig, train_set: VpDataset, valid_set: VpDataset,
                jobs: int = 1) -> list[dict]:
    """Train every grid cell and rank by validation median percentage error.

    The ranking is total and deterministic: ties break on cell index.
    """
    cfg.validate()
    cells = grid_cells(cfg)
    args = [(i, cell, cfg.to_dict(), train_set, valid_set)
            for i, cell in enumerate(cells)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, args))
    else:
        rows = [_run_cell(a) for a in args]
    rows.sort(key=lambda r: (r["best_valid_mape_i"], r["cell"]))
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows
