"""Command-line entry point wiring the pipeline end to end.

Machine-readable JSON goes to stdout; human-readable notes go to stderr
under ``--verbose``. Exit codes: 0 success, 1 validation or domain failure,
2 usage error. All randomness flows from ``--seed`` (fallback: the
``GRAPPA_SEED`` environment variable, then 0).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, metrics
from .antoine import AntoineDomainError, AntoineParams, boiling_temperature
from .featurize import ScopeError, featurize
from .gnn import attention_scores
from .model import (
    Architecture,
    init_model,
    load_checkpoint,
    predict,
    predict_dataset,
    save_checkpoint,
)
from .smiles import SmilesError, parse_smiles
from .tensor import NonFiniteError
from .train import TrainConfig, TrainingError, fit, grid_search, history_csv


def _seed_from(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("GRAPPA_SEED")
    return int(env) if env else 0


def _json_safe(value):
    """Replace non-finite floats with null so the output stays strict JSON."""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _emit(payload, verbose_note: str | None = None, verbose: bool = False):
    print(json.dumps(_json_safe(payload)))
    if verbose and verbose_note:
        print(verbose_note, file=sys.stderr)


def _load_dataset(args) -> dataio.VpDataset:
    ds = dataio.load(args.data, getattr(args, "format", "csv"))
    if getattr(args, "splits", None):
        ds.splits = dataio.read_splits_csv(args.splits)
    return ds


# ------------------------------------------------------------------- commands

def _cmd_curate(args) -> int:
    ds = dataio.load(args.input, args.format)
    result = dataio.curate(ds)
    dataio.write_csv(result.dataset, args.output)
    if args.audit:
        dataio.write_audit_jsonl(result.audit, args.audit)
    if args.conflicts:
        Path(args.conflicts).write_text(json.dumps(result.conflicts, indent=2),
                                        encoding="utf-8")
    summary = {
        "points_in": len(ds),
        "points_kept": len(result.dataset),
        "points_dropped": len(ds) - len(result.dataset),
        "rows_rejected_on_load": len(ds.rejects),
        "conflicts": len(result.conflicts),
        "output": str(args.output),
    }
    note = "\n".join(f"{e['rule']}: row={e['row']} component={e['component']}"
                     for e in result.audit)
    _emit(summary, note, args.verbose)
    return 0


def _cmd_split(args) -> int:
    ds = dataio.load(args.input, args.format)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    labeled = dataio.split(ds, _seed_from(args), ratios)
    dataio.write_splits_csv(labeled, args.output)
    counts: dict[str, int] = {}
    for component in labeled.components():
        label = labeled.split_label(component)
        counts[label] = counts.get(label, 0) + 1
    _emit({"components": counts, "output": str(args.output)}, None, args.verbose)
    return 0


def _cmd_fit_antoine(args) -> int:
    ds = dataio.load(args.input, args.format)
    groups = ds.by_component()
    if args.component:
        if args.component not in groups:
            raise ValueError(f"unknown component {args.component!r}")
        groups = {args.component: groups[args.component]}
    rows = []
    skipped = []
    for component, points in sorted(groups.items()):
        t = np.array([pt.temperature_k for pt in points])
        p = np.array([pt.pressure_pa for pt in points])
        if len(points) < 3 or t.max() - t.min() <= 1.0:
            if args.component:
                raise ValueError(
                    f"component {component!r} needs >=3 points spanning >1 K")
            skipped.append(component)
            continue
        fit_result = dataio.robust_antoine_fit(t, p)
        rows.append({
            "component_id": component,
            "A": fit_result.params.A,
            "B": fit_result.params.B,
            "C": fit_result.params.C,
            "cost": fit_result.cost,
            "converged": fit_result.converged,
            "n_points": len(points),
        })
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else
                                    ["component_id", "A", "B", "C", "cost",
                                     "converged", "n_points"])
            writer.writeheader()
            writer.writerows(rows)
    _emit({"fits": rows, "skipped": skipped}, None, args.verbose)
    return 0


def _read_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_train(args) -> int:
    config = _read_config(args.config)
    cfg = TrainConfig.from_dict(config.get("train", {}))
    if getattr(args, "seed", None) is not None or os.environ.get("GRAPPA_SEED"):
        cfg.seed = _seed_from(args)
    ds = dataio.load(config["data"], config.get("format", "csv"))
    if "splits" in config:
        ds.splits = dataio.read_splits_csv(config["splits"])
    arch = Architecture.from_dict(config.get("arch", {}))
    model = init_model(arch, seed=np.random.SeedSequence([cfg.seed, 0]))
    result = fit(model, ds.subset("train"), ds.subset("valid"), cfg)
    model_path = config.get("output_model", "model.json")
    save_checkpoint(model, model_path)
    history_path = config.get("history", "history.csv")
    Path(history_path).write_text(history_csv(result.history), encoding="utf-8")
    _emit({
        "best_epoch": result.best_epoch,
        "best_valid_mape_i": result.best_valid_mape_i,
        "model": str(model_path),
        "history": str(history_path),
        "trainable_parameters": model.parameter_count(),
    }, f"trained {len(result.history)} epochs", args.verbose)
    return 0


def _cmd_grid_search(args) -> int:
    config = _read_config(args.config)
    cfg = TrainConfig.from_dict(config.get("train", {}))
    if getattr(args, "seed", None) is not None or os.environ.get("GRAPPA_SEED"):
        cfg.seed = _seed_from(args)
    ds = dataio.load(config["data"], config.get("format", "csv"))
    if "splits" in config:
        ds.splits = dataio.read_splits_csv(config["splits"])
    rows = grid_search(cfg, ds.subset("train"), ds.subset("valid"),
                       jobs=args.jobs)
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    _emit({"cells": len(rows), "ranking": rows}, None, args.verbose)
    return 0


def _cmd_predict(args) -> int:
    model = load_checkpoint(args.model)
    result = predict(model, args.smiles, temperatures=args.temp)
    payload = {"A": result.params.A, "B": result.params.B, "C": result.params.C}
    if args.temp is not None:
        payload["ln_p_kPa"] = result.ln_p_kpa
        payload["p_Pa"] = result.p_pa
    _emit(payload, f"{args.smiles} at T={args.temp} K", args.verbose)
    return 0


def _cmd_boil(args) -> int:
    direct = [args.A, args.B, args.C]
    if args.model and args.smiles:
        model = load_checkpoint(args.model)
        result = predict(model, args.smiles, boil_pressure_pa=args.pressure)
        payload = {"A": result.params.A, "B": result.params.B,
                   "C": result.params.C, "T_b_K": result.boiling_k}
    elif all(v is not None for v in direct):
        params = AntoineParams(*direct)
        payload = {"T_b_K": boiling_temperature(params, args.pressure)}
    else:
        raise ValueError("boil needs either --model and --smiles, or all of "
                         "--A/--B/--C")
    _emit(payload, None, args.verbose)
    return 0


def _cmd_evaluate(args) -> int:
    model = load_checkpoint(args.model)
    ds = _load_dataset(args)
    points, params = predict_dataset(model, ds, args.split)
    if not points:
        raise ValueError(f"no points in split {args.split!r}")
    report = metrics.summarize(points)
    boiling = metrics.boiling_point_eval(params, points)
    payload = {"split": args.split, "metrics": report.to_dict(),
               "boiling": {"mae_k": boiling.mae_k,
                           "mean_rel_err_pct": boiling.mean_rel_err_pct,
                           "n_components": boiling.n_components}}
    _emit(payload, None, args.verbose)
    return 0


def _write_table_csv(rows: list[dict], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


def _cmd_report(args) -> int:
    model = load_checkpoint(args.model)
    ds = _load_dataset(args)
    points, params = predict_dataset(model, ds, args.split)
    if not points:
        raise ValueError(f"no points in split {args.split!r}")
    eligible = {c for c, pts in _group_sizes(points).items()
                if pts >= args.min_points}
    filtered = [pt for pt in points if pt.component_id in eligible]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = metrics.summarize(points)
    bins = metrics.binned_reports(filtered)
    grid = metrics.hexbin_grid(filtered)
    boiling = metrics.boiling_point_eval(params, points)
    (outdir / "metrics.json").write_text(
        json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    (outdir / "binned.json").write_text(
        json.dumps(bins.to_dict(), indent=2), encoding="utf-8")
    _write_table_csv(bins.pressure, outdir / "ape_by_pressure.csv")
    _write_table_csv(bins.temperature, outdir / "ape_by_temperature.csv")
    _write_table_csv(bins.mol_weight, outdir / "ape_by_mol_weight.csv")
    _write_table_csv(bins.min_points, outdir / "ape_by_min_points.csv")
    _write_table_csv(grid, outdir / "hexbin.csv")
    (outdir / "boiling.json").write_text(
        json.dumps(boiling.to_dict(), indent=2), encoding="utf-8")
    files = sorted(str(p.name) for p in outdir.iterdir())
    _emit({"outdir": str(outdir), "files": files}, None, args.verbose)
    return 0


def _group_sizes(points) -> dict[str, int]:
    sizes: dict[str, int] = {}
    for pt in points:
        sizes[pt.component_id] = sizes.get(pt.component_id, 0) + 1
    return sizes


def _cmd_attention(args) -> int:
    model = load_checkpoint(args.model)
    mol = parse_smiles(args.smiles)
    graph = featurize(mol)
    scores = attention_scores(graph, model.gat)
    payload = {
        "smiles": args.smiles,
        "scores": [
            {"atom": i, "element": mol.atoms[i].element, "score": float(s)}
            for i, s in enumerate(scores)
        ],
    }
    _emit(payload, None, args.verbose)
    return 0


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grappa",
        description="Vapor-pressure prediction from molecular structure.",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="human-readable notes on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_seed(p):
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (fallback: GRAPPA_SEED, then 0)")

    p = sub.add_parser("curate", help="filter a raw dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--output", required=True)
    p.add_argument("--audit", help="JSONL audit log path")
    p.add_argument("--conflicts", help="per-source conflict report path")
    p.set_defaults(func=_cmd_curate)

    p = sub.add_parser("split", help="assign component-wise split labels")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--output", required=True, help="splits CSV path")
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    common_seed(p)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("fit-antoine", help="robust per-component curve fits")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--component", help="fit a single component")
    p.add_argument("--output", help="CSV of fitted parameters")
    p.set_defaults(func=_cmd_fit_antoine)

    p = sub.add_parser("train", help="two-phase training from a config file")
    p.add_argument("--config", required=True)
    common_seed(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grid-search", help="hyperparameter grid search")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", help="CSV of the ranking")
    common_seed(p)
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("predict", help="Antoine parameters for a molecule")
    p.add_argument("--model", required=True)
    p.add_argument("--smiles", required=True)
    p.add_argument("--temp", type=float, help="temperature in K")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("boil", help="boiling temperature at a pressure")
    p.add_argument("--model")
    p.add_argument("--smiles")
    p.add_argument("--A", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--pressure", type=float, required=True, help="Pa")
    p.set_defaults(func=_cmd_boil)

    p = sub.add_parser("evaluate", help="metrics on a labeled split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--splits", help="splits CSV from the split command")
    p.add_argument("--split", default="test")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("attention", help="per-atom attention scores")
    p.add_argument("--model", required=True)
    p.add_argument("--smiles", required=True)
    p.set_defaults(func=_cmd_attention)

    p = sub.add_parser("report", help="binned evaluation tables and grids")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--splits", help="splits CSV from the split command")
    p.add_argument("--split", default="test")
    p.add_argument("--min-points", type=int, default=2,
                   help="min points per component for the binned tables")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SmilesError, ScopeError, AntoineDomainError, NonFiniteError,
            TrainingError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
