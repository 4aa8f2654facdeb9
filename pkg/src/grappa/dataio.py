"""Vapor-pressure datasets: loading, curation, robust fitting, splitting.

A dataset is a flat list of measurement points keyed by component, plus one
split label per component, so all measurements of a molecule stay on the
same side of any split. Curation applies the row filters first, then, for
components with at least five surviving points, fits the Antoine equation
robustly and drops points deviating by more than 50% in pressure.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .antoine import PARAM_RANGES, AntoineParams
from .featurize import validate_scope
from .molecule import Molecule
from .smiles import SmilesError, parse_smiles

TEMPERATURE_RANGE_K = (250.0, 600.0)
PRESSURE_RANGE_PA = (1.0, 1e7)
OUTLIER_REL_DEV = 0.5
MIN_POINTS_FOR_OUTLIER_PASS = 5
SMALL_MOLECULE_CARBONS = 5

REQUIRED_COLUMNS = ("component_id", "smiles", "temperature_K", "pressure_Pa",
                    "quality")


@dataclass(frozen=True)
class VpPoint:
    component_id: str
    smiles: str
    temperature_k: float
    pressure_pa: float
    quality: str = "ok"
    source: str = ""
    stereo_ok: bool = True
    row: int | None = None

    def __post_init__(self):
        if self.temperature_k <= 0 or self.pressure_pa <= 0:
            raise ValueError("temperature and pressure must be positive")


@dataclass
class VpDataset:
    points: list[VpPoint] = field(default_factory=list)
    splits: dict[str, str] = field(default_factory=dict)  # component -> label
    rejects: list[dict] = field(default_factory=list)

    def components(self) -> list[str]:
        seen = dict.fromkeys(pt.component_id for pt in self.points)
        return list(seen)

    def by_component(self) -> dict[str, list[VpPoint]]:
        groups: dict[str, list[VpPoint]] = {}
        for pt in self.points:
            groups.setdefault(pt.component_id, []).append(pt)
        return groups

    def split_label(self, component: str) -> str:
        return self.splits.get(component, "unassigned")

    def subset(self, label: str) -> "VpDataset":
        keep = {c for c, s in self.splits.items() if s == label}
        return VpDataset(
            [pt for pt in self.points if pt.component_id in keep],
            {c: label for c in keep},
        )

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------- load

def _parse_row(record: dict, row: int) -> VpPoint:
    missing = [c for c in REQUIRED_COLUMNS if record.get(c) in (None, "")]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    t = float(record["temperature_K"])
    p = float(record["pressure_Pa"])
    stereo_raw = record.get("stereo_ok", True)
    if isinstance(stereo_raw, str):
        stereo = stereo_raw.strip().lower() not in ("0", "false", "no")
    else:
        stereo = bool(stereo_raw)
    return VpPoint(
        component_id=str(record["component_id"]),
        smiles=str(record["smiles"]),
        temperature_k=t,
        pressure_pa=p,
        quality=str(record["quality"]).strip().lower() or "ok",
        source=str(record.get("source", "") or ""),
        stereo_ok=stereo,
        row=row,
    )


def load(path, fmt: str = "csv") -> VpDataset:
    """Read a dataset file; malformed rows land in ``dataset.rejects``."""
    ds = VpDataset()
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                raise ValueError(f"missing columns: {', '.join(missing)}")
            for row, record in enumerate(reader, start=2):  # 1 = header line
                try:
                    ds.points.append(_parse_row(record, row))
                except (ValueError, TypeError) as err:
                    ds.rejects.append({"row": row, "reason": str(err)})
    elif fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for row, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    ds.points.append(_parse_row(json.loads(line), row))
                except (ValueError, TypeError) as err:
                    ds.rejects.append({"row": row, "reason": str(err)})
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return ds


# ------------------------------------------------------------------- fitting

@dataclass
class AntoineFit:
    params: AntoineParams
    residuals: np.ndarray  # on ln(p/kPa)
    cost: float
    converged: bool
    iterations: int
    cost_trace: list[float]


def _huber_rho(r: np.ndarray, delta: float) -> np.ndarray:
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))


def _fit_cost(theta, t, y, delta) -> tuple[float, np.ndarray]:
    a, b, c = theta
    denom = c + t
    if np.any(denom <= 0):
        return math.inf, np.full_like(y, np.inf)
    r = y - (a - b / denom)
    return float(_huber_rho(r, delta).sum()), r


def _lm_solve(theta0, t, y, box, delta, max_iter=200):
    """Damped least squares with Huber reweighting and box projection."""
    theta = np.clip(np.asarray(theta0, dtype=float), box[:, 0], box[:, 1])
    cost, r = _fit_cost(theta, t, y, delta)
    lam = 1e-3
    trace = [cost]
    converged = False
    iterations = 0
    slow_steps = 0
    for iterations in range(1, max_iter + 1):
        if not math.isfinite(cost):
            break
        a, b, c = theta
        denom = c + t
        # Jacobian of the residual r = y - (a - b/(c+t)) w.r.t. (a, b, c).
        jac = np.column_stack([-np.ones_like(t), 1.0 / denom, -b / denom**2])
        absr = np.abs(r)
        w = np.ones_like(r)
        heavy = absr > delta
        w[heavy] = delta / absr[heavy]
        jtw = jac.T * w
        hess = jtw @ jac
        grad = jtw @ r
        try:
            step = np.linalg.solve(hess + lam * np.diag(np.diag(hess)) +
                                   1e-12 * np.eye(3), -grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        candidate = np.clip(theta + step, box[:, 0], box[:, 1])
        new_cost, new_r = _fit_cost(candidate, t, y, delta)
        if new_cost < cost:
            rel_drop = (cost - new_cost) / max(cost, 1e-30)
            theta, cost, r = candidate, new_cost, new_r
            trace.append(cost)
            lam = max(lam / 10.0, 1e-12)
            if rel_drop < 1e-9 or cost < 1e-24:
                converged = True
                break
            # Creep along a box boundary counts as converged after a while.
            slow_steps = slow_steps + 1 if rel_drop < 1e-5 else 0
            if slow_steps >= 5:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e10:
                converged = True  # stalled at a (possibly flat) minimum
                break
    return theta, cost, r, converged, iterations, trace


def _start_points(t: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    starts = []
    # Data-driven start: linear fit of y against 1/(t + c0).
    c0 = max(-50.0, -float(t.min()) + 25.0)
    x = 1.0 / (c0 + t)
    slope, intercept = np.polyfit(x, y, 1)
    starts.append(np.array([intercept, -slope, c0]))
    starts.extend([
        np.array([8.0, 2500.0, -30.0]),
        np.array([12.0, 3500.0, -100.0]),
        np.array([15.0, 4800.0, -150.0]),
        np.array([10.0, 3000.0, -60.0]),
    ])
    return starts


def robust_antoine_fit(temperatures_k, pressures_pa, delta: float = 0.5,
                       max_iter: int = 200) -> AntoineFit:
    """Fit ln(p/kPa) = A - B/(C+T) with a Huber cost and box-bounded search.

    Needs at least three points spanning more than 1 K; five deterministic
    starting points are tried and the best final cost wins.
    """
    t = np.asarray(temperatures_k, dtype=float)
    y = np.log(np.asarray(pressures_pa, dtype=float) / 1000.0)
    if t.size < 3:
        raise ValueError("robust fit needs at least 3 points")
    if float(t.max() - t.min()) <= 1.0:
        raise ValueError("temperature spread must exceed 1 K")
    box = np.array([
        PARAM_RANGES["A"],
        PARAM_RANGES["B"],
        # Keep the pole C = -T out of the data window.
        (max(PARAM_RANGES["C"][0], -float(t.min()) + 1.0), PARAM_RANGES["C"][1]),
    ])
    best = None
    for theta0 in _start_points(t, y):
        theta, cost, r, converged, iters, trace = _lm_solve(
            theta0, t, y, box, delta, max_iter)
        if best is None or cost < best[1]:
            best = (theta, cost, r, converged, iters, trace)
    theta, cost, r, converged, iters, trace = best
    return AntoineFit(AntoineParams(*theta), r, cost, converged, iters, trace)


# ------------------------------------------------------------------ curation

@dataclass
class CurationResult:
    dataset: VpDataset
    audit: list[dict]
    conflicts: list[dict]


def _point_filter_reason(pt: VpPoint, scope_cache: dict) -> str | None:
    if pt.quality == "poor":
        return "poor_quality"
    if not pt.stereo_ok:
        return "stereo_not_represented"
    if not TEMPERATURE_RANGE_K[0] <= pt.temperature_k <= TEMPERATURE_RANGE_K[1]:
        return "temperature_out_of_range"
    if not PRESSURE_RANGE_PA[0] <= pt.pressure_pa <= PRESSURE_RANGE_PA[1]:
        return "pressure_out_of_range"
    if pt.smiles not in scope_cache:
        try:
            scope = validate_scope(parse_smiles(pt.smiles))
            scope_cache[pt.smiles] = None if scope.accepted else (
                "scope:" + "; ".join(scope.reasons))
        except SmilesError as err:
            scope_cache[pt.smiles] = f"unparseable_smiles: {err}"
    return scope_cache[pt.smiles]


def _predicted_pressure(params: AntoineParams, t: np.ndarray) -> np.ndarray:
    denom = params.C + t
    ok = denom > 0
    ln_p = np.where(ok, params.A - params.B / np.where(ok, denom, 1.0), np.inf)
    return np.exp(ln_p) * 1000.0


def curate(ds: VpDataset) -> CurationResult:
    """Row filters, then per-component outlier removal against a robust fit.

    Everything removed is recorded in the audit log; nothing raises.
    """
    audit: list[dict] = []
    kept: list[VpPoint] = []
    scope_cache: dict = {}
    for pt in ds.points:
        reason = _point_filter_reason(pt, scope_cache)
        if reason is None:
            kept.append(pt)
        else:
            audit.append({"row": pt.row, "component": pt.component_id,
                          "rule": reason, "action": "dropped"})

    groups: dict[str, list[VpPoint]] = {}
    for pt in kept:
        groups.setdefault(pt.component_id, []).append(pt)

    final: list[VpPoint] = []
    conflicts: list[dict] = []
    for component, points in groups.items():
        if len(points) < MIN_POINTS_FOR_OUTLIER_PASS:
            final.extend(points)
            continue
        t = np.array([pt.temperature_k for pt in points])
        p = np.array([pt.pressure_pa for pt in points])
        fit = robust_antoine_fit(t, p)
        if not fit.converged:
            audit.append({"row": None, "component": component,
                          "rule": "fit_not_converged", "action": "kept"})
            final.extend(points)
            continue
        p_fit = _predicted_pressure(fit.params, t)
        rel_dev = np.abs(p - p_fit) / p_fit  # deviation measured from the fit
        for pt, dev in zip(points, rel_dev):
            if dev > OUTLIER_REL_DEV:
                audit.append({"row": pt.row, "component": component,
                              "rule": "outlier_vs_antoine_fit",
                              "action": "dropped"})
            else:
                final.append(pt)
        conflict = _source_conflict(component, points)
        if conflict is not None:
            conflicts.append(conflict)

    out = VpDataset(final, dict(ds.splits))
    return CurationResult(out, audit, conflicts)


def _source_conflict(component: str, points: list[VpPoint]) -> dict | None:
    """Flag components whose per-source fits disagree by more than 50%."""
    by_source: dict[str, list[VpPoint]] = {}
    for pt in points:
        if pt.source:
            by_source.setdefault(pt.source, []).append(pt)
    usable = {s: pts for s, pts in by_source.items() if len(pts) >= 3}
    if len(usable) < 2:
        return None
    fits = {}
    for source, pts in usable.items():
        t = np.array([pt.temperature_k for pt in pts])
        if t.max() - t.min() <= 1.0:
            continue
        fits[source] = robust_antoine_fit(
            t, np.array([pt.pressure_pa for pt in pts])).params
    if len(fits) < 2:
        return None
    t_all = np.array([pt.temperature_k for pt in points])
    grid = np.linspace(t_all.min(), t_all.max(), 7)
    sources = sorted(fits)
    worst = 0.0
    for i, s1 in enumerate(sources):
        for s2 in sources[i + 1:]:
            p1 = _predicted_pressure(fits[s1], grid)
            p2 = _predicted_pressure(fits[s2], grid)
            worst = max(worst, float(np.max(np.abs(p1 - p2) / np.minimum(p1, p2))))
    if worst > OUTLIER_REL_DEV:
        return {"component": component, "sources": sources,
                "max_rel_deviation": worst}
    return None


# ------------------------------------------------------------------ splitting

def carbon_count(mol: Molecule) -> int:
    return sum(1 for atom in mol.atoms if atom.element == "C")


def split(ds: VpDataset, seed: int, ratios=(0.8, 0.1, 0.1)) -> VpDataset:
    """Component-wise split; molecules with fewer than five carbons always
    train, the rest are shuffled and partitioned by the ratios."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    groups = ds.by_component()
    small, rest = [], []
    for component, points in groups.items():
        mol = parse_smiles(points[0].smiles)
        (small if carbon_count(mol) < SMALL_MOLECULE_CARBONS else rest).append(
            component)
    rest = sorted(rest)
    rng = np.random.default_rng(seed)
    order = [rest[i] for i in rng.permutation(len(rest))]
    n = len(order)
    n_valid = int(round(ratios[1] * n))
    n_test = int(round(ratios[2] * n))
    n_train = n - n_valid - n_test
    labels = dict.fromkeys(small, "train")
    for component in order[:n_train]:
        labels[component] = "train"
    for component in order[n_train : n_train + n_valid]:
        labels[component] = "valid"
    for component in order[n_train + n_valid :]:
        labels[component] = "test"
    return VpDataset(list(ds.points), labels, list(ds.rejects))


# ------------------------------------------------------------------- emitters

def write_csv(ds: VpDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(REQUIRED_COLUMNS) + ["source", "stereo_ok"])
        for pt in ds.points:
            writer.writerow([pt.component_id, pt.smiles, repr(pt.temperature_k),
                             repr(pt.pressure_pa), pt.quality, pt.source,
                             "true" if pt.stereo_ok else "false"])


def write_splits_csv(ds: VpDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component_id", "split"])
        for component in ds.components():
            writer.writerow([component, ds.split_label(component)])


def read_splits_csv(path) -> dict[str, str]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for record in csv.DictReader(fh):
            out[record["component_id"]] = record["split"]
    return out


def write_audit_jsonl(audit: list[dict], path):
    with open(path, "w", encoding="utf-8") as fh:
        for entry in audit:
            fh.write(json.dumps(entry) + "\n")
