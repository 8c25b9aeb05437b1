"""Metrics, seeded multi-trial experiments, grid search, report artifacts."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import UndefinedMetricError
from .fuzzy import FcmConfig, fire_strength_matrix
from .model import EsnConfig, FrscnModel, predict, train_fesn, train_frscn
from .trainer import ScConfig


def nrmse(pred: np.ndarray, target: np.ndarray, washout: int = 0) -> float:
    """Root mean squared error normalized by the target's population variance.

    Per output dimension: sqrt(sum_n (y - t)^2 / (n' var(t))) over the n'
    post-washout samples. Population (divide-by-n) variance makes predicting
    the target mean score exactly 1. Multi-output results are averaged over
    dimensions with positive variance; if no dimension varies the metric is
    undefined.
    """
    p = np.atleast_2d(np.asarray(pred, dtype=float))[:, washout:]
    t = np.atleast_2d(np.asarray(target, dtype=float))[:, washout:]
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    if p.shape[1] < 1:
        raise ValueError("no samples left after washout")
    var = t.var(axis=1)
    live = var > 0
    if not live.any():
        raise UndefinedMetricError("target has zero variance in every dimension")
    n = p.shape[1]
    per_dim = np.sqrt(((p - t) ** 2).sum(axis=1)[live] / (n * var[live]))
    return float(per_dim.mean())


@dataclass
class TrialResult:
    seed: int
    train_nrmse: float
    val_nrmse: float
    test_nrmse: float
    node_counts: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train_nrmse": self.train_nrmse,
            "val_nrmse": self.val_nrmse,
            "test_nrmse": self.test_nrmse,
            "node_counts": list(self.node_counts),
            "wall_time": self.wall_time,
            "error": self.error,
        }


@dataclass
class TrialSummary:
    mean_train: float
    mean_val: float
    mean_test: float
    std_train: float
    std_val: float
    std_test: float
    n_ok: int
    n_failed: int

    def to_dict(self) -> dict:
        return vars(self).copy()


def _summarize(results: list) -> TrialSummary:
    ok = [r for r in results if not r.error]
    def agg(fn, key):
        vals = [getattr(r, key) for r in ok]
        return float(fn(vals)) if vals else float("nan")
    return TrialSummary(
        mean_train=agg(np.mean, "train_nrmse"),
        mean_val=agg(np.mean, "val_nrmse"),
        mean_test=agg(np.mean, "test_nrmse"),
        std_train=agg(np.std, "train_nrmse"),
        std_val=agg(np.std, "val_nrmse"),
        std_test=agg(np.std, "test_nrmse"),
        n_ok=len(ok),
        n_failed=len(results) - len(ok),
    )


def run_single_trial(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    test: TimeSeriesDataset,
    model_kind: str = "frscn",
    q: int = 5,
    sc_cfg: ScConfig | None = None,
    fcm_cfg: FcmConfig | None = None,
    esn_cfg: EsnConfig | None = None,
    seed: int = 0,
    normalize: bool = True,
):
    """Train one model and score it on all three splits.

    Returns (model, reports, TrialResult). model_kind "rscn" and "esn" are
    the q == 1 aliases of "frscn" and "fesn".
    """
    kind = model_kind.lower()
    if kind in ("rscn", "esn"):
        q = 1
    started = time.perf_counter()
    if kind in ("frscn", "rscn"):
        model, reports = train_frscn(
            train, q=q, sc_cfg=sc_cfg, fcm_cfg=fcm_cfg, seed=seed, normalize=normalize
        )
    elif kind in ("fesn", "esn"):
        model = train_fesn(
            train, q=q, fcm_cfg=fcm_cfg, esn_cfg=esn_cfg, seed=seed, normalize=normalize
        )
        reports = []
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    elapsed = time.perf_counter() - started

    def score(ds):
        return nrmse(predict(model, ds.inputs), ds.targets, ds.washout)

    result = TrialResult(
        seed=seed,
        train_nrmse=score(train),
        val_nrmse=score(val),
        test_nrmse=score(test),
        node_counts=[res.n_nodes for res in model.sub_reservoirs],
        wall_time=elapsed,
    )
    return model, reports, result


def run_trials(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    test: TimeSeriesDataset,
    model_kind: str = "frscn",
    q: int = 5,
    sc_cfg: ScConfig | None = None,
    fcm_cfg: FcmConfig | None = None,
    esn_cfg: EsnConfig | None = None,
    n_trials: int = 10,
    base_seed: int = 0,
    normalize: bool = True,
    threads: int = 1,
    keep_reports: bool = False,
):
    """Seeded repetition: trial k runs at seed base_seed + k on fixed data.

    Failures are recorded per trial and excluded from the summary. Returns
    (results, summary) or (results, summary, reports_per_trial).
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")

    def one(k: int):
        try:
            _, reports, result = run_single_trial(
                train, val, test, model_kind, q, sc_cfg, fcm_cfg, esn_cfg,
                seed=base_seed + k, normalize=normalize,
            )
            return result, reports
        except Exception as exc:  # recorded, not raised: summary needs the rest
            return TrialResult(
                seed=base_seed + k,
                train_nrmse=float("nan"),
                val_nrmse=float("nan"),
                test_nrmse=float("nan"),
                error=f"{type(exc).__name__}: {exc}",
            ), []

    outcomes = _parallel_map(one, range(n_trials), threads)
    results = [r for r, _ in outcomes]
    summary = _summarize(results)
    if keep_reports:
        return results, summary, [reps for _, reps in outcomes]
    return results, summary


@dataclass
class GridSearchResult:
    q_values: list
    n_values: list
    mean_val_nrmse: np.ndarray  # len(q_values) x len(n_values)
    best_q: int
    best_n: int
    cells: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "q_values": list(self.q_values),
            "n_values": list(self.n_values),
            "mean_val_nrmse": self.mean_val_nrmse.tolist(),
            "best_q": self.best_q,
            "best_n": self.best_n,
        }


def grid_search(
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    test: TimeSeriesDataset,
    q_values=(1, 3, 5, 10, 15),
    n_values=(25, 50, 75, 100),
    model_kind: str = "frscn",
    sc_cfg: ScConfig | None = None,
    fcm_cfg: FcmConfig | None = None,
    esn_cfg: EsnConfig | None = None,
    trials_per_cell: int = 3,
    base_seed: int = 0,
    normalize: bool = True,
    threads: int = 1,
) -> GridSearchResult:
    """Mean validation NRMSE over a (Q, N) grid; pick the minimizing cell.

    Ties break toward the smaller reservoir size, then the smaller rule
    count. Cells whose trials all fail are marked NaN and never selected.
    """
    q_values = list(q_values)
    n_values = list(n_values)
    if not q_values or not n_values:
        raise ValueError("grid axes must be nonempty")
    sc_cfg = sc_cfg or ScConfig()
    esn_cfg = esn_cfg or EsnConfig()

    def one_cell(args):
        qi, ni = args
        from dataclasses import replace
        results, summary = run_trials(
            train, val, test, model_kind, q=qi,
            sc_cfg=replace(sc_cfg, n_max=ni),
            fcm_cfg=fcm_cfg,
            esn_cfg=replace(esn_cfg, n_nodes=ni),
            n_trials=trials_per_cell, base_seed=base_seed, normalize=normalize,
        )
        return results, summary

    pairs = [(qi, ni) for qi in q_values for ni in n_values]
    outcomes = _parallel_map(one_cell, pairs, threads)

    surface = np.full((len(q_values), len(n_values)), np.nan)
    cells = []
    for (qi, ni), (results, summary) in zip(pairs, outcomes):
        iq, jn = q_values.index(qi), n_values.index(ni)
        surface[iq, jn] = summary.mean_val if summary.n_ok else np.nan
        cells.append({"q": qi, "n": ni, "summary": summary.to_dict()})

    finite = [
        (surface[iq, jn], ni, qi)
        for iq, qi in enumerate(q_values)
        for jn, ni in enumerate(n_values)
        if np.isfinite(surface[iq, jn])
    ]
    if not finite:
        raise RuntimeError("every grid cell failed")
    _, best_n, best_q = min(finite)  # ties: smaller N first, then smaller Q
    return GridSearchResult(
        q_values=q_values, n_values=n_values, mean_val_nrmse=surface,
        best_q=best_q, best_n=best_n, cells=cells,
    )


def emit_report(
    out_dir,
    trials: list | None = None,
    summary: TrialSummary | None = None,
    model: FrscnModel | None = None,
    dataset: TimeSeriesDataset | None = None,
    grid: GridSearchResult | None = None,
    fire_strength_stride: int = 1,
) -> list:
    """Write report artifacts; returns the paths written.

    summary.json always; predictions.csv and fire_strengths.csv when a model
    and dataset are given (post-washout rows only); grid.csv when a grid
    result is given.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    doc = {
        "trials": [t.to_dict() for t in (trials or [])],
        "summary": summary.to_dict() if summary else None,
        "grid": grid.to_dict() if grid else None,
    }
    path = out / "summary.json"
    path.write_text(json.dumps(doc, indent=2))
    written.append(path)

    if model is not None and dataset is not None:
        pred = predict(model, dataset.inputs)
        w = dataset.washout
        path = out / "predictions.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            l_dims = dataset.n_outputs
            writer.writerow(
                ["n"]
                + [f"target_{q + 1}" for q in range(l_dims)]
                + [f"prediction_{q + 1}" for q in range(l_dims)]
            )
            for n in range(w, dataset.n_samples):
                writer.writerow(
                    [n + 1]
                    + [repr(float(v)) for v in dataset.targets[:, n]]
                    + [repr(float(v)) for v in pred[:, n]]
                )
        written.append(path)

        u = model.normalization.apply_inputs(dataset.inputs)
        phi = fire_strength_matrix(model.rule_bank, u)
        path = out / "fire_strengths.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n"] + [f"phi_{i + 1}" for i in range(model.n_rules)])
            for n in range(w, dataset.n_samples, max(1, fire_strength_stride)):
                writer.writerow([n + 1] + [repr(float(v)) for v in phi[:, n]])
        written.append(path)

    if grid is not None:
        path = out / "grid.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "n", "mean_val_nrmse"])
            for iq, qv in enumerate(grid.q_values):
                for jn, nv in enumerate(grid.n_values):
                    writer.writerow([qv, nv, repr(float(grid.mean_val_nrmse[iq, jn]))])
        written.append(path)
    return written


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
