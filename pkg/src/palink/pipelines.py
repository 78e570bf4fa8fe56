"""End-to-end pipelines: theory validation, subgroup-gap comparison, and
the fairness-penalty sweep, each emitting deterministic JSON/CSV reports.

Run directories embed the dataset name, filter kind, and a hash of the
config so sweeps with different settings never collide.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .fairness import delta, delta_hat, delta_hat_empirical
from .gcn import forward, score_pairs
from .graphdata import Dataset, load_dataset, normalize_features
from .metrics import nrmse, pcc, roc_auc
from .theory import alpha_vectors, build_theory_report
from .training import (
    TrainConfig,
    save_checkpoint,
    split_links,
    train,
    write_history,
)

FILTER_ABBREV = {"symmetric": "sym", "random_walk": "rw"}
FILTER_ALIASES = {
    "sym": "symmetric", "symmetric": "symmetric",
    "rw": "random_walk", "random_walk": "random_walk",
}


@dataclass(frozen=True)
class RunConfig:
    name: str
    edges: str
    features: str
    labels: str
    normalization: str = "none"
    self_loop_weight: float = 1.0
    filter_kind: str = "symmetric"
    hidden_dims: tuple[int, ...] = (128, 64)
    epochs: int = 100
    lr: float = 0.01
    ratios: tuple[float, float, float] = (0.85, 0.05, 0.10)
    seeds: tuple[int, ...] = tuple(range(10))
    lambda_fair: tuple[float, ...] = (0.0, 1.0, 2.0, 4.0)
    out: str = "runs"

    def to_dict(self) -> dict:
        return {
            "dataset": {
                "name": self.name,
                "edges": self.edges,
                "features": self.features,
                "labels": self.labels,
            },
            "normalization": self.normalization,
            "self_loop_weight": self.self_loop_weight,
            "filter": self.filter_kind,
            "hidden_dims": list(self.hidden_dims),
            "epochs": self.epochs,
            "lr": self.lr,
            "ratios": list(self.ratios),
            "seeds": list(self.seeds),
            "lambda_fair": list(self.lambda_fair),
            "out": self.out,
        }

    @property
    def config_hash(self) -> str:
        payload = self.to_dict()
        payload.pop("out")
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:8]

    def run_dir(self) -> str:
        abbrev = FILTER_ABBREV[self.filter_kind]
        return os.path.join(self.out, f"{self.name}_{abbrev}_{self.config_hash}")


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    ds = raw.pop("dataset", None)
    if ds is None or not {"edges", "features", "labels"} <= set(ds):
        raise ValueError("config needs dataset.{name,edges,features,labels}")
    kwargs = {
        "name": ds.get("name", "dataset"),
        "edges": ds["edges"],
        "features": ds["features"],
        "labels": ds["labels"],
    }
    if "filter" in raw:
        kind = raw.pop("filter")
        if kind not in FILTER_ALIASES:
            raise ValueError(f"unknown filter: {kind!r}")
        kwargs["filter_kind"] = FILTER_ALIASES[kind]
    if "layers" in raw and "hidden_dims" not in raw:
        n_layers = int(raw.pop("layers"))
        if n_layers < 1:
            raise ValueError("layers must be >= 1")
        kwargs["hidden_dims"] = hidden_dims_for_layers(n_layers)
    if "hidden_dims" in raw:
        kwargs["hidden_dims"] = tuple(int(d) for d in raw.pop("hidden_dims"))
        raw.pop("layers", None)
    for key in ("normalization", "self_loop_weight", "epochs", "lr"):
        if key in raw:
            kwargs[key] = raw.pop(key)
    if "ratios" in raw:
        kwargs["ratios"] = tuple(float(r) for r in raw.pop("ratios"))
    if "seeds" in raw:
        seeds = raw.pop("seeds")
        kwargs["seeds"] = tuple(int(s) for s in (
            seeds if isinstance(seeds, (list, tuple)) else [seeds]
        ))
    if "lambda_fair" in raw:
        lam = raw.pop("lambda_fair")
        kwargs["lambda_fair"] = tuple(float(x) for x in (
            lam if isinstance(lam, (list, tuple)) else [lam]
        ))
    if "out" in raw:
        kwargs["out"] = raw.pop("out")
    if raw:
        raise ValueError(f"unknown config keys: {sorted(raw)}")
    return RunConfig(**kwargs)


def hidden_dims_for_layers(n_layers: int) -> tuple[int, ...]:
    """L layers as 128-wide hidden stack feeding a 64-dim output."""
    return tuple([128] * (n_layers - 1) + [64])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else f
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean()) if arr.size else float("nan")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def prepare_dataset(config: RunConfig) -> Dataset:
    dataset = load_dataset(
        config.edges, config.features, config.labels,
        self_loop_weight=config.self_loop_weight,
    )
    feats, _ = normalize_features(dataset.features, config.normalization)
    return replace(dataset, features=feats)


@dataclass
class SeedRun:
    seed: int
    lambda_fair: float
    split: object
    result: object
    test_pairs: np.ndarray
    test_labels: np.ndarray
    test_scores: np.ndarray
    test_auc: float
    same_group: np.ndarray


def run_seed(dataset: Dataset, config: RunConfig, seed: int,
             lambda_fair: float) -> SeedRun:
    """Train one model and score the fixed test pairs."""
    split = split_links(dataset, config.ratios, seed)
    tc = TrainConfig(
        filter_kind=config.filter_kind, hidden_dims=config.hidden_dims,
        epochs=config.epochs, lr=config.lr, lambda_fair=lambda_fair,
        seed=seed,
    )
    result = train(dataset, split, tc)
    h = forward(result.model, result.train_nm, dataset.features)
    test_pairs = np.concatenate([split.test_pos, split.test_neg], axis=0)
    test_labels = np.zeros(test_pairs.shape[0])
    test_labels[: split.test_pos.shape[0]] = 1.0
    test_scores = score_pairs(h, test_pairs)
    auc = roc_auc(test_scores, test_labels).value
    gof = result.train_view.group_of
    same = gof[test_pairs[:, 0]] == gof[test_pairs[:, 1]]
    return SeedRun(
        seed=seed, lambda_fair=lambda_fair, split=split, result=result,
        test_pairs=test_pairs, test_labels=test_labels,
        test_scores=test_scores, test_auc=auc, same_group=same,
    )


def _same_group_auc(run: SeedRun) -> float:
    labels = run.test_labels[run.same_group]
    if labels.size == 0 or labels.min() == labels.max():
        return float("nan")
    return roc_auc(run.test_scores[run.same_group], labels).value


def run_validate_theory(config: RunConfig) -> dict:
    """Train per seed (no penalty), fit per-group slopes on same-group test
    pairs, and report NRMSE/PCC of fitted theoretic scores plus test AUC.

    Writes report.json and pairs.csv; returns the report dict with paths.
    """
    dataset = prepare_dataset(config)
    out_dir = config.run_dir()
    os.makedirs(out_dir, exist_ok=True)

    per_seed = []
    csv_lines = ["seed,group,tau_raw,tau_fitted,gcn_score"]
    for seed in config.seeds:
        run = run_seed(dataset, config, seed, lambda_fair=0.0)
        view = run.result.train_view
        alpha = alpha_vectors(run.result.model, dataset.features)
        report = build_theory_report(
            view, alpha, run.test_pairs[run.same_group],
            run.test_scores[run.same_group], config.filter_kind,
        )
        if bool(report.skipped.all()):
            raise RuntimeError(
                f"seed {seed}: every refined group was skipped; "
                "theory comparison has no support"
            )
        rows = report.rows
        for g, tr, tf, sc in zip(rows["group"], rows["tau_raw"],
                                 rows["tau_fitted"], rows["gcn_score"]):
            csv_lines.append(
                f"{seed},{int(g)},{float(tr)!r},{float(tf)!r},{float(sc)!r}"
            )
        entry = report.to_json_dict()
        entry.update({
            "seed": seed,
            "test_auc": run.test_auc,
            "test_auc_same_group": _same_group_auc(run),
            "best_epoch": run.result.best_epoch,
            "best_val_auc": run.result.best_val_auc,
        })
        per_seed.append(entry)

    nrmse_m, nrmse_s = _mean_std([e["nrmse"] for e in per_seed])
    pcc_m, pcc_s = _mean_std([e["pcc"] for e in per_seed])
    auc_m, auc_s = _mean_std([e["test_auc"] for e in per_seed])
    payload = {
        "pipeline": "validate_theory",
        "dataset": config.name,
        "filter": config.filter_kind,
        "config_hash": config.config_hash,
        "config": config.to_dict(),
        "per_seed": per_seed,
        "aggregate": {
            "nrmse_mean": nrmse_m, "nrmse_std": nrmse_s,
            "pcc_mean": pcc_m, "pcc_std": pcc_s,
            "test_auc_mean": auc_m, "test_auc_std": auc_s,
        },
    }
    report_path = os.path.join(out_dir, "report.json")
    pairs_path = os.path.join(out_dir, "pairs.csv")
    _write_json(report_path, payload)
    with open(pairs_path, "w") as fh:
        fh.write("\n".join(csv_lines) + "\n")
    payload["paths"] = {"report": report_path, "pairs": pairs_path,
                        "run_dir": out_dir}
    return payload


def run_fairness_sweep(config: RunConfig, lambdas=None) -> dict:
    """Per penalty weight, train over the seed set and tabulate the mean
    subgroup gap (post-sigmoid, same-group test pairs) and test AUC.

    Rows are sorted by lambda descending.  Writes report.json and
    fairness_table.csv.
    """
    dataset = prepare_dataset(config)
    if dataset.t_labels is None:
        raise ValueError("fairness sweep requires subgroup labels")
    lambdas = tuple(config.lambda_fair if lambdas is None else lambdas)
    out_dir = config.run_dir()
    os.makedirs(out_dir, exist_ok=True)

    table_rows = []
    detail = []
    for lam in sorted(lambdas, reverse=True):
        deltas, aucs = [], []
        for seed in config.seeds:
            run = run_seed(dataset, config, seed, lambda_fair=lam)
            view = run.result.train_view
            assess = delta(
                run.test_pairs[run.same_group],
                run.test_scores[run.same_group],
                view.group_of, dataset.t_labels,
                mode="post_sigmoid", scope="sampled_pairs",
            )
            deltas.append(assess.mean_delta)
            aucs.append(run.test_auc)
            detail.append({
                "lambda_fair": lam,
                "seed": seed,
                "mean_delta": assess.mean_delta,
                "test_auc": run.test_auc,
                "groups": [
                    {"group": g.group_id, "delta": g.delta,
                     "n_t1": g.n_t1, "n_t2": g.n_t2,
                     "skipped": g.skipped, "reason": g.reason}
                    for g in assess.groups
                ],
            })
        d_mean, d_std = _mean_std(deltas)
        a_mean, a_std = _mean_std(aucs)
        table_rows.append({
            "dataset": config.name, "lambda_fair": lam,
            "delta_mean": d_mean, "delta_std": d_std,
            "auc_mean": a_mean, "auc_std": a_std,
        })

    payload = {
        "pipeline": "fairness_sweep",
        "dataset": config.name,
        "filter": config.filter_kind,
        "config_hash": config.config_hash,
        "config": config.to_dict(),
        "table": table_rows,
        "runs": detail,
    }
    report_path = os.path.join(out_dir, "report.json")
    table_path = os.path.join(out_dir, "fairness_table.csv")
    _write_json(report_path, payload)
    lines = ["dataset,lambda_fair,delta_mean,delta_std,auc_mean,auc_std"]
    for row in table_rows:
        lines.append(
            f"{row['dataset']},{float(row['lambda_fair'])!r},"
            f"{float(row['delta_mean'])!r},{float(row['delta_std'])!r},"
            f"{float(row['auc_mean'])!r},{float(row['auc_std'])!r}"
        )
    with open(table_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    payload["paths"] = {"report": report_path, "table": table_path,
                        "run_dir": out_dir}
    return payload


def run_delta_comparison(config: RunConfig) -> dict:
    """Per seed and refined group, the trained-score gap versus the
    theoretic estimate (fitted scores pushed through the same post-sigmoid
    gap), plus the closed form; reports PCC/NRMSE of estimate vs gap."""
    dataset = prepare_dataset(config)
    if dataset.t_labels is None:
        raise ValueError("gap comparison requires subgroup labels")
    out_dir = config.run_dir()
    os.makedirs(out_dir, exist_ok=True)

    scatter = []
    for seed in config.seeds:
        run = run_seed(dataset, config, seed, lambda_fair=0.0)
        view = run.result.train_view
        pairs_sg = run.test_pairs[run.same_group]
        scores_sg = run.test_scores[run.same_group]

        assess = delta(pairs_sg, scores_sg, view.group_of, dataset.t_labels,
                       mode="post_sigmoid", scope="sampled_pairs")

        alpha = alpha_vectors(run.result.model, dataset.features)
        report = build_theory_report(view, alpha, pairs_sg, scores_sg,
                                     config.filter_kind)
        rows = report.rows
        fitted_pairs = np.stack([rows["i"], rows["j"]], axis=1)
        est = delta_hat_empirical(fitted_pairs, rows["tau_fitted"],
                                  view.group_of, dataset.t_labels)
        closed = delta_hat(view, report.rho2, report.c1, dataset.t_labels,
                           config.filter_kind)

        by_id = {g.group_id: g for g in assess.groups}
        est_by_id = {g.group_id: g for g in est.groups}
        closed_by_id = {g.group_id: g for g in closed.groups}
        for gid in sorted(by_id):
            g = by_id[gid]
            e = est_by_id.get(gid)
            c = closed_by_id.get(gid)
            if g.skipped or e is None or e.skipped:
                continue
            scatter.append({
                "seed": seed, "group": gid,
                "delta": g.delta, "delta_hat": e.delta,
                "delta_hat_closed_form":
                    None if c is None or c.skipped else c.delta_hat,
                "disparity": None if c is None else c.disparity,
                "n_t1": g.n_t1, "n_t2": g.n_t2,
            })

    deltas = np.array([r["delta"] for r in scatter], dtype=np.float64)
    estimates = np.array([r["delta_hat"] for r in scatter], dtype=np.float64)
    if deltas.size >= 2:
        corr = pcc(estimates, deltas)
        err = nrmse(estimates, deltas)
        corr_v, err_v = corr.value, err.value
    else:
        corr_v = err_v = float("nan")

    payload = {
        "pipeline": "delta_comparison",
        "dataset": config.name,
        "filter": config.filter_kind,
        "config_hash": config.config_hash,
        "config": config.to_dict(),
        "n_points": int(deltas.size),
        "pcc": corr_v,
        "nrmse": err_v,
        "points": scatter,
    }
    report_path = os.path.join(out_dir, "report.json")
    scatter_path = os.path.join(out_dir, "pairs.csv")
    _write_json(report_path, payload)
    lines = ["seed,group,delta,delta_hat,delta_hat_closed_form,disparity"]
    for r in scatter:
        closed_v = r["delta_hat_closed_form"]
        disp = r["disparity"]
        lines.append(
            f"{r['seed']},{int(r['group'])},{float(r['delta'])!r},"
            f"{float(r['delta_hat'])!r},"
            f"{'' if closed_v is None else repr(float(closed_v))},"
            f"{'' if disp is None else repr(float(disp))}"
        )
    with open(scatter_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    payload["paths"] = {"report": report_path, "scatter": scatter_path,
                        "run_dir": out_dir}
    return payload


def run_train(config: RunConfig) -> dict:
    """Train a single model (first seed, first lambda) and write the
    checkpoint, history CSV, and a summary report."""
    dataset = prepare_dataset(config)
    seed = config.seeds[0]
    lam = config.lambda_fair[0] if config.lambda_fair else 0.0
    out_dir = config.run_dir()
    os.makedirs(out_dir, exist_ok=True)

    run = run_seed(dataset, config, seed, lambda_fair=lam)
    ckpt_path = os.path.join(out_dir, "checkpoint.npz")
    hist_path = os.path.join(out_dir, "history.csv")
    save_checkpoint(ckpt_path, run.result.model, seed, config.to_dict())
    write_history(hist_path, run.result.history)

    payload = {
        "pipeline": "train",
        "dataset": config.name,
        "filter": config.filter_kind,
        "config_hash": config.config_hash,
        "config": config.to_dict(),
        "seed": seed,
        "lambda_fair": lam,
        "best_epoch": run.result.best_epoch,
        "best_val_auc": run.result.best_val_auc,
        "test_auc": run.test_auc,
        "test_auc_same_group": _same_group_auc(run),
    }
    report_path = os.path.join(out_dir, "report.json")
    _write_json(report_path, payload)
    payload["paths"] = {"report": report_path, "checkpoint": ckpt_path,
                        "history": hist_path, "run_dir": out_dir}
    return payload
