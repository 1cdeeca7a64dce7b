"""Batch pipeline entry point.

Subcommands cover the full flow: simulate a crowd, infer posteriors, train
the prediction head, predict, evaluate, plot-ready curve export, threshold
calibration, and the prediction-as-prior repeats analysis.  Options resolve
in three layers: built-in defaults, then a JSON config file, then explicit
command-line flags.  Every report embeds the seed and a hash of the
non-path options so reruns are byte-identical and attributable.

Exit codes: 0 success, 2 bad input (files, schema, option values),
3 numeric failure during computation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .autothresh import (
    ambiguity_calibration,
    bootstrap_curves,
    calibrate,
    write_bins_csv,
    write_curve_csv,
)
from .bayes import posterior, posterior_mean, posterior_mode, uniform_prior
from .core import (
    DirichletParams,
    InputError,
    SoftLabel,
    TaskRecord,
    attach_responses,
    config_hash,
    json_ready,
    read_alpha_records,
    read_responses,
    read_scheme,
    read_tasks,
    split_dataset,
    tally,
    write_alpha_records,
    write_responses,
    write_scheme,
    write_tasks,
)
from .head import TrainConfig, TrainExample, load_model, predict, save_model, train_head
from .metrics import (
    AmbiguityConfig,
    ambiguity,
    confidence,
    evaluate,
    hard_weights,
    soft_distance,
    soft_weight,
)
from .priors import blend_prior, repeats_summary, write_repeats_csv
from .sim import SimConfig, simulate_dataset

DEFAULTS: Dict[str, object] = {
    "seed": 0,
    # artifact paths, resolved against the output directory
    "scheme": "scheme.json",
    "tasks": "tasks.jsonl",
    "responses": "responses.jsonl",
    "posteriors": "posteriors.jsonl",
    "model": "model.json",
    "predictions": "predictions.jsonl",
    "report": "report.json",
    "curve": "curve.csv",
    "calibration": "calibration.json",
    "bins_csv": "bins.csv",
    "repeats_csv": "repeats.csv",
    # simulator
    "num_tasks": 1000,
    "categories": 2,
    "repeats": 20,
    "alpha0": None,
    "feature_dim": 8,
    "feature_noise": 0.1,
    "predictor_temperature": 1.0,
    "predictor_noise": 0.0,
    # dataset split
    "ratios": (0.8, 0.1, 0.1),
    # training
    "learning_rate": 2e-4,
    "beta1": 0.9,
    "beta2": 0.995,
    "warmup_iters": None,
    "batch_size": 256,
    "epochs": 200,
    "select": "best",
    # metrics and calibration
    "tau": 0.5,
    "eta0": 0.4,
    "pi0": 0.8,
    "bins": 10,
    "point_estimate": "mode",
    "target_accuracy": 0.99,
    "bootstrap": 1024,
    # repeats analysis
    "blend": 1.0 / 3.0,
    "permutations": 16,
    "max_repeats": None,
    "deployment_threshold": None,
    # shared
    "inference_n": None,
    "prior": "uniform",
    "split": "test",
}

_PATH_KEYS = frozenset(
    [
        "scheme", "tasks", "responses", "posteriors", "model", "predictions",
        "report", "curve", "calibration", "bins_csv", "repeats_csv",
    ]
)


# ---------------------------------------------------------------------------
# Option resolution
# ---------------------------------------------------------------------------

def _parse_floats(text) -> tuple:
    if isinstance(text, str):
        return tuple(float(x) for x in text.split(","))
    return tuple(float(x) for x in text)


def resolve_options(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    raw = vars(args)
    if raw.get("config"):
        with open(raw["config"]) as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{raw['config']}: invalid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, value in raw.items():
        if key in cfg and value is not None:
            cfg[key] = value
    for key in ("alpha0", "ratios"):
        if cfg[key] is not None:
            cfg[key] = _parse_floats(cfg[key])
    outdir = raw.get("outdir") or os.environ.get("CROWDINFER_OUTDIR") or "."
    cfg["_outdir"] = outdir
    return cfg


def _path(cfg: dict, key: str) -> str:
    p = str(cfg[key])
    return p if os.path.isabs(p) else os.path.join(cfg["_outdir"], p)


def provenance(cfg: dict) -> dict:
    hashable = {
        k: cfg[k]
        for k in sorted(DEFAULTS)
        if k not in _PATH_KEYS
    }
    return {
        "version": __version__,
        "seed": cfg["seed"],
        "config_hash": config_hash(hashable),
    }


# ---------------------------------------------------------------------------
# Shared loading helpers
# ---------------------------------------------------------------------------

def _load_dataset(cfg: dict, with_responses: bool = True):
    scheme = read_scheme(_path(cfg, "scheme"))
    tasks = read_tasks(_path(cfg, "tasks"))
    if with_responses:
        responses = read_responses(_path(cfg, "responses"), scheme)
        attach_responses(tasks, responses)
    return scheme, tasks


def _split_ids(cfg: dict, tasks: List[TaskRecord]) -> frozenset:
    name = cfg["split"]
    if name == "all":
        return frozenset(t.task_id for t in tasks)
    if name not in ("train", "val", "test"):
        raise InputError(f"unknown split {name!r}")
    return split_dataset(tasks, cfg["ratios"], seed=cfg["seed"]).of(name)


def _point(params: DirichletParams, how: str) -> SoftLabel:
    if how == "mode":
        return posterior_mode(params)
    if how == "mean":
        return posterior_mean(params)
    raise InputError(f"unknown point estimate {how!r}")


def _read_pair(cfg: dict):
    preds = read_alpha_records(_path(cfg, "predictions"))
    posts = read_alpha_records(_path(cfg, "posteriors"))
    return preds, posts


def _covered(preds: dict, posts: dict, ids) -> List[str]:
    """The given task ids, sorted, verified present in both record files."""
    missing = sorted(tid for tid in ids if tid not in preds or tid not in posts)
    if missing:
        raise InputError(
            f"{len(missing)} tasks lack predictions or posteriors (first: {missing[0]!r})"
        )
    return sorted(ids)


def _conf_correct(cfg: dict, preds: dict, posts: dict, ids: List[str]):
    how = cfg["point_estimate"]
    conf = np.empty(len(ids))
    correct = np.empty(len(ids), dtype=bool)
    for i, tid in enumerate(ids):
        q_hat = _point(preds[tid][0], how)
        q_ref = _point(posts[tid][0], "mode")
        conf[i] = confidence(q_hat)
        correct[i] = q_hat.argmax() == q_ref.argmax()
    return conf, correct


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: dict) -> int:
    try:
        sim = SimConfig(
            num_tasks=cfg["num_tasks"],
            num_proper=cfg["categories"],
            repeats=cfg["repeats"],
            alpha0=cfg["alpha0"],
            feature_dim=cfg["feature_dim"],
            feature_noise=cfg["feature_noise"],
            predictor_temperature=cfg["predictor_temperature"],
            predictor_noise=cfg["predictor_noise"],
            seed=cfg["seed"],
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    scheme, tasks = simulate_dataset(sim)
    write_scheme(_path(cfg, "scheme"), scheme)
    write_tasks(_path(cfg, "tasks"), tasks)
    all_responses = [r for t in tasks for r in t.responses]
    write_responses(_path(cfg, "responses"), all_responses, scheme)
    print(
        f"simulated {len(tasks)} tasks, {len(all_responses)} responses "
        f"({scheme.num_proper}+1 categories, seed {cfg['seed']})"
    )
    return 0


def cmd_infer(cfg: dict) -> int:
    scheme, tasks = _load_dataset(cfg)
    if cfg["prior"] == "model":
        model = load_model(_path(cfg, "model"))

        def prior_for(task: TaskRecord) -> DirichletParams:
            if task.features is None:
                raise InputError(f"task {task.task_id} has no features for the model prior")
            return blend_prior(predict(model, task.features, 0), cfg["blend"])

    elif cfg["prior"] == "uniform":
        uni = uniform_prior(scheme)

        def prior_for(task: TaskRecord) -> DirichletParams:
            return uni

    else:
        raise InputError(f"unknown prior {cfg['prior']!r}")

    records = []
    for task in tasks:
        counts = tally(task.responses, scheme)
        records.append((task.task_id, posterior(prior_for(task), counts), counts.total))
    write_alpha_records(_path(cfg, "posteriors"), records)
    print(f"inferred {len(records)} posteriors ({cfg['prior']} prior)")
    return 0


def _train_examples(scheme, tasks, ids, weights) -> List[TrainExample]:
    uni = uniform_prior(scheme)
    out = []
    for task in tasks:
        if task.task_id not in ids:
            continue
        if task.features is None:
            raise InputError(f"task {task.task_id} has no features; cannot train on it")
        counts = tally(task.responses, scheme)
        target = posterior(uni, counts)
        q_ref = posterior_mode(target)
        out.append(
            TrainExample(
                features=task.features,
                target_alpha=target.alpha,
                n=counts.total,
                weight=soft_weight(q_ref, weights),
                task_id=task.task_id,
            )
        )
    return out


def _reference_class_weights(scheme, tasks, ids) -> np.ndarray:
    """Inverse-frequency weights from majority labels of the given tasks."""
    counts = np.zeros(scheme.num_categories)
    uni = uniform_prior(scheme)
    for task in tasks:
        if task.task_id in ids:
            counts[posterior_mode(posterior(uni, tally(task.responses, scheme))).argmax()] += 1
    return hard_weights(counts)


def cmd_train(cfg: dict) -> int:
    scheme, tasks = _load_dataset(cfg)
    split = split_dataset(tasks, cfg["ratios"], seed=cfg["seed"])
    weights = _reference_class_weights(scheme, tasks, split.train)
    train_ex = _train_examples(scheme, tasks, split.train, weights)
    val_ex = _train_examples(scheme, tasks, split.val, weights)
    try:
        tc = TrainConfig(
            learning_rate=cfg["learning_rate"],
            beta1=cfg["beta1"],
            beta2=cfg["beta2"],
            warmup_iters=cfg["warmup_iters"],
            batch_size=cfg["batch_size"],
            epochs=cfg["epochs"],
            tau=cfg["tau"],
            seed=cfg["seed"],
            select=cfg["select"],
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    history = []
    model = train_head(
        train_ex,
        tc,
        val_dataset=val_ex,
        alpha0_sum=float(scheme.num_categories),
        callback=lambda e, tl, vl: history.append((e, tl, vl)),
    )
    save_model(_path(cfg, "model"), model)
    epoch, train_loss, val_loss = history[-1]
    val_note = f", val loss {val_loss:.6f}" if val_loss is not None else ""
    print(
        f"trained on {len(train_ex)} tasks for {epoch} epochs "
        f"(final train loss {train_loss:.6f}{val_note})"
    )
    return 0


def cmd_predict(cfg: dict) -> int:
    scheme, tasks = _load_dataset(cfg, with_responses=cfg["inference_n"] is None)
    model = load_model(_path(cfg, "model"))
    records = []
    for task in tasks:
        if task.features is None:
            raise InputError(f"task {task.task_id} has no features to predict from")
        n = cfg["inference_n"] if cfg["inference_n"] is not None else task.n_responses
        records.append((task.task_id, predict(model, task.features, n), n))
    write_alpha_records(_path(cfg, "predictions"), records)
    print(f"predicted {len(records)} tasks")
    return 0


def cmd_eval(cfg: dict) -> int:
    scheme, tasks = _load_dataset(cfg, with_responses=False)
    ids = _split_ids(cfg, tasks)
    preds, posts = _read_pair(cfg)
    ordered = _covered(preds, posts, ids)
    how = cfg["point_estimate"]
    predictions = {tid: _point(preds[tid][0], how) for tid in ordered}
    references = {tid: _point(posts[tid][0], "mode") for tid in ordered}

    ref_counts = np.zeros(scheme.num_categories)
    for tid in ordered:
        ref_counts[references[tid].argmax()] += 1
    weights = hard_weights(ref_counts)
    report = evaluate(predictions, references, weights)

    amb_cfg = AmbiguityConfig(cfg["eta0"], cfg["pi0"])
    amb_pred = [ambiguity(predictions[tid], amb_cfg) for tid in ordered]
    amb_act = [ambiguity(references[tid], amb_cfg) for tid in ordered]
    dists = [soft_distance(predictions[tid], references[tid]) for tid in ordered]
    bins_ = ambiguity_calibration(amb_pred, amb_act, cfg["bins"], dists)

    prov = provenance(cfg)
    payload = {"provenance": prov, "split": cfg["split"], **report.to_dict()}
    with open(_path(cfg, "report"), "w") as fh:
        json.dump(json_ready(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_bins_csv(_path(cfg, "bins_csv"), bins_, prov)
    print(
        f"evaluated {report.n_tasks} tasks on split {cfg['split']}: "
        f"acc {report.acc:.4f}, mean D {report.mean_D:.4f}"
    )
    return 0


def cmd_curve(cfg: dict) -> int:
    _, tasks = _load_dataset(cfg, with_responses=False)
    ids = _split_ids(cfg, tasks)
    preds, posts = _read_pair(cfg)
    ordered = _covered(preds, posts, ids)
    conf, correct = _conf_correct(cfg, preds, posts, ordered)
    bands = bootstrap_curves(conf, correct, cfg["bootstrap"], cfg["seed"])
    write_curve_csv(_path(cfg, "curve"), bands, provenance(cfg))
    print(
        f"curve over {len(ordered)} tasks ({cfg['split']}), "
        f"{bands.thresholds.size} thresholds, B={cfg['bootstrap']}"
    )
    return 0


def cmd_calibrate(cfg: dict) -> int:
    _, tasks = _load_dataset(cfg, with_responses=False)
    split = split_dataset(tasks, cfg["ratios"], seed=cfg["seed"])
    preds, posts = _read_pair(cfg)
    val_sorted = _covered(preds, posts, split.val)
    test_sorted = _covered(preds, posts, split.test)
    val_conf, val_corr = _conf_correct(cfg, preds, posts, val_sorted)
    test_conf, test_corr = _conf_correct(cfg, preds, posts, test_sorted)
    result = calibrate(
        val_conf, val_corr, test_conf, test_corr,
        target_accuracy=cfg["target_accuracy"], B=cfg["bootstrap"], seed=cfg["seed"],
    )
    payload = {"provenance": provenance(cfg), **result.to_dict()}
    with open(_path(cfg, "calibration"), "w") as fh:
        json.dump(json_ready(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    lo, hi = result.accuracy_ci
    print(
        f"calibrated threshold {result.deployment_threshold:.4f} "
        f"(target {cfg['target_accuracy']}, test accuracy CI [{lo:.4f}, {hi:.4f}])"
    )
    return 0


def cmd_repeats(cfg: dict) -> int:
    scheme, tasks = _load_dataset(cfg)
    ids = _split_ids(cfg, tasks)
    model = load_model(_path(cfg, "model"))

    threshold = cfg["deployment_threshold"]
    if threshold is None:
        with open(_path(cfg, "calibration")) as fh:
            threshold = json.load(fh)["deployment_threshold"]
        if threshold is None:   # serialized +inf: nothing is automated
            threshold = math.inf

    kept = []
    for task in tasks:
        if task.task_id not in ids or task.n_responses == 0:
            continue
        if task.features is None:
            raise InputError(f"task {task.task_id} has no features")
        n = cfg["inference_n"] if cfg["inference_n"] is not None else task.n_responses
        conf = confidence(posterior_mode(predict(model, task.features, n)))
        if conf < threshold:
            kept.append(task)
    if not kept:
        raise InputError("no non-automated tasks left for the repeats analysis")
    kept.sort(key=lambda t: t.task_id)

    uni = uniform_prior(scheme)
    informed = {
        t.task_id: blend_prior(predict(model, t.features, 0), cfg["blend"]) for t in kept
    }
    common = dict(
        max_repeats=cfg["max_repeats"],
        permutations=cfg["permutations"],
        seed=cfg["seed"],
    )
    summaries = [
        repeats_summary(kept, lambda t: uni, variant="uniform", **common),
        repeats_summary(kept, lambda t: informed[t.task_id], variant="informed", **common),
    ]
    write_repeats_csv(_path(cfg, "repeats_csv"), summaries, provenance(cfg))
    s1 = {s.variant: s.steps[0].median for s in summaries}
    print(
        f"repeats over {len(kept)} non-automated tasks "
        f"(step-1 median uniform {s1['uniform']:.4f}, informed {s1['informed']:.4f})"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its entries")
    p.add_argument("--outdir", help="output directory (env CROWDINFER_OUTDIR, default .)")
    p.add_argument("--seed", type=int)


def _add_paths(p: argparse.ArgumentParser, *keys: str) -> None:
    flags = {
        "scheme": "--scheme", "tasks": "--tasks", "responses": "--responses",
        "posteriors": "--posteriors", "model": "--model", "predictions": "--predictions",
        "report": "--report", "curve": "--curve", "calibration": "--calibration",
        "bins_csv": "--bins-csv", "repeats_csv": "--repeats-csv",
    }
    for key in keys:
        p.add_argument(flags[key], dest=key, metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdinfer",
        description="Truth inference and annotation automation for crowd-labeled tasks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic crowd dataset")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "responses")
    p.add_argument("--num-tasks", type=int, dest="num_tasks")
    p.add_argument("--categories", type=int, help="number of proper categories")
    p.add_argument("--repeats", type=int, help="responses per task")
    p.add_argument("--alpha0", help="comma-separated generation prior, length C+1")
    p.add_argument("--feature-dim", type=int, dest="feature_dim")
    p.add_argument("--feature-noise", type=float, dest="feature_noise")
    p.add_argument("--predictor-temperature", type=float, dest="predictor_temperature")
    p.add_argument("--predictor-noise", type=float, dest="predictor_noise")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="conjugate posterior per task")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "responses", "posteriors", "model")
    p.add_argument("--prior", choices=["uniform", "model"])
    p.add_argument("--blend", type=float)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="fit the prediction head")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "responses", "model")
    p.add_argument("--ratios", help="train,val,test fractions")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--warmup-iters", type=int, dest="warmup_iters")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--select", choices=["best", "last"])
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict Dirichlet parameters per task")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "responses", "model", "predictions")
    p.add_argument("--inference-n", type=int, dest="inference_n",
                   help="response count to predict at (default: observed per task)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against posteriors")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "predictions", "posteriors", "report", "bins_csv")
    p.add_argument("--split", choices=["train", "val", "test", "all"])
    p.add_argument("--ratios", help="train,val,test fractions")
    p.add_argument("--point-estimate", choices=["mode", "mean"], dest="point_estimate")
    p.add_argument("--eta0", type=float)
    p.add_argument("--pi0", type=float)
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="automation-correctness curve with bootstrap bands")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "predictions", "posteriors", "curve")
    p.add_argument("--split", choices=["train", "val", "test", "all"])
    p.add_argument("--ratios", help="train,val,test fractions")
    p.add_argument("--bootstrap", type=int, metavar="B")
    p.add_argument("--point-estimate", choices=["mode", "mean"], dest="point_estimate")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("calibrate", help="select and evaluate the accuracy threshold")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "predictions", "posteriors", "calibration")
    p.add_argument("--ratios", help="train,val,test fractions")
    p.add_argument("--target-accuracy", type=float, dest="target_accuracy")
    p.add_argument("--bootstrap", type=int, metavar="B")
    p.add_argument("--point-estimate", choices=["mode", "mean"], dest="point_estimate")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("repeats", help="prediction-as-prior convergence analysis")
    _add_common(p)
    _add_paths(p, "scheme", "tasks", "responses", "model", "calibration", "repeats_csv")
    p.add_argument("--split", choices=["train", "val", "test", "all"])
    p.add_argument("--ratios", help="train,val,test fractions")
    p.add_argument("--blend", type=float)
    p.add_argument("--permutations", type=int)
    p.add_argument("--max-repeats", type=int, dest="max_repeats")
    p.add_argument("--inference-n", type=int, dest="inference_n")
    p.add_argument("--deployment-threshold", type=float, dest="deployment_threshold",
                   help="override the calibrated threshold")
    p.set_defaults(func=cmd_repeats)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_options(args)
        return args.func(cfg)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
