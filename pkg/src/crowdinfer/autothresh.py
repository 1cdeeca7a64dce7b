"""Automation-correctness curves, bootstrap confidence bands, threshold
calibration against a target accuracy, and ambiguity calibration bins.

A task is retained (auto-annotated) when its prediction confidence is at
least the threshold.  Threshold grids run over the observed confidence
values plus a retain-all sentinel at 0.0, which transfers to any dataset
because confidences live in [0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import json_ready, round_sig


def _as_curve_inputs(confidences, correct):
    conf = np.asarray(confidences, dtype=float)
    corr = np.asarray(correct, dtype=bool)
    if conf.ndim != 1 or conf.shape != corr.shape:
        raise ValueError("confidences and correctness must be aligned vectors")
    if conf.size == 0:
        raise ValueError("empty input")
    if not np.isfinite(conf).all():
        raise ValueError("non-finite confidence values")
    return conf, corr


def _grid(conf: np.ndarray) -> np.ndarray:
    values = np.unique(conf)
    if values[0] > 0.0:
        values = np.concatenate(([0.0], values))
    return values


def _accuracies_at(grid: np.ndarray, conf: np.ndarray, corr: np.ndarray):
    """Retained counts and accuracies at each grid threshold (>= retention)."""
    order = np.argsort(conf)
    sorted_conf = conf[order]
    hits = np.concatenate((np.cumsum(corr[order][::-1])[::-1], [0]))
    pos = np.searchsorted(sorted_conf, grid, side="left")
    retained = conf.size - pos
    with np.errstate(invalid="ignore"):
        acc = np.where(retained > 0, hits[pos] / np.maximum(retained, 1), np.nan)
    return retained, acc


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    automation: float
    accuracy: Optional[float]   # None when the retained set is empty


def curve(confidences, correct) -> List[CurvePoint]:
    """Automation-correctness curve over the observed confidence grid."""
    conf, corr = _as_curve_inputs(confidences, correct)
    grid = _grid(conf)
    retained, acc = _accuracies_at(grid, conf, corr)
    return [
        CurvePoint(float(c), r / conf.size, float(a) if r > 0 else None)
        for c, r, a in zip(grid, retained, acc)
    ]


@dataclass(frozen=True)
class BootstrapBands:
    """Accuracy quantile bands over bootstrap resamples, evaluated on the
    original curve's threshold grid."""

    thresholds: np.ndarray
    automation: np.ndarray
    acc_q025: np.ndarray
    acc_q50: np.ndarray
    acc_q975: np.ndarray


def _realization_rngs(seed: int, B: int) -> List[np.random.Generator]:
    return [np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(B)]


def bootstrap_curves(confidences, correct, B: int, seed: int = 0) -> BootstrapBands:
    """Task-level bootstrap of the curve: 2.5/50/97.5% accuracy quantiles
    per threshold.  Thresholds where a resample retains nothing are skipped
    in that realization's quantiles."""
    conf, corr = _as_curve_inputs(confidences, correct)
    if B < 1:
        raise ValueError("B must be at least 1")
    grid = _grid(conf)
    retained, _ = _accuracies_at(grid, conf, corr)
    n = conf.size

    acc_rows = np.empty((B, grid.size))
    for b, rng in enumerate(_realization_rngs(seed, B)):
        idx = rng.integers(0, n, size=n)
        _, acc_rows[b] = _accuracies_at(grid, conf[idx], corr[idx])

    quantiles = np.full((3, grid.size), np.nan)
    for j in range(grid.size):
        col = acc_rows[:, j]
        finite = col[np.isfinite(col)]
        if finite.size:
            quantiles[:, j] = np.quantile(finite, (0.025, 0.5, 0.975))
    return BootstrapBands(
        thresholds=grid,
        automation=retained / n,
        acc_q025=quantiles[0],
        acc_q50=quantiles[1],
        acc_q975=quantiles[2],
    )


def select_threshold_on_curve(confidences, correct, target_accuracy: float) -> float:
    """Smallest grid threshold whose retained accuracy meets the target;
    math.inf (abstain on everything) when none does."""
    conf, corr = _as_curve_inputs(confidences, correct)
    if not 0.0 < target_accuracy <= 1.0:
        raise ValueError(f"target_accuracy must lie in (0, 1], got {target_accuracy}")
    grid = _grid(conf)
    retained, acc = _accuracies_at(grid, conf, corr)
    ok = np.flatnonzero((retained > 0) & (acc >= target_accuracy))
    return float(grid[ok[0]]) if ok.size else math.inf


def select_threshold(val_confidences, val_correct, target_accuracy: float,
                     B: int, seed: int = 0) -> List[float]:
    """One realized threshold per bootstrap resample of the validation set."""
    conf, corr = _as_curve_inputs(val_confidences, val_correct)
    if B < 1:
        raise ValueError("B must be at least 1")
    n = conf.size
    out = []
    for rng in _realization_rngs(seed, B):
        idx = rng.integers(0, n, size=n)
        out.append(select_threshold_on_curve(conf[idx], corr[idx], target_accuracy))
    return out


@dataclass(frozen=True)
class ThresholdEvaluation:
    automation_ci: Tuple[float, float]
    accuracy_ci: Tuple[float, float]   # over realizations that retain anything
    abstention_rate: float             # fraction of realizations retaining nothing

    def __post_init__(self):
        for lo, hi in (self.automation_ci, self.accuracy_ci):
            if not (math.isnan(lo) or math.isnan(hi)) and lo > hi:
                raise ValueError("interval bounds out of order")


def evaluate_thresholds(test_confidences, test_correct,
                        thresholds: Sequence[float]) -> ThresholdEvaluation:
    """Apply each realized threshold to the (unresampled) test set and report
    marginal 95% intervals of automation and retained accuracy."""
    conf, corr = _as_curve_inputs(test_confidences, test_correct)
    if len(thresholds) == 0:
        raise ValueError("no thresholds to evaluate")
    automation = np.empty(len(thresholds))
    accuracy = np.full(len(thresholds), np.nan)
    for i, c in enumerate(thresholds):
        mask = conf >= c
        automation[i] = mask.mean()
        if mask.any():
            accuracy[i] = corr[mask].mean()
    kept = accuracy[np.isfinite(accuracy)]
    acc_ci = (
        tuple(np.quantile(kept, (0.025, 0.975))) if kept.size else (math.nan, math.nan)
    )
    return ThresholdEvaluation(
        automation_ci=tuple(np.quantile(automation, (0.025, 0.975))),
        accuracy_ci=acc_ci,
        abstention_rate=float(np.mean(automation == 0.0)),
    )


@dataclass(frozen=True)
class ThresholdCalibration:
    """Realized thresholds from validation resamples plus their test-set
    evaluation; the deployment threshold is the median realization."""

    target_accuracy: float
    thresholds: List[float]
    automation_ci: Tuple[float, float]
    accuracy_ci: Tuple[float, float]
    abstention_rate: float
    deployment_threshold: float

    def __post_init__(self):
        if not self.thresholds:
            raise ValueError("calibration needs at least one realization")

    def to_dict(self) -> dict:
        return json_ready(
            {
                "target_accuracy": self.target_accuracy,
                "deployment_threshold": self.deployment_threshold,
                "automation_ci": list(self.automation_ci),
                "accuracy_ci": list(self.accuracy_ci),
                "abstention_rate": self.abstention_rate,
                "n_realizations": len(self.thresholds),
                "thresholds": list(self.thresholds),
            }
        )


def calibrate(val_confidences, val_correct, test_confidences, test_correct,
              target_accuracy: float = 0.99, B: int = 1024,
              seed: int = 0) -> ThresholdCalibration:
    """Select thresholds on validation resamples, evaluate them on test."""
    thresholds = select_threshold(val_confidences, val_correct, target_accuracy, B, seed)
    ev = evaluate_thresholds(test_confidences, test_correct, thresholds)
    return ThresholdCalibration(
        target_accuracy=target_accuracy,
        thresholds=thresholds,
        automation_ci=ev.automation_ci,
        accuracy_ci=ev.accuracy_ci,
        abstention_rate=ev.abstention_rate,
        deployment_threshold=float(np.median(thresholds)),
    )


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    count: int
    mean_predicted: Optional[float]
    mean_actual: Optional[float]
    mean_distance: Optional[float]


def ambiguity_calibration(predicted_amb, actual_amb, bins: int = 10,
                          distances=None) -> List[CalibrationBin]:
    """Distribute tasks over equidistant bins of predicted ambiguity and
    report per-bin means; empty bins carry count 0 and None means."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    pred = np.asarray(predicted_amb, dtype=float)
    act = np.asarray(actual_amb, dtype=float)
    if pred.shape != act.shape or pred.ndim != 1:
        raise ValueError("predicted and actual ambiguity must be aligned vectors")
    dist = None
    if distances is not None:
        dist = np.asarray(distances, dtype=float)
        if dist.shape != pred.shape:
            raise ValueError("distances must align with the ambiguity vectors")
    idx = np.clip((pred * bins).astype(int), 0, bins - 1)
    out = []
    for b in range(bins):
        mask = idx == b
        count = int(mask.sum())
        out.append(
            CalibrationBin(
                lo=b / bins,
                hi=(b + 1) / bins,
                count=count,
                mean_predicted=float(pred[mask].mean()) if count else None,
                mean_actual=float(act[mask].mean()) if count else None,
                mean_distance=float(dist[mask].mean()) if count and dist is not None else None,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Plot-ready CSV artifacts
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    if isinstance(v, float):
        return repr(round_sig(v))
    return str(v)


def _write_csv(path, header, rows, provenance: Optional[dict] = None) -> None:
    with open(path, "w", newline="") as fh:
        if provenance:
            items = " ".join(f"{k}={v}" for k, v in sorted(provenance.items()))
            fh.write(f"# {items}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_curve_csv(path, bands: BootstrapBands, provenance: Optional[dict] = None) -> None:
    rows = zip(
        (float(t) for t in bands.thresholds),
        (float(a) for a in bands.automation),
        (float(a) for a in bands.acc_q025),
        (float(a) for a in bands.acc_q50),
        (float(a) for a in bands.acc_q975),
    )
    _write_csv(path, ["threshold", "automation", "acc_q025", "acc_q50", "acc_q975"],
               rows, provenance)


def write_bins_csv(path, bins_: Sequence[CalibrationBin],
                   provenance: Optional[dict] = None) -> None:
    rows = (
        (b.lo, b.hi, b.count, b.mean_predicted, b.mean_actual, b.mean_distance)
        for b in bins_
    )
    _write_csv(path, ["bin_lo", "bin_hi", "count", "mean_predicted", "mean_actual", "mean_distance"],
               rows, provenance)
