"""Prediction-as-prior repeats analysis.

Observed responses are replayed one at a time in random order, updating the
Dirichlet posterior after every draw and measuring how far its mode still
is from the crowd's empirical soft label.  Running the replay once from the
uniform prior and once from a machine-informed prior, on identical draw
orders, quantifies how many human labels the prediction is worth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .bayes import posterior_mode
from .core import DirichletParams, SoftLabel, TaskRecord, round_sig, task_rng
from .metrics import soft_distance

_REPEATS_STREAM = "repeats"


def blend_prior(prediction_at_n0: DirichletParams, blend: float = 1.0 / 3.0) -> DirichletParams:
    """Mix the uniform prior with predicted parameters at n=0.

    The default keeps a 2:1 uniform-to-prediction ratio; the parameter sum
    is preserved whenever the prediction sums to the number of categories.
    """
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend must lie in [0, 1], got {blend}")
    return DirichletParams((1.0 - blend) + blend * prediction_at_n0.alpha)


def repeats_run(task: TaskRecord, prior: DirichletParams, permutations: int,
                rng: np.random.Generator) -> np.ndarray:
    """Mean distance-to-empirical after each incremental draw.

    Each permutation replays all observed responses of the task in a random
    order without replacement; the result averages the per-step distances
    over the permutations.
    """
    n = task.n_responses
    if n == 0:
        raise ValueError(f"task {task.task_id} has no responses to replay")
    if permutations < 1:
        raise ValueError("permutations must be at least 1")
    k = len(prior)
    answers = np.array([r.answer for r in task.responses])
    if (answers < 0).any() or (answers >= k).any():
        raise ValueError(f"task {task.task_id} has answers outside the prior's categories")
    empirical = SoftLabel(np.bincount(answers, minlength=k) / n)

    totals = np.zeros(n)
    for _ in range(permutations):
        order = rng.permutation(n)
        alpha = prior.alpha.copy()
        for step, j in enumerate(order):
            alpha[answers[j]] += 1.0
            mode = posterior_mode(DirichletParams(alpha))
            totals[step] += soft_distance(mode, empirical)
    return totals / permutations


@dataclass(frozen=True)
class StepQuantiles:
    step: int
    q025: float
    q25: float
    median: float
    q75: float
    q975: float
    n_tasks: int


@dataclass(frozen=True)
class RepeatsSummary:
    variant: str
    steps: List[StepQuantiles]


def repeats_summary(
    tasks: Sequence[TaskRecord],
    prior_provider: Callable[[TaskRecord], DirichletParams],
    max_repeats: Optional[int] = None,
    permutations: int = 16,
    seed: int = 0,
    variant: str = "uniform",
) -> RepeatsSummary:
    """Per-step distance quantiles across tasks.

    Each task replays from its own named random stream derived from (seed,
    task_id) only, so two summaries with different priors but the same seed
    see identical draw orders and are directly paired.  Tasks without
    responses are skipped.
    """
    per_task: List[np.ndarray] = []
    for task in tasks:
        if task.n_responses == 0:
            continue
        rng = task_rng(seed, f"{_REPEATS_STREAM}:{task.task_id}")
        per_task.append(repeats_run(task, prior_provider(task), permutations, rng))
    if not per_task:
        raise ValueError("no tasks with responses")

    limit = max(len(d) for d in per_task)
    if max_repeats is not None:
        limit = min(limit, max_repeats)
    steps = []
    for s in range(1, limit + 1):
        vals = np.array([d[s - 1] for d in per_task if len(d) >= s])
        q = np.quantile(vals, (0.025, 0.25, 0.5, 0.75, 0.975))
        steps.append(StepQuantiles(s, *(float(x) for x in q), int(vals.size)))
    return RepeatsSummary(variant=variant, steps=steps)


def uniform_provider(k: int) -> Callable[[TaskRecord], DirichletParams]:
    prior = DirichletParams(np.ones(k))
    return lambda task: prior


def write_repeats_csv(path, summaries: Sequence[RepeatsSummary],
                      provenance: Optional[dict] = None) -> None:
    with open(path, "w", newline="") as fh:
        if provenance:
            items = " ".join(f"{k}={v}" for k, v in sorted(provenance.items()))
            fh.write(f"# {items}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "step", "q025", "q25", "median", "q75", "q975", "n_tasks"])
        for summary in summaries:
            for s in summary.steps:
                writer.writerow(
                    [summary.variant, s.step]
                    + [repr(round_sig(v)) for v in (s.q025, s.q25, s.median, s.q75, s.q975)]
                    + [s.n_tasks]
                )
