"""
Training the Dirichlet prediction head
=======================================

The head maps task features to Dirichlet parameters whose sum is fixed at
alpha0_sum + n by construction, trained by minimizing the Chernoff
distance to the crowd posterior.  Everything runs on a synthetic crowd so
the script finishes in seconds.
"""

import numpy as np

from crowdinfer import (
    TrainConfig,
    TrainExample,
    chernoff,
    evaluate,
    head_forward,
    posterior,
    posterior_mode,
    simulate_dataset,
    split_dataset,
    tally,
    train_head,
    uniform_prior,
)
from crowdinfer.sim import SimConfig

cfg = SimConfig(num_tasks=1200, num_proper=2, repeats=15, feature_noise=0.1, seed=0)
scheme, tasks = simulate_dataset(cfg)
split = split_dataset(tasks, (0.8, 0.1, 0.1), seed=0)
prior = uniform_prior(scheme)
by_id = {t.task_id: t for t in tasks}


def examples(ids):
    out = []
    for tid in sorted(ids):
        t = by_id[tid]
        target = posterior(prior, tally(t.responses, scheme))
        out.append(TrainExample(t.features, target.alpha, t.n_responses, 1.0, tid))
    return out


train_set, val_set = examples(split.train), examples(split.val)
print(f"{len(train_set)} train / {len(val_set)} val examples, "
      f"{cfg.feature_dim} features, {scheme.num_categories} categories")

# keep the best epoch as measured on the validation set
train_cfg = TrainConfig(learning_rate=2e-4, epochs=120, batch_size=256, seed=0)
history = []
model = train_head(train_set, train_cfg, val_dataset=val_set,
                   callback=lambda e, tl, vl: history.append((e, tl, vl)))
for e, tl, vl in history[:: max(1, len(history) // 6)]:
    print(f"  epoch {e:3d}  train {tl:.4f}  val {vl:.4f}")

# predictions: Dirichlet parameters at any chosen response budget n
t = by_id[sorted(split.test)[0]]
for n in (0, 5, 15):
    alpha = head_forward(model, t.features, n)
    print(f"n={n:2d} -> alpha {np.round(alpha.alpha, 3)} (sum {alpha.alpha_sum:.1f})")

# score mode-vs-mode on the held-out split
predictions, references = {}, {}
for tid in sorted(split.test):
    t = by_id[tid]
    predictions[tid] = posterior_mode(head_forward(model, t.features, t.n_responses))
    references[tid] = posterior_mode(posterior(prior, tally(t.responses, scheme)))
report = evaluate(predictions, references)
print(f"\ntest accuracy {report.acc:.3f}, mean distance {report.mean_D:.3f} "
      f"over {report.n_tasks} tasks")

# the loss being minimized is a proper distance between Dirichlet posteriors
a = head_forward(model, t.features, t.n_responses)
b = posterior(prior, tally(t.responses, scheme))
print(f"chernoff(prediction, crowd posterior) on one task: {chernoff(a, b):.4f}")
