"""Conjugate truth inference for the Dirichlet-multinomial crowd model.

A Dirichlet prior over the per-task soft label combined with categorical
responses yields a Dirichlet posterior by simple count addition.  The
module also exposes the transformed marginals (task solvability and the
conditional distribution over proper categories) and two point
estimators, the posterior mode and the posterior predictive mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CategoryScheme, CountVector, DirichletParams, SoftLabel
from .head import log_gamma


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta parameters must be positive, got ({self.a}, {self.b})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


def uniform_prior(scheme: CategoryScheme) -> DirichletParams:
    """All-ones concentration vector over the C+1 categories."""
    return DirichletParams(np.ones(scheme.num_categories))


def posterior(prior: DirichletParams, counts: CountVector) -> DirichletParams:
    """Conjugate update: add observed counts to the prior concentrations."""
    if len(prior) != counts.counts.size:
        raise ValueError(
            f"dimension mismatch: prior has {len(prior)} components, "
            f"counts has {counts.counts.size}"
        )
    return DirichletParams(prior.alpha + counts.counts)


def marginal_solvability(alpha: DirichletParams) -> BetaParams:
    """Marginal of the solvability probability: Beta(sum of proper, cs)."""
    if len(alpha) < 2:
        raise ValueError("need at least one proper category plus cs")
    return BetaParams(float(alpha.alpha[:-1].sum()), float(alpha.alpha[-1]))


def marginal_conditional(alpha: DirichletParams) -> DirichletParams:
    """Marginal over proper categories given solvability; drops the cs
    component."""
    if len(alpha) < 2:
        raise ValueError("need at least one proper category plus cs")
    return DirichletParams(alpha.alpha[:-1].copy())


def posterior_mean(alpha: DirichletParams) -> SoftLabel:
    """Expected soft label, the posterior predictive probability vector."""
    return SoftLabel(alpha.alpha / alpha.alpha_sum)


def posterior_mode(alpha: DirichletParams) -> SoftLabel:
    """Mode (alpha - 1) / sum(alpha - 1), made total.

    The exact formula only applies when every component is >= 1 and the
    sums exceed zero.  Blended machine-informed priors can dip below 1,
    so components are clamped at zero before normalizing; if nothing
    remains (e.g. the all-ones vector) the mean is returned instead.
    """
    shifted = np.maximum(alpha.alpha - 1.0, 0.0)
    total = shifted.sum()
    if total > 0.0:
        return SoftLabel(shifted / total)
    return posterior_mean(alpha)


def log_density(alpha: DirichletParams, q: np.ndarray) -> float:
    """Log pdf of Dirichlet(alpha) at a point on the simplex."""
    a = alpha.alpha
    q = np.asarray(q, dtype=float)
    if q.size != a.size:
        raise ValueError("dimension mismatch")
    if (q < 0).any() or abs(q.sum() - 1.0) > 1e-9:
        return -np.inf
    if ((q == 0) & (a > 1)).any():
        return -np.inf
    norm = log_gamma(a.sum()) - log_gamma(a).sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where((a == 1.0), 0.0, (a - 1.0) * np.log(q))
    if np.isnan(terms).any():
        return -np.inf
    return float(norm + terms.sum())
