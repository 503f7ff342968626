"""Subsampling confidence intervals and KL convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .regress import (
    EmptyNeighborhoodError, SplitSpec, TrainConfig, assemble_local, fit_local,
)
from .sampling import SiteSet, neighborhood

Z_975 = 1.959964


def normal_quantile(prob: float) -> float:
    """Standard normal quantile; ``prob = 0.5`` gives exactly 0."""
    if not 0 < prob < 1:
        raise ValueError("probability must lie in (0, 1)")
    return float(ndtri(prob))


@dataclass(frozen=True)
class SubsampleLadder:
    deltas: tuple[float, ...]
    gammas: tuple[int, ...]

    @classmethod
    def build(cls, sites: SiteSet, center: int, deltas: Sequence[float]) -> "SubsampleLadder":
        deltas = tuple(float(d) for d in deltas)
        if len(deltas) < 2:
            raise ValueError("a subsampling ladder needs at least two rungs")
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError("ladder radii must be strictly increasing")
        eta = sites.design.eta_n
        if deltas[0] <= eta:
            raise ValueError(f"every radius must exceed the grid spacing {eta}")
        gammas = tuple(neighborhood(sites, center, d, include_center=False).gamma_n for d in deltas)
        if any(b <= a for a, b in zip(gammas, gammas[1:])):
            raise ValueError(f"neighbourhood sizes {gammas} are not strictly increasing")
        return cls(deltas, gammas)

    @property
    def B(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class CIResult:
    site: int
    alpha: float
    estimates: np.ndarray = field(repr=False)
    observed: float
    mean: float
    spread: float
    lower: float
    upper: float

    @property
    def B(self) -> int:
        return len(self.estimates)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def ci_from_estimates(estimates, observed: float, alpha: float = 0.05, site: int = -1) -> CIResult:
    """Interval ``mean +- z_{1-alpha/2} * spread`` around the rung estimates.

    ``spread`` is the root mean squared gap between the observed value and
    the rung estimates. ``alpha = 1`` collapses the interval to the mean.
    """
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("no estimates")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    mean = float(est.mean())
    spread = float(np.sqrt(np.mean((observed - est) ** 2)))
    z = 0.0 if alpha == 1 else normal_quantile(1 - alpha / 2)
    return CIResult(site, alpha, est, float(observed), mean, spread, mean - z * spread, mean + z * spread)


def subsample_ci(
    response,
    covariates,
    sites: SiteSet,
    site: int,
    ladder: SubsampleLadder,
    train: TrainConfig = TrainConfig(),
    alpha: float = 0.05,
    seed: int = 0,
    split_spec: SplitSpec | None = None,
    reference: str = "first_test",
    guard: str = "warn",
) -> CIResult:
    """Fit one network per ladder rung and form the subsampling interval.

    ``reference="first_test"`` takes each rung's prediction at the first test
    replicate and that replicate's observed response; ``"test_mean"`` averages
    both over the test replicates instead.
    """
    split_spec = split_spec or SplitSpec(seed=seed)
    estimates = []
    observed = None
    for delta in ladder.deltas:
        local = assemble_local(response, covariates, sites, site, delta, split_spec, guard)
        fit = fit_local(local, train, seed)
        if reference == "first_test":
            ref = local.test[:1]
        elif reference == "test_mean":
            ref = local.test
        else:
            raise ValueError(f"unknown reference {reference!r}")
        estimates.append(float(np.mean(local.predict(fit.params, ref))))
        observed = float(np.mean(local.targets[ref]))
    return ci_from_estimates(estimates, observed, alpha, site)


class ECDF:
    """Right-continuous empirical distribution function."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("ECDF of an empty sample")
        self.samples = np.sort(v)

    def __len__(self):
        return self.samples.size

    def __call__(self, y):
        return np.searchsorted(self.samples, y, side="right") / self.samples.size


def ecdf(values) -> ECDF:
    return ECDF(values)


@dataclass(frozen=True)
class KLResult:
    value: float
    bins: int
    epsilon: float
    degenerate: bool = False


def kl_from_probabilities(p, q) -> float:
    """``sum p log(p/q)`` in nats, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(observed, predicted, bins: int | None = None, epsilon: float = 1e-6) -> KLResult:
    """Histogram KL divergence between two empirical distributions.

    Both samples are binned on a shared equal-width grid spanning their
    union, then smoothed additively, ``(c_i + eps) / (n + B eps)``.
    """
    p_s = observed.samples if isinstance(observed, ECDF) else ECDF(observed).samples
    q_s = predicted.samples if isinstance(predicted, ECDF) else ECDF(predicted).samples
    if bins is None:
        bins = math.ceil(math.sqrt(max(p_s.size, q_s.size)))
    lo = min(p_s[0], q_s[0])
    hi = max(p_s[-1], q_s[-1])
    if not hi > lo:
        return KLResult(0.0, bins, epsilon, degenerate=True)
    edges = np.linspace(lo, hi, bins + 1)
    c_p, _ = np.histogram(p_s, edges)
    c_q, _ = np.histogram(q_s, edges)
    p = (c_p + epsilon) / (p_s.size + bins * epsilon)
    q = (c_q + epsilon) / (q_s.size + bins * epsilon)
    # clip the few-ulp negatives that cancellation can produce
    return KLResult(max(kl_from_probabilities(p, q), 0.0), bins, epsilon)


@dataclass(frozen=True)
class KLPoint:
    site: int
    delta: float
    kl: float
    bins: int
    epsilon: float
    seed: int


def kl_ladder(
    response,
    covariates,
    sites: SiteSet,
    site: int,
    deltas: Sequence[float],
    train: TrainConfig = TrainConfig(),
    seeds: Sequence[int] = (0,),
    bins: int | None = None,
    epsilon: float = 1e-6,
    replicates: str = "all",
    guard: str = "warn",
) -> list[KLPoint]:
    """KL between observed and fitted responses at ``site`` for each radius.

    ``replicates`` selects which replicates enter the two empirical
    distributions: ``"all"`` or only the ``"test"`` split.
    """
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("radii must be increasing")
    if replicates not in ("all", "test"):
        raise ValueError(f"unknown replicate selection {replicates!r}")
    out = []
    for seed in seeds:
        spec = SplitSpec(seed=seed)
        for delta in deltas:
            local = assemble_local(response, covariates, sites, site, delta, spec, guard)
            fit = fit_local(local, train, seed)
            idx = local.test if replicates == "test" else np.arange(local.n)
            res = kl_divergence(local.targets[idx], local.predict(fit.params, idx), bins, epsilon)
            out.append(KLPoint(site, float(delta), res.value, res.bins, res.epsilon, seed))
    return out


__all__ = [
    "CIResult", "ECDF", "EmptyNeighborhoodError", "KLPoint", "KLResult", "SubsampleLadder",
    "Z_975", "ci_from_estimates", "ecdf", "kl_divergence", "kl_from_probabilities", "kl_ladder",
    "normal_quantile", "subsample_ci",
]
