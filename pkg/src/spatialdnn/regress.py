"""Localized per-site regression with the constrained tanh network.

For a target site the inputs of replicate ``t`` are the responses at the
neighbouring sites (target excluded, ascending site index) followed by all
covariates at the neighbourhood sites (target included), ordered by
covariate then site index. Replicates are the iid unit, so train, validation
and test splits are drawn over replicates.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import net
from .grf import MaternParams, child_seed, simulate_dataset
from .sampling import Neighborhood, SamplingDesign, SiteSet, build_sites, neighborhood

log = logging.getLogger(__name__)


class EmptyNeighborhoodError(ValueError):
    pass


class DimensionalityGuardError(ValueError):
    pass


class DimensionalityGuardWarning(UserWarning):
    pass


class TrainingDivergedError(ArithmeticError):
    def __init__(self, epoch):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.70
    val: float = 0.20
    test: float = 0.10
    seed: int = 0

    def __post_init__(self):
        fr = (self.train, self.val, self.test)
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError("split fractions must be positive and sum to 1")


def split(n: int, spec: SplitSpec = SplitSpec(), ids=None):
    """Assign replicates to train/val/test.

    Sizes are ``round(train*n)``, ``round(val*n)`` and the remainder. Each
    replicate id gets a hashed key from ``spec.seed`` and the ids are ranked
    by key, so the assignment follows the ids rather than row positions.
    Returned arrays hold row positions ordered by id.

    Parameters
    ----------
    n : int
        Number of replicates.
    ids : sequence of int, optional
        Replicate identifiers for rows ``0..n-1``; defaults to ``range(n)``.
    """
    n_train = int(round(spec.train * n))
    n_val = int(round(spec.val * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"n={n} too small for a nonempty train/val/test split")
    ids = np.arange(n) if ids is None else np.asarray(ids, dtype=np.int64)
    if ids.shape != (n,) or np.unique(ids).size != n:
        raise ValueError("replicate ids must be n distinct integers")
    keys = np.array([child_seed(spec.seed, "split", int(i)) for i in ids], dtype=np.uint64)
    ranked = np.argsort(keys, kind="stable")

    def by_id(pos):
        return pos[np.argsort(ids[pos], kind="stable")]

    return (
        by_id(ranked[:n_train]),
        by_id(ranked[n_train:n_train + n_val]),
        by_id(ranked[n_train + n_val:]),
    )


@dataclass(frozen=True)
class MinMaxScaler:
    """Affine map of each column onto ``[-1, 1]``; constant columns map to 0."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, a: np.ndarray) -> "MinMaxScaler":
        a = np.asarray(a, dtype=float)
        return cls(a.min(axis=0), a.max(axis=0))

    @property
    def _span(self):
        span = self.hi - self.lo
        return np.where(span > 0, span, 1.0)

    def transform(self, a, clamp=False):
        z = 2.0 * (np.asarray(a, dtype=float) - self.lo) / self._span - 1.0
        z = np.where(self.hi > self.lo, z, 0.0)
        return np.clip(z, -1.0, 1.0) if clamp else z

    def inverse(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(self.hi > self.lo, (z + 1.0) * 0.5 * self._span + self.lo, self.lo)


@dataclass(frozen=True)
class LocalDataset:
    site: int
    neighborhood: Neighborhood
    covariate_sites: Neighborhood
    inputs: np.ndarray = field(repr=False)  # (n, q) raw
    targets: np.ndarray = field(repr=False)  # (n,) raw
    train: np.ndarray = field(repr=False)
    val: np.ndarray = field(repr=False)
    test: np.ndarray = field(repr=False)
    x_scaler: MinMaxScaler = field(repr=False)
    y_scaler: MinMaxScaler = field(repr=False)
    guard_ok: bool = True

    @property
    def q(self) -> int:
        return self.inputs.shape[1]

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def scaled_inputs(self, idx=None):
        """Inputs on ``[-1, 1]``; rows outside the training split are clamped."""
        idx = np.arange(self.n) if idx is None else np.asarray(idx)
        return self.x_scaler.transform(self.inputs[idx], clamp=True)

    def scaled_targets(self, idx=None):
        idx = np.arange(self.n) if idx is None else np.asarray(idx)
        return self.y_scaler.transform(self.targets[idx][:, None])[:, 0]

    def batch(self, idx) -> net.Batch:
        return net.Batch(self.scaled_inputs(idx), self.scaled_targets(idx))

    def predict(self, params: net.NetworkParams, idx=None) -> np.ndarray:
        """Predictions in original response units."""
        z = net.predict(params, self.scaled_inputs(idx))
        return self.y_scaler.inverse(z[:, None])[:, 0]


def check_guard(q: int, site_count: int, n: int, policy: str = "raise") -> bool:
    """Require ``q < max(N_n, n)``; ``policy`` picks raise, warn or ignore."""
    bound = max(site_count, n)
    if q < bound:
        return True
    msg = f"input dimension q={q} is not below max(N_n={site_count}, n={n})={bound}"
    if policy == "raise":
        raise DimensionalityGuardError(msg)
    if policy == "warn":
        warnings.warn(msg, DimensionalityGuardWarning, stacklevel=3)
    elif policy != "ignore":
        raise ValueError(f"unknown guard policy {policy!r}")
    return False


def assemble_local(
    response: np.ndarray,
    covariates: np.ndarray,
    sites: SiteSet,
    center: int,
    delta: float,
    split_spec: SplitSpec = SplitSpec(),
    guard: str = "raise",
    replicate_ids=None,
) -> LocalDataset:
    """Build the design matrix for one target site.

    Parameters
    ----------
    response : array, shape (n, N)
    covariates : array, shape (p, n, N)
        May have ``p = 0``.
    replicate_ids : sequence of int, optional
        Identifiers that pin each row to its split; see ``split``.
    """
    response = np.asarray(response, dtype=float)
    covariates = np.asarray(covariates, dtype=float).reshape(-1, *response.shape)
    n, n_sites = response.shape
    if n_sites != sites.count:
        raise ValueError("response columns do not match the site set")
    resp_nb = neighborhood(sites, center, delta, include_center=False)
    if resp_nb.gamma_n == 0:
        raise EmptyNeighborhoodError(
            f"no neighbour of site {center} within delta={delta}; spacing is {sites.design.eta_n}"
        )
    cov_nb = neighborhood(sites, center, delta, include_center=True)
    blocks = [response[:, resp_nb.member_indices]]
    blocks += [covariates[k][:, cov_nb.member_indices] for k in range(covariates.shape[0])]
    inputs = np.concatenate(blocks, axis=1)
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(response[:, center]))):
        raise ValueError(f"non-finite values in the data around site {center}")
    ok = check_guard(inputs.shape[1], n_sites, n, guard)
    tr, va, te = split(n, split_spec, replicate_ids)
    targets = response[:, center].copy()
    return LocalDataset(
        site=int(center),
        neighborhood=resp_nb,
        covariate_sites=cov_nb,
        inputs=inputs,
        targets=targets,
        train=tr,
        val=va,
        test=te,
        x_scaler=MinMaxScaler.fit(inputs[tr]),
        y_scaler=MinMaxScaler.fit(targets[tr][:, None]),
        guard_ok=ok,
    )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 16
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    v1: float = 2.0
    v2: float = 2.0
    width: int | None = None  # None -> ceil(n^0.3)


@dataclass
class FitResult:
    params: net.NetworkParams = field(repr=False)
    train_curve: np.ndarray = field(repr=False)
    val_curve: np.ndarray = field(repr=False)
    mspe: float
    best_epoch: int
    epochs_run: int
    seed: int


def fit_local(local: LocalDataset, config: TrainConfig = TrainConfig(), seed: int = 0,
              shape: net.NetworkShape | None = None) -> FitResult:
    """Train on the local dataset and keep the best-validation snapshot."""
    if shape is None:
        width = config.width if config.width is not None else net.default_width(local.n)
        shape = net.NetworkShape(local.q, width)
    params = net.init_params(shape, config.v1, config.v2, child_seed(seed, "init", local.site))
    state = net.AdamState.fresh(shape.n_params, alpha=config.alpha, beta1=config.beta1,
                                beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(child_seed(seed, "shuffle", local.site))
    x_tr, y_tr = local.scaled_inputs(local.train), local.scaled_targets(local.train)
    val_batch = local.batch(local.val)

    best, best_val, best_epoch = params, math.inf, -1
    train_curve = np.empty(config.epochs)
    val_curve = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(len(y_tr))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            grad = net.backward(params, net.Batch(x_tr[idx], y_tr[idx]))
            state, params = net.adam_step(state, params, grad)
            params = net.project_constraints(params)
        train_curve[epoch] = net.loss(params, net.Batch(x_tr, y_tr))
        val_curve[epoch] = net.loss(params, val_batch)
        if not (np.isfinite(train_curve[epoch]) and np.isfinite(val_curve[epoch])):
            raise TrainingDivergedError(epoch)
        if val_curve[epoch] < best_val:
            best, best_val, best_epoch = params, val_curve[epoch], epoch
    return FitResult(best, train_curve, val_curve, mspe(best, local, local.test), best_epoch,
                     config.epochs, seed)


def mspe(params: net.NetworkParams, local: LocalDataset, test_idx) -> float:
    """Mean squared prediction error in original response units."""
    test_idx = np.asarray(test_idx)
    if test_idx.size == 0:
        raise ValueError("empty test set")
    resid = local.targets[test_idx] - local.predict(params, test_idx)
    return float(np.mean(resid**2))


@dataclass(frozen=True)
class DesignEntry:
    lambda_n: float
    n: int
    eta_n: float


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    matern: MaternParams
    designs: tuple[DesignEntry, ...]
    deltas: tuple[float, ...] = (0.3, 0.6, 0.8)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    train: TrainConfig = TrainConfig()
    split_fractions: tuple[float, float, float] = (0.70, 0.20, 0.10)
    dimension: int = 2
    target_sites: int = 5
    response_noise_sd: float = 0.0
    guard: str = "warn"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ValueError("delta values must be strictly increasing")
        if not self.designs or not self.deltas or not self.seeds:
            raise ValueError("scenario needs at least one design, delta and seed")


# the four Matern settings of the simulation study; designs follow eta = 1/(lambda + 2)
STUDY_DESIGNS = (DesignEntry(4, 20, 0.16), DesignEntry(5, 35, 0.14), DesignEntry(6, 50, 0.12))
STUDY_SCENARIOS = {
    f"scenario{i + 1}": MaternParams(1.0, 0.1, kappa) for i, kappa in enumerate((0.5, 1.0, 1.5, 2.0))
}


@dataclass(frozen=True)
class ScenarioRow:
    scenario: str
    sigma2: float
    phi: float
    kappa: float
    lambda_n: float
    n: int
    eta_n: float
    delta_n: float
    gamma_n: int
    mspe_mean: float
    mspe_sd: float
    seed_count: int

    FIELDS = ("scenario", "sigma2", "phi", "kappa", "lambda_n", "n", "eta_n", "delta_n",
              "gamma_n", "mspe_mean", "mspe_sd", "seed_count")


def _fit_task(args):
    data_x, data_y, sites, site, delta, spec, train, guard, seed = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DimensionalityGuardWarning)
        local = assemble_local(data_y, data_x, sites, site, delta, spec, guard)
    return local.neighborhood.gamma_n, fit_local(local, train, seed).mspe


def run_scenario(config: ScenarioConfig, jobs: int = 1) -> list[ScenarioRow]:
    """Simulate and fit every (design, delta) cell; one row per cell."""
    rows = []
    for entry in config.designs:
        design = SamplingDesign.box(config.dimension, entry.lambda_n, entry.eta_n)
        sites = build_sites(design)
        targets = sites.central_sites(config.target_sites)
        tasks = []
        for seed in config.seeds:
            data = simulate_dataset(sites, config.matern, entry.n, seed,
                                    response_noise_sd=config.response_noise_sd)
            spec = SplitSpec(*config.split_fractions, seed=seed)
            for delta in config.deltas:
                for site in targets:
                    tasks.append(((delta, seed, int(site)),
                                  (data.covariates, data.response, sites, int(site), delta, spec,
                                   config.train, config.guard, seed)))
        if config.guard == "warn":
            for delta in config.deltas:
                q = _input_dim(sites, int(targets[0]), delta)
                check_guard(q, sites.count, entry.n, "warn")
        results = _map(_fit_task, [t[1] for t in tasks], jobs)
        by_delta: dict[float, list] = {d: [] for d in config.deltas}
        for (delta, _seed, _site), res in zip([t[0] for t in tasks], results):
            by_delta[delta].append(res)
        for delta in config.deltas:
            gammas, errs = zip(*by_delta[delta])
            errs = np.asarray(errs)
            rows.append(ScenarioRow(
                config.name, config.matern.sigma2, config.matern.phi, config.matern.nu,
                entry.lambda_n, entry.n, entry.eta_n, delta, int(gammas[0]),
                float(errs.mean()), float(errs.std(ddof=1)) if errs.size > 1 else 0.0,
                len(config.seeds),
            ))
            log.info("%s lambda=%s n=%s eta=%s delta=%s mspe=%.6g", config.name, entry.lambda_n,
                     entry.n, entry.eta_n, delta, errs.mean())
    return rows


def _input_dim(sites: SiteSet, center: int, delta: float, p: int = 10) -> int:
    g_resp = neighborhood(sites, center, delta, include_center=False).gamma_n
    g_cov = neighborhood(sites, center, delta, include_center=True).gamma_n
    return g_resp + p * g_cov


def _map(fn, items: Sequence, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
