"""Matern covariance and seeded Gaussian random field simulation.

Seeding scheme
--------------
Every replicate draws its standard normals from its own ``numpy`` PCG64
generator. The generator seed is the first 8 bytes (little endian) of
``blake2b(f"{GENERATOR_VERSION}|{seed}|{label}|{replicate}")``, so a
replicate's values do not depend on how many other replicates are drawn
or in which order.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .bessel import SUPPORTED_ORDERS, bessel_k
from .sampling import SiteSet

GENERATOR_VERSION = "pcg64-blake2b-v1"
JITTER_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)
N_COVARIATES = 10


class IndefiniteMatrixError(linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class MaternParams:
    """Sill ``sigma2``, range ``phi`` and smoothness ``nu``."""

    sigma2: float
    phi: float
    nu: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.phi > 0 and self.nu > 0):
            raise ValueError("Matern parameters must all be strictly positive")


def matern_cov(h, params: MaternParams) -> float:
    """Matern covariance at lag ``h``; returns ``sigma2`` exactly at ``h = 0``."""
    h = float(h)
    if not math.isfinite(h):
        raise ValueError("lag must be finite")
    if h < 0:
        raise ValueError("lag must be nonnegative")
    if h == 0:
        return params.sigma2
    nu = params.nu
    u = math.sqrt(2.0 * nu) * h / params.phi
    # K_nu(u) underflows long before the product matters
    if u > 700:
        return 0.0
    # below this the correlation is 1 to well under 1e-9 and u**nu * K_nu(u)
    # would form inf * 0
    if u < 1e-12:
        return params.sigma2
    return params.sigma2 * 2.0 ** (1.0 - nu) / math.gamma(nu) * u**nu * bessel_k(nu, u)


def matern_closed_form(h, params: MaternParams) -> float:
    """Elementary form for half-integer smoothness (0.5, 1.5, 2.5)."""
    a = math.sqrt(2.0 * params.nu) * h / params.phi
    if params.nu == 0.5:
        poly = 1.0
    elif params.nu == 1.5:
        poly = 1.0 + a
    elif params.nu == 2.5:
        poly = 1.0 + a + a * a / 3.0
    else:
        raise ValueError("closed form only for nu in {0.5, 1.5, 2.5}")
    return params.sigma2 * poly * math.exp(-a)


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray = field(repr=False)
    sigma2: float

    @property
    def order(self) -> int:
        return self.entries.shape[0]


def build_cov_matrix(sites: SiteSet, params: MaternParams) -> CovarianceMatrix:
    if params.nu not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported smoothness {params.nu}; expected one of {SUPPORTED_ORDERS}")
    dist = cdist(sites.sites, sites.sites)
    # evaluate once per distinct lag; lattice distances repeat heavily
    lags, inverse = np.unique(np.round(dist, 12), return_inverse=True)
    values = np.array([matern_cov(h, params) for h in lags])
    c = values[inverse].reshape(dist.shape)
    np.fill_diagonal(c, params.sigma2)
    return CovarianceMatrix(0.5 * (c + c.T), params.sigma2)


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray = field(repr=False)
    jitter: float


def cholesky_with_jitter(cov) -> CholeskyFactor:
    """Lower Cholesky factor, adding diagonal jitter only when needed.

    The jitter escalates through ``JITTER_LADDER`` times the sill.
    """
    if isinstance(cov, CovarianceMatrix):
        a, scale = cov.entries, cov.sigma2
    else:
        a = np.asarray(cov, dtype=float)
        scale = float(np.mean(np.diag(a)))
    eye = np.eye(a.shape[0])
    for j in (0.0,) + JITTER_LADDER:
        try:
            lower = linalg.cholesky(a + j * scale * eye, lower=True, check_finite=True)
        except linalg.LinAlgError:
            continue
        return CholeskyFactor(lower, j * scale)
    raise IndefiniteMatrixError(
        f"matrix not positive definite even with jitter {JITTER_LADDER[-1]} x {scale}"
    )


def child_seed(seed: int, label: str, replicate: int) -> int:
    key = f"{GENERATOR_VERSION}|{int(seed)}|{label}|{int(replicate)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def replicate_rng(seed: int, label: str, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed(seed, label, replicate)))


@dataclass(frozen=True)
class FieldRealization:
    values: np.ndarray = field(repr=False)  # (n, N)
    seed: int
    label: str = "field"

    @property
    def replicate_count(self) -> int:
        return self.values.shape[0]

    @property
    def site_count(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "site_index", "value"])
            for t, row in enumerate(self.values):
                for i, v in enumerate(row):
                    w.writerow([t, i, repr(float(v))])


def sample_from_factor(factor: CholeskyFactor, n: int, seed: int, label: str = "field") -> FieldRealization:
    if n < 1:
        raise ValueError("need at least one replicate")
    m = factor.lower.shape[0]
    out = np.empty((n, m))
    # one matrix-vector product per replicate: a batched product may block
    # differently for different n and change the last bits
    for t in range(n):
        out[t] = factor.lower @ replicate_rng(seed, label, t).standard_normal(m)
    return FieldRealization(out, int(seed), label)


def sample_grf(sites: SiteSet, params: MaternParams, n: int, seed: int, label: str = "field") -> FieldRealization:
    """Draw ``n`` independent zero-mean replicates of the field over ``sites``."""
    factor = cholesky_with_jitter(build_cov_matrix(sites, params))
    return sample_from_factor(factor, n, seed, label)


def response_from_covariates(covariates: np.ndarray) -> np.ndarray:
    """``Y = sum_k k X_k`` over the leading covariate axis (shape ``(p, n, N)``)."""
    covariates = np.asarray(covariates, dtype=float)
    y = np.zeros(covariates.shape[1:])
    for k, x in enumerate(covariates, start=1):
        y = y + k * x
    return y


@dataclass(frozen=True)
class SimulatedDataset:
    """``p`` covariate fields and the response, all shaped ``(n, N)``."""

    covariates: np.ndarray = field(repr=False)  # (p, n, N)
    response: np.ndarray = field(repr=False)  # (n, N)
    seed: int
    noise_sd: float = 0.0

    @property
    def p(self) -> int:
        return self.covariates.shape[0]

    @property
    def replicate_count(self) -> int:
        return self.response.shape[0]

    @property
    def site_count(self) -> int:
        return self.response.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "replicate", "site_index", "value"])
            names = [f"X{k + 1}" for k in range(self.p)] + ["Y"]
            for name, arr in zip(names, list(self.covariates) + [self.response]):
                for t, row in enumerate(arr):
                    for i, v in enumerate(row):
                        w.writerow([name, t, i, repr(float(v))])


def simulate_dataset(
    sites: SiteSet,
    params: MaternParams,
    n: int,
    seed: int,
    p: int = N_COVARIATES,
    response_noise_sd: float = 0.0,
) -> SimulatedDataset:
    """Ten independent covariate fields and their weighted-sum response.

    Each covariate ``X_k`` uses its own seed stream ``"X{k}"``. The response
    is noiseless unless ``response_noise_sd > 0``, in which case iid normal
    noise from stream ``"noise"`` is added.
    """
    factor = cholesky_with_jitter(build_cov_matrix(sites, params))
    x = np.stack([sample_from_factor(factor, n, seed, f"X{k + 1}").values for k in range(p)])
    y = response_from_covariates(x)
    if response_noise_sd > 0:
        noise = np.stack([replicate_rng(seed, "noise", t).standard_normal(sites.count) for t in range(n)])
        y = y + response_noise_sd * noise
    return SimulatedDataset(x, y, int(seed), float(response_noise_sd))
