"""Lattice sampling designs on inflated box regions.

Sites are the points of the scaled lattice ``eta * diag(e) * Z^d`` that fall
inside ``lambda * R0``, where ``R0`` is a box that is open at the lower end
and closed at the upper end on every axis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

LATTICE_TOL = 1e-9


class EmptySiteSetError(ValueError):
    """No lattice point falls inside the sampling region."""


@dataclass(frozen=True)
class PrototypeRegion:
    """Axis-aligned box ``prod_k (lower_k, upper_k]``."""

    dimension: int
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not self.lower:
            object.__setattr__(self, "lower", (-0.5,) * self.dimension)
        if not self.upper:
            object.__setattr__(self, "upper", (0.5,) * self.dimension)
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("bounds must have one entry per axis")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"box bound pair ({lo}, {hi}] is empty")

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))


@dataclass(frozen=True)
class SamplingDesign:
    prototype: PrototypeRegion
    lambda_n: float
    eta_n: float
    increments: tuple[float, ...] = ()

    def __post_init__(self):
        d = self.prototype.dimension
        if not self.increments:
            object.__setattr__(self, "increments", (1.0,) * d)
        object.__setattr__(self, "increments", tuple(float(e) for e in self.increments))
        if len(self.increments) != d:
            raise ValueError("need one increment per axis")
        if any(e <= 0 for e in self.increments):
            raise ValueError("increments must be strictly positive")
        if not (self.lambda_n > 0 and self.eta_n > 0):
            raise ValueError("lambda_n and eta_n must be positive")
        if not self.eta_n < self.lambda_n:
            raise ValueError("eta_n must be smaller than lambda_n")

    @classmethod
    def box(cls, d: int, lambda_n: float, eta_n: float, increments=()) -> "SamplingDesign":
        """Design on the default unit box ``(-1/2, 1/2]^d``."""
        return cls(PrototypeRegion(d), float(lambda_n), float(eta_n), tuple(increments))

    @property
    def dimension(self) -> int:
        return self.prototype.dimension

    @property
    def spacing(self) -> np.ndarray:
        """Per-axis lattice spacing ``eta * e_k``."""
        return self.eta_n * np.asarray(self.increments)


@dataclass(frozen=True)
class SiteSet:
    design: SamplingDesign
    sites: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return self.sites.shape[0]

    def __len__(self) -> int:
        return self.count

    def distances_from(self, index: int) -> np.ndarray:
        return np.linalg.norm(self.sites - self.sites[index], axis=1)

    def nearest(self, point: Sequence[float]) -> int:
        """Index of the site closest to ``point`` (lowest index on ties)."""
        d = np.linalg.norm(self.sites - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def central_sites(self, k: int) -> np.ndarray:
        """The ``k`` sites nearest the region centroid, by distance then index."""
        center = 0.5 * self.design.lambda_n * (
            np.asarray(self.design.prototype.lower) + np.asarray(self.design.prototype.upper)
        )
        d = np.round(np.linalg.norm(self.sites - center, axis=1), 12)
        order = np.lexsort((np.arange(self.count), d))
        return np.sort(order[:k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site_index"] + [f"x{k + 1}" for k in range(self.design.dimension)])
            for i, s in enumerate(self.sites):
                w.writerow([i] + [repr(float(v)) for v in s])


@dataclass(frozen=True)
class Neighborhood:
    center_index: int
    delta_n: float
    member_indices: np.ndarray
    include_center: bool

    @property
    def gamma_n(self) -> int:
        return len(self.member_indices)

    def pairs(self) -> list[tuple[int, int]]:
        return [(self.center_index, int(m)) for m in self.member_indices]


def write_neighborhoods(path, neighborhoods: Sequence[Neighborhood]) -> None:
    """Write ``center,member`` pairs for a collection of neighborhoods."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["center", "member"])
        for nb in neighborhoods:
            w.writerows(nb.pairs())


def build_sites(design: SamplingDesign) -> SiteSet:
    """Enumerate lattice points of ``design`` inside the inflated region.

    Raises
    ------
    EmptySiteSetError
        If the lattice is too coarse for any point to fall inside.
    """
    lo = design.lambda_n * np.asarray(design.prototype.lower)
    hi = design.lambda_n * np.asarray(design.prototype.upper)
    step = design.spacing
    axes = []
    for k in range(design.dimension):
        # integer multipliers m with lo < m*step <= hi, with snapping tolerance
        m_lo = math.floor(lo[k] / step[k]) - 1
        m_hi = math.ceil(hi[k] / step[k]) + 1
        m = np.arange(m_lo, m_hi + 1)
        x = m * step[k]
        keep = (x > lo[k] + LATTICE_TOL) & (x <= hi[k] + LATTICE_TOL)
        axes.append(x[keep])
    if any(a.size == 0 for a in axes):
        raise EmptySiteSetError(
            f"no lattice point of spacing {design.eta_n} inside region inflated by {design.lambda_n}"
        )
    grid = np.meshgrid(*axes, indexing="ij")
    # meshgrid with ij indexing already yields lexicographic order
    sites = np.stack([g.ravel() for g in grid], axis=1)
    return SiteSet(design, sites)


def neighborhood(sites: SiteSet, center: int, delta: float, include_center: bool) -> Neighborhood:
    """Sites within Euclidean distance ``delta`` (inclusive) of ``sites[center]``."""
    if not 0 <= center < sites.count:
        raise IndexError(f"center index {center} out of range for {sites.count} sites")
    if not delta > 0:
        raise ValueError("delta must be positive")
    dist = sites.distances_from(center)
    members = np.flatnonzero(dist <= delta + LATTICE_TOL)
    if not include_center:
        members = members[members != center]
    return Neighborhood(center, float(delta), members, include_center)


def refine(design: SamplingDesign, level: int) -> SamplingDesign:
    """Halve the grid spacing ``level`` times."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level == 0:
        return design
    return replace(design, eta_n=design.eta_n / 2**level)


def growth_ratio(design: SamplingDesign, site_count: int) -> float:
    """``|inv(Delta) R0| (lambda/eta)^d / N``; stays of order one for box prototypes."""
    if site_count < 1:
        raise ValueError("site_count must be at least 1")
    vol = design.prototype.volume / float(np.prod(design.increments))
    return vol * (design.lambda_n / design.eta_n) ** design.dimension / site_count


def study_spacing(lambda_n: float, d: int) -> float:
    """Initial spacing ``1/(lambda + d)`` used by the simulation studies."""
    return 1.0 / (lambda_n + d)


@dataclass(frozen=True)
class RegimeParams:
    n: int
    psi: float
    beta: float
    r: int
    gamma_n: int
    v1: float
    v2: float


def validate_regime(params: RegimeParams) -> list[str]:
    """Finite-sample check of the asymptotic growth conditions.

    Each rate condition is tested as an inequality at the given ``n``.
    Returns the names of the violated conditions; an empty list means the
    design is within the regime.
    """
    p = params
    out = []
    n = float(p.n)
    if p.gamma_n > n**p.psi:
        out.append("gamma_n <= n^psi")
    if p.r > n**p.beta:
        out.append("r <= n^beta")
    if not p.psi + p.beta < 1:
        out.append("psi+beta<1")
    if n <= 1 or p.v1 * p.v2 > math.sqrt(math.log(n)):
        out.append("v1*v2 <= sqrt(log n)")
    if not min(p.v1, p.v2) > 1:
        out.append("min(v1,v2)>1")
    return out
