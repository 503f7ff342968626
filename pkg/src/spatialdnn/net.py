"""Two-hidden-layer tanh network with L1 weight budgets.

The network computes::

    y = theta_0 + sum_i theta_i tanh( sum_j nu_ij tanh( sum_k ups_jk x_k + ups_j0 ) + nu_i0 )

with both hidden layers of width ``r``. Column 0 of ``nu`` and ``upsilon``
holds the biases. The feasible set is

* ``sum_i |theta_i| <= v2`` (bias included),
* ``sum_j |nu_ij| <= v2`` for every second-layer row,
* ``sum_k |ups_jk| <= v1`` for every first-layer row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class NetworkShape:
    q: int
    r: int

    def __post_init__(self):
        if self.q < 1 or self.r < 1:
            raise ValueError("input dimension and hidden width must be >= 1")

    @property
    def n_params(self) -> int:
        return (self.r + 1) + self.r * (self.r + 1) + self.r * (self.q + 1)


@dataclass(frozen=True)
class NetworkParams:
    theta: np.ndarray = field(repr=False)  # (r+1,)
    nu: np.ndarray = field(repr=False)  # (r, r+1)
    upsilon: np.ndarray = field(repr=False)  # (r, q+1)
    v1: float = 2.0
    v2: float = 2.0

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.upsilon.shape[1] - 1, self.upsilon.shape[0])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.theta, self.nu.ravel(), self.upsilon.ravel()])

    def with_flat(self, vec: np.ndarray) -> "NetworkParams":
        r, q = self.shape.r, self.shape.q
        a = r + 1
        b = a + r * (r + 1)
        return replace(
            self,
            theta=vec[:a].copy(),
            nu=vec[a:b].reshape(r, r + 1).copy(),
            upsilon=vec[b:].reshape(r, q + 1).copy(),
        )

    def is_feasible(self, tol: float = 1e-12) -> bool:
        return (
            np.abs(self.theta).sum() <= self.v2 + tol
            and bool(np.all(np.abs(self.nu).sum(axis=1) <= self.v2 + tol))
            and bool(np.all(np.abs(self.upsilon).sum(axis=1) <= self.v1 + tol))
        )

    def to_csv(self, path) -> None:
        """Flat ``layer,row,col,value`` dump with a shape/budget header."""
        shape = self.shape
        with open(path, "w") as fh:
            fh.write(f"# q={shape.q} r={shape.r} v1={self.v1!r} v2={self.v2!r}\n")
            fh.write("layer,row,col,value\n")
            for j, v in enumerate(self.theta):
                fh.write(f"theta,0,{j},{float(v)!r}\n")
            for name, arr in (("nu", self.nu), ("upsilon", self.upsilon)):
                for i, row in enumerate(arr):
                    for j, v in enumerate(row):
                        fh.write(f"{name},{i},{j},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "NetworkParams":
        with open(path) as fh:
            header = fh.readline()
            if not header.startswith("#"):
                raise ValueError("missing parameter header line")
            meta = dict(tok.split("=") for tok in header[1:].split())
            q, r = int(meta["q"]), int(meta["r"])
            params = cls(
                np.zeros(r + 1), np.zeros((r, r + 1)), np.zeros((r, q + 1)),
                float(meta["v1"]), float(meta["v2"]),
            )
            if fh.readline().strip() != "layer,row,col,value":
                raise ValueError("unexpected column header")
            arrays = {"theta": params.theta[None, :], "nu": params.nu, "upsilon": params.upsilon}
            for line in fh:
                layer, i, j, v = line.rstrip("\n").split(",")
                arrays[layer][int(i), int(j)] = float(v)
        return params


def init_params(shape: NetworkShape, v1: float, v2: float, seed: int) -> NetworkParams:
    """Uniform initialisation on ``[-a, a]`` that already satisfies the budgets."""
    if not (v1 > 1 and v2 > 1):
        raise ValueError("budgets v1 and v2 must both exceed 1")
    q, r = shape.q, shape.r
    a = min(0.5, v1 / (q + 1), v2 / (r + 1))
    rng = np.random.default_rng(seed)
    return NetworkParams(
        rng.uniform(-a, a, r + 1),
        rng.uniform(-a, a, (r, r + 1)),
        rng.uniform(-a, a, (r, q + 1)),
        float(v1),
        float(v2),
    )


def _check_inputs(params, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.shape.q:
        raise ValueError(f"input has {x.shape[-1]} features, network expects {params.shape.q}")
    return x


def _forward_cache(params, x):
    u, nu, th = params.upsilon, params.nu, params.theta
    h1 = np.tanh(x @ u[:, 1:].T + u[:, 0])
    h2 = np.tanh(h1 @ nu[:, 1:].T + nu[:, 0])
    return h1, h2, th[0] + h2 @ th[1:]


def predict(params: NetworkParams, x) -> np.ndarray:
    """Network output for a batch ``x`` of shape ``(b, q)``."""
    x = _check_inputs(params, np.atleast_2d(x))
    return _forward_cache(params, x)[2]


def forward(params: NetworkParams, x) -> float:
    """Network output for a single input vector."""
    x = _check_inputs(params, x)
    if x.ndim != 1:
        raise ValueError("forward takes one input vector; use predict for batches")
    return float(_forward_cache(params, x[None, :])[2][0])


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if len(self.targets) == 0:
            raise ValueError("empty batch")
        if self.inputs.shape[0] != len(self.targets):
            raise ValueError("inputs and targets disagree in length")


def loss(params: NetworkParams, batch: Batch) -> float:
    """Mean squared error over the batch."""
    resid = batch.targets - predict(params, batch.inputs)
    return float(np.mean(resid**2))


def backward(params: NetworkParams, batch: Batch) -> NetworkParams:
    """Exact gradient of ``loss`` laid out like ``params`` (budgets copied over)."""
    x = _check_inputs(params, np.atleast_2d(batch.inputs))
    h1, h2, y = _forward_cache(params, x)
    dy = 2.0 * (y - batch.targets) / len(batch.targets)
    th, nu = params.theta, params.nu

    g_theta = np.concatenate([[dy.sum()], h2.T @ dy])
    dz2 = np.outer(dy, th[1:]) * (1.0 - h2**2)
    g_nu = np.column_stack([dz2.sum(axis=0), dz2.T @ h1])
    dz1 = (dz2 @ nu[:, 1:]) * (1.0 - h1**2)
    g_ups = np.column_stack([dz1.sum(axis=0), dz1.T @ x])
    return replace(params, theta=g_theta, nu=g_nu, upsilon=g_ups)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    p: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, **hyper) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, **hyper)


def adam_step(state: AdamState, params: NetworkParams, grad: NetworkParams):
    """One bias-corrected Adam update. Returns ``(new_state, new_params)``."""
    g = grad.flat()
    p = state.p + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**p)
    v_hat = v / (1.0 - state.beta2**p)
    theta = params.flat() - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, p=p), params.with_flat(theta)


def _rescale_rows(a: np.ndarray, budget: float) -> np.ndarray:
    norms = np.abs(a).sum(axis=-1, keepdims=True)
    scale = np.where(norms > budget, budget / np.where(norms > 0, norms, 1.0), 1.0)
    return a * scale


def project_constraints(params: NetworkParams) -> NetworkParams:
    """Shrink every over-budget row back onto its L1 ball boundary."""
    return replace(
        params,
        theta=_rescale_rows(params.theta, params.v2),
        nu=_rescale_rows(params.nu, params.v2),
        upsilon=_rescale_rows(params.upsilon, params.v1),
    )


def lipschitz_bound(r: int, p: int, gamma_n: int, v1: float, v2: float) -> float:
    """Parameter-space Lipschitz constant ``(v1 v2 ((r+1)(p+1)G + (p+1)G))^2``."""
    if min(p, gamma_n, v1, v2) <= 0 or r < 0:
        raise ValueError("arguments must be positive")
    m = (p + 1) * gamma_n
    return (v1 * v2 * ((r + 1) * m + m)) ** 2


def param_distance_sq(a: NetworkParams, b: NetworkParams) -> float:
    return float(np.sum((a.flat() - b.flat()) ** 2))


def default_width(n: int) -> int:
    """Hidden width ``ceil(n^0.3)``."""
    return max(1, math.ceil(n**0.3))
