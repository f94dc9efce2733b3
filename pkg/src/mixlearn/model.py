"""Core data types, synthetic samplers, residual projection, recovery scoring."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._rng import stream

__all__ = [
    "MlrModel",
    "HyperplaneModel",
    "LabeledSample",
    "Samples",
    "ZeroMeanGmm",
    "RecoveryReport",
    "MlrSampler",
    "HyperplaneSampler",
    "sample_mlr",
    "sample_hyperplanes",
    "residual_gmm",
    "residual_project",
    "score_recovery",
]


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: float


class Samples(NamedTuple):
    """Batch view of labeled samples: X is n x d, y is length n."""

    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return LabeledSample(self.x[i], float(self.y[i]))
        return Samples(self.x[i], self.y[i])


@dataclass
class MlrModel:
    """Mixture of linear regressions: y = <w_i, x> + noise, x standard normal."""

    weights: np.ndarray
    regressors: np.ndarray  # k x d, one row per component
    noise_rate: float = 0.0
    norm_bound: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.regressors = np.atleast_2d(np.asarray(self.regressors, dtype=float))
        if self.weights.ndim != 1 or len(self.weights) != len(self.regressors):
            raise ValueError("weights and regressors disagree on component count")
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive and sum to 1")
        if self.noise_rate < 0:
            raise ValueError("noise rate must be nonnegative")
        norms = np.linalg.norm(self.regressors, axis=1)
        if np.any(norms > self.norm_bound + 1e-12):
            warnings.warn(
                "regressor norm exceeds %.3g; accuracy degrades polynomially"
                % self.norm_bound,
                stacklevel=2,
            )

    @property
    def k(self):
        return len(self.weights)

    @property
    def d(self):
        return self.regressors.shape[1]

    @property
    def p_min(self):
        return float(self.weights.min())

    @property
    def separation(self):
        if self.k == 1:
            return math.inf
        diffs = self.regressors[:, None, :] - self.regressors[None, :, :]
        dist = np.linalg.norm(diffs, axis=-1)
        dist[np.diag_indices(self.k)] = math.inf
        sep = float(dist.min())
        if sep <= 0:
            raise ValueError("coincident regressors")
        return sep


@dataclass
class HyperplaneModel:
    """Mixture of degenerate Gaussians N(0, I - v_i v_i^T); v_i defined up to sign."""

    weights: np.ndarray
    directions: np.ndarray  # k x d unit rows

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.directions = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive and sum to 1")
        norms = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors")

    @property
    def k(self):
        return len(self.weights)

    @property
    def d(self):
        return self.directions.shape[1]

    @property
    def p_min(self):
        return float(self.weights.min())

    @property
    def separation(self):
        if self.k == 1:
            return math.inf
        best = math.inf
        for i in range(self.k):
            for j in range(i + 1, self.k):
                vi, vj = self.directions[i], self.directions[j]
                best = min(
                    best,
                    float(np.linalg.norm(vi - vj)),
                    float(np.linalg.norm(vi + vj)),
                )
        if best <= 0:
            raise ValueError("coincident directions")
        return best

    def projector(self, i: int) -> np.ndarray:
        v = self.directions[i]
        return np.eye(self.d) - np.outer(v, v)


@dataclass
class ZeroMeanGmm:
    """Zero-mean univariate Gaussian mixture: weights + component std devs."""

    weights: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive and sum to 1")
        if np.any(self.sigmas < 0):
            raise ValueError("negative standard deviation")

    @property
    def sigma_min(self):
        return float(self.sigmas.min())

    @property
    def sigma_max(self):
        return float(self.sigmas.max())

    @property
    def p_min(self):
        return float(self.weights.min())

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for w, s in zip(self.weights, self.sigmas):
            if s > 0:
                out += w * np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        return rng.standard_normal(n) * self.sigmas[comp]


@dataclass
class RecoveryReport:
    permutation: np.ndarray
    errors: np.ndarray
    max_error: float
    runtime: float = 0.0
    sample_count: int = 0
    flags: list = field(default_factory=list)


def sample_mlr(model: MlrModel, n: int, seed: int, *path: int) -> Samples:
    """Draw n labeled samples; deterministic given (seed, path)."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = stream(seed, *path)
    comp = rng.choice(model.k, size=n, p=model.weights)
    x = rng.standard_normal((n, model.d))
    y = np.einsum("nd,nd->n", x, model.regressors[comp])
    if model.noise_rate > 0:
        y = y + model.noise_rate * rng.standard_normal(n)
    return Samples(x, y)


def sample_hyperplanes(model: HyperplaneModel, n: int, seed: int, *path: int) -> np.ndarray:
    """Draw n points, each from N(0, I - v_i v_i^T) for a weighted random i."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = stream(seed, *path)
    comp = rng.choice(model.k, size=n, p=model.weights)
    g = rng.standard_normal((n, model.d))
    # project out the chosen direction: x = g - <g, v> v
    v = model.directions[comp]
    dots = np.einsum("nd,nd->n", g, v)
    return g - dots[:, None] * v


class MlrSampler:
    """Deterministic labeled-sample source for the learning loops.

    ``draw(n, *path)`` always returns the same batch for the same
    (seed, path).  Peel filters are applied by rejection resampling, so the
    stream behaves like the conditioned mixture.
    """

    def __init__(self, model: MlrModel, seed: int, filters=None):
        self.model = model
        self.seed = int(seed)
        self.filters = list(filters or [])

    @property
    def d(self):
        return self.model.d

    def with_filter(self, predicate) -> "MlrSampler":
        """New sampler keeping only samples with predicate(x, y) true."""
        return MlrSampler(self.model, self.seed, self.filters + [predicate])

    def draw(self, n: int, *path: int) -> Samples:
        xs, ys, got = [], [], 0
        for attempt in range(64):
            batch = sample_mlr(self.model, max(n - got, 64) + 64,
                               self.seed, *path, attempt)
            keep = np.ones(len(batch), dtype=bool)
            for f in self.filters:
                keep &= f(batch.x, batch.y)
            xs.append(batch.x[keep])
            ys.append(batch.y[keep])
            got += int(keep.sum())
            if got >= n:
                x = np.concatenate(xs)[:n]
                y = np.concatenate(ys)[:n]
                return Samples(x, y)
        raise ValueError("peel filters reject nearly every sample")


class HyperplaneSampler:
    """Deterministic point source for hyperplane mixtures, with peel filters."""

    def __init__(self, model: HyperplaneModel, seed: int, filters=None):
        self.model = model
        self.seed = int(seed)
        self.filters = list(filters or [])

    @property
    def d(self):
        return self.model.d

    def with_filter(self, predicate) -> "HyperplaneSampler":
        return HyperplaneSampler(self.model, self.seed, self.filters + [predicate])

    def draw(self, n: int, *path: int) -> np.ndarray:
        xs, got = [], 0
        for attempt in range(64):
            batch = sample_hyperplanes(self.model, max(n - got, 64) + 64,
                                       self.seed, *path, attempt)
            keep = np.ones(len(batch), dtype=bool)
            for f in self.filters:
                keep &= f(batch)
            xs.append(batch[keep])
            got += int(keep.sum())
            if got >= n:
                return np.concatenate(xs)[:n]
        raise ValueError("peel filters reject nearly every sample")


def residual_gmm(model: MlrModel, a: np.ndarray) -> ZeroMeanGmm:
    """Exact law of y - <a, x>: component std devs sqrt(|w_i - a|^2 + noise^2)."""
    a = np.asarray(a, dtype=float)
    if a.shape != (model.d,):
        raise ValueError("dimension mismatch")
    dist = np.linalg.norm(model.regressors - a[None, :], axis=1)
    sigmas = np.sqrt(dist**2 + model.noise_rate**2)
    return ZeroMeanGmm(model.weights.copy(), sigmas)


def residual_project(samples: Samples, a: np.ndarray) -> np.ndarray:
    """Per-sample residual y - <a, x>, order preserving."""
    a = np.asarray(a, dtype=float)
    if samples.x.shape[1] != len(a):
        raise ValueError("dimension mismatch")
    return samples.y - samples.x @ a


def _has_perfect_matching(adj: np.ndarray) -> bool:
    rows, cols = linear_sum_assignment(np.where(adj, 0.0, 1.0))
    return bool(adj[rows, cols].all())


def score_recovery(estimates, truth, signed: bool = False, runtime: float = 0.0,
                   sample_count: int = 0) -> RecoveryReport:
    """Bottleneck matching of estimates to ground truth components."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    ref = truth.directions if hasattr(truth, "directions") else truth.regressors
    if est.shape != ref.shape:
        raise ValueError("estimate list must have one vector per component")
    dist = np.linalg.norm(est[:, None, :] - ref[None, :, :], axis=-1)
    if signed:
        dist = np.minimum(dist, np.linalg.norm(est[:, None, :] + ref[None, :, :], axis=-1))
    # bottleneck objective: find the smallest threshold admitting a perfect
    # matching, then assign under it (binary search over the distinct costs)
    values = np.unique(dist)
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(dist <= values[mid]):
            hi = mid
        else:
            lo = mid + 1
    thr = values[lo]
    capped = np.where(dist <= thr, dist, 1e9)
    rows, cols = linear_sum_assignment(capped)
    perm = np.empty(len(est), dtype=int)
    perm[rows] = cols
    errors = dist[rows, perm[rows]]
    return RecoveryReport(
        permutation=perm,
        errors=errors,
        max_error=float(errors.max()),
        runtime=runtime,
        sample_count=sample_count,
    )
