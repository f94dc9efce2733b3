"""Span estimation: residual-weighted moment matrices and approximate block SVD.

The MLR moment matrix at a probe point a has expectation
sum_i p_i (w_i - a)(w_i - a)^T regardless of the noise rate, so its top
eigenspace approximates span({w_i - a}).  For hyperplane mixtures the
covariance deficiency I - E[x x^T] plays the same role with expectation
sum_i p_i v_i v_i^T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .model import Samples

__all__ = [
    "SpanBasis",
    "mlr_moment_matrix",
    "hyperplane_moment_matrix",
    "approx_block_svd",
]

_OVERSAMPLE = 4
_MAX_ITERS = 200


@dataclass
class SpanBasis:
    u: np.ndarray  # d x k, orthonormal columns
    gap_estimate: float
    flags: list = field(default_factory=list)

    @property
    def k(self):
        return self.u.shape[1]


def _as_batch(samples):
    if isinstance(samples, Samples):
        return samples.x, samples.y
    xs = np.asarray([s.x for s in samples], dtype=float)
    ys = np.asarray([s.y for s in samples], dtype=float)
    return xs, ys


def mlr_moment_matrix(samples, a) -> np.ndarray:
    """(1/N) sum over samples of (r^2/2)(x x^T - I) with r = y - <a, x>."""
    x, y = _as_batch(samples)
    if len(y) == 0:
        raise ValueError("empty sample")
    a = np.asarray(a, dtype=float)
    if x.shape[1] != len(a):
        raise ValueError("dimension mismatch")
    r2 = (y - x @ a) ** 2
    d = x.shape[1]
    m = (x.T * r2) @ x / len(y)
    m -= np.mean(r2) * np.eye(d)
    m *= 0.5
    return 0.5 * (m + m.T)


def hyperplane_moment_matrix(samples) -> np.ndarray:
    """Covariance deficiency I - (1/N) sum x x^T."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    m = np.eye(x.shape[1]) - x.T @ x / len(x)
    return 0.5 * (m + m.T)


def approx_block_svd(operator, k: int, eta: float, delta: float = 0.05,
                     seed: int = 0, dim: int | None = None) -> SpanBasis:
    """Top-k invariant subspace of a symmetric operator by randomized block
    power iteration with QR re-orthonormalization.

    ``operator`` is either a symmetric matrix or a callable mapping a d x m
    block to its image (then ``dim`` is required).  The iteration count tracks
    ceil(c log(1/(eta delta gap))) against a running Rayleigh gap estimate;
    the oversampling columns are dropped at the end.
    """
    if callable(operator):
        if dim is None:
            raise ValueError("dim is required with a callable operator")
        matvec = operator
        d = int(dim)
    else:
        mat = np.asarray(operator, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("operator must be square")
        matvec = lambda block: mat @ block
        d = mat.shape[0]
    if not (1 <= k <= d):
        raise ValueError("need 1 <= k <= d")
    if eta <= 0 or not (0 < delta < 1):
        raise ValueError("eta and delta must be in (0, 1]")

    width = min(d, k + _OVERSAMPLE)
    rng = stream(seed, 0)
    q, _ = np.linalg.qr(rng.standard_normal((d, width)))

    flags = []
    gap = 0.0
    it = 0
    while True:
        y = matvec(q)
        # Rayleigh estimates of the leading |eigenvalues| through the block
        rayleigh = np.sort(np.abs(np.einsum("dj,dj->j", q, y)))[::-1]
        lead, trail = rayleigh[k - 1], rayleigh[k] if width > k else 0.0
        gap = lead / trail if trail > 0 else math.inf
        q, _ = np.linalg.qr(y)
        it += 1
        if math.isinf(gap):
            break
        if gap > 1.0:
            needed = math.ceil(4.0 * math.log(1.0 / (eta * delta * min(1.0, gap - 1.0))))
            if it >= max(4, needed):
                break
        if it >= _MAX_ITERS:
            flags.append("gap did not converge; best-effort basis")
            break

    # settle the retained block onto eigenvector directions before truncating
    y = matvec(q)
    b = q.T @ y
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(np.abs(evals))[::-1]
    u = q @ evecs[:, order[:k]]
    u, _ = np.linalg.qr(u)
    return SpanBasis(u=u, gap_estimate=float(gap), flags=flags)
