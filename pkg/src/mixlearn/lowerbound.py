"""Moment-matched mixture pairs: distinct parameter lists, identical low moments.

Two zero-mean Gaussian mixtures with std devs sigma_i = i + alpha z_i and
sigma'_i = i - alpha z_i share every moment of degree <= 2k-1 whenever z on
the unit sphere satisfies M(z) = M(-z) for the even power sums
M(z)_l = sum_i sigma_i(z)^{2l}.  Such a z always exists (the difference is an
odd function of z), and embedding the matched pair along a line inside a
mixture of linear regressions produces two models that agree on all projected
moments of the same degrees while keeping their parameters far apart.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import least_squares

from ._rng import stream
from .minvar import mixture_moment
from .model import MlrModel, ZeroMeanGmm

__all__ = ["moment_match_sigmas", "moment_table", "build_mlr_pair"]

_TOL = 1e-9
_STARTS = 100


def _power_sum_gap(z: np.ndarray, k: int, alpha: float) -> np.ndarray:
    """M(z)_l - M(-z)_l for l = 1..k-1 (degrees 2..2k-2)."""
    base = np.arange(1, k + 1, dtype=float)
    s_plus = base + alpha * z
    s_minus = base - alpha * z
    ells = np.arange(1, k)
    return np.array([np.sum(s_plus ** (2 * l)) - np.sum(s_minus ** (2 * l))
                     for l in ells])


def moment_match_sigmas(k: int, alpha: float, seed: int = 0):
    """Solve for (sigmas, sigmas_prime) matching all moments through 2k-1.

    Multistart root finding of the k-1 power-sum gaps together with the unit
    norm constraint; raises when no start reaches the 1e-9 sup-norm target.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    if not (0 < alpha <= 0.25):
        raise ValueError("alpha must lie in (0, 1/4]")
    base = np.arange(1, k + 1, dtype=float)

    def resid(y):
        return np.concatenate((_power_sum_gap(y, k, alpha),
                               [np.dot(y, y) - 1.0]))

    rng = stream(seed, 31)
    for start in range(_STARTS):
        y0 = rng.standard_normal(k)
        y0 /= np.linalg.norm(y0)
        sol = least_squares(resid, y0, method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=2000)
        z = sol.x / np.linalg.norm(sol.x)
        if np.max(np.abs(_power_sum_gap(z, k, alpha))) <= _TOL:
            return base + alpha * z, base - alpha * z
    raise ValueError("no moment-matching direction found within the start budget")


def moment_table(g: ZeroMeanGmm, max_degree: int):
    """Raw moments of degrees 1..max_degree (odd degrees are exactly 0)."""
    if max_degree < 1:
        raise ValueError("need max_degree >= 1")
    out = []
    for p in range(1, max_degree + 1):
        out.append(0.0 if p % 2 else mixture_moment(g, p))
    return out


def build_mlr_pair(base: MlrModel, v, lam: float, sigmas, sigmas_prime):
    """Embed a matched sigma pair along direction v inside ``base``.

    Each output model keeps the base regressors at weight p_i / Z and adds
    components +-sigma_i v at weight (lam / 2k) / Z with Z = lam + 1; the two
    models' projected moments agree through degree 2k-1.  lam = 0 returns two
    copies of the base.
    """
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("v must be a unit vector")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    sigmas = np.asarray(sigmas, dtype=float)
    sigmas_prime = np.asarray(sigmas_prime, dtype=float)
    if len(sigmas) != len(sigmas_prime):
        raise ValueError("sigma lists must have equal length")

    def embed(sig):
        if lam == 0:
            return MlrModel(base.weights.copy(), base.regressors.copy(),
                            noise_rate=base.noise_rate,
                            norm_bound=base.norm_bound)
        kk = len(sig)
        z_norm = lam + 1.0
        weights = list(base.weights / z_norm)
        regs = [w for w in base.regressors]
        for s in sig:
            for sign in (1.0, -1.0):
                weights.append((lam / (2.0 * kk)) / z_norm)
                regs.append(sign * s * v)
        bound = max(base.norm_bound, float(np.max(np.abs(sig))))
        return MlrModel(np.array(weights), np.vstack(regs),
                        noise_rate=base.noise_rate, norm_bound=bound)

    return embed(sigmas), embed(sigmas_prime)
