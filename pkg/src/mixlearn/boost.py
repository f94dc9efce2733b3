"""Local refinement by descending the regularized cosine-integral objective.

The empirical gradient weights each sample by -cos(pi |r| / xi)/r where r is
the residual against the current estimate and xi is a regularizer kept just
below the true distance via the min-variance estimator.  Near a regressor the
expected gradient points at it with correlation Theta(xi^3 / dist^3), which
the bracket helpers at the bottom of this module pin down numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ._rng import stream
from .minvar import estimate_min_variance
from .model import Samples

__all__ = [
    "BoostConfig",
    "cosine_gradient",
    "boost",
    "cosine_bracket",
    "gradient_correlation",
]


@dataclass
class BoostConfig:
    p_min: float = 1.0
    separation: float = 1.0
    noise_rate: float = 0.0
    T: int = 4000
    batch_size: int = 20_000
    gamma_constant: float = 4.0     # warm-start radius Delta / (C p_min^{1/4})
    noise_constant: float = 0.5
    # per-step squared-distance pace: progress targets pace + xi^4/(2 sqrt(d) Delta^4),
    # which sits inside the contraction bracket's +-0.02 measurement window
    pace: float = 0.012
    reestimate_every: int = 5
    minvar_samples: int = 40_000
    density_eta: float = 0.005

    def __post_init__(self):
        if not (0 < self.p_min <= 1) or self.separation <= 0:
            raise ValueError("need p_min in (0, 1] and positive separation")
        if self.T < 1 or self.batch_size < 1 or self.reestimate_every < 1:
            raise ValueError("iteration and batch controls must be >= 1")
        if not (0 < self.pace <= 0.05):
            raise ValueError("pace out of range (0, 0.05]")


def _as_batch(batch):
    if isinstance(batch, Samples):
        return batch.x, batch.y
    xs = np.asarray([s.x for s in batch], dtype=float)
    ys = np.asarray([s.y for s in batch], dtype=float)
    return xs, ys


def cosine_gradient(batch, v, xi: float) -> np.ndarray:
    """-(1/N) sum 1{|r| >= xi} cos(pi |r| / xi) / r * x with r = <x,v> - y."""
    if xi <= 0:
        raise ValueError("regularizer must be positive")
    x, y = _as_batch(batch)
    v = np.asarray(v, dtype=float)
    r = x @ v - y
    mask = np.abs(r) >= xi
    coef = np.zeros_like(r)
    coef[mask] = np.cos(np.pi * np.abs(r[mask]) / xi) / r[mask]
    return -(coef @ x) / len(r)


def _estimate_xi(sampler, v, epsilon, delta, cfg: BoostConfig, path):
    batch = sampler.draw(cfg.minvar_samples, *path)
    resid = batch.y - batch.x @ v
    p = max(4, 2 * int(math.ceil(math.log(3.0 / (2.0 * cfg.p_min)))) + 2)
    sigma = estimate_min_variance(
        resid, 4.0, epsilon / 10.0, p, delta,
        p_min=cfg.p_min, eta=cfg.density_eta, k_hint=2)
    return sigma / 1.1


def boost(sampler, v, epsilon, delta, Delta: float, cfg: BoostConfig, *,
          run_tag: int = 0, trace_out: list | None = None) -> np.ndarray:
    """Refine a warm start to within epsilon of its nearest regressor.

    Breaks as soon as the measured residual floor certifies the target; the
    learning rate is paced so each step's squared-distance contraction stays
    inside the analytic bracket's measurement window.
    """
    if epsilon <= 0 or not (0 < delta < 1) or Delta <= 0:
        raise ValueError("epsilon, delta, Delta must be positive (delta < 1)")
    v = np.array(v, dtype=float)
    d = len(v)
    delta_t = delta / (2.0 * cfg.T)
    xi = None
    xi0 = None
    best = (math.inf, v.copy())
    for t in range(cfg.T):
        if xi is None or t % cfg.reestimate_every == 0:
            try:
                xi = _estimate_xi(sampler, v, epsilon, delta_t, cfg,
                                  (run_tag, t, 0))
            except ValueError:
                # residual floor unmeasurably small: already at the target
                return v
            if xi0 is None:
                xi0 = xi
            if xi < best[0]:
                best = (xi, v.copy())
            if xi > 2.0 * xi0:
                warnings.warn("boost diverged from its warm start", stacklevel=2)
                if trace_out is not None:
                    trace_out.append({"flag": "diverged"})
                return best[1]
        if xi * (1.1 / 0.9) <= epsilon:
            return v
        batch = sampler.draw(cfg.batch_size, run_tag, t, 1)
        delta_grad = cosine_gradient(batch, v, xi)
        beta_hat = xi * (1.1 / 0.9)
        pace = cfg.pace + xi**4 / (2.0 * math.sqrt(d) * Delta**4)
        g_hat = 0.055 * cfg.p_min
        eta = pace * beta_hat**2 / (2.0 * g_hat)
        gnorm = np.linalg.norm(delta_grad)
        if gnorm * eta > 0.5 * beta_hat:
            eta = 0.5 * beta_hat / gnorm
        if trace_out is not None:
            trace_out.append({"t": t, "xi": xi, "eta": eta, "v": v.copy()})
        v = v - eta * delta_grad
    warnings.warn("boost exhausted its iteration budget", stacklevel=2)
    if trace_out is not None:
        trace_out.append({"flag": "iteration budget exhausted"})
    return v


def cosine_bracket(beta: float, xi: float) -> float:
    """exp(-pi^2 beta^2 / (2 xi^2)) - E_{g ~ N(0, beta^2)}[1{|g| >= xi} cos(pi |g| / xi)].

    The value stays within [0.066, 0.081] xi^3 / beta^3 throughout
    0 < xi <= beta, approaching 2 / (sqrt(2 pi) pi^2) ~ 0.0808 as xi/beta -> 0.
    """
    if not (0 < xi <= beta):
        raise ValueError("need 0 < xi <= beta")
    dens = lambda g: math.exp(-0.5 * (g / beta) ** 2) / (beta * math.sqrt(2 * math.pi))
    hi = xi + 14.0 * beta
    val, _ = quad(dens, xi, hi, weight="cos", wvar=math.pi / xi,
                  epsabs=1e-12, epsrel=1e-12, limit=4000)
    expect = 2.0 * val
    return math.exp(-0.5 * (math.pi * beta / xi) ** 2) - expect


def gradient_correlation(b, a, xi: float, varsigma: float = 0.0) -> float:
    """E[1{|z| >= xi} (-cos(pi |z| / xi) / z) <a, x>] with z = <b,x> + noise.

    Reduces to a one-dimensional integral: conditioning x on z is linear, so
    the value is <a,b>/s^2 times the pure cosine expectation at scale
    s^2 = varsigma^2 + |b|^2.
    """
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    nb = float(np.linalg.norm(b))
    if not (0 < xi <= nb):
        raise ValueError("need 0 < xi <= |b|")
    s = math.sqrt(varsigma**2 + nb**2)
    core = cosine_bracket(s, xi) - math.exp(-0.5 * (math.pi * s / xi) ** 2)
    return float(np.dot(a, b)) / s**2 * core
