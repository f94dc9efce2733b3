"""Randomized moment-descent loops for mixtures of linear regressions.

The core loop keeps a probe point a_t, measures the smallest residual scale
sigma*_t of y - <a_t, x> via the Fourier min-variance estimator, and tries
random directions from the span of the residual-weighted moment matrix; a
candidate step is accepted when the min-variance comparator certifies that it
shrank the smallest residual.  Around that core:

- fourier_moment_descent starts at the origin and settles near whichever
  regressor it drifts toward first;
- optimistic_descent starts from a supplied point and never re-randomizes,
  so a favorable initialization keeps its nearest regressor;
- learn_without_noise / learn_with_noise recover the full list by descending,
  boosting, and then either peeling matched samples (noiseless) or restarting
  from a radius mesh and deduplicating (noisy).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .boost import BoostConfig, boost
from .minvar import DEGREE_FLOOR, compare_min_variances, estimate_min_variance
from .subspace import approx_block_svd, mlr_moment_matrix

__all__ = [
    "DescentConfig",
    "DescentTrace",
    "fourier_moment_descent",
    "optimistic_descent",
    "init_mesh",
    "check_outcome",
    "learn_without_noise",
    "learn_with_noise",
]


@dataclass
class DescentConfig:
    """Every tunable the analysis leaves as an unnamed absolute constant.

    Defaults come from the calibration sweeps recorded in the test suite;
    descent degree work is clamped to the ladder floor so that the comparator
    sees identically biased estimates on both sides.
    """

    k: int
    p_min: float
    separation: float = 1.0
    noise_rate: float = 0.0
    T: int | None = None
    M: int | None = None
    step_constant: float = 0.5     # eta_t = step_constant * k^{-1/4} * sigma*_t
    a_lr: float = 0.5              # optimistic eta_t = a_lr * Delta * sigma# * k^{-1/4}
    a_trials: float = 1.0
    a_scale: float = 2.0
    a_noise: float = 0.1
    beta_low: float = 0.2          # comparator margin base, noisy variant
    c_gap: float = 0.1
    sigma_upper: float = 4.0
    sigma_lower: float | None = None   # defaults to epsilon/3 at call time
    svd_accuracy: float = 0.1
    minvar_samples: int = 60_000
    moment_matrix_samples: int = 50_000
    candidate_cap: int = 48
    restarts: int | None = None    # W
    restart_cap: int = 24
    upsilon_star: float = 0.5
    stall_patience: int = 3
    round_retries: int = 2
    degree_ceiling: int = DEGREE_FLOOR
    density_eta: float = 0.005

    def __post_init__(self):
        if self.k < 1 or not (0 < self.p_min <= 1):
            raise ValueError("need k >= 1 and p_min in (0, 1]")
        if self.separation <= 0 or self.noise_rate < 0:
            raise ValueError("separation must be positive, noise nonnegative")
        for name in ("T", "M", "restarts"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError("%s must be >= 1" % name)
        for name in ("step_constant", "a_lr", "a_trials", "a_scale", "a_noise",
                     "svd_accuracy", "upsilon_star", "density_eta"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        k1, k2 = self.noisy_kappas()
        if not (0 < k1 < k2):
            raise ValueError("noisy comparator margins must satisfy 0 < kappa1 < kappa2")

    @property
    def kappa(self) -> float:
        return 1.0 / (24.0 * math.sqrt(self.k))

    @property
    def moment_degree(self) -> int:
        return int(math.ceil(20.0 * math.log(3.0 / (2.0 * self.p_min)) + 1.0))

    def noisy_kappas(self):
        base = self.separation**2 / math.sqrt(self.k)
        k1 = (self.beta_low - 1.5 * self.c_gap) * base
        k2 = (self.beta_low - 0.5 * self.c_gap) * base
        return k1, min(k2, 1.0)


@dataclass
class DescentTrace:
    records: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def add(self, **rec):
        self.records.append(rec)

    def sigmas(self):
        return [r["sigma"] for r in self.records if "sigma" in r]

    def to_jsonl(self) -> str:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        lines = [json.dumps({k: clean(v) for k, v in r.items()})
                 for r in self.records]
        return "\n".join(lines)


def init_mesh(sigma_lower: float, upsilon_star: float, k: int):
    """Geometric radius grid from sigma_lower k^{1/4} up to k^{1/4}."""
    if not (0 < sigma_lower <= 1):
        raise ValueError("sigma_lower must be in (0, 1]")
    if upsilon_star <= 0:
        raise ValueError("upsilon_star must be positive")
    top = k**0.25
    radii = []
    r = sigma_lower * top
    while r < top * (1.0 - 1e-12):
        radii.append(r)
        r *= 1.0 + upsilon_star
    radii.append(top)
    return radii


def _svd_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=path).generate_state(1)[0])


def _estimate_sigma(resid, cfg: DescentConfig, sigma_upper, sigma_lower, delta):
    return estimate_min_variance(
        resid, sigma_upper, sigma_lower, cfg.moment_degree, delta,
        p_min=cfg.p_min, eta=cfg.density_eta,
        degree_ceiling=cfg.degree_ceiling, k_hint=cfg.k)


def _descent_loop(sampler, a0, delta, epsilon, cfg: DescentConfig, run_tag: int,
                  kappas, eta_rule):
    """Shared body of the two descent variants."""
    k = cfg.k
    T = cfg.T or max(8, int(math.ceil(4.0 * math.sqrt(k) * math.log(1.0 / epsilon))))
    delta1 = delta / (5.0 * T)
    M = cfg.M or min(cfg.candidate_cap,
                     int(math.ceil(math.exp(math.sqrt(k)) * math.log(2.0 / delta1))))
    delta2 = delta / (5.0 * M * T)
    sigma_upper = cfg.sigma_upper
    sigma_lower = cfg.sigma_lower if cfg.sigma_lower is not None else epsilon / 3.0
    kappa1, kappa2 = kappas

    a = np.array(a0, dtype=float)
    trace = DescentTrace()
    best = (math.inf, a.copy())
    stall = 0
    for t in range(T):
        batch = sampler.draw(cfg.minvar_samples, run_tag, t, 0)
        resid = batch.y - batch.x @ a
        try:
            sigma_t = _estimate_sigma(resid, cfg, sigma_upper, sigma_lower, delta1)
        except ValueError:
            trace.add(t=t, a=a.copy(), sigma=None, note="no significant moment")
            stall += 1
            if stall > cfg.stall_patience:
                trace.flags.append("stalled")
                return best[1], trace
            continue
        if sigma_t < best[0]:
            best = (sigma_t, a.copy())
        if sigma_t < 0.99 * epsilon:
            trace.add(t=t, a=a.copy(), sigma=sigma_t, note="break")
            return a, trace
        mm = sampler.draw(cfg.moment_matrix_samples, run_tag, t, 1)
        mhat = mlr_moment_matrix(mm, a)
        basis = approx_block_svd(mhat, k, cfg.svd_accuracy, delta1,
                                 seed=_svd_seed(sampler.seed, run_tag, t, 2))
        eta = eta_rule(sigma_t)
        accepted = None
        for j in range(M):
            g = stream(sampler.seed, run_tag, t, 3, j).standard_normal(k)
            direction = basis.u @ g
            norm = np.linalg.norm(direction)
            if norm < 1e-12:
                continue
            cand = a + eta * direction / norm
            resid_j = batch.y - batch.x @ cand
            ok = compare_min_variances(
                resid, resid_j, sigma_upper, sigma_lower, kappa1, kappa2, delta2,
                p_min=cfg.p_min, eta=cfg.density_eta,
                degree_ceiling=cfg.degree_ceiling, sigma1=sigma_t, k_hint=cfg.k)
            if ok:
                accepted = j
                a = cand
                break
        trace.add(t=t, a=a.copy(), sigma=sigma_t, eta=eta, accepted=accepted)
        if accepted is None:
            stall += 1
            if stall > cfg.stall_patience:
                trace.flags.append("stalled")
                return best[1], trace
        else:
            stall = 0
    trace.flags.append("iteration budget exhausted")
    return a, trace


def fourier_moment_descent(sampler, delta, epsilon, cfg: DescentConfig, *,
                           run_tag: int = 0):
    """Descend from the origin until the smallest residual scale drops
    below 0.99 epsilon; returns (vector, trace)."""
    if not (0 < epsilon < 1) or not (0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    kappa = cfg.kappa
    eta_rule = lambda s: cfg.step_constant * cfg.k**-0.25 * s
    return _descent_loop(sampler, np.zeros(sampler.d), delta, epsilon, cfg,
                         run_tag, (kappa, 2.0 * kappa), eta_rule)


def optimistic_descent(sampler, a0, delta, epsilon, cfg: DescentConfig, *,
                       run_tag: int = 0):
    """Descent from a fixed initialization with gap-preserving margins;
    returns (vector, trace)."""
    if not (0 < epsilon < 1) or not (0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    eta_rule = lambda s: cfg.a_lr * cfg.separation * s * cfg.k**-0.25
    return _descent_loop(sampler, a0, delta, epsilon, cfg, run_tag,
                         cfg.noisy_kappas(), eta_rule)


def check_outcome(sampler, v, epsilon, delta, cfg: DescentConfig, *,
                  run_tag: int = 0) -> bool:
    """True when some regressor is within ~epsilon of v: tests whether the
    squared residual floor (sigma*)^2 is at most 2 epsilon^2."""
    v = np.asarray(v, dtype=float)
    batch = sampler.draw(cfg.minvar_samples, run_tag, 0, 4)
    resid = batch.y - batch.x @ v
    sigma_lower = max(cfg.noise_rate, epsilon / 10.0)
    try:
        sigma = _estimate_sigma(resid, cfg, cfg.sigma_upper, sigma_lower, delta)
    except ValueError:
        # a residual too concentrated to measure is itself a pass
        return True
    return bool(sigma**2 <= 2.0 * epsilon**2)


def _peel_filter(w, threshold):
    w = np.array(w, dtype=float)
    return lambda x, y: np.abs(y - x @ w) > threshold


def learn_without_noise(sampler, delta, epsilon, cfg: DescentConfig):
    """Recover all k regressors of a noiseless mixture: descend to a coarse
    estimate, boost it down, then peel the matched samples and repeat."""
    if cfg.noise_rate > 0:
        raise ValueError("noiseless learner requires zero noise rate")
    k, d = cfg.k, sampler.d
    delta_round = delta / (2.0 * k)
    eps_fmd = min(1.0, cfg.separation * cfg.p_min / 16.0)
    eps_boost = min(epsilon, eps_fmd / 4.0)
    peel = eps_boost * 3.0 * math.log(d)
    estimates = []
    cur = sampler
    for i in range(k):
        round_cfg = dataclasses.replace(cfg, k=k - i, T=None, M=None)
        boost_cfg = BoostConfig(p_min=cfg.p_min, separation=cfg.separation,
                                noise_rate=0.0, pace=0.04,
                                minvar_samples=cfg.minvar_samples,
                                density_eta=cfg.density_eta)
        w_tilde = None
        for attempt in range(cfg.round_retries + 1):
            tag = 10 * i + attempt
            coarse, _ = fourier_moment_descent(cur, delta_round, eps_fmd,
                                               round_cfg, run_tag=tag)
            refined = boost(cur, coarse, eps_boost, delta_round, cfg.separation,
                            boost_cfg, run_tag=1000 + tag)
            if check_outcome(cur, refined, epsilon, delta_round, round_cfg,
                             run_tag=2000 + tag):
                w_tilde = refined
                break
        if w_tilde is None:
            raise ValueError("descent round %d failed its outcome check" % i)
        estimates.append(w_tilde)
        cur = cur.with_filter(_peel_filter(w_tilde, peel))
    return estimates


def learn_with_noise(sampler, delta, epsilon, cfg: DescentConfig):
    """Recover all k regressors under regression noise by restarting
    optimistic descent over a radius mesh and deduplicating the results."""
    if cfg.noise_rate > math.sqrt(cfg.a_noise) * epsilon * 3.2:
        raise ValueError("noise rate too large for the requested accuracy")
    k, d = cfg.k, sampler.d
    sigma_lower = epsilon / 4.0
    mesh = init_mesh(min(1.0, sigma_lower * k**-0.25 * 4.0), cfg.upsilon_star, k)
    found = []

    boost_cfg = BoostConfig(p_min=cfg.p_min, separation=cfg.separation,
                            noise_rate=cfg.noise_rate, pace=0.04,
                            minvar_samples=cfg.minvar_samples,
                            density_eta=cfg.density_eta)

    v_tiny = stream(sampler.seed, 7, 0).standard_normal(d)
    v_tiny *= (epsilon / 4.0) / np.linalg.norm(v_tiny)
    if check_outcome(sampler, v_tiny, sigma_lower, delta / 5.0, cfg, run_tag=3000):
        found.append(v_tiny)

    W = cfg.restarts or min(cfg.restart_cap, int(math.ceil(
        math.exp(math.sqrt(k) / cfg.separation**2) * math.log(2.0 * k / delta))))
    delta_star = delta / (2.0 * len(mesh) * W)
    for mi, alpha in enumerate(mesh):
        for w_idx in range(W):
            if len(found) >= k:
                break
            tag = 4000 + 100 * mi + w_idx
            v0 = stream(sampler.seed, 8, mi, w_idx).standard_normal(d)
            v0 *= alpha / np.linalg.norm(v0)
            cand, _ = optimistic_descent(sampler, v0, delta_star, epsilon, cfg,
                                         run_tag=tag)
            refined = boost(sampler, cand, max(epsilon / 2.0, 1.2 * cfg.noise_rate),
                            delta_star, cfg.separation, boost_cfg,
                            run_tag=tag + 50)
            if not check_outcome(sampler, refined, epsilon, delta_star, cfg,
                                 run_tag=tag + 60):
                continue
            if all(np.linalg.norm(refined - w) > 2.0 * epsilon for w in found):
                found.append(refined)
        if len(found) >= k:
            break
    return found
