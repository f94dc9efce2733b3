"""Learning mixtures of hyperplanes (degenerate Gaussians N(0, I - v v^T)).

The descent loop mirrors the regression case: project onto a unit probe a_t,
measure the smallest projection scale min_i |Pi_i a_t| with the min-variance
estimator, and step within the span of I - E[x x^T].  Because a random unit
initialization only lands near a component with small probability, the loop
restarts from fresh span directions until an outcome check passes.  Refinement
reduces the mixture to (d-1)-dimensional linear regressions along a random
span direction, whitens, and reuses the cosine boost.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from ._rng import stream
from .boost import BoostConfig, boost
from .descent import DescentConfig, DescentTrace, _svd_seed
from .minvar import compare_min_variances, estimate_min_variance
from .model import Samples
from .subspace import approx_block_svd, hyperplane_moment_matrix

__all__ = [
    "hyperplane_moment_descent",
    "check_outcome_hyperplanes",
    "reduce_to_mlr",
    "hyperplane_boost",
    "learn_hyperplanes",
]


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Directions are defined up to sign; make the largest-magnitude
    coordinate positive so equal estimates compare equal."""
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def _span_basis(sampler, k, cfg: DescentConfig, delta, *path):
    pts = sampler.draw(cfg.moment_matrix_samples, *path)
    mhat = hyperplane_moment_matrix(pts)
    return approx_block_svd(mhat, k, cfg.svd_accuracy, delta,
                            seed=_svd_seed(sampler.seed, *path))


def hyperplane_moment_descent(sampler, delta, epsilon, cfg: DescentConfig, *,
                              run_tag: int = 0):
    """Find a unit vector within epsilon of some mixture direction.

    Runs moment descent on the projection scale from random span
    initializations, restarting until the outcome check accepts; returns
    (unit vector, trace).  The trace is flagged best-effort when the restart
    budget runs out.
    """
    if not (0 < epsilon < 1) or not (0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    k = cfg.k
    eps_gate = epsilon * cfg.p_min / 2.0
    kappa = (1.0 / 24.0) * k ** -0.6
    T = cfg.T or max(8, int(math.ceil(2.0 * k**0.6 * math.log(4.0 / eps_gate))))
    S = cfg.restarts or min(cfg.restart_cap,
                            int(math.ceil(math.exp(k**0.6) * math.log(2.0 / delta))))
    delta1 = delta / (50.0 * T)
    M = cfg.M or min(cfg.candidate_cap,
                     int(math.ceil(math.exp(k**0.6) * math.log(2.0 / delta1))))
    delta2 = delta / (50.0 * M * T)
    delta_star = delta / (2.0 * S)
    sigma_upper = cfg.sigma_upper
    sigma_lower = cfg.sigma_lower if cfg.sigma_lower is not None else eps_gate / 3.0

    basis = _span_basis(sampler, k, cfg, delta1, run_tag, 0, 2)
    trace = DescentTrace()
    best = (math.inf, None)
    for i in range(S):
        g0 = stream(sampler.seed, run_tag, 9, i).standard_normal(k)
        a = _unit(basis.u @ g0)
        stall = 0
        for t in range(T):
            pts = sampler.draw(cfg.minvar_samples, run_tag, i, t, 0)
            proj = pts @ a
            try:
                sigma_t = estimate_min_variance(
                    proj, sigma_upper, sigma_lower, cfg.moment_degree, delta1,
                    p_min=cfg.p_min, eta=cfg.density_eta,
                    degree_ceiling=cfg.degree_ceiling, k_hint=k)
            except ValueError:
                # projection floor unmeasurably small: go straight to the check
                trace.add(restart=i, t=t, a=a.copy(), sigma=None,
                          note="below measurement floor")
                break
            if sigma_t < best[0]:
                best = (sigma_t, a.copy())
            if sigma_t < 0.99 * eps_gate:
                trace.add(restart=i, t=t, a=a.copy(), sigma=sigma_t, note="break")
                break
            eta = k ** -0.2 * sigma_t
            accepted = None
            for j in range(M):
                g = stream(sampler.seed, run_tag, i, t, 3, j).standard_normal(k)
                try:
                    z = _unit(basis.u @ g)
                except ValueError:
                    continue
                cand = _unit(a - eta * z)
                ok = compare_min_variances(
                    proj, pts @ cand, sigma_upper, sigma_lower,
                    kappa, 2.0 * kappa, delta2,
                    p_min=cfg.p_min, eta=cfg.density_eta,
                    degree_ceiling=cfg.degree_ceiling, sigma1=sigma_t, k_hint=k)
                if ok:
                    accepted = j
                    a = cand
                    break
            trace.add(restart=i, t=t, a=a.copy(), sigma=sigma_t, eta=eta,
                      accepted=accepted)
            if accepted is None:
                stall += 1
                if stall > cfg.stall_patience:
                    break
            else:
                stall = 0
        if check_outcome_hyperplanes(sampler, a, eps_gate, delta_star,
                                     p_min=cfg.p_min, run_tag=(run_tag, i)):
            return a, trace
    trace.flags.append("restart budget exhausted; best effort")
    if best[1] is None:
        raise ValueError("no restart produced a measurable projection")
    return best[1], trace


def check_outcome_hyperplanes(sampler, v, epsilon, delta, *,
                              p_min: float | None = None,
                              run_tag=()) -> bool:
    """True when enough projections land in [-epsilon, epsilon].

    Accepts when at least (4 p_min / 15) N of |<v, x>| fall inside the window;
    a component aligned to within epsilon puts >= 0.68 p_min of its mass there,
    while components at >= 2 epsilon / p_min stay well under the threshold at
    practical separations.
    """
    v = np.asarray(v, dtype=float)
    if p_min is None:
        p_min = sampler.model.p_min
    if not (0 < epsilon) or not (0 < delta < 1):
        raise ValueError("epsilon must be positive and delta in (0, 1)")
    n2 = max(256, int(math.ceil(60.0 * math.log(1.0 / delta) / p_min**2)))
    path = tuple(np.atleast_1d(run_tag).astype(int)) if np.ndim(run_tag) else (int(run_tag),)
    pts = sampler.draw(n2, *path, 0, 4)
    inside = int(np.sum(np.abs(pts @ v) <= epsilon))
    return inside >= (4.0 * p_min / 15.0) * n2


def _rotation_to_last(w: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal (Householder) matrix H with H w = e_d."""
    w = _unit(np.asarray(w, dtype=float))
    d = len(w)
    e = np.zeros(d)
    e[-1] = 1.0
    u = w - e
    nu2 = float(u @ u)
    if nu2 < 1e-24:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(u, u) / nu2


def reduce_to_mlr(samples, w) -> Samples:
    """View hyperplane points as labeled regression samples along ``w``.

    Rotates so w is the last coordinate and emits (first d-1 coordinates,
    last coordinate).  A point on the hyperplane of v_j then satisfies
    y = <-v'_j / a_j, x'> exactly, where (v'_j, a_j) is the rotated direction.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    house = _rotation_to_last(w)
    rot = pts @ house.T
    return Samples(rot[:, :-1], rot[:, -1])


class _ReducedSampler:
    """Deterministic labeled stream: rotate, whiten features, emit (x, y)."""

    def __init__(self, base, house, white):
        self.base = base
        self.house = house
        self.white = white
        self.seed = base.seed

    @property
    def d(self):
        return self.house.shape[0] - 1

    def draw(self, n, *path):
        pts = self.base.draw(n, *path)
        rot = pts @ self.house.T
        return Samples(rot[:, :-1] @ self.white.T, rot[:, -1])


def hyperplane_boost(sampler, v, epsilon, delta, cfg: DescentConfig, *,
                     run_tag: int = 0) -> np.ndarray:
    """Refine a warm-start direction to within epsilon (up to sign).

    Picks a random span direction w with |<v, w>| bounded away from zero,
    reduces the mixture to linear regressions along w, whitens the features,
    runs the cosine boost there, and maps the refined regressor back to a
    unit direction whose sign matches the warm start.
    """
    v = _unit(np.asarray(v, dtype=float))
    if not (0 < epsilon < 1) or not (0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    k = cfg.k
    basis = _span_basis(sampler, k, cfg, delta / 4.0, run_tag, 1, 2)
    floor = 1.0 / (4.0 * k)
    w = None
    for trial in range(32):
        g = stream(sampler.seed, run_tag, 6, trial).standard_normal(k)
        cand = _unit(basis.u @ g)
        if abs(float(cand @ v)) >= floor:
            w = cand
            break
    if w is None:
        warnings.warn("no well-correlated span direction found", stacklevel=2)
        w = _unit(basis.u @ stream(sampler.seed, run_tag, 6, 0).standard_normal(k))

    house = _rotation_to_last(w)
    # align the reduction so the warm start's w-coordinate is positive
    vr = house @ v
    if vr[-1] < 0:
        vr = -vr
    a_w = max(float(vr[-1]), floor / 2.0)
    u0 = -vr[:-1] / a_w

    calib = reduce_to_mlr(sampler.draw(cfg.moment_matrix_samples, run_tag, 6, 40), w)
    cov = calib.x.T @ calib.x / len(calib)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.maximum(evals, 1e-3)
    white = (evecs / np.sqrt(evals)) @ evecs.T       # cov^{-1/2}, symmetric
    unwhite = (evecs * np.sqrt(evals)) @ evecs.T

    reduced = _ReducedSampler(sampler, house, white)
    # T = 600 paced steps contract the squared distance by far more than any
    # warm start needs; the full default budget only matters when the target
    # sits below the reduced problem's measurement floor, where extra steps
    # cannot help anyway
    boost_cfg = BoostConfig(p_min=cfg.p_min, separation=cfg.separation,
                            pace=0.04, T=600, minvar_samples=cfg.minvar_samples,
                            density_eta=cfg.density_eta)
    # features are x~ = C^{-1/2} x, so y = <u, x> = <C^{1/2} u, x~>: the
    # regressor rides the inverse of the feature transform.  Direction error
    # is at most 2 a_w times the regressor error, and un-whitening amplifies
    # by at most 1/sqrt(lambda_min), hence the target below
    eps_red = 0.5 * epsilon * a_w * math.sqrt(float(evals[0]))
    u_hat = boost(reduced, unwhite @ u0, eps_red, delta, cfg.separation,
                  boost_cfg, run_tag=run_tag + 70)
    u_hat = white @ np.asarray(u_hat, dtype=float)

    tail = np.concatenate((-u_hat, [1.0]))
    out = house @ _unit(tail)
    if float(out @ v) < 0:
        out = -out
    return out


def _peel_filter(v, threshold):
    v = np.array(v, dtype=float)
    return lambda pts: np.abs(pts @ v) > threshold


def learn_hyperplanes(sampler, delta, epsilon, cfg: DescentConfig):
    """Recover all k directions: descend, boost, peel matched points, repeat.

    Returns sign-canonicalized unit vectors (largest-magnitude coordinate
    positive), each within epsilon of some +-v_i on success.
    """
    k, d = cfg.k, sampler.d
    delta_round = delta / (2.0 * k)
    eps_hmd = min(0.1, cfg.separation / 10.0)
    eps_boost = min(epsilon, eps_hmd / 4.0)
    peel = eps_boost * 3.0 * math.log(d)
    estimates = []
    cur = sampler
    for i in range(k):
        round_cfg = dataclasses.replace(cfg, k=k - i, T=None, M=None)
        v_tilde = None
        for attempt in range(cfg.round_retries + 1):
            tag = 10 * i + attempt
            coarse, _ = hyperplane_moment_descent(cur, delta_round, eps_hmd,
                                                  round_cfg, run_tag=tag)
            refined = hyperplane_boost(cur, coarse, eps_boost, delta_round,
                                       round_cfg, run_tag=1000 + tag)
            if check_outcome_hyperplanes(cur, refined, epsilon, delta_round,
                                         p_min=cfg.p_min, run_tag=(2000 + tag,)):
                v_tilde = refined
                break
        if v_tilde is None:
            raise ValueError("hyperplane round %d failed its outcome check" % i)
        estimates.append(_canonical_sign(v_tilde))
        cur = cur.with_filter(_peel_filter(v_tilde, peel))
    return estimates
