"""Univariate density estimation as a compact-support piecewise polynomial.

The estimator is deliberately simple: fold the data to |v| (all densities in
this pipeline are symmetric about 0), split [0, R] into equal-mass quantile
intervals, least-squares fit a polynomial to a fine sub-histogram on each
interval, greedily merge adjacent intervals whose joint fit does not degrade,
mirror to the negative axis, and clip into [0, 1/(sqrt(2 pi) sigma_lower)].
Mirroring makes G(x) = G(-x) hold exactly, so the imaginary part of the
Fourier transform vanishes identically.
"""

from __future__ import annotations

import math

import numpy as np

from .piecewise import PiecewisePoly, clip

__all__ = ["estimate_density", "tuned_piece_budget"]

_MIN_SAMPLES = 64


def tuned_piece_budget(eta: float, sigma_lower: float, k_hint: int = 1):
    """Piece count, degree, and suggested sample size for an L2^2 target eta.

    The returned N is a desk-scale calibration, not a worst-case bound; the
    budget is monotone (tighter eta or smaller sigma_lower never shrinks it).
    """
    if eta <= 0 or sigma_lower <= 0 or k_hint < 1:
        raise ValueError("eta, sigma_lower, k_hint must be positive")
    logterm = max(1, math.ceil(math.log(1.0 / (eta * sigma_lower))))
    s = max(4, 2 * k_hint * logterm)
    degree = max(1, min(8, math.ceil(math.log2(1.0 / eta)))) if eta < 1 else 1
    n = max(_MIN_SAMPLES, int(0.5 * (k_hint / eta**2) * logterm * 3))
    return s, degree, n


def _fit_interval(sorted_abs: np.ndarray, left: float, right: float, degree: int,
                  n_total: int):
    """LSQ polynomial (local coords) fit to the sub-histogram of one interval.

    ``sorted_abs`` must be sorted ascending; counts come from searchsorted so
    repeated fits over the same data cost O(log n) each.
    """
    width = right - left
    nsub = 4 * (degree + 1)
    edges = np.linspace(left, right, nsub + 1)
    counts = np.diff(np.searchsorted(sorted_abs, edges, side="left"))
    heights = counts / (n_total * (width / nsub))
    t = (0.5 * (edges[:-1] + edges[1:]) - left) / width
    deg = min(degree, nsub - 1)
    V = np.vander(t, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, heights, rcond=None)
    sse = float(np.sum((V @ coef - heights) ** 2))
    return coef, sse


def estimate_density(values, sigma_lower: float, eta: float, delta: float = 0.05,
                     k_hint: int = 1) -> PiecewisePoly:
    """L2 density estimate of the law of ``values``, clipped and symmetrized."""
    values = np.asarray(values, dtype=float)
    if sigma_lower <= 0:
        raise ValueError("sigma_lower must be positive")
    if not (0 < eta):
        raise ValueError("eta must be positive")
    n = len(values)
    if n < _MIN_SAMPLES:
        raise ValueError("insufficient samples (%d < %d)" % (n, _MIN_SAMPLES))
    q25, q75 = np.quantile(values, [0.25, 0.75])
    if q75 - q25 < sigma_lower / 10.0:
        raise ValueError("input too concentrated below sigma_lower")

    absvals = np.sort(np.abs(values))
    r_support = max(float(np.quantile(absvals, 0.9999)),
                    8.0 * float(np.std(values)))
    s, degree, _ = tuned_piece_budget(eta, sigma_lower, k_hint)

    # equal-mass quantile knots on the folded axis, deduplicated
    probs = np.linspace(0.0, 1.0, s + 1)
    knots = np.quantile(absvals, probs)
    knots[0], knots[-1] = 0.0, r_support
    keep = [0]
    for i in range(1, len(knots)):
        if knots[i] - knots[keep[-1]] > max(1e-9, 1e-4 * r_support):
            keep.append(i)
    knots = knots[keep]
    knots[-1] = r_support
    if len(knots) < 3:
        raise ValueError("input too concentrated below sigma_lower")

    fits = []
    for left, right in zip(knots[:-1], knots[1:]):
        fits.append((left, right) + _fit_interval(absvals, left, right, degree, n))

    # greedy adjacent merge while the joint fit stays about as good
    merged = True
    while merged and len(fits) > 4:
        merged = False
        out = []
        i = 0
        while i < len(fits):
            if i + 1 < len(fits):
                l0, r0, c0, e0 = fits[i]
                l1, r1, c1, e1 = fits[i + 1]
                cj, ej = _fit_interval(absvals, l0, r1, degree, n)
                if ej <= 2.0 * (e0 + e1) + 1e-12:
                    out.append((l0, r1, cj, ej))
                    i += 2
                    merged = True
                    continue
            out.append(fits[i])
            i += 1
        fits = out

    # mirror: piece q(t) on [l, r] maps to q(1 - t) on [-r, -l]; halve so the
    # two halves integrate to the folded mass
    edges = []
    coeffs = []
    for left, right, coef, _ in reversed(fits):
        edges.append(-right)
        flipped = np.polynomial.Polynomial(coef)(np.polynomial.Polynomial([1.0, -1.0]))
        coeffs.append(0.5 * flipped.coef)
    edges.append(-fits[0][0] if fits[0][0] > 0 else 0.0)
    for left, right, coef, _ in fits:
        edges.append(right)
        coeffs.append(0.5 * np.asarray(coef))
    pp = PiecewisePoly(np.asarray(edges), coeffs)
    return clip(pp, 0.0, 1.0 / (math.sqrt(2.0 * math.pi) * sigma_lower))
