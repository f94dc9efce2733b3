"""Piecewise polynomials with closed-form truncated Fourier moments.

The density estimates produced by this package are s-piece polynomials of
degree <= 12 with compact support.  The pipeline needs, for such a function
G, the truncated frequency moment

    M_l(G, tau) = int_{-tau}^{tau} Re G^(omega) omega^l domega,

where G^ is the continuous Fourier transform with kernel e^{-2 pi i omega x}.
Swapping the order of integration turns this into a time-domain integral
against the kernel C_l(2 pi tau x) where

    C_r(a) = int_0^1 v^r cos(a v) dv,    S_r(a) = int_0^1 v^r sin(a v) dv,

and those trigonometric moments satisfy a two-term recurrence obtained by
integrating by parts.  The recurrence cancels catastrophically when |a| is
small relative to r, so a Maclaurin series is used below the threshold
|a| < max(1, r)/2.  The remaining per-piece integral of t^c C_l(p + q t) is
reduced by a second integration-by-parts ladder, bottoming out in sine- and
cosine-integral evaluations; regimes where the ladder would amplify rounding
are routed to panelled Gauss-Legendre quadrature of the (smooth, bounded)
integrand instead.
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = [
    "PiecewisePoly",
    "trig_moments",
    "fourier_moment",
    "fourier_transform",
    "clip",
    "l2_distance_sq",
]

MAX_DEGREE = 12

_SERIES_TERMS = 40
# Below this |q| the by-parts ladder divides by a small number; a single
# Gauss-Legendre panel is exact there instead (the integrand completes at
# most ~1.5 oscillations).
_Q_SMALL = 8.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL01_NODES = 0.5 * (_GL_NODES + 1.0)
_GL01_WEIGHTS = 0.5 * _GL_WEIGHTS


class PiecewisePoly:
    """s-piece polynomial, identically zero outside ``support``.

    Pieces live on consecutive intervals ``[edges[j], edges[j+1]]`` and are
    stored in the local monomial basis t = (x - left)/width, which keeps the
    coefficients well conditioned up to degree 12.
    """

    def __init__(self, edges, coeffs):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or len(edges) < 2:
            raise ValueError("need at least one piece")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        coeffs = [np.atleast_1d(np.asarray(c, dtype=float)) for c in coeffs]
        if len(coeffs) != len(edges) - 1:
            raise ValueError("coefficient count must match piece count")
        for c in coeffs:
            if len(c) - 1 > MAX_DEGREE:
                raise ValueError("degree > %d not supported" % MAX_DEGREE)
            if not np.all(np.isfinite(c)):
                raise ValueError("non-finite coefficient")
        self.edges = edges
        self.coeffs = coeffs

    @property
    def support(self):
        return float(self.edges[0]), float(self.edges[-1])

    @property
    def nodes(self):
        return self.edges[1:-1]

    @property
    def npieces(self):
        return len(self.coeffs)

    @property
    def degree(self):
        return max(len(c) - 1 for c in self.coeffs)

    def __call__(self, x):
        return pp_eval(self, x)

    def to_json(self) -> str:
        return json.dumps(
            {
                "support": list(self.support),
                "nodes": self.nodes.tolist(),
                "coeffs": [c.tolist() for c in self.coeffs],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PiecewisePoly":
        obj = json.loads(text)
        lo, hi = obj["support"]
        edges = np.concatenate(([lo], obj["nodes"], [hi]))
        return cls(edges, [np.asarray(c) for c in obj["coeffs"]])


def pp_eval(pp: PiecewisePoly, x):
    """Evaluate ``pp`` at scalar or array ``x`` (0 outside the support)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    lo, hi = pp.support
    inside = (x >= lo) & (x <= hi)
    idx = np.searchsorted(pp.edges, x[inside], side="right") - 1
    idx = np.clip(idx, 0, pp.npieces - 1)
    vals = np.empty(idx.shape)
    xin = x[inside]
    for j in np.unique(idx):
        sel = idx == j
        left, right = pp.edges[j], pp.edges[j + 1]
        t = (xin[sel] - left) / (right - left)
        c = pp.coeffs[j]
        acc = np.full(t.shape, c[-1])
        for a in c[-2::-1]:
            acc = acc * t + a
        vals[sel] = acc
    out[inside] = vals
    return float(out[0]) if scalar else out


def _trig_tables(rmax: int, a: float):
    """C_r(a), S_r(a) for r = 0..rmax.

    Recurrence where it is stable (|a| >= max(1, r)/2), Maclaurin series
    elsewhere; the two agree to ~1e-12 across the switch.
    """
    C = np.empty(rmax + 1)
    S = np.empty(rmax + 1)
    if a == 0.0:
        C[:] = 1.0 / (np.arange(rmax + 1) + 1.0)
        S[:] = 0.0
        return C, S
    sin_a, cos_a = math.sin(a), math.cos(a)
    for r in range(rmax + 1):
        if abs(a) < max(1.0, r) / 2.0:
            c = s = 0.0
            apow = 1.0
            for m in range(_SERIES_TERMS):
                # apow = a^{2m}/(2m)! built incrementally
                c += apow / (r + 2 * m + 1)
                s += apow * a / ((2 * m + 1) * (r + 2 * m + 2))
                apow *= -a * a / ((2 * m + 1) * (2 * m + 2))
                if abs(apow) < 1e-18:
                    break
            C[r] = c
            S[r] = s
        elif r == 0:
            C[0] = sin_a / a
            S[0] = (1.0 - cos_a) / a
        else:
            C[r] = sin_a / a - (r / a) * S[r - 1]
            S[r] = -cos_a / a + (r / a) * C[r - 1]
    return C, S


def _trig_tables_vec(rmax: int, a: np.ndarray):
    """Vectorized C_r / S_r tables: shape (rmax+1, len(a)).

    Same branch structure as the scalar version; |a| = 0 always lands in the
    series branch (threshold >= 1/2), which handles it exactly.
    """
    a = np.asarray(a, dtype=float)
    C = np.empty((rmax + 1,) + a.shape)
    S = np.empty_like(C)
    sin_a, cos_a = np.sin(a), np.cos(a)
    safe = np.where(a == 0.0, 1.0, a)
    inv = 1.0 / safe
    for r in range(rmax + 1):
        if r == 0:
            Cr = sin_a * inv
            Sr = (1.0 - cos_a) * inv
        else:
            Cr = sin_a * inv - (r * inv) * S[r - 1]
            Sr = -cos_a * inv + (r * inv) * C[r - 1]
        small = np.abs(a) < max(1.0, r) / 2.0
        if small.any():
            asm = a[small]
            # term count from the worst |a| in the branch (scalar, cheap)
            amax2 = float(np.max(asm * asm))
            nterms, t = _SERIES_TERMS, 1.0
            for m in range(_SERIES_TERMS):
                t *= amax2 / ((2 * m + 1) * (2 * m + 2))
                if t < 1e-18:
                    nterms = m + 1
                    break
            c = np.zeros_like(asm)
            s = np.zeros_like(asm)
            apow = np.ones_like(asm)
            for m in range(nterms):
                c += apow / (r + 2 * m + 1)
                s += apow * asm / ((2 * m + 1) * (r + 2 * m + 2))
                apow *= -asm * asm / ((2 * m + 1) * (2 * m + 2))
            Cr[small] = c
            Sr[small] = s
        C[r] = Cr
        S[r] = Sr
    return C, S


def trig_moments(r: int, a: float):
    """Return (int_0^1 x^r cos(ax) dx, int_0^1 x^r sin(ax) dx) exactly."""
    if r < 0:
        raise ValueError("degree must be nonnegative")
    C, S = _trig_tables(r, float(a))
    return float(C[r]), float(S[r])


def _quad_tables(rmax: int, p: float, q: float):
    """Nodes, weights, and kernel tables for GL quadrature of one piece.

    One table serves every (kind, c, ell <= rmax) query against the same
    (p, q), which is what makes the quadrature fallback cheap.
    """
    npanels = max(1, int(math.ceil(abs(q) / 6.0)))
    t = ((np.arange(npanels)[:, None] + _GL01_NODES[None, :]) / npanels).ravel()
    w = np.tile(_GL01_WEIGHTS / npanels, npanels)
    C, S = _trig_tables_vec(rmax, p + q * t)
    return t, w, C, S


def _phi_quad(kind: str, c: int, ell: int, tables) -> float:
    """Gauss-Legendre evaluation of int_0^1 t^c K_ell(p + q t) dt."""
    t, w, C, S = tables
    vals = C[ell] if kind == "C" else S[ell]
    return float(np.dot(w, vals * t**c))


def _phi(kind: str, c: int, ell: int, p: float, q: float, tabL, tabR,
         quad_cache: dict) -> float:
    """int_0^1 t^c C_ell(p+qt) dt (kind 'C') or with S_ell (kind 'S').

    tabL/tabR are the trig tables at z = p and z = p + q; quad_cache holds
    the lazily built quadrature tables shared across the ladder for a piece.
    """
    if abs(q) < _Q_SMALL or ell == 0:
        if "t" not in quad_cache:
            quad_cache["t"] = _quad_tables(quad_cache["rmax"], p, q)
        return _phi_quad(kind, c, ell, quad_cache["t"])
    CL, SL = tabL
    CR, SR = tabR
    if kind == "C":
        if c == 0:
            return (SR[ell - 1] - SL[ell - 1]) / q
        return SR[ell - 1] / q - (c / q) * _phi("S", c - 1, ell - 1, p, q,
                                                tabL, tabR, quad_cache)
    if c == 0:
        return -(CR[ell - 1] - CL[ell - 1]) / q
    return -CR[ell - 1] / q + (c / q) * _phi("C", c - 1, ell - 1, p, q,
                                             tabL, tabR, quad_cache)


def fourier_moment(pp: PiecewisePoly, ell: int, tau: float) -> float:
    """Truncated frequency moment int_{-tau}^{tau} Re pp^(omega) omega^ell domega.

    Only even ell is meaningful for the (symmetrized) densities this package
    produces; odd ell is rejected.  Swapping integration order gives

        M = 2 tau^{ell+1} int pp(x) C_ell(2 pi tau x) dx,

    which is evaluated piece by piece in closed form.
    """
    if ell < 0 or ell % 2 != 0:
        raise ValueError("moment degree must be even and nonnegative")
    if tau <= 0:
        raise ValueError("cutoff must be positive")
    total = 0.0
    two_pi_tau = 2.0 * math.pi * tau
    for j in range(pp.npieces):
        left, right = pp.edges[j], pp.edges[j + 1]
        w = right - left
        p = two_pi_tau * left
        q = two_pi_tau * w
        tabL = _trig_tables(max(ell, 1), p)
        tabR = _trig_tables(max(ell, 1), p + q)
        beta = pp.coeffs[j]
        quad_cache = {"rmax": max(ell, 1)}
        acc = 0.0
        for c, b in enumerate(beta):
            if b != 0.0:
                acc += b * _phi("C", c, ell, p, q, tabL, tabR, quad_cache)
        total += w * acc
    # log-scale the tau power to dodge overflow at large ell * log(tau)
    return 2.0 * total * math.exp((ell + 1) * math.log(tau))


def fourier_transform(pp: PiecewisePoly, omega) -> np.ndarray:
    """pp^(omega) = int pp(x) e^{-2 pi i omega x} dx, vectorized in omega."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.zeros(omega.shape, dtype=complex)
    for j in range(pp.npieces):
        left, right = pp.edges[j], pp.edges[j + 1]
        w = right - left
        beta = pp.coeffs[j]
        b = 2.0 * math.pi * omega * w
        theta = 2.0 * math.pi * omega * left
        C, S = _trig_tables_vec(len(beta) - 1, b)
        A = beta @ C
        B = beta @ S
        out += w * np.exp(-1j * theta) * (A - 1j * B)
    return out


def _local_roots(coeffs: np.ndarray, value: float) -> list[float]:
    """Real roots of q(t) = value with t in (0, 1), polished by bisection."""
    c = coeffs.copy()
    c[0] -= value
    nz = np.nonzero(np.abs(c) > 0)[0]
    if len(nz) == 0 or nz[-1] == 0:
        return []
    c = c[: nz[-1] + 1]
    roots = np.roots(c[::-1])
    out = []
    for r in roots:
        if abs(r.imag) > 1e-8:
            continue
        t = float(r.real)
        if not (1e-12 < t < 1 - 1e-12):
            continue
        # a few bisection steps around the candidate tighten it to ~1e-12
        lo, hi = max(0.0, t - 1e-6), min(1.0, t + 1e-6)
        f = lambda u: float(np.polyval(c[::-1], u))
        if f(lo) * f(hi) < 0:
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if f(lo) * f(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            t = 0.5 * (lo + hi)
        out.append(t)
    return sorted(set(out))


def _rebase(coeffs: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """Re-express q(t) on [t0, t1] in the local coordinate of that subpiece."""
    poly = np.polynomial.Polynomial(coeffs)
    sub = poly(np.polynomial.Polynomial([t0, t1 - t0]))
    return sub.coef


def clip(pp: PiecewisePoly, lo_val: float, hi_val: float) -> PiecewisePoly:
    """Pointwise min(max(pp, lo_val), hi_val) on the support, as a PiecewisePoly."""
    if lo_val > hi_val:
        raise ValueError("lo_val must not exceed hi_val")
    new_edges = [pp.edges[0]]
    new_coeffs = []
    for j in range(pp.npieces):
        left, right = pp.edges[j], pp.edges[j + 1]
        beta = pp.coeffs[j]
        cuts = [0.0, 1.0]
        cuts += _local_roots(beta, lo_val)
        if np.isfinite(hi_val):
            cuts += _local_roots(beta, hi_val)
        cuts = sorted(set(cuts))
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (t0 + t1)
            val = float(np.polyval(beta[::-1], mid))
            if val < lo_val:
                piece = np.array([lo_val])
            elif val > hi_val:
                piece = np.array([hi_val])
            else:
                piece = _rebase(beta, t0, t1)
            new_edges.append(left + t1 * (right - left))
            new_coeffs.append(piece)
    return PiecewisePoly(np.array(new_edges), new_coeffs)


def _gmm_density(weights, sigmas, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for wgt, sig in zip(weights, sigmas):
        if sig > 0:
            out += wgt * np.exp(-0.5 * (x / sig) ** 2) / (sig * math.sqrt(2 * math.pi))
    return out


def l2_distance_sq(pp: PiecewisePoly, g) -> float:
    """Quadrature of (pp - density_g)^2; ``g`` exposes weights and sigmas."""
    from scipy.integrate import quad

    sig_max = float(np.max(g.sigmas))
    if sig_max <= 0:
        raise ValueError("degenerate mixture has no square-integrable density")
    lo = min(pp.support[0], -8.0 * sig_max)
    hi = max(pp.support[1], 8.0 * sig_max)
    cuts = np.unique(np.concatenate(([lo, hi], pp.edges)))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    total = 0.0
    f = lambda x: (pp_eval(pp, x) - float(_gmm_density(g.weights, g.sigmas, x))) ** 2
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = quad(f, a, b, epsabs=1e-11, epsrel=1e-9, limit=200)
        total += val
    return total
