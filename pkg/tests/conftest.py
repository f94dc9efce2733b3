import math

import numpy as np
import pytest

from mixlearn.model import HyperplaneModel, MlrModel


def make_mlr(k, d, seed, noise=0.0, sep=1.0):
    """Random unit-norm regressors, uniform weights, resampled until the
    pairwise separation clears ``sep``."""
    rng = np.random.default_rng(seed)
    while True:
        w = rng.standard_normal((k, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        m = MlrModel(np.ones(k) / k, w, noise_rate=noise)
        if k == 1 or m.separation >= sep:
            return m


def make_hyper(k, d, seed, sep=1.0):
    rng = np.random.default_rng(seed)
    while True:
        v = rng.standard_normal((k, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        m = HyperplaneModel(np.ones(k) / k, v)
        if k == 1 or m.separation >= sep:
            return m


def gl_panels(a, b, max_phase_step, order=16):
    """Panelled Gauss-Legendre nodes/weights on [a, b], panel width capped so
    the integrand's phase advances at most ~6 rad per panel."""
    n = max(1, int(math.ceil((b - a) / max_phase_step)))
    xs, ws = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    weights = (half[:, None] * ws[None, :]).ravel()
    return nodes, weights


def fourier_moment_oracle(pp, ell, tau):
    """Tensor quadrature of 2 int_0^tau int pp(x) w^ell cos(2 pi w x) dx dw,
    independent of the closed-form evaluation under test."""
    big = max(abs(pp.edges[0]), abs(pp.edges[-1]))
    wn, ww = gl_panels(0.0, tau, max_phase_step=max(1e-9, 1.0 / (1.2 * max(big, 1e-9))))
    total = 0.0
    for j in range(pp.npieces):
        a, b = pp.edges[j], pp.edges[j + 1]
        xn, xw = gl_panels(a, b, max_phase_step=max(1e-9, 1.0 / (1.2 * tau)))
        t = (xn - a) / (b - a)
        vals = np.polyval(pp.coeffs[j][::-1], t)
        phase = np.cos(2 * np.pi * np.outer(wn, xn))
        total += np.einsum("w,x,wx->", ww * wn**ell, xw * vals, phase)
    return 2.0 * total


@pytest.fixture
def rng():
    return np.random.default_rng(0)
