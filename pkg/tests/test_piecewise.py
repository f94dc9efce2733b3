import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fourier_moment_oracle
from mixlearn.piecewise import (PiecewisePoly, clip, fourier_moment,
                                fourier_transform, l2_distance_sq, pp_eval,
                                trig_moments)


def random_pp(rng, s_max=20, d_max=8, span=3.0):
    s = int(rng.integers(1, s_max + 1))
    edges = np.sort(rng.uniform(-span, span, s + 1))
    edges += np.arange(s + 1) * 1e-3  # keep pieces nondegenerate
    coeffs = [rng.standard_normal(int(rng.integers(1, d_max + 2))) for _ in range(s)]
    return PiecewisePoly(edges, coeffs)


def test_eval_matches_local_monomials(rng):
    pp = random_pp(rng)
    for j in range(pp.npieces):
        a, b = pp.edges[j], pp.edges[j + 1]
        x = rng.uniform(a, b, 20)
        t = (x - a) / (b - a)
        ref = np.polyval(pp.coeffs[j][::-1], t)
        assert np.allclose(pp(x), ref, atol=1e-12)
    lo, hi = pp.support
    assert pp(lo - 1.0) == 0.0 and pp(hi + 1.0) == 0.0


def test_json_round_trip(rng):
    pp = random_pp(rng)
    back = PiecewisePoly.from_json(pp.to_json())
    x = rng.uniform(*pp.support, 100)
    assert np.array_equal(pp(x), back(x))


@pytest.mark.parametrize("r,a", [(0, 0.3), (3, 2.0), (7, 15.0), (12, 0.01), (5, 80.0)])
def test_trig_moments_against_mpmath(r, a):
    mp = pytest.importorskip("mpmath")
    c, s = trig_moments(r, a)
    cref = float(mp.quad(lambda x: x**r * mp.cos(a * x), [0, 1]))
    sref = float(mp.quad(lambda x: x**r * mp.sin(a * x), [0, 1]))
    assert abs(c - cref) < 1e-12
    assert abs(s - sref) < 1e-12


def test_trig_moments_zero_frequency():
    for r in range(6):
        c, s = trig_moments(r, 0.0)
        assert c == pytest.approx(1.0 / (r + 1))
        assert s == 0.0


def test_fourier_moment_against_quadrature(rng):
    worst = 0.0
    for _ in range(40):
        pp = random_pp(rng, s_max=6, d_max=5)
        tau = float(rng.uniform(0.2, 30.0))
        ell = int(rng.integers(0, 8)) * 2
        got = fourier_moment(pp, ell, tau)
        ref = fourier_moment_oracle(pp, ell, tau)
        err = abs(got - ref) / max(abs(ref), 1e-4)
        worst = max(worst, err)
    assert worst < 1e-8


def test_fourier_moment_rejects_odd_degree(rng):
    pp = random_pp(rng, s_max=2, d_max=2)
    with pytest.raises(ValueError):
        fourier_moment(pp, 3, 1.0)
    with pytest.raises(ValueError):
        fourier_moment(pp, 2, -1.0)


def test_fourier_transform_at_zero_is_mass(rng):
    pp = random_pp(rng, s_max=5, d_max=4)
    # integrate each piece exactly: width * int_0^1 poly(t) dt
    mass = 0.0
    for j in range(pp.npieces):
        c = pp.coeffs[j]
        mass += (pp.edges[j + 1] - pp.edges[j]) * np.sum(c / (np.arange(len(c)) + 1.0))
    assert fourier_transform(pp, 0.0)[0].real == pytest.approx(mass, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(lo=st.floats(0.0, 0.4), hi=st.floats(0.6, 3.0), seed=st.integers(0, 10_000))
def test_clip_brackets_values(lo, hi, seed):
    rng = np.random.default_rng(seed)
    pp = random_pp(rng, s_max=4, d_max=4)
    cl = clip(pp, lo, hi)
    x = rng.uniform(*pp.support, 300)
    vals = cl(x)
    assert np.all(vals >= lo - 1e-9)
    assert np.all(vals <= hi + 1e-9)
    raw = pp(x)
    inside = (raw >= lo) & (raw <= hi)
    assert np.allclose(vals[inside], raw[inside], atol=1e-9)


def test_l2_distance_against_quadrature(rng):
    from scipy.integrate import quad

    pp = random_pp(rng, s_max=3, d_max=3, span=1.5)
    weights = np.array([0.4, 0.6])
    sigmas = np.array([0.5, 1.5])

    def dens(x):
        return np.sum(weights * np.exp(-0.5 * (x / sigmas) ** 2)
                      / (sigmas * math.sqrt(2 * math.pi)))

    ref, _ = quad(lambda x: (pp(x) - dens(x)) ** 2, -12.0, 12.0, limit=600)
    from mixlearn.model import ZeroMeanGmm

    got = l2_distance_sq(pp, ZeroMeanGmm(weights, sigmas))
    assert got == pytest.approx(ref, rel=1e-6, abs=1e-10)
