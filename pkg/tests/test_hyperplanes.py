import numpy as np
import pytest

from conftest import make_hyper
from mixlearn.descent import DescentConfig
from mixlearn.hyperplanes import (_canonical_sign, _rotation_to_last,
                                  check_outcome_hyperplanes,
                                  hyperplane_moment_descent, learn_hyperplanes,
                                  reduce_to_mlr)
from mixlearn.model import HyperplaneSampler, Samples, score_recovery


def test_rotation_maps_to_last_axis(rng):
    for _ in range(10):
        w = rng.standard_normal(5)
        w /= np.linalg.norm(w)
        H = _rotation_to_last(w)
        assert np.allclose(H @ w, np.eye(5)[4], atol=1e-12)
        assert np.allclose(H @ H.T, np.eye(5), atol=1e-12)


def test_canonical_sign_idempotent(rng):
    v = rng.standard_normal(6)
    c = _canonical_sign(v)
    assert np.array_equal(_canonical_sign(c), c)
    assert np.array_equal(_canonical_sign(-v), c)
    assert c[np.argmax(np.abs(c))] > 0


def test_reduction_turns_planes_into_regressions():
    m = make_hyper(2, 6, 1)
    smp = HyperplaneSampler(m, seed=10)
    pts = smp.draw(5000, 0)
    rng = np.random.default_rng(3)
    w = rng.standard_normal(6)
    w /= np.linalg.norm(w)
    red = reduce_to_mlr(pts, w)
    assert isinstance(red, Samples)
    H = _rotation_to_last(w)
    for j in range(2):
        vr = H @ m.directions[j]
        u = -vr[:-1] / vr[-1]
        mask = np.abs(pts @ m.directions[j]) < 1e-9
        resid = red.y[mask] - red.x[mask] @ u
        assert mask.sum() > 100
        assert np.max(np.abs(resid)) < 1e-8


def test_check_outcome_accepts_truth_rejects_random():
    m = make_hyper(2, 6, 1)
    smp = HyperplaneSampler(m, seed=10)
    assert check_outcome_hyperplanes(smp, m.directions[0], 0.05, 0.05, run_tag=(5,))
    rng = np.random.default_rng(0)
    v_far = rng.standard_normal(6)
    v_far /= np.linalg.norm(v_far)
    assert not check_outcome_hyperplanes(smp, v_far, 0.05, 0.05, run_tag=(6,))


def test_single_plane_descent():
    m = make_hyper(1, 4, 2)
    smp = HyperplaneSampler(m, seed=20)
    cfg = DescentConfig(k=1, p_min=1.0, separation=1.0)
    a, trace = hyperplane_moment_descent(smp, 0.1, 0.05, cfg)
    err = min(np.linalg.norm(a - m.directions[0]),
              np.linalg.norm(a + m.directions[0]))
    assert err <= 0.05


def test_learn_two_planes():
    m = make_hyper(2, 6, 3)
    smp = HyperplaneSampler(m, seed=30)
    cfg = DescentConfig(k=2, p_min=0.5, separation=m.separation)
    est = learn_hyperplanes(smp, 0.1, 0.05, cfg)
    rep = score_recovery(est, m, signed=True)
    assert len(est) == 2
    assert rep.max_error <= 0.05
    for v in est:
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)


def test_learn_hyperplanes_deterministic():
    m = make_hyper(2, 5, 4)
    cfg = DescentConfig(k=2, p_min=0.5, separation=m.separation)
    a = learn_hyperplanes(HyperplaneSampler(m, 8), 0.1, 0.1, cfg)
    b = learn_hyperplanes(HyperplaneSampler(m, 8), 0.1, 0.1, cfg)
    assert np.array_equal(np.asarray(a), np.asarray(b))
