import cmath
import math

import numpy as np
import pytest

from annulus_sle import conformal, loewner
from annulus_sle.loewner import DrivingPath, KomatuState
from annulus_sle.special_fn import DomainError


def test_sample_driving_increments():
    d = loewner.sample_driving(T=20.0, dt=1e-3, seed=11)
    inc = np.diff(d.values)
    assert d.values[0] == 0.0
    assert inc.var() / d.dt == pytest.approx(loewner.KAPPA, rel=0.03)
    again = loewner.sample_driving(T=20.0, dt=1e-3, seed=11)
    assert np.array_equal(d.values, again.values)
    with pytest.raises(DomainError):
        loewner.sample_driving(0.0, 1e-3)


def test_constant_driving_gives_vertical_slit():
    n, dt = 50, 0.01
    tr = loewner.trace_from_driving(DrivingPath(dt, np.full(n + 1, 0.3)))
    assert tr.points[-1] == pytest.approx(0.3 + 2j * math.sqrt(n * dt), abs=1e-9)
    assert np.allclose(tr.points.real, 0.3)
    assert tr.capacities[-1] == pytest.approx(n * dt)


def test_disk_C_is_image_of_inner_circle():
    a = math.log(0.4)
    c, r = loewner.disk_C(a)
    for t in np.linspace(0, 2 * math.pi, 13):
        w = 0.4 * cmath.exp(1j * t)
        z = 1j * (1 + w) / (1 - w)
        assert abs(z - c) == pytest.approx(r, rel=1e-12)
    with pytest.raises(DomainError):
        loewner.disk_C(0.1)


def test_boundary_point_maps_to_cot():
    # e^{ix} goes to -cot(x/2); the sampler starts at +cot(x/2) by reflection
    x = 1.1
    w = cmath.exp(1j * x)
    z = 1j * (1 + w) / (1 - w)
    assert z.real == pytest.approx(-1 / math.tan(x / 2), rel=1e-12)
    assert abs(z.imag) < 1e-12


def test_slit_validation_small():
    est = loewner.estimate_slit_validation(4000, seed=5)
    exact = 2 ** -1.25
    assert abs(est.mean - exact) < 4 * est.stderr
    assert est.n_overflow == 0


def test_direct_estimate_inside_bracket_loosely():
    a, x = math.log(0.2), math.pi
    est = loewner.estimate_F_direct(a, x, 4000, seed=3)
    b = conformal.bracket_F(a, x)
    assert b.lower - 4 * est.stderr <= est.mean <= b.upper + 4 * est.stderr
    assert 0 <= est.accepted_early_fraction <= 1


def test_direct_estimate_deterministic():
    a = math.log(0.3)
    e1 = loewner.estimate_F_direct(a, 2.0, 300, seed=9, threads=1)
    e2 = loewner.estimate_F_direct(a, 2.0, 300, seed=9, threads=1)
    assert (e1.mean, e1.n_hit) == (e2.mean, e2.n_hit)


def test_komatu_inner_circle_moves_with_a():
    a0 = math.log(0.5)
    da = 1e-3
    pts = np.array([t + 1j * a0 for t in (0.5, 2.0, 4.0)])
    s = loewner.komatu_step(KomatuState(a0, pts, 1.0), da)
    assert s.a == pytest.approx(a0 + da)
    assert np.allclose(s.samples.imag, a0 + da, atol=1e-9)
    same = loewner.komatu_step(s, 0.0)
    assert np.array_equal(same.samples, s.samples)
    with pytest.raises(DomainError):
        loewner.komatu_step(s, -1e-3)


def test_disk_C_example():
    c, r = loewner.disk_C(math.log(1 / 3))
    assert c == pytest.approx(1.25j, abs=1e-14)
    assert r == pytest.approx(0.75, abs=1e-14)
    c, r = loewner.disk_C(math.log(1e-9))
    assert abs(c - 1j) < 1e-8 and r < 1e-8


def test_tiny_disk_always_avoided():
    est = loewner.estimate_F_direct(math.log(1e-3), 2.0, 2000, seed=1)
    assert est.mean == 1.0


def test_komatu_origin_fixed_and_periodic():
    a0 = math.log(0.5)
    z = np.array([0j, 0.4 + 0.2j, 0.4 + 0.2j + 2 * math.pi])
    s = KomatuState(a0, z, 1.0)
    for _ in range(20):
        s = loewner.komatu_step(s, 1e-3)
    assert abs(s.samples[0]) < 1e-12
    assert abs(s.samples[2] - s.samples[1] - 2 * math.pi) < 1e-9
