import math

import numpy as np
import pytest

from annulus_sle import conformal, pde
from annulus_sle.special_fn import DomainError


def test_initial_condition():
    x = np.array([0.0, 1.0, math.pi, 2 * math.pi - 1.0])
    F = pde.initial_F(-0.1, x)
    assert F[0] == 1.0
    assert F[1] == pytest.approx(math.exp(5 * math.pi / (8 * -0.1)))
    assert F[1] == F[3]
    assert np.allclose(pde.initial_condition(-0.1, x), 1 - F)


def test_coefficients():
    d, b, c = pde.pde_coefficients(1.0, -2.0, frozen=True)
    assert (d, c) == (4 / 3, 0.0)
    assert b == pytest.approx(-(2 / 3) / math.tan(0.5))
    with pytest.raises(DomainError):
        pde.pde_coefficients(0.0, -1.0)


def test_validation():
    with pytest.raises(DomainError):
        pde.solve(0.1, -1.0)
    with pytest.raises(DomainError):
        pde.solve(-1.0, -0.5)
    with pytest.raises(DomainError):
        pde.solve(-0.1, -0.2, grid=pde.Grid(n_cells=7))


def test_frozen_mode_exact():
    g = pde.Grid(n_cells=256)
    sol = pde.solve(-0.5, -2.5, grid=g, frozen=True, init=lambda x: 0.3 * np.sin(x / 2) ** 2)
    ex = 0.3 * math.exp(2 / 3 * (sol.a_levels[-1] + 0.5)) * np.sin(sol.x_nodes / 2) ** 2
    assert np.max(np.abs(sol.H[-1] / ex - 1)) < 1e-4


def test_solution_properties(full_solution):
    s = full_solution
    assert s.F.min() >= 0 and s.F.max() <= 1
    assert np.max(np.abs(s.F - s.F[:, ::-1])) < 1e-10
    # F grows toward 1 as the disk shrinks
    assert np.all(np.diff(s.F, axis=0) >= -1e-13)
    assert np.all(np.diff(s.a_levels) < 0)
    for a in (-0.7, -0.5, -0.3, -0.15):
        assert np.any(s.a_levels == a)


@pytest.mark.parametrize("q", [0.2, 0.3, 0.4, 0.5])
@pytest.mark.parametrize("x", [math.pi / 4, math.pi / 2, math.pi])
def test_inside_bracket(full_solution, q, x):
    a = math.log(q)
    b = conformal.bracket_F(a, x)
    f = pde.F_lookup(full_solution, a, x)
    assert b.lower <= f <= b.upper


def test_lookup_interpolation(full_solution):
    s = full_solution
    j = 100
    a = s.a_levels[j]
    x = s.x_nodes[37]
    assert pde.F_lookup(s, a, x) == s.F[j, 37]
    assert pde.F_lookup(s, a, 0.0) == 1.0
    am = 0.5 * (s.a_levels[j] + s.a_levels[j + 1])
    v = pde.F_lookup(s, am, x)
    lo, hi = sorted((s.F[j, 37], s.F[j + 1, 37]))
    assert lo <= v <= hi
    many = pde.F_lookup_many(s, am, [x, math.pi])
    assert many[0] == pytest.approx(v, rel=1e-14)
    assert pde.H_lookup(s, am, x) == pytest.approx(1 - v)
    with pytest.raises(DomainError):
        pde.F_lookup(s, -5.0, 1.0)
    with pytest.raises(DomainError):
        pde.F_lookup(s, -1.0, 7.0)


def test_start_insensitive(full_solution):
    other = pde.solve(-0.04, -0.6)
    for x in (math.pi / 2, math.pi):
        r = pde.F_lookup(full_solution, -0.5, x) / pde.F_lookup(other, -0.5, x)
        assert r == pytest.approx(1.0, abs=1e-6)


def test_small_q_form(full_solution):
    s = full_solution
    c = pde.fitted_constant(s)
    for x in (1.0, math.pi):
        approx = c * math.exp(2 * -3.5 / 3) * math.sin(x / 2) ** 2
        assert pde.H_lookup(s, -3.5, x) == pytest.approx(approx, rel=0.02)
    g = pde.galerkin_first_mode(-3.0, math.pi)
    assert 0 < g < 1


def test_G_finite(full_solution):
    G = full_solution.G(len(full_solution.a_levels) // 2)
    assert np.all(np.isfinite(G)) and np.all(G >= 0)


def test_metadata(full_solution):
    m = full_solution.metadata
    assert m["n_levels"] == len(full_solution.a_levels)
    assert m["richardson"] is True and m["frozen"] is False


def test_monotone_in_a_and_min_at_pi(full_solution):
    s = full_solution
    h = [pde.H_lookup(s, a, math.pi) for a in (-4.0, -1.0, -0.1)]
    assert h[0] < h[1] < h[2]
    j = len(s.a_levels) // 3
    assert np.argmin(s.F[j]) in (len(s.x_nodes) // 2 - 1, len(s.x_nodes) // 2)


def test_galerkin_examples():
    assert pde.galerkin_first_mode(-1.0, 0.0) == 0.0
    q = 1e-4
    g = pde.galerkin_first_mode(math.log(q), 1.0)
    assert g == pytest.approx(q ** (2 / 3) * math.sin(0.5) / math.sqrt(math.pi), rel=1e-7)
    with pytest.raises(DomainError):
        pde.galerkin_first_mode(-1.0, 7.0)
