"""Crank-Nicolson solver for F (and H = 1 - F) in backward time tau = -a.

The H equation is

    dH/dtau = (4/3) H'' + b(x, a) H' + c(x, a) H - c(x, a),

with Dirichlet H = 0 at x = 0 and 2pi.  We march the equivalent F equation
dF/dtau = (4/3) F'' + b F' + c F with F = 1 on the boundary: near a = 0 the
potential c is large and nearly constant, H = 1 is an unstable equilibrium,
and rounding errors in H ~ 1 would be amplified by exp(int c); F is tiny
there and carries its own relative precision.  Writing P = theta/sin(x/2), the
diffusion and drift combine into (4/3) m^{-1} (m H')' with
m = P^{3/2}/sin(x/2), which we discretize in conservative form on a vertex
grid.  Face conductances integrate 1/m exactly in the singular factor, so
the scheme stays an M-matrix up to the endpoints and is exact for the
q = 0 mode sin^2(x/2) up to O(h^2).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

from . import kernels
from .special_fn import AnnulusParam, DomainError, as_param


class PdeStepError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    n_cells: int = 2048
    dtau0: float = 1e-4
    dtau_max: float = 1e-2
    growth: float = 1.03
    n_implicit: int = 4
    reaction_cfl: float = 0.25   # cap dtau * max(c) where F grows fastest
    rel_step: float = 0.005      # cap dtau / tau; coefficients scale like tau^-2
    richardson: bool = True      # extrapolate against a (h/2, dtau/2) replay
    scheme: str = "crank-nicolson/finite-volume"

    @property
    def h(self):
        return 2 * math.pi / self.n_cells

    @property
    def x_nodes(self):
        return self.h * np.arange(1, self.n_cells)


@dataclass
class PdeSolution:
    a_levels: np.ndarray
    x_nodes: np.ndarray
    F: np.ndarray
    grid: Grid
    metadata: dict = field(default_factory=dict)

    @property
    def H(self):
        return 1.0 - self.F

    def params(self):
        return [AnnulusParam(a) for a in self.a_levels]

    def G(self, level):
        """F theta^{3/4} sin^{-5/4}(x/2) on the interior nodes."""
        a = self.a_levels[level]
        x = self.x_nodes
        lnp = np.array([kernels.log_theta_over_sin(v, a) for v in x])
        return self.F[level] * np.exp(0.75 * lnp) * np.sin(x / 2) ** -0.5


# -------------------------------------------------------------- coefficients


def pde_coefficients(x, p, frozen=False):
    """(diffusion, drift, potential) of the H equation at (x, a)."""
    p = as_param(p)
    x = float(x)
    if not 0 < x < 2 * math.pi:
        raise DomainError("x must lie in (0, 2pi)")
    if frozen:
        return 4.0 / 3.0, -(2.0 / 3.0) / math.tan(x / 2), 0.0
    return 4.0 / 3.0, kernels.pde_drift(x, p.a), kernels.pde_potential(x, p.a)


def initial_condition(a_start, x):
    """H = 1 - exp(5 pi min(x, 2pi - x)/(8 a_start))."""
    return 1.0 - initial_F(a_start, x)


def initial_F(a_start, x):
    xs = np.minimum(x, 2 * np.pi - np.asarray(x, dtype=float))
    return np.exp(5 * np.pi * xs / (8 * a_start))


@njit(cache=True)
def _assemble(a, n, frozen):
    """Tridiagonal operator (lo, di, up) and potential c on interior nodes 1..n-1."""
    h = 2.0 * math.pi / n
    m = n - 1
    lo = np.zeros(m)
    di = np.zeros(m)
    up = np.zeros(m)
    c = np.zeros(m)
    kf = np.empty(n)
    ref = 0.0
    if not frozen:
        ref = kernels.log_theta_over_sin(math.pi, a)
    s4 = math.sin(0.25 * h)
    for i in range(n):
        xf = (i + 0.5) * h
        w = 1.0
        if not frozen:
            w = math.exp(1.5 * (kernels.log_theta_over_sin(xf, a) - ref))
        kf[i] = w / (4.0 * math.sin(0.5 * xf) * s4)
    for i in range(1, n):
        xi = i * h
        w = 1.0
        if not frozen:
            w = math.exp(1.5 * (kernels.log_theta_over_sin(xi, a) - ref))
            c[i - 1] = kernels.pde_potential(xi, a)
        vol = h * w / math.sin(0.5 * xi)
        g = (4.0 / 3.0) / vol
        lo[i - 1] = g * kf[i - 1]
        up[i - 1] = g * kf[i]
        di[i - 1] = -g * (kf[i - 1] + kf[i]) + c[i - 1]
    return lo, di, up, c


def _step(F, lo, di, up, dtau, theta):
    """One theta-scheme step for F with F = 1 at both ends
    (theta = 1/2 Crank-Nicolson, 1 implicit Euler)."""
    m = F.shape[0]
    ab = np.zeros((3, m))
    ab[0, 1:] = -theta * dtau * up[:-1]
    ab[1] = 1 - theta * dtau * di
    ab[2, :-1] = -theta * dtau * lo[1:]
    ex = (1 - theta) * dtau
    rhs = F + ex * di * F
    rhs[1:] += ex * lo[1:] * F[:-1]
    rhs[:-1] += ex * up[:-1] * F[1:]
    rhs[0] += dtau * lo[0]
    rhs[-1] += dtau * up[-1]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _check(F, eps):
    return F.min() >= -eps and F.max() <= 1 + eps


def _march(F, tau, tau_end, grid, frozen, eps, max_halvings, pending):
    n = grid.n_cells
    taus = [tau]
    table = [F.copy()]
    dtau = grid.dtau0
    k = 0
    rejected = 0
    while tau < tau_end - 1e-14:
        step = min(dtau, grid.rel_step * tau)
        lo, di, up, c = _assemble(-(tau + 0.5 * step), n, frozen)
        cmax = c.max()
        if cmax * step > grid.reaction_cfl:
            step = grid.reaction_cfl / cmax
            dtau = step
        while pending and pending[0] <= tau + 1e-13:
            pending.pop(0)
        target = pending[0] if pending else tau_end
        snap = tau + step > target - 1e-3 * step
        if snap:
            step = target - tau
        for _ in range(max_halvings + 1):
            lo, di, up, c = _assemble(-(tau + 0.5 * step), n, frozen)
            theta = 1.0 if k < grid.n_implicit else 0.5
            Fn = _step(F, lo, di, up, step, theta)
            if _check(Fn, eps):
                break
            rejected += 1
            step *= 0.5
            snap = False
        else:
            raise PdeStepError(f"F left [-{eps}, 1+{eps}] at a = {-(tau + step):.6g}")
        F = Fn
        tau = target if snap else tau + step
        k += 1
        taus.append(tau)
        table.append(F.copy())
        dtau = min(dtau * grid.growth, grid.dtau_max)
    return np.array(taus), np.array(table), rejected


def _replay_fine(F, taus, n, frozen, n_implicit, eps):
    """Two equal half steps per coarse step on the grid with n cells."""
    out = [F.copy()]
    k = 0
    for t0, t1 in zip(taus[:-1], taus[1:]):
        half = 0.5 * (t1 - t0)
        for t in (t0, t0 + half):
            lo, di, up, _ = _assemble(-(t + 0.5 * half), n, frozen)
            F = _step(F, lo, di, up, half, 1.0 if k < n_implicit else 0.5)
            k += 1
        if not _check(F, eps):
            raise PdeStepError(f"F left [-{eps}, 1+{eps}] at a = {-t1:.6g} (fine replay)")
        out.append(F.copy())
    return np.array(out)


def solve(a_start=-0.02, a_end=-4.0, grid=None, frozen=False, init=None, eps=1e-6,
          max_halvings=12, stops=()):
    """March from a_start down to a_end; returns every accepted level.

    ``init`` maps x to the initial H profile.  Every a in ``stops`` inside
    the range becomes an exact level, so lookups there need no interpolation
    in a.  With ``grid.richardson`` the march is replayed with half the cell
    size and two half steps per level, and the two tables are combined as
    F_c (F_f/F_c)^{4/3}, the log form of (4 F_f - F_c)/3; both errors are
    O(h^2 + dtau^2).
    """
    grid = grid or Grid()
    if not a_start < 0:
        raise DomainError("a_start must be negative")
    if not a_end < a_start:
        raise DomainError("a_end must be below a_start")
    if grid.n_cells < 8 or grid.n_cells % 2:
        raise DomainError("n_cells must be even and >= 8")
    x = grid.x_nodes

    def start(xs):
        if init is not None:
            return 1.0 - np.asarray(init(xs), dtype=float)
        return initial_F(a_start, xs)

    pending = sorted(-float(v) for v in stops if a_end < v < a_start)
    taus, table, rejected = _march(start(x), -a_start, -a_end, grid, frozen, eps,
                                   max_halvings, pending)
    if grid.richardson:
        n2 = 2 * grid.n_cells
        x2 = 2 * math.pi / n2 * np.arange(1, n2)
        fine = _replay_fine(start(x2), taus, n2, frozen, 2 * grid.n_implicit, eps)[:, 1::2]
        with np.errstate(divide="ignore", invalid="ignore"):
            ext = table * (fine / table) ** (4.0 / 3.0)
        ok = (table > 0) & (fine > 0)
        table = np.clip(np.where(ok, ext, fine), 0.0, 1.0)
    meta = {
        "a_start": a_start, "a_end": a_end, "n_cells": grid.n_cells, "dtau0": grid.dtau0,
        "dtau_max": grid.dtau_max, "growth": grid.growth, "n_implicit": grid.n_implicit,
        "reaction_cfl": grid.reaction_cfl, "rel_step": grid.rel_step,
        "richardson": grid.richardson,
        "frozen": bool(frozen), "initialization": "custom" if init is not None else "asymptotic",
        "n_levels": len(taus), "rejected_steps": rejected, "eps": eps,
    }
    return PdeSolution(-taus, x, table, grid, meta)


# -------------------------------------------------------------- lookups


def _row_full(sol, j):
    return np.concatenate(([1.0], sol.F[j], [1.0]))


def _row_at(sol, a):
    """F on the full grid x = 0, h, ..., 2pi at level a.

    Interpolation in a is 4-point Lagrange on log F: F varies like
    exp(c/a) near a = 0, where linear interpolation would cost several
    digits between levels.
    """
    a = float(a)
    lv = sol.a_levels
    if not (lv[-1] - 1e-12 <= a <= lv[0] + 1e-12):
        raise DomainError(f"a = {a} outside the solved range [{lv[-1]}, {lv[0]}]")
    # levels decrease: j with lv[j] >= a >= lv[j+1]
    j = int(np.searchsorted(-lv, -a, side="right")) - 1
    j = min(max(j, 0), len(lv) - 2)
    if lv[j] == a:
        return _row_full(sol, j)
    if lv[j + 1] == a:
        return _row_full(sol, j + 1)
    idx = np.arange(max(j - 1, 0), min(j + 3, len(lv)))
    rows = np.array([_row_full(sol, k) for k in idx])
    if len(idx) < 4 or rows.min() <= 0:
        ta = (lv[j] - a) / (lv[j] - lv[j + 1])
        return (1 - ta) * _row_full(sol, j) + ta * _row_full(sol, j + 1)
    pts = lv[idx]
    w = np.ones(len(idx))
    for k in range(len(idx)):
        for m in range(len(idx)):
            if m != k:
                w[k] *= (a - pts[m]) / (pts[k] - pts[m])
    return np.exp(w @ np.log(rows))


def F_lookup(sol, a, x):
    """F at (a, x): linear in x between nodes, log-cubic in a between levels."""
    x = float(x)
    if not 0 <= x <= 2 * math.pi:
        raise DomainError("x must lie in [0, 2pi]")
    row = _row_at(sol, a)
    s = x / sol.grid.h
    i = min(int(math.floor(s)), sol.grid.n_cells - 1)
    t = s - i
    return row[i] * (1 - t) + row[i + 1] * t


def H_lookup(sol, a, x):
    return 1.0 - F_lookup(sol, a, x)


def F_lookup_many(sol, a, xs):
    """Vectorized F lookup at one level a for an array of x values."""
    xs = np.asarray(xs, dtype=float)
    if np.any((xs < 0) | (xs > 2 * np.pi)):
        raise DomainError("x must lie in [0, 2pi]")
    full_x = sol.grid.h * np.arange(sol.grid.n_cells + 1)
    return np.interp(xs, full_x, _row_at(sol, a))


def H_lookup_many(sol, a, xs):
    return 1.0 - F_lookup_many(sol, a, xs)


def fitted_constant(sol, x=math.pi):
    """c-hat = H(a_end, x) e^{-2 a_end/3} / sin^2(x/2)."""
    a = sol.a_levels[-1]
    return H_lookup(sol, a, x) * math.exp(-2 * a / 3) / math.sin(x / 2) ** 2


def galerkin_first_mode(a, x):
    """pi^{-1/2} q^{2/3} (1-q^2)^{1/2} prod_{n>=2} (1-q^{2n})^{5/4} sin(x/2)."""
    p = as_param(a)
    if not 0 <= x <= 2 * math.pi:
        raise DomainError("x must lie in [0, 2pi]")
    acc = 0.5 * math.log(-math.expm1(2 * p.a))
    for n in range(2, p.trunc.max_terms + 2):
        t = math.log(-math.expm1(2 * p.a * n))
        acc += 1.25 * t
        if abs(t) < 1e-17:
            break
    return math.exp(acc + 2 * p.a / 3) * math.sin(x / 2) / math.sqrt(math.pi)
