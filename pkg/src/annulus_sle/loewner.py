"""Brute-force SLE(8/3) oracle in the upper half-plane and the Komatu-Loewner stepper.

Trace sampling uses piecewise-constant driving: over a step of capacity
time dt with driving value W the hull grows by the vertical slit
[W, W + 2i sqrt(dt)] and the map is g(z) = W + sqrt((z - W)^2 + 4 dt).

The avoidance oracle runs the flow forward on a polygon sampled from the
obstacle boundary.  The curve hits the obstacle exactly when a new slit
crosses the image polygon.  Steps are adapted to the distance between W and
the image, and the polygon is refined where its edges become long compared
with that distance.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from . import rng
from .special_fn import AnnulusParam, DomainError, as_param, xi2

KAPPA = 8.0 / 3.0

# path outcomes
HIT = 1
ACCEPT_EARLY = 2
TRUNCATED = 3
OVERFLOW = 4


@dataclass
class DrivingPath:
    dt: float
    values: np.ndarray
    kappa: float = KAPPA
    seed: int = rng.DEFAULT_SEED


@dataclass
class Trace:
    points: np.ndarray
    capacities: np.ndarray


@dataclass
class KomatuState:
    a: float
    samples: np.ndarray
    y: float


@dataclass
class SamplerConfig:
    rel_step: float = 0.1        # sqrt(dt) = rel_step * dist(W, obstacle image)
    accept_ratio: float = 100.0  # early accept once dist > accept_ratio * diameter
    hit_ratio: float = 1e-6      # declare a hit once dist < hit_ratio * diameter
    refine: float = 0.25         # edge length must stay below refine * dist(W, edge)
    n_boundary: int = 64
    max_points: int = 4096
    max_steps: int = 50_000
    T_max: float = 1e12


@dataclass
class DirectEstimate:
    mean: float
    stderr: float
    n_paths: int
    n_hit: int
    n_accept_early: int
    n_truncated: int
    n_overflow: int
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def accepted_early_fraction(self):
        return self.n_accept_early / self.n_paths


# ------------------------------------------------------------------ driving


def sample_driving(T, dt, seed=rng.DEFAULT_SEED, x0=0.0, kappa=KAPPA):
    if not (T > 0 and dt > 0):
        raise DomainError("T and dt must be positive")
    seed = rng.check_seed(seed)
    n = int(round(T / dt))
    inc = math.sqrt(kappa * dt) * rng.normals(seed, 0, n)
    values = np.empty(n + 1)
    values[0] = x0
    values[1:] = x0 + np.cumsum(inc)
    return DrivingPath(dt, values, kappa, seed)


@njit(cache=True)
def _slit_inverse(z, w, dt):
    r = np.sqrt((z - w) * (z - w) - 4.0 * dt)
    if r.imag < 0.0 or (r.imag == 0.0 and (z - w).real * r.real < 0.0):
        r = -r
    return w + r


@njit(cache=True)
def _compose_trace(values, dt):
    n = values.shape[0] - 1
    pts = np.empty(n + 1, dtype=np.complex128)
    pts[0] = values[0] + 0j
    sq = 2.0 * math.sqrt(dt)
    worst = 0.0
    for k in range(1, n + 1):
        z = values[k] + 1j * sq
        for j in range(k - 1, 0, -1):
            z = _slit_inverse(z, values[j], dt)
            if z.imag < worst:
                worst = z.imag
        pts[k] = z
    return pts, worst


def trace_from_driving(d, x0=0.0, tol=1e-9):
    """Trace points at step boundaries by backward composition (O(n^2))."""
    vals = np.asarray(d.values, dtype=float) + x0
    pts, worst = _compose_trace(vals, d.dt)
    if worst < -tol:
        raise FloatingPointError(f"map left the half-plane by {-worst:g}")
    caps = d.dt * np.arange(len(vals))
    return Trace(pts, caps)


# --------------------------------------------------------------- obstacles


def disk_C(a):
    """Image of the inner disk |z| <= q in the half-plane picture."""
    if not a < 0:
        raise DomainError("a must be negative")
    q2 = math.exp(2 * a)
    return complex(0, (1 + q2) / (1 - q2)), 2 * math.exp(a) / (1 - q2)


# ------------------------------------------------- forward obstacle tracking


@njit(cache=True)
def _slit_map(z, w, dt):
    r = np.sqrt((z - w) * (z - w) + 4.0 * dt)
    if r.imag < 0.0 or (r.imag == 0.0 and (z - w).real * r.real < 0.0):
        r = -r
    return w + r


@njit(cache=True)
def _seg_dist(w, z1, z2):
    dx = z2.real - z1.real
    dy = z2.imag - z1.imag
    px = w - z1.real
    py = -z1.imag
    den = dx * dx + dy * dy
    t = 0.0
    if den > 0.0:
        t = (px * dx + py * dy) / den
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    ex = px - t * dx
    ey = py - t * dy
    return math.sqrt(ex * ex + ey * ey)


@njit(cache=True)
def _slit_crosses(w, ell, z1, z2):
    r1 = z1.real - w
    r2 = z2.real - w
    if r1 == 0.0 and r2 == 0.0:
        return min(z1.imag, z2.imag) <= ell
    if (r1 > 0.0 and r2 > 0.0) or (r1 < 0.0 and r2 < 0.0):
        return False
    y = z1.imag + (z2.imag - z1.imag) * (-r1) / (r2 - r1)
    return 0.0 <= y <= ell


@njit(cache=True)
def _replay(u, hist_w, hist_dt, nsteps):
    z = u
    for k in range(nsteps):
        z = _slit_map(z, hist_w[k], hist_dt[k])
    return z


@njit(cache=True)
def _one_path(key, w0, center, radius, th0, th1, kappa, rel_step, accept_ratio,
              hit_ratio, refine, n_boundary, max_points, max_steps, t_max):
    th = np.empty(max_points)
    zs = np.empty(max_points, dtype=np.complex128)
    hist_w = np.empty(max_steps)
    hist_dt = np.empty(max_steps)
    npts = n_boundary + 1
    for j in range(npts):
        th[j] = th0 + (th1 - th0) * j / n_boundary
        zs[j] = center + radius * (math.cos(th[j]) + 1j * math.sin(th[j]))
    w = w0
    t = 0.0
    ctr = 0
    nsteps = 0
    while True:
        # refine long edges, then measure distance and extent
        j = 0
        while j < npts - 1:
            dj = _seg_dist(w, zs[j], zs[j + 1])
            if abs(zs[j + 1] - zs[j]) > refine * dj and th[j + 1] - th[j] > 1e-13:
                if npts >= max_points:
                    return OVERFLOW, nsteps
                for k in range(npts, j + 1, -1):
                    th[k] = th[k - 1]
                    zs[k] = zs[k - 1]
                tm = 0.5 * (th[j] + th[j + 2])
                th[j + 1] = tm
                u = center + radius * (math.cos(tm) + 1j * math.sin(tm))
                zs[j + 1] = _replay(u, hist_w, hist_dt, nsteps)
                npts += 1
                continue
            j += 1
        d = np.inf
        xmin = np.inf
        xmax = -np.inf
        ymin = np.inf
        ymax = -np.inf
        for j in range(npts):
            z = zs[j]
            xmin = min(xmin, z.real)
            xmax = max(xmax, z.real)
            ymin = min(ymin, z.imag)
            ymax = max(ymax, z.imag)
            if j < npts - 1:
                d = min(d, _seg_dist(w, z, zs[j + 1]))
        diam = math.hypot(xmax - xmin, ymax - ymin)
        if d > accept_ratio * diam:
            return ACCEPT_EARLY, nsteps
        if d < hit_ratio * diam:
            return HIT, nsteps
        if nsteps >= max_steps or t >= t_max:
            return TRUNCATED, nsteps
        dt = (rel_step * d) ** 2
        w = w + math.sqrt(kappa * dt) * rng.normal(key, ctr)
        ctr += 1
        ell = 2.0 * math.sqrt(dt)
        for j in range(npts - 1):
            if _slit_crosses(w, ell, zs[j], zs[j + 1]):
                return HIT, nsteps
        for j in range(npts):
            zs[j] = _slit_map(zs[j], w, dt)
        hist_w[nsteps] = w
        hist_dt[nsteps] = dt
        nsteps += 1
        t += dt


@njit(cache=True, parallel=True)
def _run_paths(seed, stream0, n_paths, w0, center, radius, th0, th1, kappa, rel_step,
               accept_ratio, hit_ratio, refine, n_boundary, max_points, max_steps, t_max):
    status = np.empty(n_paths, dtype=np.int8)
    steps = np.empty(n_paths, dtype=np.int64)
    for i in prange(n_paths):
        key = rng.stream_key(seed, stream0 + i)
        s, n = _one_path(key, w0, center, radius, th0, th1, kappa, rel_step, accept_ratio,
                         hit_ratio, refine, n_boundary, max_points, max_steps, t_max)
        status[i] = s
        steps[i] = n
    return status, steps


def _run_obstacle(w0, center, radius, th0, th1, n_paths, seed, cfg, threads=None):
    seed = rng.check_seed(seed)
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    rng.set_threads(threads)
    status, steps = _run_paths(np.uint64(seed), 0, int(n_paths), float(w0), complex(center),
                               float(radius), float(th0), float(th1), KAPPA, cfg.rel_step,
                               cfg.accept_ratio, cfg.hit_ratio, cfg.refine, cfg.n_boundary,
                               cfg.max_points, cfg.max_steps, cfg.T_max)
    n_hit = int(np.count_nonzero(status == HIT))
    n_acc = int(np.count_nonzero(status == ACCEPT_EARLY))
    n_tr = int(np.count_nonzero(status == TRUNCATED))
    n_ov = int(np.count_nonzero(status == OVERFLOW))
    n_ok = n_paths - n_ov
    mean = (n_acc + n_tr) / n_ok
    est = DirectEstimate(mean, math.sqrt(mean * (1 - mean) / n_ok), int(n_paths), n_hit,
                         n_acc, n_tr, n_ov, seed, cfg.__dict__.copy())
    est.config["mean_steps"] = float(steps.mean())
    if n_tr + n_ov > 0.01 * n_paths:
        import warnings
        warnings.warn(f"{n_tr + n_ov} of {n_paths} paths ended without a decision")
    return est


def estimate_F_direct(a, x, n_paths, seed=rng.DEFAULT_SEED, cfg=None, threads=None):
    """Fraction of SLE(8/3) traces from cot(x/2) to infinity avoiding disk_C(a)."""
    p = as_param(a)
    x = float(x)
    if not 0 < x < 2 * math.pi:
        raise DomainError("x must lie in (0, 2pi)")
    cfg = cfg or SamplerConfig()
    c, r = disk_C(p.a)
    x0 = math.cos(x / 2) / math.sin(x / 2)
    return _run_obstacle(x0, c, r, 0.0, 2 * math.pi, n_paths, seed, cfg, threads)


def estimate_slit_validation(n_paths, seed=rng.DEFAULT_SEED, cfg=None, threads=None):
    """SLE from 1 to -1 avoiding i(0, 1]; exact value 2^{-5/4}.

    The Moebius map w -> (w-1)/(w+1) carries it to SLE from 0 to infinity
    avoiding the unit-circle arc from -1 to i.
    """
    cfg = cfg or SamplerConfig(n_boundary=16)
    return _run_obstacle(0.0, 0j, 1.0, 0.5 * math.pi, math.pi, n_paths, seed, cfg, threads)


# ---------------------------------------------------------- Komatu-Loewner


def komatu_step(s, da):
    """One RK4 step of d f/da = Xi2(f, y | a) for every tracked point."""
    if not da >= 0:
        raise DomainError("da must be nonnegative")
    if not s.a + da < 0:
        raise DomainError("a + da must stay negative")
    if da == 0:
        return KomatuState(s.a, np.array(s.samples, dtype=complex), s.y)
    a0 = s.a
    ps = [AnnulusParam(a0), AnnulusParam(a0 + 0.5 * da), AnnulusParam(a0 + da)]

    def field_at(z, p):
        return np.array([xi2(v, s.y, p) for v in z])

    z = np.array(s.samples, dtype=complex)
    k1 = field_at(z, ps[0])
    k2 = field_at(z + 0.5 * da * k1, ps[1])
    k3 = field_at(z + 0.5 * da * k2, ps[1])
    k4 = field_at(z + da * k3, ps[2])
    return KomatuState(a0 + da, z + da / 6 * (k1 + 2 * k2 + 2 * k3 + k4), s.y)
