"""Feynman-Kac Monte Carlo for F(a, x) along the Legendre diffusion.

In increasing a the process solves dY = -sqrt(8/3) dB - (2/3) cot(Y/2) da on
(0, 2pi) and is absorbed at the endpoints.  With Q = e^{a0},

    F(a0, x) = [P_Q(0)/P_Q(x)]^{3/4} E[exp(int_{a0}^{sigma} g(Y_b, b) db); sigma < 0],

where P = theta/sin(x/2), sigma is the absorption time and
g(y, b) = -sum_n 2n q_b^{2n}/(1-q_b^{2n}) (1 - cos ny) <= 0.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit, prange

from . import kernels, rng
from .special_fn import DomainError, as_param

TWO_PI = 2.0 * math.pi
SQ83 = math.sqrt(8.0 / 3.0)

ABSORBED = 1
KILLED = 2
INVALID = 3


@dataclass(frozen=True)
class LegendreConfig:
    db_base: float = 2e-3
    eps_abs: float = 1e-5
    kill_delta: float = 1e-3
    adapt: float = 0.0375        # db <= adapt * dist^2, i.e. 0.1 * (3/8) dist^2
    log_weight_floor: float = -50.0
    max_steps: int = 2_000_000
    heun: bool = True            # predictor-corrector drift with trapezoid weight; False is Euler

    def __post_init__(self):
        if not self.db_base > 0:
            raise DomainError("db_base must be positive")
        if not 0 < self.eps_abs < 0.1:
            raise DomainError("eps_abs must lie in (0, 0.1)")
        if not 0 < self.kill_delta <= 0.05:
            raise DomainError("kill_delta must lie in (0, 0.05]")
        if not self.adapt > 0:
            raise DomainError("adapt must be positive")
        if not self.max_steps >= 1:
            raise DomainError("max_steps must be >= 1")


@dataclass
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    n_absorbed: int
    n_killed: int
    seed: int
    n_invalid: int = 0
    config: dict = field(default_factory=dict)


# ------------------------------------------------------------- primitives


@njit(cache=True)
def _legendre_step(y, db, gaussian):
    yn = y - SQ83 * gaussian * math.sqrt(db) - (2.0 / 3.0) / math.tan(0.5 * y) * db
    if yn < 0.0:
        return 0.0
    if yn > TWO_PI:
        return TWO_PI
    return yn


@njit(cache=True)
def _heun_step(y, db, gaussian):
    noise = SQ83 * gaussian * math.sqrt(db)
    m0 = (2.0 / 3.0) / math.tan(0.5 * y)
    yp = y - noise - m0 * db
    if not 0.0 < yp < TWO_PI:
        return _legendre_step(y, db, gaussian)
    yn = y - noise - 0.5 * (m0 + (2.0 / 3.0) / math.tan(0.5 * yp)) * db
    if yn < 0.0:
        return 0.0
    if yn > TWO_PI:
        return TWO_PI
    return yn


def legendre_step(y, b, db, gaussian):
    """One Euler-Maruyama step in a; crossings of {0, 2pi} are clamped there."""
    if not 0.0 < y < TWO_PI:
        raise DomainError("y must lie in (0, 2pi)")
    if not (db > 0 and b + db < 0):
        raise DomainError("need db > 0 and b + db < 0")
    return _legendre_step(float(y), float(db), float(gaussian))


@njit(cache=True)
def _integrand(y, b):
    # evaluate on the half nearer 0 so the value is exactly mirror symmetric
    if y > math.pi:
        y = TWO_PI - y
    if y <= 0.0:
        return 0.0
    return kernels.fk_integrand(y, b)


def functional_increment(y, b, p_b=None):
    """g(y, b) = -sum_n 2n q_b^{2n}/(1-q_b^{2n}) (1 - cos ny), always <= 0."""
    b = float(b if p_b is None else as_param(p_b).a)
    if not b < 0:
        raise DomainError("b must be negative")
    return _integrand(float(y) % TWO_PI, b)


def prefactor(x, p):
    """[P(0)/P(x)]^{3/4} with P = theta/sin(x/2) at nome e^a."""
    p = as_param(p)
    x = float(x)
    if not 0.0 <= x <= TWO_PI:
        raise DomainError("x must lie in [0, 2pi]")
    return math.exp(_log_prefactor(x, p.a))


@njit(cache=True)
def _log_prefactor(x, a):
    return 0.75 * (kernels.log_theta_over_sin(0.0, a) - kernels.log_theta_over_sin(x, a))


# ------------------------------------------------------------- path kernel


@njit(cache=True)
def _one_path(key, a0, x, mirror, db_base, eps_abs, kill_b, adapt, floor, max_steps,
              trap, checkpoints, ys_out, lw_out):
    """Returns (status, log weight, steps); fills Y and log weight at checkpoints."""
    b = a0
    y = x
    lw = 0.0
    ctr = 0
    ncp = checkpoints.shape[0]
    k = 0
    status = 0
    if y <= eps_abs or y >= TWO_PI - eps_abs:
        status = ABSORBED
    while status == 0:
        if b >= kill_b:
            status = KILLED
            break
        if ctr >= max_steps:
            status = INVALID
            break
        d = min(y, TWO_PI - y)
        db = min(db_base, adapt * d * d)
        stop = kill_b
        if k < ncp and checkpoints[k] < stop:
            stop = checkpoints[k]
        land = b + db >= stop
        if land:
            db = stop - b
        g = rng.normal(key, ctr)
        ctr += 1
        if mirror:
            g = -g
        bm = b + 0.5 * db
        g0 = _integrand(y, bm)
        if trap:
            y = _heun_step(y, db, g)
        else:
            y = _legendre_step(y, db, g)
        if trap and 0.0 < y < TWO_PI:
            lw += 0.5 * (g0 + _integrand(y, bm)) * db
        else:
            lw += g0 * db
        b = stop if land else b + db
        while k < ncp and b >= checkpoints[k]:
            ys_out[k] = y
            lw_out[k] = lw
            k += 1
        if y <= eps_abs or y >= TWO_PI - eps_abs:
            status = ABSORBED
        elif lw < floor:
            # remaining contribution is below exp(floor); stop as absorbed
            status = ABSORBED
    # absorbed before later checkpoints: state frozen at the boundary
    yb = 0.0 if y <= math.pi else TWO_PI
    while k < ncp:
        ys_out[k] = yb if status == ABSORBED else y
        lw_out[k] = lw
        k += 1
    return status, lw, ctr


@njit(cache=True, parallel=True)
def _run(seed, n_paths, a0, x, mirror, db_base, eps_abs, kill_b, adapt, floor, max_steps,
         trap, checkpoints):
    ncp = checkpoints.shape[0]
    status = np.zeros(n_paths, np.int64)
    logw = np.zeros(n_paths)
    steps = np.zeros(n_paths, np.int64)
    ys = np.zeros((n_paths, ncp))
    lws = np.zeros((n_paths, ncp))
    for i in prange(n_paths):
        key = rng.stream_key(seed, i)
        st, lw, ns = _one_path(key, a0, x, mirror, db_base, eps_abs, kill_b, adapt, floor,
                               max_steps, trap, checkpoints, ys[i], lws[i])
        status[i] = st
        logw[i] = lw
        steps[i] = ns
    return status, logw, steps, ys, lws


def _validate(a, x, n_paths):
    p = as_param(a)
    x = float(x)
    if not 0.0 < x < TWO_PI:
        raise DomainError("x must lie in (0, 2pi)")
    if int(n_paths) < 2:
        raise DomainError("n_paths must be >= 2")
    return p, x


def _simulate(p, x, n_paths, cfg, seed, mirror, checkpoints, threads):
    if not p.a < -cfg.kill_delta:
        raise DomainError("a must lie below -kill_delta")
    rng.set_threads(threads)
    return _run(np.uint64(rng.check_seed(seed)), int(n_paths), p.a, x, bool(mirror),
                cfg.db_base, cfg.eps_abs, -cfg.kill_delta, cfg.adapt, cfg.log_weight_floor,
                cfg.max_steps, cfg.heun, np.asarray(checkpoints, dtype=float))


def simulate_path(a0, x, cfg=None, seed=rng.DEFAULT_SEED, path=0, mirror=False):
    """(absorbed, weight) for one path; ``path`` selects the RNG stream."""
    p, x = _validate(a0, x, 2)
    cfg = cfg or LegendreConfig()
    key = np.uint64(rng.stream_key(np.uint64(rng.check_seed(seed)), np.uint64(path)))
    empty = np.zeros(0)
    st, lw, _ = _one_path(key, p.a, x, bool(mirror), cfg.db_base, cfg.eps_abs, -cfg.kill_delta,
                          cfg.adapt, cfg.log_weight_floor, cfg.max_steps, cfg.heun, empty,
                          empty.copy(), empty.copy())
    if st == INVALID:
        raise RuntimeError("step cap exceeded")
    if st == KILLED:
        return False, 0.0
    return True, math.exp(lw)


def estimate_F_feynman_kac(a, x, n_paths, cfg=None, seed=rng.DEFAULT_SEED, threads=None,
                           mirror=False):
    p, x = _validate(a, x, n_paths)
    cfg = cfg or LegendreConfig()
    status, logw, steps, _, _ = _simulate(p, x, n_paths, cfg, seed, mirror, (), threads)
    valid = status != INVALID
    n_inv = int(np.count_nonzero(~valid))
    if n_inv:
        warnings.warn(f"{n_inv} paths exceeded max_steps and were excluded")
    w = np.where(status == ABSORBED, np.exp(logw), 0.0)[valid]
    pre = prefactor(x, p)
    meta = asdict(cfg)
    meta["mean_steps"] = float(steps.mean())
    return McEstimate(pre * float(w.mean()), pre * float(w.std(ddof=1)) / math.sqrt(w.size),
                      int(w.size), int(np.count_nonzero(status == ABSORBED)),
                      int(np.count_nonzero(status == KILLED)), int(seed), n_inv, meta)


@dataclass
class MartingaleRow:
    a: float
    mean: float
    stderr: float
    target: float
    z: float


def martingale_check(a0, x, checkpoints, sol, n_paths, seed=rng.DEFAULT_SEED, cfg=None,
                     threads=None):
    """Empirical E[M_{a0,a}] at each checkpoint a, against M_{a0,a0} = F(a0, x)."""
    from . import pde

    p, x = _validate(a0, x, n_paths)
    cfg = cfg or LegendreConfig()
    cps = np.sort(np.asarray(checkpoints, dtype=float))
    if cps.size == 0 or not (cps[0] > p.a and cps[-1] < -cfg.kill_delta):
        raise DomainError("checkpoints must lie strictly between a0 and -kill_delta")
    status, _, _, ys, lws = _simulate(p, x, n_paths, cfg, seed, False, cps, threads)
    valid = status != INVALID
    target = pde.F_lookup(sol, p.a, x)
    log_pre0 = _log_prefactor(x, p.a)
    rows = []
    for k, a in enumerate(cps):
        y = ys[valid, k]
        F = pde.F_lookup_many(sol, a, y)
        lp = np.array([_log_prefactor(v, a) for v in y])
        m = F * np.exp(lws[valid, k] + log_pre0 - lp)
        mean = float(m.mean())
        se = float(m.std(ddof=1)) / math.sqrt(m.size)
        rows.append(MartingaleRow(float(a), mean, se, target, (mean - target) / se))
    return rows
