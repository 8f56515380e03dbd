"""Scalar numba kernels for the theta/eta family on the rectangle lattice (2pi, 2ia).

Two regimes are used:

* direct q-series in r = q^2 = e^{2a}, fast when |a| is large;
* the modular (Jacobi imaginary) transform, where the dual nome is
  e^{-pi^2/|a|}, fast and accurate as a -> 0.

All functions take plain floats so they can be called from other jitted
loops (PDE assembly, Monte-Carlo paths).  ``mode`` selects the regime:
0 = automatic, 1 = direct series, 2 = modular.
"""

import math

from numba import njit

PI = math.pi
TWO_PI = 2.0 * math.pi
LN2 = math.log(2.0)

# |a| below this uses the modular forms in automatic mode
ALPHA_SWITCH = 1.0

_TINY = 1e-300
_EPS = 1e-17
_MAX_TERMS = 4000


@njit(cache=True)
def use_modular(a, mode):
    if mode == 1:
        return False
    if mode == 2:
        return True
    return -a < ALPHA_SWITCH


@njit(cache=True)
def log_sinc(u):
    """ln(sin(u)/u) for u in [0, pi)."""
    if u < 1e-4:
        u2 = u * u
        return -u2 / 6.0 - u2 * u2 / 180.0
    return math.log(math.sin(u) / u)


# ---------------------------------------------------------------- eta


@njit(cache=True)
def eta_over_pi_series(a):
    s = 0.0
    for n in range(1, _MAX_TERMS):
        rn = math.exp(2.0 * a * n)
        t = n * rn / (-math.expm1(2.0 * a * n))
        s += t
        if t < _EPS * (1.0 / 12.0):
            break
    return 1.0 / 12.0 - 2.0 * s


@njit(cache=True)
def eta_over_pi_modular(a):
    al = -a
    c = 2.0 * PI * PI / al
    s = 0.0
    for k in range(1, _MAX_TERMS):
        t = k * math.exp(-c * k) / (-math.expm1(-c * k))
        s += t
        if t < _EPS:
            break
    e2 = 1.0 - 24.0 * s
    return 1.0 / (2.0 * al) - PI * PI / (12.0 * al * al) * e2


@njit(cache=True)
def eta_over_pi(a, mode=0):
    if use_modular(a, mode):
        return eta_over_pi_modular(a)
    return eta_over_pi_series(a)


# ------------------------------------------------- ln(theta/sin(x/2))


@njit(cache=True)
def _reflect(x):
    x = x % TWO_PI
    if x > PI:
        return TWO_PI - x, True
    return x, False


@njit(cache=True)
def log_theta_over_sin_series(x, a):
    """ln P with P = theta(x|a)/sin(x/2) = 2 q^{1/4} prod (1-r^n)(1-2r^n cos x+r^{2n})."""
    sh = math.sin(0.5 * x)
    s2 = sh * sh
    acc = LN2 + 0.25 * a
    for n in range(1, _MAX_TERMS):
        rn = math.exp(2.0 * a * n)
        om = -math.expm1(2.0 * a * n)
        # 1 - 2 r^n cos x + r^{2n} = (1-r^n)^2 + 4 r^n sin^2(x/2)
        acc += math.log(om) + math.log(om * om + 4.0 * rn * s2)
        if rn < _EPS:
            break
    return acc


@njit(cache=True)
def log_theta_over_sin_modular(x, a):
    al = -a
    xx, _ = _reflect(x)
    s = PI / (2.0 * al)
    t = s * xx
    acc = 0.0
    for n in range(0, 64):
        k = 2 * n + 1
        e = math.exp(-PI * PI * (n * n + n) / al + 2.0 * n * t)
        if t > 0.0:
            fac = -math.expm1(-2.0 * k * t) / (2.0 * t)
        else:
            fac = float(k)
        term = e * fac
        if n % 2 == 1:
            term = -term
        acc += term
        if e * k < _EPS * abs(acc):
            break
    return (0.5 * math.log(PI / al) - xx * xx / (4.0 * al) - PI * PI / (4.0 * al)
            + t + math.log(acc) + math.log(2.0 * s) + LN2 - log_sinc(0.5 * xx))


@njit(cache=True)
def log_theta_over_sin(x, a, mode=0):
    if use_modular(a, mode):
        return log_theta_over_sin_modular(x, a)
    return log_theta_over_sin_series(x, a)


# ------------------------------------- first/second log-derivatives of theta


@njit(cache=True)
def dlog_theta_series(x, a):
    """((ln theta)', (ln theta)'') for x in (0, 2pi)."""
    half = 0.5 * x
    sh = math.sin(half)
    d1 = 0.5 * math.cos(half) / sh
    d2 = -0.25 / (sh * sh)
    for n in range(1, _MAX_TERMS):
        rn = math.exp(2.0 * a * n)
        sn = rn / (-math.expm1(2.0 * a * n))
        d1 += 2.0 * sn * math.sin(n * x)
        d2 += 2.0 * n * sn * math.cos(n * x)
        if n * sn < _EPS:
            break
    return d1, d2


@njit(cache=True)
def dlog_theta_modular(x, a):
    al = -a
    xx, refl = _reflect(x)
    s = PI / (2.0 * al)
    t = s * xx
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for n in range(0, 64):
        k = 2 * n + 1
        e = math.exp(-PI * PI * (n * n + n) / al + 2.0 * n * t)
        if n % 2 == 1:
            e = -e
        om = -math.expm1(-2.0 * k * t)
        op = 2.0 - om
        s0 += e * om
        s1 += e * k * op
        s2 += e * k * k * om
        if abs(e) * k * k < _EPS * abs(s0):
            break
    r1 = s * s1 / s0
    r2 = s * s * s2 / s0 - r1 * r1
    d1 = -xx / (2.0 * al) + r1
    d2 = -1.0 / (2.0 * al) + r2
    if refl:
        d1 = -d1
    return d1, d2


@njit(cache=True)
def dlog_theta(x, a, mode=0):
    if use_modular(a, mode):
        return dlog_theta_modular(x, a)
    return dlog_theta_series(x, a)


# ------------------------------------------------ Feynman-Kac integrand


@njit(cache=True)
def fk_integrand_series(y, b):
    # q_b^{2n} and sin(n y/2) by recurrence; only used for b <= -ALPHA_SWITCH
    r = math.exp(2.0 * b)
    rn = 1.0
    th = 0.5 * y
    c2 = 2.0 * math.cos(th)
    s_prev = 0.0
    s_cur = math.sin(th)
    acc = 0.0
    for n in range(1, _MAX_TERMS):
        rn *= r
        sn = rn / (1.0 - rn)
        acc += 4.0 * n * sn * s_cur * s_cur
        if 4.0 * n * sn < _EPS * 1e-3:
            break
        s_prev, s_cur = s_cur, c2 * s_cur - s_prev
    return -acc


@njit(cache=True)
def fk_integrand(y, b, mode=0):
    """-sum 2n S_n (1 - cos ny), S_n = q_b^{2n}/(1-q_b^{2n}); always <= 0."""
    if use_modular(b, mode):
        d1, d2 = dlog_theta_modular(y, b)
        sh = math.sin(0.5 * y)
        v = d2 + eta_over_pi_modular(b) + 0.25 / (sh * sh) - 1.0 / 12.0
        return min(v, 0.0)
    return fk_integrand_series(y, b)


# ------------------------------------------------ PDE potential


@njit(cache=True)
def pde_potential_series(x, a):
    half = 0.5 * x
    cot = math.cos(half) / math.sin(half)
    acc = 0.0
    for n in range(2, _MAX_TERMS):
        rn = math.exp(2.0 * a * n)
        sn = rn / (-math.expm1(2.0 * a * n))
        acc += sn * (n * (1.0 + math.cos(n * x)) - cot * math.sin(n * x))
        if n * sn < _EPS * 1e-2:
            break
    return 2.5 * acc


@njit(cache=True)
def pde_potential(x, a, mode=0):
    """Zeroth-order coefficient c(x, a) of the H equation."""
    if use_modular(a, mode):
        half = 0.5 * x
        sh = math.sin(half)
        cot = math.cos(half) / sh
        d1, d2 = dlog_theta_modular(x, a)
        return (15.0 / 16.0) / (sh * sh) - 1.25 * (
            cot * d1 - d2 + eta_over_pi_modular(a) + 5.0 / 12.0)
    return pde_potential_series(x, a)


@njit(cache=True)
def pde_drift(x, a, mode=0):
    """First-order coefficient: 2 (ln theta)' - (5/3) cot(x/2)."""
    d1, _ = dlog_theta(x, a, mode)
    half = 0.5 * x
    return 2.0 * d1 - (5.0 / 3.0) * math.cos(half) / math.sin(half)
