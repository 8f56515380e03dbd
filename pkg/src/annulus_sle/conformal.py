"""Annulus to slit-disk uniformization and restriction brackets for F(a, x).

The map f sends A_q onto the unit disk minus the slit [-L, L].  Boundary
points z1 = e^{ix/2}, z2 = conj(z1) go to w1 = e^{i phi}, w2 = conj(w1), and
the Cayley map w -> i(1+w)/(1-w) turns the problem into SLE(8/3) in the
half-plane from u = -cot(phi/2) to -u, avoiding i[s, d] with
s = (1-L)/(1+L), d = 1/s.

Everything near q -> 1 is carried in log form: 1 - L, phi and 1 - f are
exponentially small there.
"""

import cmath
import math
from dataclasses import dataclass

import mpmath

from .special_fn import AnnulusParam, DomainError, SeriesTruncationError, as_param

Q_MODULAR = 0.7
_MAX_TERMS = 400


@dataclass(frozen=True)
class SlitDiskModulus:
    L: float
    one_minus_L: float
    param: AnnulusParam


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float
    a: float
    x: float
    log_lower: float = float("nan")
    log_upper: float = float("nan")

    @property
    def midpoint(self):
        """Geometric mean of the bounds."""
        return math.exp(0.5 * (self.log_lower + self.log_upper))

    @property
    def log_midpoint(self):
        return 0.5 * (self.log_lower + self.log_upper)


# ------------------------------------------------------- theta constants


def _theta_consts(h):
    """(theta2, theta3, theta4) at x = 0 for nome h."""
    t2 = t3 = t4 = 0.0
    for n in range(_MAX_TERMS):
        e2 = h ** ((n + 0.5) ** 2)
        t2 += e2
        if n > 0:
            e = h ** (n * n)
            t3 += e
            t4 += e if n % 2 == 0 else -e
            if e < 1e-18:
                break
    else:
        raise SeriesTruncationError("theta constants did not converge")
    return 2 * t2, 1 + 2 * t3, 1 + 2 * t4


def _odd_square_sum(h):
    """sum over odd n >= 1 of h^{n^2}."""
    s = 0.0
    for n in range(1, 2 * _MAX_TERMS, 2):
        e = h ** (n * n)
        s += e
        if e < 1e-18 * s:
            return s
    raise SeriesTruncationError("odd-square sum did not converge")


def _modular(p):
    return p.q > Q_MODULAR


def _hprime(p):
    return math.exp(math.pi ** 2 / (4 * p.a))


def modulus_L(p):
    """Slit half-length L(q) with A_q conformally equivalent to U minus [-L, L]."""
    p = as_param(p)
    if _modular(p):
        hp = _hprime(p)
        _, t3, t4 = _theta_consts(hp)
        return SlitDiskModulus(t4 / t3, 4 * _odd_square_sum(hp) / t3, p)
    t2, t3, _ = _theta_consts(p.q ** 4)
    return SlitDiskModulus(t2 / t3, (t3 - t2) / t3, p)


def elliptic_K(p):
    """Complete elliptic integral K at nome q^4, from theta3."""
    p = as_param(p)
    if _modular(p):
        _, t3, _ = _theta_consts(_hprime(p))
        return math.pi ** 2 / (8 * p.alpha) * t3 * t3
    _, t3, _ = _theta_consts(p.q ** 4)
    return 0.5 * math.pi * t3 * t3


# ----------------------------------------------------------- complex helpers


def _clog1p(w):
    re = 0.5 * math.log1p(2 * w.real + abs(w) ** 2)
    return complex(re, math.atan2(w.imag, 1 + w.real))


def _cexpm1(w):
    r, t = w.real, w.imag
    st = math.sin(0.5 * t)
    return complex(math.expm1(r) * math.cos(t) - 2 * st * st, math.exp(r) * math.sin(t))


# ---------------------------------------------------------------- the map f


def _log_f_direct(x, p):
    h = p.q ** 4
    v = complex((math.pi - x) / (2 * math.pi), p.alpha / math.pi)
    t1 = 0j
    t0 = 1 + 0j
    for n in range(_MAX_TERMS):
        sgn = -1 if n % 2 else 1
        e1 = h ** ((n + 0.5) ** 2)
        t1 += sgn * e1 * cmath.sin((2 * n + 1) * math.pi * v)
        if n > 0:
            t0 += 2 * sgn * h ** (n * n) * cmath.cos(2 * n * math.pi * v)
        if e1 * math.exp((2 * n + 1) * p.alpha) < 1e-18:
            break
    return cmath.log(2 * t1 / t0)


def _log_f_modular(x, p):
    al = p.alpha
    # E = i exp(pi(pi-x)/(4 alpha)), e = 1/E
    lam = math.pi * (math.pi - x) / (4 * al)
    acc = 2j * math.atan(math.exp(-lam))
    for n in range(1, _MAX_TERMS):
        g = -n * math.pi ** 2 / (2 * al)
        big = 1j * math.exp(g + lam)
        small = -1j * math.exp(g - lam)
        acc += (_clog1p(-big) + _clog1p(-small) - _clog1p(big) - _clog1p(small))
        if abs(big) < 1e-18:
            break
    return acc


def _log_f(x, p):
    """log f(e^{ix/2}) for x in (0, 2pi)."""
    if not 0 < x < 2 * math.pi:
        raise DomainError(f"x must lie in (0, 2pi), got {x}")
    if x > math.pi:
        # f(-conj z) = -conj f(z)
        lf = _log_f(2 * math.pi - x, p)
        return complex(lf.real, math.pi - lf.imag)
    if _modular(p):
        return _log_f_modular(x, p)
    return _log_f_direct(x, p)


def map_f(x, p):
    """w1 = f(e^{ix/2}), a point of the unit circle with arg in (0, pi)."""
    p = as_param(p)
    return cmath.exp(_log_f(float(x), p))


@dataclass(frozen=True)
class _Geom:
    phi: float
    one_minus_f: complex
    L: float
    one_minus_L: float
    log_abs_fprime: float


def _geometry(x, p):
    lf = _log_f(x, p)
    omf = -_cexpm1(lf)
    m = modulus_L(p)
    L, omL = m.L, m.one_minus_L
    f = 1 - omf
    K = elliptic_K(p)
    # |L-f| |L+f| |1-Lf| |1+Lf|, each factor assembled without cancellation
    prod = abs(omf - omL) * abs(L + f) * abs(omL + L * omf) * abs(1 + L * f)
    log_fp = math.log(2 * K / math.pi) + 0.5 * math.log(prod)
    return _Geom(lf.imag, omf, L, omL, log_fp)


def map_f_deriv(x, p):
    """f'(z1) = (2iK/(pi z1)) sqrt((L^2-f^2)(1-L^2 f^2)), branch with z f'/f > 0."""
    p = as_param(p)
    x = float(x)
    m = modulus_L(p)
    L = m.L
    w = map_f(x, p)
    z = cmath.exp(0.5j * x)
    K = elliptic_K(p)
    d = 2j * K / (math.pi * z) * cmath.sqrt((L * L - w * w) * (1 - L * L * w * w))
    if (z * d / w).real < 0:
        d = -d
    return d


def log_change_factor(a, x):
    p = as_param(a)
    x = float(x)
    if not 0 < x <= math.pi:
        raise DomainError(f"x must lie in (0, pi], got {x}")
    g = _geometry(x, p)
    return 1.25 * (g.log_abs_fprime + math.log(math.sin(0.5 * x)) - math.log(math.sin(g.phi)))


def change_factor(a, x):
    """|f'(z1)(z1-z2)/(w1-w2)|^{5/4}."""
    return math.exp(log_change_factor(a, x))


# ------------------------------------------------- restriction probabilities


def _log_slit_avoid(log_c, log_d):
    # [c^2/(c^2+d^2)]^{5/4} = (1 + (d/c)^2)^{-5/4}
    t = 2 * (log_d - log_c)
    return -1.25 * (t + math.log1p(math.exp(-t)) if t > 0 else math.log1p(math.exp(t)))


def slit_avoid_prob(c, d):
    """P(SLE from c to -c in H avoids i(0, d]) = [c^2/(c^2+d^2)]^{5/4}."""
    if not c > 0:
        raise DomainError("c must be positive")
    if not d >= 0:
        raise DomainError("d must be nonnegative")
    if d == 0:
        return 1.0
    return math.exp(_log_slit_avoid(math.log(c), math.log(d)))


def two_slit_hit_prob(L, phi):
    """P(SLE between e^{+-i phi} in U hits (-1,-L] or [L,1))."""
    if not 0 < L < 1:
        raise DomainError("L must lie in (0, 1)")
    if not 0 < phi < math.pi:
        raise DomainError("phi must lie in (0, pi)")
    p = 0.5 * (L + 1 / L)
    s2 = math.sin(phi) ** 2
    return 1 - (p * s2 / (p * p - 1 + s2)) ** 1.25


def _joint_mp(u, one_minus_L):
    """Inclusion-exclusion joint hit probability, evaluated in high precision."""
    log10s = math.log10(max(one_minus_L, 1e-300))
    dps = 30 + int(6 * abs(log10s)) + int(4 * abs(math.log10(abs(u))))
    with mpmath.workdps(dps):
        om = mpmath.mpf(one_minus_L)
        u = mpmath.mpf(u)
        L = 1 - om
        s = om / (2 - om)
        p = (L + 1 / L) / 2
        sin2 = 4 * u * u / (1 + u * u) ** 2
        q = mpmath.mpf(5) / 4
        hit1 = 1 - (1 + s * s / (u * u)) ** (-q)
        hit2 = 1 - (1 + s * s * u * u) ** (-q)
        avoid_both = (p * sin2 / (p * p - 1 + sin2)) ** q
        return hit1 + hit2 - (1 - avoid_both)


def joint_hit_prob(u, L, one_minus_L=None):
    """P(SLE from u to -u hits both i(0, s) and i(d, inf)), s = (1-L)/(1+L) = 1/d.

    Pass ``one_minus_L`` when L is within rounding of 1.
    """
    if not u <= -1:
        raise DomainError("u must be <= -1")
    om = (1 - L) if one_minus_L is None else one_minus_L
    if not (0 < L <= 1 and 0 < om < 1):
        raise DomainError("L must lie in (0, 1)")
    return max(float(_joint_mp(u, om)), 0.0)


def _log_joint(u, om):
    v = _joint_mp(u, om)
    return float(mpmath.log(v)) if v > 0 else -math.inf


# ---------------------------------------------------------------- bracket


def bracket_F(a, x):
    """Rigorous lower/upper bounds on F(a, x) from conformal restriction."""
    p = as_param(a)
    x = float(x)
    if math.pi < x < 2 * math.pi:
        x_eff = 2 * math.pi - x
    else:
        x_eff = x
    if not 0 < x_eff <= math.pi:
        raise DomainError(f"x must lie in (0, 2pi), got {x}")
    g = _geometry(x_eff, p)
    log_cf = 1.25 * (g.log_abs_fprime + math.log(math.sin(0.5 * x_eff)) - math.log(math.sin(g.phi)))
    # |u| = cot(phi/2) >= 1
    log_u = -math.log(math.tan(0.5 * g.phi))
    u = -math.exp(log_u)
    om = g.one_minus_L
    log_d = math.log(2 - om) - math.log(om)
    t1 = _log_slit_avoid(log_u, log_d)
    t2 = _log_slit_avoid(-log_u, log_d)
    log_low = log_cf + max(t1, t2) + math.log1p(math.exp(-abs(t1 - t2)))
    lj = _log_joint(u, om)
    if lj == -math.inf:
        log_up = log_low
    else:
        hi = max(log_low, log_cf + lj)
        log_up = hi + math.log1p(math.exp(min(log_low, log_cf + lj) - hi))
    log_low = min(log_low, 0.0)
    log_up = min(log_up, 0.0)
    return Bracket(math.exp(log_low), math.exp(log_up), p.a, float(x), log_low, log_up)


def u_of(a, x):
    """Half-plane launch point u = -cot(phi/2) <= -1 for x in (0, pi]."""
    g = _geometry(float(x), as_param(a))
    return -1 / math.tan(0.5 * g.phi)


def phi_of(a, x):
    return _log_f(float(x), as_param(a)).imag
