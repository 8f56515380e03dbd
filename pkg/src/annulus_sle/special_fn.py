"""Elliptic, theta and dilogarithm quantities for the lattice (2pi, 2ia).

Every function takes an :class:`AnnulusParam`.  Direct q-series respect its
:class:`TruncationPolicy`; in automatic mode the theta/eta evaluations switch
to the modular transform for |a| < ``kernels.ALPHA_SWITCH``.
"""

import cmath
import math
from dataclasses import dataclass, field

from . import kernels

POLE_GUARD = 1e-8


class DomainError(ValueError):
    pass


class SeriesTruncationError(ArithmeticError):
    pass


class PoleProximityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    rel_tol: float = 1e-14
    max_terms: int = 400

    def __post_init__(self):
        if not self.max_terms >= 1:
            raise DomainError("max_terms must be >= 1")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")


@dataclass(frozen=True)
class AnnulusParam:
    a: float
    q: float = field(default=float("nan"))
    trunc: TruncationPolicy = field(default_factory=TruncationPolicy)

    def __post_init__(self):
        a = float(self.a)
        if not (a < 0 and math.isfinite(a)):
            raise DomainError(f"log-modulus a must be finite and negative, got {self.a}")
        object.__setattr__(self, "a", a)
        q = math.exp(a)
        if math.isnan(self.q):
            object.__setattr__(self, "q", q)
        elif abs(self.q - q) > 1e-15 * q:
            raise DomainError("q inconsistent with a")

    @classmethod
    def from_q(cls, q, trunc=None):
        if not 0 < q < 1:
            raise DomainError(f"q must lie in (0, 1), got {q}")
        return cls(math.log(q), trunc=trunc or TruncationPolicy())

    @property
    def alpha(self):
        return -self.a


def as_param(p):
    if isinstance(p, AnnulusParam):
        return p
    return AnnulusParam(float(p))


def _pick_modular(p, method):
    if method == "series":
        return False
    if method == "modular":
        return True
    if method != "auto":
        raise DomainError(f"unknown method {method!r}")
    return p.alpha < kernels.ALPHA_SWITCH


def _sum_series(term, p, ratio, start=1):
    """Sum term(n) for n >= start with a geometric tail bound of the given ratio."""
    tol, cap = p.trunc.rel_tol, p.trunc.max_terms
    total = 0.0
    for n in range(start, start + cap):
        t = term(n)
        total += t
        if abs(t) * ratio / (1.0 - ratio) <= tol * abs(total) or t == 0:
            return total
    raise SeriesTruncationError(
        f"series did not reach rel_tol={tol} within {cap} terms (q={p.q:.6g})")


# ---------------------------------------------------------------- eta


def eta(p, method="auto"):
    """Quasi-period eta = zeta(pi)."""
    p = as_param(p)
    if _pick_modular(p, method):
        return math.pi * kernels.eta_over_pi_modular(p.a)
    r = p.q * p.q
    s = _sum_series(lambda n: n * math.exp(2 * p.a * n) / -math.expm1(2 * p.a * n), p, r)
    return math.pi * (1.0 / 12.0 - 2.0 * s)


# -------------------------------------------------- complex zeta and wp


def _reduce(z, p):
    """Shift z into the fundamental cell; returns (z0, j, m) with z = z0 + 2pi j + 2i alpha m."""
    al = p.alpha
    m = round(z.imag / (2 * al))
    z0 = z - 2j * al * m
    j = round(z0.real / (2 * math.pi))
    z0 = z0 - 2 * math.pi * j
    return z0, j, m


def _lattice_distance(z0, p):
    al = p.alpha
    return min(abs(z0 - (2 * math.pi * j + 2j * al * k))
               for j in (-1, 0, 1) for k in (-1, 0, 1))


def _check_pole(z0, p, guard):
    if _lattice_distance(z0, p) < guard:
        raise PoleProximityError(f"argument within {guard:g} of a lattice point")


def _strip_ratio(z0, p):
    return math.exp(-(2 * p.alpha - abs(z0.imag)))


def weier_zeta(z, p, guard=POLE_GUARD):
    """Weierstrass zeta with periods 2pi and 2ia."""
    p = as_param(p)
    z = complex(z)
    z0, j, m = _reduce(z, p)
    _check_pole(z0, p, guard)
    e = eta(p)
    rho = _strip_ratio(z0, p)
    tail = _sum_series(
        lambda n: math.exp(2 * p.a * n) / -math.expm1(2 * p.a * n) * cmath.sin(n * z0),
        p, rho)
    val = e / math.pi * z0 + 0.5 * cmath.cos(z0 / 2) / cmath.sin(z0 / 2) + 2 * tail
    # zeta(z + 2pi) = zeta(z) + 2 eta;  zeta(z + 2i alpha) = zeta(z) + 2i(alpha eta/pi - 1/2)
    eta3 = 1j * (p.alpha * e / math.pi - 0.5)
    return val + 2 * j * e + 2 * m * eta3


def weier_p(z, p, guard=POLE_GUARD):
    """Weierstrass wp = -zeta'."""
    p = as_param(p)
    z = complex(z)
    z0, _, _ = _reduce(z, p)
    _check_pole(z0, p, guard)
    rho = _strip_ratio(z0, p)
    tail = _sum_series(
        lambda n: n * math.exp(2 * p.a * n) / -math.expm1(2 * p.a * n) * cmath.cos(n * z0),
        p, rho)
    s = cmath.sin(z0 / 2)
    return -eta(p) / math.pi + 0.25 / (s * s) - 2 * tail


# ---------------------------------------------------------------- theta


def theta1(x, p, method="auto"):
    """theta(x|a) = 2 sum (-1)^n q^{(n+1/2)^2} sin((n+1/2)x), real x."""
    p = as_param(p)
    x = float(x)
    if _pick_modular(p, method):
        s = math.sin(x / 2)
        if s == 0.0:
            return 0.0
        return math.exp(kernels.log_theta_over_sin_modular(x, p.a)) * s
    r = p.q * p.q

    def term(n):
        k = n + 0.5
        return (-1) ** n * math.exp(p.a * k * k) * math.sin(k * x)

    return 2.0 * (term(0) + _sum_series(term, p, r))


def theta1_over_sin(x, p, method="auto"):
    """theta(x|a)/sin(x/2) = 2 q^{1/4} prod (1-q^{2n})(1-2q^{2n}cos x+q^{4n}), regular at x=0."""
    p = as_param(p)
    x = float(x)
    if _pick_modular(p, method):
        return math.exp(kernels.log_theta_over_sin_modular(x, p.a))
    s2 = math.sin(x / 2) ** 2
    r = p.q * p.q

    def term(n):
        rn = math.exp(2 * p.a * n)
        om = -math.expm1(2 * p.a * n)
        return math.log(om) + math.log(om * om + 4 * rn * s2)

    return 2.0 * p.q ** 0.25 * math.exp(_sum_series(term, p, r))


def log_theta1_over_sin(x, p):
    return kernels.log_theta_over_sin(float(x), as_param(p).a)


# ---------------------------------------------------------- vector fields


def xi1(z, x, guard=POLE_GUARD):
    """Half-strip chordal vector field, residue 2 at z = x."""
    z = complex(z)
    d = z - x
    d = d - 2 * math.pi * round(d.real / (2 * math.pi))
    if abs(d) < guard:
        raise PoleProximityError("z too close to the driving point")
    sz = cmath.sin(z / 2)
    if sz == 0:
        return 0j
    sx = math.sin(x / 2)
    # cot(z/2) - cot(x/2) = sin((x-z)/2) / (sin(z/2) sin(x/2))
    return -sz ** 3 / (sx ** 3 * cmath.sin((x - z) / 2))


def xi2(z, x, p, guard=POLE_GUARD):
    """Komatu-Loewner vector field 2[zeta(z-x) - eta z/pi + zeta(x)]."""
    p = as_param(p)
    z = complex(z)
    e = eta(p)
    return 2 * (weier_zeta(z - x, p, guard) - e / math.pi * z + weier_zeta(x, p, guard))


# ----------------------------------------------------------- dilogarithm


def dilog_pair(x):
    """Li2(e^{ix}) + Li2(e^{-ix}) = pi^2/3 - pi x + x^2/2 on [0, 2pi]."""
    x = float(x)
    if not 0.0 <= x <= 2 * math.pi:
        raise DomainError(f"x must lie in [0, 2pi], got {x}")
    return math.pi ** 2 / 3 - math.pi * x + 0.5 * x * x
