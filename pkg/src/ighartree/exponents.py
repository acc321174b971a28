"""Exact-rational bookkeeping for Strichartz pairs and the nonlinear-estimate exponents.

Everything here is :class:`fractions.Fraction` arithmetic so that identities can
be checked with ``==``. Floats are converted through their decimal repr, which
keeps ``0.1`` equal to ``1/10``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .errors import DegenerateDenominator, RangeViolation


class _Infinity:
    """Distinguished exponent value with 1/inf = 0."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"

    __str__ = __repr__


INF = _Infinity()

Rational = Union[Fraction, int, str, float]


def as_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def parse_exponent(x):
    """Like :func:`as_rational` but also accepts ``inf``/``"inf"``."""
    if x is INF or (isinstance(x, str) and x.strip().lower() in ("inf", "infinity", "∞")):
        return INF
    if isinstance(x, float) and x == float("inf"):
        return INF
    return as_rational(x)


def reciprocal(q) -> Fraction:
    return Fraction(0) if q is INF else 1 / as_rational(q)


@dataclass(frozen=True)
class RationalPair:
    q: object  # Fraction or INF
    r: Fraction

    def __post_init__(self):
        object.__setattr__(self, "q", parse_exponent(self.q))
        object.__setattr__(self, "r", as_rational(self.r))


def check_L2_admissible(pair: RationalPair) -> bool:
    r = pair.r
    if r <= 0:
        return False
    lhs = 2 * reciprocal(pair.q)
    return lhs == Fraction(3, 2) - 3 / r and 2 <= r <= 6


def check_Hs_admissible(pair: RationalPair, s) -> bool:
    s = as_rational(s)
    if pair.r <= 0:
        return False
    return 2 * reciprocal(pair.q) == Fraction(3, 2) - 3 / pair.r - s


def check_Hminus_s_admissible(pair: RationalPair, s) -> bool:
    s = as_rational(s)
    if pair.r <= 0:
        return False
    return 2 * reciprocal(pair.q) == Fraction(3, 2) - 3 / pair.r + s


def holder_dual(q: Fraction) -> Fraction:
    q = as_rational(q)
    return q / (q - 1)


@dataclass
class Check:
    name: str
    lhs: object
    rhs: object
    holds: bool

    def to_dict(self):
        return {"name": self.name, "lhs": _fmt(self.lhs), "rhs": _fmt(self.rhs), "holds": self.holds}


@dataclass
class ExponentReport:
    p: Fraction
    b: Fraction
    gamma: Fraction
    theta: Fraction
    epsilon: Fraction
    s_c: Fraction
    a: Fraction
    a_tilde: Fraction
    a_tilde_prime: Fraction
    r: Fraction
    a_bar: Fraction
    r_bar: Fraction
    r_bar_admissible: Fraction
    p_threshold: Fraction
    theta_max_for_r: Fraction
    r_lower: Fraction
    feasible: bool
    witness: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k == "witness":
                out[k] = [c.to_dict() for c in v]
            else:
                out[k] = _fmt(v)
        return out

    def summary(self) -> str:
        lines = [
            f"(p, b, gamma) = ({self.p}, {self.b}, {self.gamma}); theta = {self.theta}, epsilon = {self.epsilon}",
            f"s_c           = {self.s_c}",
            f"(a, r)        = ({self.a}, {self.r})   [H^s_c-admissible pair]",
            f"a~, a~'       = {self.a_tilde}, {self.a_tilde_prime}",
            f"(a_bar, r_bar)= ({self.a_bar}, {self.r_bar})",
            f"r_bar from exact admissibility = {self.r_bar_admissible}",
            f"p threshold 5/2 - 2b + gamma = {self.p_threshold}",
            f"theta must stay below {self.theta_max_for_r} for r to be defined; r ranges over ({self.r_lower}, 6)",
            f"feasible      = {self.feasible}",
            "checks:",
        ]
        for c in self.witness:
            mark = "ok  " if c.holds else "FAIL"
            lines.append(f"  [{mark}] {c.name}: {_fmt(c.lhs)} vs {_fmt(c.rhs)}")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, Fraction):
        return str(v)
    if v is INF:
        return "inf"
    return v


def build_report(p, b, gamma, theta=0, epsilon=0) -> ExponentReport:
    """Compute the exponent ledger for ``(p, b, gamma)`` with slack ``theta``, ``epsilon``.

    The triple must be intercritical (0 < s_c < 1) with admissible ``b`` and
    ``gamma``; the upper restriction p < 5/2 - 2b + gamma is *not* imposed here,
    it is what ``feasible`` reports on.
    """
    p, b, gamma = as_rational(p), as_rational(b), as_rational(gamma)
    theta, epsilon = as_rational(theta), as_rational(epsilon)

    bad = []
    if not 0 < gamma < 3:
        bad.append("gamma must satisfy 0 < gamma < 3")
    if not 0 < b < (1 + gamma) / 2:
        bad.append("b must satisfy 0 < b < (1+gamma)/2")
    if not p > 1:
        bad.append("p must exceed 1")
    if theta < 0 or epsilon < 0:
        bad.append("theta and epsilon must be nonnegative")
    if bad:
        raise RangeViolation(bad)
    s_c = Fraction(3, 2) - (2 - 2 * b + gamma) / (2 * (p - 1))
    if not 0 < s_c < 1:
        raise RangeViolation([f"s_c = {s_c} is outside (0, 1)"])
    if not theta < p - 1:
        raise RangeViolation([f"theta = {theta} must be below p - 1 = {p - 1}"])

    pt = p - theta
    a = 2 * pt / (1 - s_c)
    a_tilde = 2 * pt / (2 * pt * s_c + 1 - s_c)
    a_tilde_prime = holder_dual(a_tilde)
    r_den = (3 - 2 * s_c) * pt - 2 * (1 - s_c)
    r = 6 * pt / r_den

    q = p - 1 - theta
    a_bar = 8 * q / (1 + 2 * epsilon)
    rbar_den = 2 * q * (2 - 2 * b + gamma) - (p - 1) * (1 - 2 * epsilon)
    if rbar_den <= 0:
        raise DegenerateDenominator(
            f"r_bar denominator 2(p-1-theta)(2-2b+gamma) - (p-1)(1-2eps) = {rbar_den} <= 0"
        )
    r_bar = 12 * q * (p - 1) / rbar_den
    # r_bar that makes (a_bar, r_bar) exactly H^s_c-admissible; agrees with r_bar iff epsilon = 0
    adm_den = 2 * q * (2 - 2 * b + gamma) - (p - 1) * (1 + 2 * epsilon)
    r_bar_adm = 12 * q * (p - 1) / adm_den if adm_den > 0 else Fraction(-1)

    p_thr = Fraction(5, 2) - 2 * b + gamma
    dual_lhs = (2 * p - 1 - 2 * theta) * a_tilde_prime
    witness = [
        Check("(2p-1-2theta) * a~' = a", dual_lhs, a, dual_lhs == a),
        Check("(a, r) is H^s_c-admissible", 2 / a, Fraction(3, 2) - 3 / r - s_c,
              check_Hs_admissible(RationalPair(a, r), s_c)),
        Check("(a~, r) is H^-s_c-admissible", 2 / a_tilde, Fraction(3, 2) - 3 / r + s_c,
              check_Hminus_s_admissible(RationalPair(a_tilde, r), s_c)),
        Check("a > 2/(1-s_c)", a, 2 / (1 - s_c), a > 2 / (1 - s_c)),
        Check("r < 6", r, Fraction(6), r < 6),
        Check("(a_bar, r_bar) is H^s_c-admissible", 2 / a_bar, Fraction(3, 2) - 3 / r_bar - s_c,
              check_Hs_admissible(RationalPair(a_bar, r_bar), s_c)),
        Check("r_bar < 6", r_bar, Fraction(6), r_bar < 6),
        Check("p < 5/2 - 2b + gamma", p, p_thr, p < p_thr),
    ]
    feasible = bool(r_bar < 6 and a_bar > 0 and r_bar > 0 and dual_lhs == a)
    return ExponentReport(
        p=p, b=b, gamma=gamma, theta=theta, epsilon=epsilon, s_c=s_c,
        a=a, a_tilde=a_tilde, a_tilde_prime=a_tilde_prime, r=r,
        a_bar=a_bar, r_bar=r_bar, r_bar_admissible=r_bar_adm,
        p_threshold=p_thr,
        theta_max_for_r=p - 2 * (1 - s_c) / (3 - 2 * s_c),
        r_lower=6 / (3 - 2 * s_c),
        feasible=feasible, witness=witness,
    )
