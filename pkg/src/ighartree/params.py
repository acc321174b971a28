"""Parameter window and derived exponents for the (gamma, b, p) problem family."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import RangeViolation


def riesz_constant(gamma: float) -> float:
    """Normalisation of the Riesz kernel K / |x|^(3-gamma) in three dimensions.

    With this constant the kernel's Fourier transform is exactly |xi|^(-gamma).
    """
    return math.gamma((3 - gamma) / 2) / (math.gamma(gamma / 2) * math.pi**1.5 * 2**gamma)


def critical_regularity(gamma: float, b: float, p: float) -> float:
    return 1.5 - (2 - 2 * b + gamma) / (2 * (p - 1))


@dataclass(frozen=True)
class ProblemParams:
    gamma: float
    b: float
    p: float
    s_c: float
    sigma_c: float
    A: float
    B: float
    K_gamma: float

    @property
    def p_lower(self) -> float:
        """Mass-critical endpoint, where s_c = 0."""
        return (5 - 2 * self.b + self.gamma) / 3

    @property
    def p_upper(self) -> float:
        return (5 - 4 * self.b + 2 * self.gamma) / 2

    @property
    def p_energy_critical(self) -> float:
        """Endpoint where s_c = 1."""
        return 3 - 2 * self.b + self.gamma

    @property
    def tau(self) -> float:
        """Stabilising exponent of the renormalised fixed-point iteration."""
        return (2 * self.p - 1) / (2 * self.p - 2)

    def to_dict(self) -> dict:
        return asdict(self)


def derive(gamma: float, b: float, p: float) -> ProblemParams:
    """Validate (gamma, b, p) and compute every derived scalar.

    All inequalities are strict. Every violated constraint is collected and
    reported together in a single :class:`RangeViolation`.
    """
    gamma, b, p = float(gamma), float(b), float(p)
    bad = []
    for name, v in (("gamma", gamma), ("b", b), ("p", p)):
        if not math.isfinite(v):
            bad.append(f"{name} must be finite (got {v})")
    if bad:
        raise RangeViolation(bad)
    if not 0 < gamma < 3:
        bad.append(f"gamma must satisfy 0 < gamma < 3 (got {gamma})")
    if not b > 0:
        bad.append(f"b must satisfy b > 0 (got {b})")
    if not b < (1 + gamma) / 2:
        bad.append(f"b must satisfy b < (1+gamma)/2 = {(1 + gamma) / 2} (got {b})")
    if not p > 1:
        bad.append(f"p must satisfy p > 1 (got {p})")
        raise RangeViolation(bad)
    lo = (5 - 2 * b + gamma) / 3
    hi = (5 - 4 * b + 2 * gamma) / 2
    if not p > lo:
        bad.append(f"p must satisfy p > (5-2b+gamma)/3 = {lo} (got {p}); s_c > 0 fails")
    if not p < hi:
        bad.append(f"p must satisfy p < (5-4b+2gamma)/2 = {hi} (got {p})")
    s_c = critical_regularity(gamma, b, p)
    if not 0 < s_c < 1 and not any("s_c" in m for m in bad):
        bad.append(f"s_c must lie in (0, 1) (got {s_c})")
    if bad:
        raise RangeViolation(bad)

    sigma_c = (1 - s_c) / s_c
    A = 2 * (p - 1) * (1 - s_c)
    B = 2 * (p - 1) * s_c + 2
    return ProblemParams(
        gamma=gamma, b=b, p=p, s_c=s_c, sigma_c=sigma_c, A=A, B=B,
        K_gamma=riesz_constant(gamma),
    )
