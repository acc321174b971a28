"""Mass, energy, the nonlocal potential energy P, the Lambda norm, Kato norm and GN quotient.

Conventions used throughout the package::

    F      = w_b |u|^p                    (weighted density)
    Phi    = I_gamma * F
    G      = Phi w_b |u|^(p-2)             (real phase potential, N(u) = G u)
    P(u)   = int Phi F
    E(u)   = 1/2 (int |grad u|^2 + int V |u|^2) - P(u) / (2p)
    E0(u)  = 1/2 int |grad u|^2 - P(u) / (2p)

The factor 1/(2p) is the one for which the flow conserves E and the ground
state satisfies E0(Q) = (B-2)/(2B) ||grad Q||^2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatch, ZeroField
from .params import ProblemParams
from .spectral import GridSpec, RieszOperator, WeightCache, resample, restrict, riesz_operator

FOUR_PI = 4 * math.pi


class HartreeModel:
    """The nonlinearity of the equation bound to one grid.

    ``nonlinear=False`` switches the Hartree term off (linear test mode).
    ``oversample > 1`` evaluates the nonlinear term and P on a finer grid of the
    same box (trigonometric interpolation there, projection back), which removes
    most of the aliasing error of the singular, strongly peaked products. The
    pointwise helpers (``density``, ``potential``, ``phase_potential``) always
    work on the base grid.
    """

    def __init__(self, params: ProblemParams, grid: GridSpec, riesz_mode: str = "free",
                 eps_reg: float = 0.0, nonlinear: bool = True, oversample: float = 1.0):
        if oversample < 1:
            raise ValueError("oversample must be >= 1")
        self.params = params
        self.grid = grid
        self.riesz_mode = riesz_mode
        self.eps_reg = eps_reg
        self.nonlinear = nonlinear
        m = 2 * int(round(grid.n * oversample / 2))
        self.fine = grid if m <= grid.n else GridSpec(m, grid.L, grid.offset, strict=False)

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def oversampled(self) -> bool:
        return self.fine is not self.grid

    @cached_property
    def weight(self) -> WeightCache:
        return WeightCache(self.grid, self.params.b, self.eps_reg)

    @property
    def riesz(self) -> RieszOperator:
        return riesz_operator(self.grid, self.params.gamma, self.riesz_mode)

    @cached_property
    def _fine_weight(self) -> WeightCache:
        return WeightCache(self.fine, self.params.b, self.eps_reg) if self.oversampled else self.weight

    def density(self, u: np.ndarray) -> np.ndarray:
        return self.weight.samples * np.abs(u) ** self.p

    def potential(self, u: np.ndarray) -> np.ndarray:
        return self.riesz(self.density(u))

    def phase_potential(self, u: np.ndarray, phi: np.ndarray | None = None) -> np.ndarray:
        """``G = Phi w_b |u|^(p-2)`` on the base grid, set to zero where ``u`` vanishes."""
        if not self.nonlinear:
            return np.zeros(self.grid.shape)
        if phi is None:
            phi = self.potential(u)
        return _phase(phi, self.weight.samples, np.abs(u), self.p)

    def nonlinearity(self, u: np.ndarray) -> np.ndarray:
        """``N(u) = G u``."""
        if not self.nonlinear:
            return np.zeros_like(u)
        if not self.oversampled:
            return self.phase_potential(u) * u
        m = self.fine.n
        uf = resample(self.grid, u, m)
        a = np.abs(uf)
        w = self._fine_weight.samples
        phi = riesz_operator(self.fine, self.params.gamma, self.riesz_mode)(w * a**self.p)
        return restrict(self.grid, _phase(phi, w, a, self.p) * uf, m)

    def P(self, u: np.ndarray) -> float:
        if not self.nonlinear:
            return 0.0
        if not self.oversampled:
            F = self.density(u)
            return self.grid.integrate(self.riesz(F) * F)
        uf = resample(self.grid, u, self.fine.n)
        F = self._fine_weight.samples * np.abs(uf) ** self.p
        return self.fine.integrate(riesz_operator(self.fine, self.params.gamma, self.riesz_mode)(F) * F)


def _phase(phi, w, a, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        g = phi * w * a ** (p - 2)
    g[a == 0] = 0.0
    return g


# ---------------------------------------------------------------------------------
# external potential


@dataclass
class Potential:
    grid: GridSpec
    samples: np.ndarray
    x_dot_grad: np.ndarray
    nonneg: bool = False
    repulsive: bool = False
    name: str = "custom"

    def __post_init__(self):
        self.grid.check(self.samples, self.x_dot_grad)
        if not (np.all(np.isfinite(self.samples)) and np.all(np.isfinite(self.x_dot_grad))):
            raise ValueError("potential samples must be finite")
        if self.nonneg and self.samples.min() < 0:
            raise ValueError("potential flagged nonnegative has negative samples")
        if self.repulsive and self.x_dot_grad.max() > 0:
            raise ValueError("potential flagged repulsive has x.grad V > 0 somewhere")

    @property
    def is_zero(self) -> bool:
        return not np.any(self.samples) and not np.any(self.x_dot_grad)

    def scaled(self, c: float) -> "Potential":
        return Potential(self.grid, c * self.samples, c * self.x_dot_grad,
                         nonneg=self.nonneg and c >= 0, repulsive=self.repulsive and c >= 0,
                         name=f"{c}*{self.name}")

    @classmethod
    def zero(cls, grid: GridSpec) -> "Potential":
        z = np.zeros(grid.shape)
        return cls(grid, z, z.copy(), nonneg=True, repulsive=True, name="none")

    @classmethod
    def gaussian(cls, grid: GridSpec, c: float = 1.0, width: float = 1.0) -> "Potential":
        """``V = c exp(-|x|^2 / width^2)`` with the closed-form ``x.grad V``."""
        v = c * np.exp(-grid.r2 / width**2)
        xdv = -2.0 * grid.r2 / width**2 * v
        return cls(grid, v, xdv, nonneg=c >= 0, repulsive=c >= 0, name=f"gaussian({c},{width})")

    @classmethod
    def from_samples(cls, grid: GridSpec, samples: np.ndarray, name: str = "samples") -> "Potential":
        """Arbitrary samples; ``x.grad V`` by spectral differentiation."""
        samples = np.asarray(samples, dtype=float)
        grid.check(samples)
        X, Y, Z = grid.axes()
        gx, gy, gz = grid.gradient(samples)
        xdv = X * gx + Y * gy + Z * gz
        return cls(grid, samples, xdv, name=name)

    @classmethod
    def from_file(cls, grid: GridSpec, path) -> "Potential":
        return cls.from_samples(grid, np.load(Path(path)), name=str(path))


# ---------------------------------------------------------------------------------
# functionals


@dataclass
class FunctionalRecord:
    mass: float
    kinetic: float
    potential_energy: float
    P: float
    energy: float
    energy0: float
    lambda_norm: float

    def to_dict(self):
        return asdict(self)


def assemble(p: float, mass, kinetic, potential_energy, P) -> FunctionalRecord:
    lam2 = kinetic + potential_energy
    return FunctionalRecord(
        mass=mass, kinetic=kinetic, potential_energy=potential_energy, P=P,
        energy=0.5 * lam2 - P / (2 * p),
        energy0=0.5 * kinetic - P / (2 * p),
        lambda_norm=math.sqrt(max(lam2, 0.0)),
    )


def evaluate(model: HartreeModel, u: np.ndarray, V: Potential | None = None,
             phi: np.ndarray | None = None) -> FunctionalRecord:
    """All scalar functionals of ``u``. ``phi`` may pass a precomputed ``I_gamma * F``."""
    grid = model.grid
    grid.check(u)
    if V is not None and V.grid != grid:
        raise GridMismatch("potential and field live on different grids")
    a2 = np.abs(u) ** 2
    mass = grid.integrate(a2)
    kinetic = grid.kinetic(u)
    potV = grid.integrate(V.samples * a2) if V is not None else 0.0
    if phi is not None and model.nonlinear:
        F = model.density(u)
        P = grid.integrate(phi * F)
    else:
        P = model.P(u)
    return assemble(model.p, mass, kinetic, potV, P)


def kato_norm(V: Potential | np.ndarray, grid: GridSpec | None = None) -> float:
    """``max_x int |V(y)| / |x - y| dy`` over grid nodes, as ``4 pi (I_2 * |V|)``."""
    if isinstance(V, Potential):
        grid, samples = V.grid, V.samples
    else:
        samples = np.asarray(V, dtype=float)
    absV = np.abs(samples)
    if not absV.any():
        return 0.0
    return float(FOUR_PI * riesz_operator(grid, 2.0, "free")(absV).max())


def lr_norm(grid: GridSpec, f: np.ndarray, r: float) -> float:
    return float((np.sum(np.abs(f) ** r) * grid.dV) ** (1.0 / r))


@dataclass
class PotentialReport:
    kato_negative: float
    kato_margin: float
    kato_ok: bool
    min_V: float
    nonneg: bool
    max_x_grad_V: float
    repulsive: bool
    r: float
    V_L3_2: float
    x_grad_V_Lr: float
    norms_finite: bool
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def summary(self) -> str:
        mark = lambda ok: "PASS" if ok else "FAIL"
        return "\n".join([
            f"[{mark(self.kato_ok)}] Kato norm of V_- = {self.kato_negative:.6g} < 4 pi (margin {self.kato_margin:.6g})",
            f"[{mark(self.nonneg)}] V >= 0 (min V = {self.min_V:.6g})",
            f"[{mark(self.repulsive)}] x.grad V <= 0 (max = {self.max_x_grad_V:.6g})",
            f"[{mark(self.norms_finite)}] ||V||_L^3/2 = {self.V_L3_2:.6g}, ||x.grad V||_L^{self.r:g} = {self.x_grad_V_Lr:.6g}",
        ])


def check_potential_hypotheses(V: Potential, r: float = 1.5, atol: float = 0.0) -> PotentialReport:
    """Sample-level check of the hypotheses placed on V. ``r`` is the exponent for x.grad V."""
    if not 1.5 <= r < math.inf:
        raise ValueError("r must lie in [3/2, inf)")
    neg = np.minimum(V.samples, 0.0)
    kneg = kato_norm(neg, V.grid)
    min_v = float(V.samples.min())
    max_xdv = float(V.x_dot_grad.max())
    n32 = lr_norm(V.grid, V.samples, 1.5)
    nr = lr_norm(V.grid, V.x_dot_grad, r)
    checks = {
        "kato": kneg < FOUR_PI,
        "nonneg": min_v >= -atol,
        "repulsive": max_xdv <= atol,
        "norms_finite": math.isfinite(n32) and math.isfinite(nr),
    }
    return PotentialReport(
        kato_negative=kneg, kato_margin=FOUR_PI - kneg, kato_ok=checks["kato"],
        min_V=min_v, nonneg=checks["nonneg"], max_x_grad_V=max_xdv, repulsive=checks["repulsive"],
        r=r, V_L3_2=n32, x_grad_V_Lr=nr, norms_finite=checks["norms_finite"], checks=checks,
    )


def gn_quotient(model: HartreeModel, u: np.ndarray) -> float:
    """``P(u) / (||u||^A ||grad u||^B)``, computed without V."""
    grid = model.grid
    mass = grid.integrate(np.abs(u) ** 2)
    kin = grid.kinetic(u)
    if mass == 0 or kin == 0:
        raise ZeroField("GN quotient is undefined for the zero field")
    A, B = model.params.A, model.params.B
    return model.P(u) / (mass ** (A / 2) * kin ** (B / 2))
