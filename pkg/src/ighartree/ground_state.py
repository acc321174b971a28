"""Ground state Q of  Delta Q - Q + G(Q) Q = 0  by renormalised fixed-point iteration."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft

from .errors import DivergedRenormalizer, NonPositiveIterate, NotConverged
from .functionals import HartreeModel, evaluate
from .params import ProblemParams
from .spectral import FFT_WORKERS, GridSpec

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    tolerance: float = 1e-10
    residual_tol: float = 1e-8
    max_iter: int = 2000
    seed_width: float = 1.0
    positivity_tol: float = 1e-3
    pohozaev_tol: float = 1e-2
    riesz_mode: str = "free"
    eps_reg: float = 0.0
    oversample: float = 1.5


@dataclass
class GroundState:
    Q: np.ndarray
    grid: GridSpec
    mass_Q: float
    grad_Q: float
    P_Q: float
    E0_Q: float
    C_op: float
    pohozaev_residuals: tuple
    equation_residual: float
    iterations: int
    converged: bool

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("Q", "grid")}
        d["pohozaev_residuals"] = list(self.pohozaev_residuals)
        return d


@dataclass
class ThresholdConstants:
    mass_energy: float        # M(Q)^sigma_c E0(Q)
    mass_gradient: float      # ||Q||^sigma_c ||grad Q||
    mass_P: float             # P(Q) M(Q)^sigma_c
    C_op: float
    C_op_closed_form: float

    def to_dict(self):
        return asdict(self)


def _residual(model: HartreeModel, Q: np.ndarray) -> float:
    grid = model.grid
    r = grid.laplacian(Q) - Q + model.nonlinearity(Q)
    return grid.norm(r) / grid.norm(Q)


def pohozaev_residuals(params: ProblemParams, mass, kin, P) -> tuple:
    A, B, p = params.A, params.B, params.p
    E0 = 0.5 * kin - P / (2 * p)
    return (
        abs(kin * A / (B * mass) - 1),
        abs(P * B / (2 * p * kin) - 1),
        abs(E0 * 2 * B / ((B - 2) * kin) - 1),
    )


def solve(params: ProblemParams, grid: GridSpec, opts: SolverOptions | None = None,
          seed: np.ndarray | None = None) -> GroundState:
    """Petviashvili iteration  Q <- M^tau (1 - Delta)^(-1) N(Q).

    ``M = <(1-Delta)Q, Q> / <N(Q), Q>`` and ``tau = (2p-1)/(2p-2)``. Stops when the
    relative L2 increment and the equation residual are both below tolerance.
    A stalled iteration returns ``converged=False``.
    """
    opts = opts or SolverOptions()
    model = HartreeModel(params, grid, opts.riesz_mode, opts.eps_reg, oversample=opts.oversample)
    Q = np.exp(-grid.r2 / opts.seed_width**2) if seed is None else np.array(seed, dtype=float)
    grid.check(Q)
    shape = grid.shape
    sym = 1.0 + grid.k2_half
    tau = params.tau
    converged = False
    it = 0
    res = math.inf
    for it in range(1, opts.max_iter + 1):
        Qh = sfft.rfftn(Q, workers=FFT_WORKERS)
        Nh = sfft.rfftn(model.nonlinearity(Q), workers=FFT_WORKERS)
        # weights for the half spectrum: interior planes count twice
        num = _half_dot(sym * np.abs(Qh) ** 2, grid.n)
        den = _half_dot((np.conj(Qh) * Nh).real, grid.n)
        if not (den > 0 and num > 0) or not math.isfinite(num / den):
            raise DivergedRenormalizer(f"renormaliser ill-defined at iteration {it} (num={num}, den={den})")
        M = num / den
        if M < 1e-12 or M > 1e12:
            raise DivergedRenormalizer(f"renormaliser M={M:.3g} at iteration {it}")
        Qn = sfft.irfftn(M**tau * Nh / sym, s=shape, workers=FFT_WORKERS)
        qmax = Qn.max()
        if qmax <= 0 or Qn.min() < -opts.positivity_tol * qmax:
            raise NonPositiveIterate(
                f"iterate min {Qn.min():.3g} vs max {qmax:.3g} at iteration {it}; check seed or box size")
        inc = grid.norm(Qn - Q) / grid.norm(Qn)
        Q = Qn
        if inc < opts.tolerance:
            res = _residual(model, Q)
            if res < opts.residual_tol:
                converged = True
                break
    if not converged:
        res = _residual(model, Q)
        log.warning("ground-state iteration stopped after %d iterations (residual %.3g)", it, res)

    rec = evaluate(model, Q)
    poh = pohozaev_residuals(params, rec.mass, rec.kinetic, rec.P)
    C_op = rec.P / (rec.mass ** (params.A / 2) * rec.kinetic ** (params.B / 2))
    if converged and max(poh) >= opts.pohozaev_tol:
        log.warning("Pohozaev residuals %s exceed %.1e", poh, opts.pohozaev_tol)
        converged = False
    return GroundState(
        Q=Q, grid=grid, mass_Q=rec.mass, grad_Q=math.sqrt(rec.kinetic), P_Q=rec.P,
        E0_Q=rec.energy0, C_op=C_op, pohozaev_residuals=poh, equation_residual=res,
        iterations=it, converged=converged,
    )


def _half_dot(a: np.ndarray, n: int) -> float:
    # sum over the full spectrum of a Hermitian-symmetric quantity stored as rfft half
    s = 2.0 * a.sum() - a[..., 0].sum()
    if n % 2 == 0:
        s -= a[..., n // 2].sum()
    return float(s)


def constants(gs: GroundState, params: ProblemParams) -> ThresholdConstants:
    if not gs.converged:
        raise NotConverged("threshold constants need a converged ground state")
    sc = params.sigma_c
    mP = gs.P_Q * gs.mass_Q**sc
    B, p = params.B, params.p
    closed = (2 * p) ** (B / 2) / (B ** (B / 2) * mP ** (B / 2 - 1))
    return ThresholdConstants(
        mass_energy=gs.mass_Q**sc * gs.E0_Q,
        mass_gradient=math.sqrt(gs.mass_Q) ** sc * gs.grad_Q,
        mass_P=mP,
        C_op=gs.C_op,
        C_op_closed_form=closed,
    )
