"""Runtime monitors: virial-Morawetz weight and identity, local mass, coercivity, classifiers."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import EmptySeries, GridMismatch, InsufficientSamples
from .functionals import FunctionalRecord, HartreeModel, Potential, evaluate
from .params import ProblemParams
from .spectral import GridSpec, riesz_constant

CORE_COLUMNS = ["t", "mass", "kinetic", "potV", "P", "E", "E0", "lambda_norm",
                "local_mass_R", "M_a", "classifier_flags"]
TERM_NAMES = ["term_a", "term_b", "term_c", "term_d", "term_e", "term_total"]

# relative band inside which a "strictly below" comparison counts as equality
BELOW_RTOL = 1e-9


# ---------------------------------------------------------------------------------
# virial weight


def weight_profile(r, R):
    """Radial profile of the virial weight and its first three derivatives.

    ``a = r^2`` on ``r <= R``. On ``[R, 2R]`` ``a'`` is the Hermite interpolant with
    ``a'(R) = 2R, a'(2R) = 3R, a''(R) = 2, a''(2R) = 0`` (it degenerates to a quadratic).
    Beyond ``2R``, ``a = 3R r - 7R^2/3``; the constant keeps ``a`` continuous.
    """
    r = np.asarray(r, dtype=float)
    s = (r - R) / R
    inner, outer = r <= R, r > 2 * R
    blend = ~inner & ~outer
    a = np.where(inner, r**2, np.where(outer, 3 * R * r - 7 * R**2 / 3,
                                       R**2 * (1 + 2 * s + s**2 - s**3 / 3)))
    a1 = np.where(inner, 2 * r, np.where(outer, 3 * R, R * (2 + 2 * s - s**2)))
    a2 = np.where(inner, 2.0, np.where(outer, 0.0, 2 - 2 * s))
    a3 = np.where(blend, -2.0 / R, 0.0)
    return a, a1, a2, a3


class VirialWeight:
    """Samples of the radial weight ``a`` and the derivative combinations the identity needs."""

    def __init__(self, grid: GridSpec, R: float):
        if not R > 0:
            raise ValueError("virial radius R must be positive")
        self.grid, self.R = grid, float(R)
        r = grid.r
        a, a1, a2, a3 = weight_profile(r, self.R)
        blend = (r > R) & (r <= 2 * R)
        if blend.any():
            assert a1[blend].min() >= -1e-12, "weight not monotone on blend"
            assert a2[blend].min() >= -1e-12, "weight not convex on blend"
        self.a = a
        self.da = a1            # a'(r)
        self.d2a = a2           # a''(r)
        self.a1_over_r = a1 / r
        self.lap = a2 + 2 * a1 / r
        # (Lap a)'(r) and Lap^2 a away from the blend edges (no delta parts on nodes)
        self.dlap = a3 + 2 * a2 / r - 2 * a1 / r**2
        self.bilap = 4 * a3 / r
        X, Y, Z = grid.axes()
        self.xhat = (X / r, Y / r, Z / r)

    @property
    def grad(self):
        return tuple(self.da * xh for xh in self.xhat)

    def hessian(self):
        """Components ``a_jk`` as a 3x3 nested tuple of arrays."""
        xh = self.xhat
        H = [[None] * 3 for _ in range(3)]
        for j in range(3):
            for k in range(j, 3):
                h = (self.d2a - self.a1_over_r) * xh[j] * xh[k]
                if j == k:
                    h = h + self.a1_over_r
                H[j][k] = H[k][j] = h
        return H

    def check(self, u):
        if np.shape(u) != self.grid.shape:
            raise GridMismatch("field and virial weight live on different grids")


@dataclass
class Cutoff:
    """Smooth cutoff ``chi_R`` (1 on ``|x| < R/2``, 0 on ``|x| > R``) and the sharp ball."""

    grid: GridSpec
    R: float

    def __post_init__(self):
        r = self.grid.r
        t = np.clip((r - self.R / 2) / (self.R / 2), 0.0, 1.0)
        psi = lambda z: np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
        self.chi = psi(1 - t) / (psi(1 - t) + psi(t))
        self.ball = (r < self.R).astype(float)


# ---------------------------------------------------------------------------------
# virial-Morawetz identity


def morawetz_action(u: np.ndarray, w: VirialWeight) -> float:
    """``M_a = 2 Im int conj(u) grad u . grad a``."""
    w.check(u)
    if np.isrealobj(u):
        return 0.0
    g = w.grid
    grads = g.gradient(u)
    flux = sum((np.conj(u) * d).imag * ga for d, ga in zip(grads, w.grad))
    return 2.0 * g.integrate(flux)


@dataclass
class TermBreakdown:
    a: float
    b: float
    c: float
    d: float
    e: float

    @property
    def total(self) -> float:
        return self.a + self.b + self.c + self.d + self.e

    def to_dict(self):
        d = asdict(self)
        d["total"] = self.total
        return d


def morawetz_rhs(model: HartreeModel, u: np.ndarray, V: Potential | None, w: VirialWeight,
                 phi: np.ndarray | None = None) -> TermBreakdown:
    """The five labelled contributions to ``d/dt M_a``.

    (a) ``-int Lap^2 a |u|^2 + 4 int a_jk Re(d_j conj(u) d_k u)``; the first part is
        integrated by parts once, ``int (Lap a)' d_r |u|^2``, so the jumps of ``a'''``
        at ``R`` and ``2R`` need no delta terms.
    (b) ``-(2 - 4/p) int Lap a Phi F``.
    (c) ``(4/p) int Phi |u|^p grad a . grad w_b``, i.e. ``-(4b/p) int Phi |u|^p w_b a' r/(r^2+eps^2)``.
    (d) ``-2 int |u|^2 grad V . grad a``.
    (e) the nonlocal commutator ``-M iint (grad a(x) - grad a(y)).(x-y)/|x-y|^(5-gamma) F(x) F(y)``,
        evaluated in the equivalent single-integral form ``(4/p) int F grad Phi . grad a``
        with the derivative moved off ``Phi``.
    """
    w.check(u)
    g = model.grid
    p = model.p
    grads = g.gradient(np.asarray(u, dtype=complex))
    a2 = np.abs(u) ** 2
    radial = sum(xh * d for xh, d in zip(w.xhat, grads))            # x^ . grad u
    jr = (np.conj(u) * radial).real                                 # Re(conj(u) d_r u)
    grad2 = sum(np.abs(d) ** 2 for d in grads)
    rad2 = np.abs(radial) ** 2
    term_a = g.integrate(w.dlap * 2 * jr) + 4 * g.integrate(w.d2a * rad2 + w.a1_over_r * (grad2 - rad2))

    if model.nonlinear:
        wb = model.weight
        absu = np.sqrt(a2)
        up = absu**p
        F = wb.samples * up
        if phi is None:
            phi = model.riesz(F)
        r2 = g.r2
        ga_gw = -model.params.b * w.da * g.r / (r2 + wb.eps_reg**2) * wb.samples   # grad a . grad w_b
        term_b = -(2 - 4 / p) * g.integrate(w.lap * phi * F)
        term_c = (4 / p) * g.integrate(phi * up * ga_gw)
        with np.errstate(divide="ignore", invalid="ignore"):
            wup2 = wb.samples * absu ** (p - 2)
        wup2[absu == 0] = 0.0
        term_e = -(4 / p) * g.integrate(phi * (F * w.lap + up * ga_gw + p * wup2 * w.da * jr))
    else:
        term_b = term_c = term_e = 0.0

    if V is None or V.is_zero:
        term_d = 0.0
    else:
        term_d = -2 * g.integrate(a2 * w.a1_over_r * V.x_dot_grad)
    return TermBreakdown(term_a, term_b, term_c, term_d, term_e)


@lru_cache(maxsize=16)
def _cube_moment(gamma: float) -> float:
    """``int over [-1/2,1/2]^3 of |z|^(gamma-3) dz``."""
    t, wt = leggauss(48)
    u = 0.5 * t
    q = u[:, None] ** 2 + u[None, :] ** 2 + 0.25
    return float(3.0 / gamma * np.sum(0.25 * wt[:, None] * wt[None, :] * q ** ((gamma - 3) / 2)))


def _double_sum(model, u, w, stride):
    g = model.grid
    sl = slice(stride // 2, None, stride)
    x = g.x[sl]
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    F = (model.weight.pointwise * np.abs(u) ** model.p)[sl, sl, sl].ravel()
    ga = np.stack([c[sl, sl, sl].ravel() for c in w.grad], axis=1)
    lap = w.lap[sl, sl, sl].ravel()
    keep = F > 0
    pts, F, ga, lap = pts[keep], F[keep], ga[keep], lap[keep]
    H = stride * g.h
    gamma = model.params.gamma
    total = 0.0
    chunk = max(1, 2**22 // max(len(F), 1))
    for i in range(0, len(F), chunk):
        d = pts[i:i + chunk, None, :] - pts[None, :, :]
        dd = np.einsum("ijk,ijk->ij", d, d)
        num = np.einsum("ijk,ijk->ij", ga[i:i + chunk, None, :] - ga[None, :, :], d)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(dd > 0, num * dd ** ((gamma - 5) / 2), 0.0)
        total += float(F[i:i + chunk] @ k @ F)
    # self cells: (grad a(x) - grad a(y)).(x - y) ~ (x-y)^T Hess a (x-y), isotropic average Lap a / 3
    total += float(np.sum(F**2 * lap / 3)) * _cube_moment(gamma) * H**gamma
    return total * H**6


def morawetz_double_integral(model: HartreeModel, u: np.ndarray, w: VirialWeight,
                             stride: int = 4, richardson: bool = True) -> float:
    """Direct evaluation of term (e) on the sub-lattice of every ``stride``-th node.

    With ``richardson`` the sums at ``stride`` and ``2*stride`` are combined assuming
    a second-order error. A cross-check for the single-integral form in
    :func:`morawetz_rhs`; the direct sum costs O((n/stride)^6).
    """
    w.check(u)
    gamma = model.params.gamma
    M = 2 * riesz_constant(gamma) * (3 - gamma) / model.p
    val = _double_sum(model, u, w, stride)
    if richardson and model.grid.n // (2 * stride) >= 4:
        val = (4 * val - _double_sum(model, u, w, 2 * stride)) / 3
    return -M * val


# ---------------------------------------------------------------------------------
# local quantities


def local_mass(u: np.ndarray, R: float, grid: GridSpec) -> float:
    """``int_{|x|<R} |u|^2`` with the sharp ball indicator on nodes."""
    if not R > 0:
        raise ValueError("R must be positive")
    grid.check(u)
    return grid.integrate(np.where(grid.r < R, np.abs(u) ** 2, 0.0))


def profile_value(radii: np.ndarray, cum: np.ndarray, R: float) -> float:
    """Ball integral ``|x| < R`` read off a cumulative shell profile."""
    i = int(np.searchsorted(radii, R, side="left")) - 1
    return float(cum[i]) if i >= 0 else 0.0


@dataclass
class DiagnosticConfig:
    R_local: tuple = (5.0,)
    virial_R: float = 4.0
    terms: bool = False
    shells: bool = True

    def __post_init__(self):
        self.R_local = tuple(float(r) for r in np.atleast_1d(self.R_local))
        if not self.R_local or min(self.R_local) <= 0 or self.virial_R <= 0:
            raise ValueError("radii must be positive")


# ---------------------------------------------------------------------------------
# time series


class DiagnosticsSeries:
    """Column store of sampled diagnostics plus cumulative shell profiles."""

    def __init__(self, columns=None, radii=None, meta=None):
        self.columns = {c: [] for c in (columns or CORE_COLUMNS)}
        self.radii = radii
        self.mass_profiles = []
        self.P_profiles = []
        self.meta = dict(meta or {})
        self.blowup_flag = False
        self.blowup_t = None
        self.nonfinite_t = None
        self.last_finite_t = None

    def __len__(self):
        return len(self.columns["t"])

    def add_column(self, name):
        if name not in self.columns:
            self.columns[name] = [None] * len(self)

    def append(self, row: dict, mass_profile=None, P_profile=None):
        for k in row:
            self.add_column(k)
        for k, col in self.columns.items():
            col.append(row.get(k, ""))
        if mass_profile is not None:
            self.mass_profiles.append(mass_profile)
            self.P_profiles.append(P_profile)

    def array(self, name) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.array("t")

    def row(self, i) -> dict:
        return {k: v[i] for k, v in self.columns.items()}

    def to_csv(self, path):
        names = list(self.columns)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(names)
            for i in range(len(self)):
                wr.writerow([_fmt(self.columns[k][i]) for k in names])

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsSeries":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            names = next(rd)
            s = cls(columns=names)
            for line in rd:
                s.append({k: _parse(v) for k, v in zip(names, line)})
        return s

    def save_profiles(self, path):
        if self.radii is None or not self.mass_profiles:
            return False
        np.savez(path, radii=self.radii, t=self.t, mass=np.array(self.mass_profiles),
                 P=np.array(self.P_profiles))
        return True

    def load_profiles(self, path):
        with np.load(path) as z:
            self.radii = z["radii"]
            self.mass_profiles = list(z["mass"])
            self.P_profiles = list(z["P"])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _parse(v):
    try:
        return float(v)
    except ValueError:
        return v


class Recorder:
    """Evaluates one diagnostics row for a field; used by the time stepper."""

    def __init__(self, model: HartreeModel, V: Potential | None, config: DiagnosticConfig | None = None,
                 thresholds=None):
        self.model, self.V = model, V
        self.config = config or DiagnosticConfig()
        self.weight = VirialWeight(model.grid, self.config.virial_R)
        self.thresholds = thresholds
        self.sigma_c = model.params.sigma_c

    def new_series(self) -> DiagnosticsSeries:
        cols = list(CORE_COLUMNS) + ["theorem_monitor", "grad_norm"]
        cols += [f"local_mass_R{r:g}" for r in self.config.R_local[1:]]
        if self.config.terms:
            cols += TERM_NAMES
        radii = self.model.grid.shells[0] if self.config.shells else None
        meta = {"R_local": list(self.config.R_local), "virial_R": self.config.virial_R,
                "sigma_c": self.sigma_c}
        return DiagnosticsSeries(cols, radii, meta)

    def sample(self, series: DiagnosticsSeries, t: float, u: np.ndarray) -> FunctionalRecord:
        m, g = self.model, self.model.grid
        phi = m.potential(u) if m.nonlinear else None
        rec = evaluate(m, u, self.V, phi=phi)
        a2 = np.abs(u) ** 2
        row = {
            "t": float(t), "mass": rec.mass, "kinetic": rec.kinetic, "potV": rec.potential_energy,
            "P": rec.P, "E": rec.energy, "E0": rec.energy0, "lambda_norm": rec.lambda_norm,
            "M_a": morawetz_action(u, self.weight),
            "grad_norm": math.sqrt(rec.kinetic),
            "theorem_monitor": rec.P * rec.mass**self.sigma_c,
        }
        mass_prof = P_prof = None
        if self.config.shells:
            mass_prof = g.shell_cumsum(a2)
            P_prof = g.shell_cumsum(phi * m.density(u)) if phi is not None else np.zeros_like(mass_prof)
            radii = g.shells[0]
            lms = [profile_value(radii, mass_prof, R) for R in self.config.R_local]
        else:
            lms = [local_mass(u, R, g) for R in self.config.R_local]
        row["local_mass_R"] = lms[0]
        for R, v in zip(self.config.R_local[1:], lms[1:]):
            row[f"local_mass_R{R:g}"] = v
        if self.config.terms:
            tb = morawetz_rhs(m, u, self.V, self.weight, phi=phi)
            row.update(zip(TERM_NAMES, [tb.a, tb.b, tb.c, tb.d, tb.e, tb.total]))
        row["classifier_flags"] = self._flags(series, row)
        series.append(row, mass_prof, P_prof)
        return rec

    def _flags(self, series, row):
        flags = []
        if self.thresholds is not None:
            ok = row["theorem_monitor"] < self.thresholds.mass_P * (1 - BELOW_RTOL)
            flags.append("theorem_held" if ok else "theorem_violated")
        if len(series):
            g0 = series.columns["grad_norm"][0]
            if g0 > 0 and row["grad_norm"] >= 2 * g0:
                flags.append("gradient_growth")
        return "|".join(flags)


# ---------------------------------------------------------------------------------
# coercivity


@dataclass
class CoercivityReport:
    applicable: bool
    delta: float
    delta_prime: float
    threshold_margin: float
    lhs: float
    rhs: float
    holds: bool
    cutoff: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def delta_prime(params: ProblemParams, delta: float) -> float:
    B, p = params.B, params.p
    return B / (2 * p) * ((1 - delta) ** (-(B - 2) / B) - 1)


def coercivity_check(model: HartreeModel, u: np.ndarray, gs, delta: float | None = None,
                     radii=(2.0, 4.0, 8.0), rtol: float = 1e-12) -> CoercivityReport:
    """Check ``||grad u||^2 - (B/2p) P(u) >= delta' P(u)`` below the ground-state threshold.

    ``delta=None`` uses half of the measured margin ``1 - P(u)M(u)^s / (P(Q)M(Q)^s)``;
    at the full margin the inequality is an identity for multiples of Q.
    The cutoff variant repeats the check for ``chi_R u`` and records the two
    monotonicity facts ``||chi_R u|| <= ||u||`` and ``P(chi_R u) <= P(u)``.
    """
    params, g = model.params, model.grid
    sc = params.sigma_c
    thr = gs.P_Q * gs.mass_Q**sc

    def one(v):
        mass = g.integrate(np.abs(v) ** 2)
        P = model.P(v)
        kin = g.kinetic(v)
        return mass, P, kin

    mass, P, kin = one(u)
    margin = 1 - P * mass**sc / thr
    if delta is None:
        delta = 0.5 * margin
    applicable = bool(P * mass**sc <= (1 - delta) * thr) and 0 <= delta < 1
    dp = delta_prime(params, delta) if 0 <= delta < 1 else float("nan")
    B, p = params.B, params.p

    def inequality(kin, P):
        lhs = kin - B / (2 * p) * P
        rhs = dp * P
        return lhs, rhs, bool(lhs >= rhs - rtol * max(abs(kin), abs(P)))

    lhs, rhs, holds = inequality(kin, P)
    cut = []
    for R in radii:
        chi = Cutoff(g, R).chi
        mc, Pc, kc = one(chi * u)
        l2, r2_, h2 = inequality(kc, Pc)
        cut.append({
            "R": float(R), "mass_ratio": mc / mass if mass else 0.0,
            "P_ratio": Pc / P if P else 0.0,
            "mass_monotone": bool(mc <= mass * (1 + rtol)),
            "P_monotone": bool(Pc <= P * (1 + rtol) + rtol),
            "below_threshold": bool(Pc * mc**sc <= (1 - delta) * thr),
            "lhs": l2, "rhs": r2_, "holds": h2,
        })
    return CoercivityReport(applicable, float(delta), dp, margin, lhs, rhs, holds and applicable, cut)


# ---------------------------------------------------------------------------------
# classifier


@dataclass
class ClassifierVerdict:
    below_mass_energy: bool
    mass_energy_margin: float
    below_gradient: bool
    gradient_margin: float
    theorem_condition_held: bool
    theorem_margin: float
    evacuation_trend: str
    evacuation_slope: float
    blowup_flag: bool
    blowup_t: float | None = None
    last_finite_t: float | None = None

    def to_dict(self):
        return asdict(self)

    def summary(self) -> str:
        yn = lambda b: "yes" if b else "no"
        return "\n".join([
            f"below mass-energy threshold : {yn(self.below_mass_energy)} (margin {self.mass_energy_margin:.6g})",
            f"below gradient threshold    : {yn(self.below_gradient)} (margin {self.gradient_margin:.6g})",
            f"sup_t P M^sigma_c below P(Q)M(Q)^sigma_c : {yn(self.theorem_condition_held)} (margin {self.theorem_margin:.6g})",
            f"local-mass trend            : {self.evacuation_trend} (slope {self.evacuation_slope:.4g} per unit time)",
            f"blow-up flag                : {yn(self.blowup_flag)}"
            + (f" (t = {self.blowup_t:.6g})" if self.blowup_t is not None else ""),
        ])


def trend(t: np.ndarray, y: np.ndarray, floor: float = 1e-300, threshold: float = 1e-2):
    """Least-squares slope of ``log(y + floor)`` over the last half of the samples."""
    if len(t) < 2:
        return "flat", 0.0
    k = len(t) // 2 if len(t) >= 6 else 0
    tt, yy = t[k:], np.log(np.asarray(y[k:]) + floor)
    if np.ptp(tt) == 0:
        return "flat", 0.0
    slope = float(np.polyfit(tt, yy, 1)[0])
    if slope < -threshold:
        return "decaying", slope
    if slope > threshold:
        return "growing", slope
    return "flat", slope


def _below(val, thr):
    return bool(val < thr - BELOW_RTOL * abs(thr)), float(thr - val)


def classify(series: DiagnosticsSeries, gs, params: ProblemParams) -> ClassifierVerdict:
    """Threshold verdicts for the initial datum plus trend and blow-up flags along the run.

    ``gs`` is a GroundState or ThresholdConstants.
    """
    if series is None or len(series) == 0:
        raise EmptySeries("cannot classify an empty series")
    from .ground_state import ThresholdConstants, constants

    th = gs if isinstance(gs, ThresholdConstants) else constants(gs, params)
    sc = params.sigma_c
    m0 = series.array("mass")[0]
    E = series.array("E")[0]
    lam = series.array("lambda_norm")[0]
    below_me, me_margin = _below(m0**sc * E, th.mass_energy)
    below_g, g_margin = _below(math.sqrt(m0) ** sc * lam, th.mass_gradient)
    mon = series.array("theorem_monitor") if "theorem_monitor" in series.columns else \
        series.array("P") * series.array("mass") ** sc
    held, th_margin = _below(float(np.max(mon)), th.mass_P)
    floor = 1e-14 * max(m0, 1e-300)
    tr, slope = trend(series.t, series.array("local_mass_R"), floor)
    kin = series.array("kinetic")
    blow = bool(series.blowup_flag or series.nonfinite_t is not None
                or (kin[0] > 0 and np.max(kin) >= 4 * kin[0]))
    bt = series.blowup_t
    if blow and bt is None and kin[0] > 0 and np.any(kin >= 4 * kin[0]):
        bt = float(series.t[np.argmax(kin >= 4 * kin[0])])
    if bt is None and series.nonfinite_t is not None:
        bt = series.nonfinite_t
    return ClassifierVerdict(below_me, me_margin, below_g, g_margin, held, th_margin,
                             tr, slope, blow, bt, series.last_finite_t)


def averaged_morawetz(series: DiagnosticsSeries, R: float, T: float) -> float:
    """``(1/T) int_0^T int_{|x|<R} Phi F dx dt`` by the trapezoid rule over stored samples."""
    if not series.P_profiles:
        raise InsufficientSamples("series carries no shell profiles")
    t = series.t
    if len(t) < 2 or t[0] > 1e-12 or t[-1] < T * (1 - 1e-9):
        raise InsufficientSamples(f"series must span [0, {T}] with at least two samples")
    vals = np.array([profile_value(series.radii, prof, R) for prof in series.P_profiles])
    keep = t <= T
    tt, vv = t[keep], vals[keep]
    if tt[-1] < T and len(tt) == len(t):
        tt[-1] = T            # last sample within roundoff of T
    elif tt[-1] < T:
        j = int(np.searchsorted(t, T))
        w = (T - t[j - 1]) / (t[j] - t[j - 1])
        tt = np.append(tt, T)
        vv = np.append(vv, (1 - w) * vals[j - 1] + w * vals[j])
    if T <= 0:
        return float(vv[0])
    return float(np.trapezoid(vv, tt) / T)
