"""Strang split-step time integration of the Hartree equation with an external potential."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .diagnostics import DiagnosticConfig, DiagnosticsSeries, Recorder
from .errors import NonFinite
from .functionals import FunctionalRecord, HartreeModel, Potential

log = logging.getLogger(__name__)


@dataclass
class EvolveConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    snapshot_stride: int = 0          # 0 disables snapshots
    diagnostic_stride: int = 1
    adaptive: bool = False
    dt_safety: float = 0.5
    stop_on_blowup: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be >= 0")
        if self.snapshot_stride < 0 or self.diagnostic_stride < 1:
            raise ValueError("snapshot_stride must be >= 0 and diagnostic_stride >= 1")
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")


@dataclass
class SimState:
    t: float
    u: np.ndarray
    record: Optional[FunctionalRecord] = None
    step_count: int = 0


class _Propagator:
    """Caches the half-step kinetic factor for the last dt used."""

    def __init__(self, model: HartreeModel, V: Potential | None):
        self.model = model
        self.grid = model.grid
        self.V = None if V is None or V.is_zero else V.samples
        self._dt = None
        self._half = None

    def half_kinetic(self, dt):
        if dt != self._dt:
            self._half = np.exp(-0.5j * dt * self.grid.k2)
            self._dt = dt
        return self._half

    def __call__(self, u: np.ndarray, dt: float):
        g = self.grid
        half = self.half_kinetic(dt)
        v = g.ifft(half * g.fft(u))
        G = self.model.phase_potential(v)
        phase = -G if self.V is None else self.V - G
        v = v * np.exp(-1j * dt * phase)
        return g.ifft(half * g.fft(v)), G


def step(model: HartreeModel, state: SimState, V: Potential | None, dt: float) -> SimState:
    """One Strang step: half kinetic, exact phase rotation by ``V - G``, half kinetic.

    ``G`` is frozen at the entry of the phase substep, which is exact since the
    rotation leaves ``|u|`` unchanged. A negative ``dt`` steps backwards and
    undoes a forward step up to roundoff. ``record`` is carried over unchanged.
    """
    if dt == 0 or not math.isfinite(dt):
        raise ValueError("dt must be finite and nonzero")
    u, _ = _Propagator(model, V)(np.asarray(state.u, dtype=complex), dt)
    t = state.t + dt
    if not np.all(np.isfinite(u)):
        raise NonFinite(t, state.t)
    return SimState(t, u, state.record, state.step_count + 1)


Monitor = Callable[[SimState, DiagnosticsSeries], None]
SnapshotSink = Callable[[SimState, HartreeModel], None]


def run(model: HartreeModel, u0: np.ndarray, V: Potential | None, config: EvolveConfig,
        monitors: list | tuple = (), snapshot_sink: SnapshotSink | None = None,
        diagnostics: DiagnosticConfig | None = None, thresholds=None,
        recorder: Recorder | None = None) -> DiagnosticsSeries:
    """Integrate from ``t = 0`` to ``config.t_end``.

    Diagnostics are sampled at ``t = 0``, every ``diagnostic_stride`` steps and
    at the final time. ``monitors`` are called after each sample with the state
    and the series. ``snapshot_sink`` receives the state every
    ``snapshot_stride`` steps and at the end. A NaN/Inf raises
    :class:`NonFinite` with the partial series attached.
    """
    grid = model.grid
    grid.check(u0)
    rec = recorder or Recorder(model, V, diagnostics, thresholds)
    series = rec.new_series()
    series.meta["dt"] = config.dt
    series.add_column("dt")
    prop = _Propagator(model, V)
    state = SimState(0.0, np.asarray(u0, dtype=complex).copy(), None, 0)

    def sample(st, dt_used):
        ro = replace(st, u=st.u.view())
        ro.u.flags.writeable = False
        st.record = rec.sample(series, st.t, st.u)
        series.columns["dt"][-1] = dt_used
        for m in monitors:
            m(ro, series)
        if kin0 is not None and kin0 > 0 and st.record.kinetic >= 4 * kin0 and not series.blowup_flag:
            series.blowup_flag = True
            series.blowup_t = st.t
        series.last_finite_t = st.t

    kin0 = None
    sample(state, config.dt)
    kin0 = state.record.kinetic
    if snapshot_sink and config.snapshot_stride:
        snapshot_sink(state, model)

    dt = config.dt
    G_prev = None
    eps = 1e-12 * max(config.t_end, 1.0)
    last_sampled = True
    while state.t < config.t_end - eps:
        h = min(dt, config.t_end - state.t)
        u, G = prop(state.u, h)
        t = state.t + h
        if not np.all(np.isfinite(u)):
            series.nonfinite_t = t
            series.blowup_flag = True
            if series.blowup_t is None:
                series.blowup_t = t
            raise NonFinite(t, series.last_finite_t, series)
        state = SimState(t, u, None, state.step_count + 1)
        last_sampled = False
        if state.step_count % config.diagnostic_stride == 0:
            sample(state, h)
            last_sampled = True
        if snapshot_sink and config.snapshot_stride and state.step_count % config.snapshot_stride == 0:
            snapshot_sink(state, model)
        if config.stop_on_blowup and series.blowup_flag:
            log.info("gradient doubled at t=%.4g; stopping", series.blowup_t)
            break
        if config.adaptive:
            if G_prev is not None:
                dG = float(np.max(np.abs(G - G_prev)))
                dt = min(config.dt, config.dt_safety / dG) if dG > 0 else config.dt
            G_prev = G
    if not last_sampled:
        sample(state, h)
    if snapshot_sink and config.snapshot_stride and state.step_count % config.snapshot_stride:
        snapshot_sink(state, model)
    series.meta["final_state"] = state
    return series


def free_gaussian(grid, t: float, width: float = 1.0) -> np.ndarray:
    """Exact free Schrodinger evolution of ``exp(-|x|^2 / (2 width^2))`` in the whole space."""
    z = width**2 + 2j * t
    return (width**2 / z) ** 1.5 * np.exp(-grid.r2 / (2 * z))


def final_state(series: DiagnosticsSeries) -> SimState:
    return series.meta["final_state"]


def energy_drift(series: DiagnosticsSeries) -> float:
    E = series.array("E")
    scale = max(abs(E[0]), 1e-300)
    return float(np.max(np.abs(E - E[0])) / scale)


def mass_drift(series: DiagnosticsSeries) -> float:
    M = series.array("mass")
    return float(np.max(np.abs(M - M[0])) / max(M[0], 1e-300))
