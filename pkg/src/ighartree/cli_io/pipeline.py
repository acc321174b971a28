"""Scenario execution: ground state, evolution, diagnostics, classification, manifest."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..diagnostics import DiagnosticsSeries, classify, trend
from ..errors import HartreeError, NonFinite, ValidationError
from ..evolve import run
from ..functionals import HartreeModel, Potential
from ..ground_state import GroundState, SolverOptions, ThresholdConstants, constants, solve
from ..spectral import GridSpec
from .scenario import Scenario
from .snapshot import read_snapshot, write_snapshot, write_state

log = logging.getLogger(__name__)

CSV_FORMAT_VERSION = 1
BOUNDARY_MASS_LIMIT = 1e-10


@dataclass
class RunManifest:
    scenario: dict
    scenario_source: str
    software_version: str
    csv_format_version: int
    csv_columns: list
    params: dict
    status: str                    # "ok" | "nonfinite"
    last_finite_t: float | None
    blowup_flag: bool
    evacuation_trend: str
    evacuation_slope: float
    thresholds: dict | None = None
    ground_state: dict | None = None
    verdict: dict | None = None
    warnings: list = field(default_factory=list)
    wall_clock: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    output_dir: str = ""

    @property
    def exit_code(self) -> int:
        return 2 if self.status == "nonfinite" else 0

    def to_dict(self):
        return asdict(self)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json_atomic(path, obj):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    os.replace(tmp, path)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def boundary_mass_fraction(grid: GridSpec, u) -> float:
    """Share of the mass in the outermost two node layers of the box."""
    a2 = np.abs(u) ** 2
    tot = a2.sum()
    if tot == 0:
        return 0.0
    edge = np.abs(grid.x) > grid.L / 2 - 2 * grid.h
    mask = np.zeros(grid.shape, bool)
    mask[edge, :, :] = True
    mask[:, edge, :] = True
    mask[:, :, edge] = True
    return float(a2[mask].sum() / tot)


def build_potential(sc: Scenario, grid: GridSpec) -> Potential | None:
    kind = sc["potential.kind"]
    if kind == "none":
        return None
    if kind == "gaussian":
        return Potential.gaussian(grid, sc["potential.c"], sc["potential.width"])
    arr = np.load(sc.resolve(sc["potential.path"]))
    if arr.shape != grid.shape:
        raise ValidationError("potential.path", f"array shape {arr.shape} does not match grid {grid.shape}")
    return Potential.from_samples(grid, arr, name=sc["potential.path"])


def build_initial_data(sc: Scenario, grid: GridSpec, gs: GroundState | None) -> np.ndarray:
    kind = sc["data.kind"]
    if kind == "gaussian":
        return sc["data.amplitude"] * np.exp(-grid.r2 / (2 * sc["data.width"] ** 2)) + 0j
    if kind == "groundstate_scaled":
        return sc["data.c"] * gs.Q + 0j
    path = sc.resolve(sc["data.path"])
    u = np.load(path) if path.suffix == ".npy" else read_snapshot(path)
    if u.shape != grid.shape:
        raise ValidationError("data.path", f"field shape {u.shape} does not match grid {grid.shape}")
    return np.asarray(u, dtype=complex)


def constants_record(gs: GroundState, th: ThresholdConstants | None, params, grid) -> dict:
    return {"params": params.to_dict(), "grid": {"n": grid.n, "L": grid.L, "offset": grid.offset},
            "ground_state": gs.summary(), "thresholds": th.to_dict() if th else None}


def load_constants(path) -> tuple[dict, ThresholdConstants]:
    rec = json.loads(Path(path).read_text())
    if not rec.get("thresholds"):
        raise ValidationError("ground_state.constants", "file holds no threshold constants")
    return rec, ThresholdConstants(**rec["thresholds"])


def solve_ground_state(sc: Scenario, run_grid: GridSpec):
    n = sc["ground_state.n"] or run_grid.n
    L = sc["ground_state.L"] or run_grid.L
    grid = GridSpec(n, L, run_grid.offset)
    opts = SolverOptions(tolerance=sc["ground_state.tolerance"], max_iter=sc["ground_state.max_iter"],
                         riesz_mode=sc["model.riesz_mode"], eps_reg=sc["model.eps_reg"],
                         oversample=sc["ground_state.oversample"])
    gs = solve(sc.params, grid, opts)
    th = constants(gs, sc.params) if gs.converged else None
    return gs, th


def run_pipeline(sc: Scenario, out_dir=None) -> RunManifest:
    """Run one scenario end to end and write its artifacts and ``manifest.json``."""
    try:
        return _run(sc, out_dir)
    except HartreeError as e:
        e.scenario = sc.source
        e.args = (f"[scenario {sc.source}] {e.args[0] if e.args else ''}",) + e.args[1:]
        raise


def _run(sc: Scenario, out_dir=None) -> RunManifest:
    t_start = time.time()
    started = datetime.now(timezone.utc).isoformat()
    out = sc.output_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = sc.params
    grid = GridSpec(sc["grid.n"], sc["grid.L"], sc["grid.offset"])
    model = HartreeModel(params, grid, sc["model.riesz_mode"], sc["model.eps_reg"],
                         oversample=sc["model.oversample"])
    V = build_potential(sc, grid)
    files = []
    warnings = []
    (out / "scenario.txt").write_text(sc.echo())
    files.append("scenario.txt")

    gs = th = None
    gs_info = None
    mode = sc["ground_state.mode"]
    if sc["ground_state.constants"]:
        rec, th = load_constants(sc.resolve(sc["ground_state.constants"]))
        if any(abs(rec["params"][k] - getattr(params, k)) > 1e-12 for k in ("gamma", "b", "p")):
            raise ValidationError("ground_state.constants", "constants were computed for other parameters")
        gs_info = rec.get("ground_state")
    elif mode != "never":
        gs, th = solve_ground_state(sc, grid)
        gs_info = gs.summary()
        write_snapshot(out / "ground_state.ighf", gs.Q, gs.grid.L, 0.0, params.b, params.gamma, params.p)
        write_json_atomic(out / "constants.json", constants_record(gs, th, params, gs.grid))
        files += ["ground_state.ighf", "constants.json"]
        if not gs.converged:
            warnings.append("ground state did not converge; threshold classification skipped")

    u0 = build_initial_data(sc, grid, gs)
    frac = boundary_mass_fraction(grid, u0)
    if frac > BOUNDARY_MASS_LIMIT:
        msg = f"initial mass fraction {frac:.3g} near the box boundary exceeds {BOUNDARY_MASS_LIMIT:g}; enlarge grid.L"
        log.warning(msg)
        warnings.append(msg)

    snap_dir = out / "snapshots"
    snaps = []

    def sink(state, m):
        snap_dir.mkdir(exist_ok=True)
        name = f"snapshots/u_{state.step_count:08d}.ighf"
        write_state(out / name, state, m)
        snaps.append(name)

    status = "ok"
    try:
        series = run(model, u0, V, sc.evolve_config(), snapshot_sink=sink,
                     diagnostics=sc.diagnostic_config(), thresholds=th)
    except NonFinite as e:
        series = e.series
        status = "nonfinite"
        warnings.append(str(e))
    files += snaps

    series.to_csv(out / "series.csv")
    files.append("series.csv")
    if series.radii is not None and series.mass_profiles:
        for name, arr in (("shell_radii.npy", series.radii), ("shell_mass.npy", np.array(series.mass_profiles)),
                          ("shell_P.npy", np.array(series.P_profiles))):
            np.save(out / name, arr)
            files.append(name)

    floor = 1e-14 * max(series.array("mass")[0], 1e-300)
    tr, slope = trend(series.t, series.array("local_mass_R"), floor)
    verdict = None
    if th is not None:
        verdict = classify(series, th, params).to_dict()
        write_json_atomic(out / "verdict.json", verdict)
        files.append("verdict.json")

    manifest = RunManifest(
        scenario=sc.to_dict(), scenario_source=sc.source, software_version=__version__,
        csv_format_version=CSV_FORMAT_VERSION, csv_columns=list(series.columns),
        params=params.to_dict(), status=status, last_finite_t=series.last_finite_t,
        blowup_flag=bool(series.blowup_flag), evacuation_trend=tr, evacuation_slope=slope,
        thresholds=th.to_dict() if th else None, ground_state=gs_info, verdict=verdict,
        warnings=warnings, output_dir=str(out),
    )
    manifest.wall_clock = {"started": started, "finished": datetime.now(timezone.utc).isoformat(),
                           "elapsed_s": time.time() - t_start}
    manifest.artifacts = [{"path": f, "sha256": sha256(out / f), "bytes": (out / f).stat().st_size}
                          for f in files]
    write_json_atomic(out / "manifest.json", manifest.to_dict())
    return manifest


def load_run(run_dir) -> tuple[dict, DiagnosticsSeries]:
    """Read back ``manifest.json`` and the series (with shell profiles when present)."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    series = DiagnosticsSeries.from_csv(run_dir / "series.csv")
    if (run_dir / "shell_radii.npy").exists():
        series.radii = np.load(run_dir / "shell_radii.npy")
        series.mass_profiles = list(np.load(run_dir / "shell_mass.npy"))
        series.P_profiles = list(np.load(run_dir / "shell_P.npy"))
    series.blowup_flag = bool(manifest.get("blowup_flag"))
    series.last_finite_t = manifest.get("last_finite_t")
    if manifest.get("status") == "nonfinite":
        series.nonfinite_t = manifest.get("last_finite_t")
    return manifest, series


def verify_manifest(run_dir) -> list:
    """Names of artifacts whose checksum no longer matches (empty list when intact)."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    return [a["path"] for a in manifest["artifacts"]
            if not (run_dir / a["path"]).is_file() or sha256(run_dir / a["path"]) != a["sha256"]]
