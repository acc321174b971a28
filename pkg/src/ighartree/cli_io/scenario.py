"""Scenario files: a flat ``section.key = value`` text format.

Lines are ``key = value``; ``#`` starts a comment. A line ``[section]`` sets a
prefix for the keys that follow, so ``[grid]`` then ``n = 64`` equals
``grid.n = 64``. Lists are comma separated. Every key and its default is in
:data:`DEFAULTS`; unknown keys are rejected.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..diagnostics import DiagnosticConfig
from ..errors import ParseError, RangeViolation, ValidationError
from ..evolve import EvolveConfig
from ..params import ProblemParams, derive

OUTPUT_ROOT_ENV = "IGHARTREE_OUTPUT_ROOT"

# key -> (type, default); a default of None means "required"
DEFAULTS = {
    "params.gamma": (float, None),
    "params.b": (float, None),
    "params.p": (float, None),
    "grid.n": (int, None),
    "grid.L": (float, None),
    "grid.offset": (bool, True),
    "model.riesz_mode": (str, "free"),
    "model.eps_reg": (float, 0.0),
    "model.oversample": (float, 1.0),
    "potential.kind": (str, "none"),          # none | gaussian | file
    "potential.c": (float, 1.0),
    "potential.width": (float, 1.0),
    "potential.path": (str, ""),
    "data.kind": (str, "gaussian"),           # gaussian | groundstate_scaled | file
    "data.amplitude": (float, 1.0),
    "data.width": (float, 1.0),
    "data.c": (float, 0.5),
    "data.path": (str, ""),
    "evolve.dt": (float, 1e-3),
    "evolve.t_end": (float, 1.0),
    "evolve.snapshot_stride": (int, 0),
    "evolve.diagnostic_stride": (int, 10),
    "evolve.adaptive": (bool, False),
    "evolve.dt_safety": (float, 0.5),
    "evolve.stop_on_blowup": (bool, False),
    "diagnostics.R_local": (list, [5.0]),
    "diagnostics.virial_R": (float, 4.0),
    "diagnostics.terms": (bool, False),
    "diagnostics.shells": (bool, True),
    "ground_state.mode": (str, "auto"),       # auto | always | never
    "ground_state.n": (int, 0),               # 0: same grid as the run
    "ground_state.L": (float, 0.0),
    "ground_state.tolerance": (float, 1e-10),
    "ground_state.max_iter": (int, 2000),
    "ground_state.oversample": (float, 1.5),
    "ground_state.constants": (str, ""),      # reuse a constants.json instead of solving
    "output.dir": (str, ""),
}

CHOICES = {
    "model.riesz_mode": ("free", "periodic"),
    "potential.kind": ("none", "gaussian", "file"),
    "data.kind": ("gaussian", "groundstate_scaled", "file"),
    "ground_state.mode": ("auto", "always", "never"),
}


def _convert(key, kind, raw, line):
    try:
        if kind is bool:
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is list:
            return [float(x) for x in raw.split(",") if x.strip()]
        if kind is int:
            f = float(raw)
            if f != int(f):
                raise ValueError(raw)
            return int(f)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ParseError(line, f"{key}: cannot read {raw.strip()!r} as {kind.__name__}") from None


@dataclass
class Scenario:
    values: dict
    source: str = "<string>"
    base_dir: Path = field(default_factory=Path.cwd)
    params: ProblemParams = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def name(self) -> str:
        return Path(self.source).stem if self.source != "<string>" else "scenario"

    def evolve_config(self) -> EvolveConfig:
        v = self.values
        return EvolveConfig(dt=v["evolve.dt"], t_end=v["evolve.t_end"],
                            snapshot_stride=v["evolve.snapshot_stride"],
                            diagnostic_stride=v["evolve.diagnostic_stride"],
                            adaptive=v["evolve.adaptive"], dt_safety=v["evolve.dt_safety"],
                            stop_on_blowup=v["evolve.stop_on_blowup"])

    def diagnostic_config(self) -> DiagnosticConfig:
        v = self.values
        return DiagnosticConfig(tuple(v["diagnostics.R_local"]), v["diagnostics.virial_R"],
                                v["diagnostics.terms"], v["diagnostics.shells"])

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def output_dir(self, override=None) -> Path:
        if override:
            return Path(override)
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        d = self.values["output.dir"] or self.name
        return Path(d) if Path(d).is_absolute() else root / d

    def echo(self) -> str:
        """The full scenario, defaults included, in the input format."""
        out = []
        for k in DEFAULTS:
            v = self.values[k]
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, list):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{k} = {v}")
        return "\n".join(out) + "\n"

    def to_dict(self) -> dict:
        return dict(self.values)


def parse_scenario(text: str, source: str = "<string>", base_dir=None) -> Scenario:
    values = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ParseError(no, "empty section name")
            continue
        if "=" not in line:
            raise ParseError(no, f"expected 'key = value', got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        key = f"{section}.{k}" if section and "." not in k else k
        if key not in DEFAULTS:
            raise ParseError(no, f"unknown key {key!r}")
        if key in values:
            raise ParseError(no, f"duplicate key {key!r}")
        values[key] = _convert(key, DEFAULTS[key][0], v, no)
    for k, (_, d) in DEFAULTS.items():
        if k not in values:
            if d is None:
                raise ValidationError(k, "required key is missing")
            values[k] = list(d) if isinstance(d, list) else d
    sc = Scenario(values, source, Path(base_dir) if base_dir else Path.cwd())
    validate(sc)
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path), path.parent)


def validate(sc: Scenario):
    """Module-level validation of every numeric field before anything runs."""
    v = sc.values
    try:
        sc.params = derive(v["params.gamma"], v["params.b"], v["params.p"])
    except RangeViolation as e:
        raise ValidationError("params", "outside the intercritical window: " + "; ".join(e.violations)) from None
    for key, allowed in CHOICES.items():
        if v[key] not in allowed:
            raise ValidationError(key, f"must be one of {', '.join(allowed)}")
    n = v["grid.n"]
    if n < 8 or n & (n - 1):
        raise ValidationError("grid.n", "must be a power of two >= 8")
    for key in ("grid.L", "diagnostics.virial_R"):
        if not (v[key] > 0 and math.isfinite(v[key])):
            raise ValidationError(key, "must be positive and finite")
    if not v["diagnostics.R_local"] or min(v["diagnostics.R_local"]) <= 0:
        raise ValidationError("diagnostics.R_local", "needs at least one positive radius")
    if v["model.oversample"] < 1 or v["ground_state.oversample"] < 1:
        raise ValidationError("oversample", "must be >= 1")
    if v["model.eps_reg"] < 0:
        raise ValidationError("model.eps_reg", "must be >= 0")
    if v["model.eps_reg"] == 0 and not v["grid.offset"]:
        raise ValidationError("grid.offset", "eps_reg = 0 needs the offset grid")
    if v["data.width"] <= 0 or v["potential.width"] <= 0:
        raise ValidationError("width", "must be positive")
    gn, gL = v["ground_state.n"], v["ground_state.L"]
    if gn and (gn < 8 or gn & (gn - 1)):
        raise ValidationError("ground_state.n", "must be 0 or a power of two >= 8")
    if gL < 0:
        raise ValidationError("ground_state.L", "must be >= 0")
    if v["data.kind"] == "groundstate_scaled":
        if v["ground_state.mode"] == "never":
            raise ValidationError("ground_state.mode", "groundstate_scaled data needs the ground state")
        if (gn and gn != n) or (gL and gL != v["grid.L"]) or v["ground_state.constants"]:
            raise ValidationError("data.kind", "groundstate_scaled data needs the ground state on the run grid")
    try:
        sc.evolve_config()
        sc.diagnostic_config()
    except ValueError as e:
        raise ValidationError("evolve", str(e)) from None
    for key, needed in (("potential.path", v["potential.kind"] == "file"),
                        ("data.path", v["data.kind"] == "file"),
                        ("ground_state.constants", bool(v["ground_state.constants"]))):
        if needed:
            if not v[key]:
                raise ValidationError(key, "a path is required")
            if not sc.resolve(v[key]).is_file():
                raise ValidationError(key, f"file not found: {sc.resolve(v[key])}")
