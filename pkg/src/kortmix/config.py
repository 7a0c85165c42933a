"""Run configuration: a TOML file with one table per block.

Every key is optional; an empty file yields the documented defaults. The
blocks and their keys are::

    [material]        every MaterialParams field (kappa1, ..., rho_max)
    [admissibility]   n_rho, n_c, n_eps, eps_min, eps_max
    [audit]           n_samples, seed, tol_identity, tol_sign, tol_invariance,
                      flux_samples, multiplier_samples, tau_grid, fd_step
    [audit.ranges]    rho, c, eps, v, deriv   (two-element [lo, hi] lists)
    [solver]          N, L, t_end, n_steps, order, safety, advective, viscous,
                      dispersive, diag_every, snapshot_every
    [solver.initial]  profile, amplitude, width, mode, rho0, c0, v0, eps0
    [output]          dir, report, diagnostics, samples, snapshot_prefix

Unknown tables or keys are rejected with the offending line number.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .audit import JetRanges
from .material import MaterialParams, ParameterError
from .solver1d import PROFILES, InitialCondition, SolverSettings, StepBounds

CONFIG_ENV = "KORTMIX_CONFIG"


class ConfigError(ValueError):
    """Malformed, unknown or out-of-range configuration entry."""


@dataclass(frozen=True)
class AdmissibilitySettings:
    n_rho: int = 512
    n_c: int = 33
    n_eps: int = 9
    eps_min: float = 0.5
    eps_max: float = 3.0


@dataclass(frozen=True)
class AuditSettings:
    n_samples: int = 1000
    seed: int = 42
    tol_identity: float = 1e-9
    tol_sign: float = 1e-12
    tol_invariance: float = 1e-9
    flux_samples: int = 32
    multiplier_samples: int = 64
    tau_grid: int = 10
    fd_step: float = 1e-5
    ranges: JetRanges = JetRanges()


@dataclass(frozen=True)
class OutputSettings:
    dir: str = ""
    report: str = "report.ndjson"
    diagnostics: str = "diagnostics.ndjson"
    samples: str = "samples.ndjson"
    snapshot_prefix: str = "snapshot"


@dataclass(frozen=True)
class RunConfig:
    material: MaterialParams = MaterialParams()
    admissibility: AdmissibilitySettings = AdmissibilitySettings()
    audit: AuditSettings = AuditSettings()
    solver: SolverSettings = SolverSettings()
    output: OutputSettings = OutputSettings()

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["material"] = self.material.to_dict()
        return out

    def digest(self) -> str:
        """Stable hash of the canonical (sorted, compact JSON) configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- schema -----------------------------------------------------------------------

_MATERIAL_KEYS = tuple(f.name for f in dataclasses.fields(MaterialParams) if f.name != "tau_override")
_BOUND_KEYS = tuple(f.name for f in dataclasses.fields(StepBounds))


def _fields(cls, skip=()):
    return {f.name: f.type for f in dataclasses.fields(cls) if f.name not in skip}


_SCHEMA: dict[str, Any] = {
    "material": {k: "float" for k in _MATERIAL_KEYS},
    "admissibility": _fields(AdmissibilitySettings),
    "audit": {**_fields(AuditSettings, ("ranges",)),
              "ranges": {k: "range" for k in _fields(JetRanges)}},
    "solver": {**_fields(SolverSettings, ("bounds", "initial")),
               **{k: "float" for k in _BOUND_KEYS},
               "initial": _fields(InitialCondition)},
    "output": _fields(OutputSettings),
}


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*(?:\"{re.escape(key)}\"|{re.escape(key)})\s*=", re.M)
    m = pattern.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, dotted: str) -> str:
    line = _line_of(text, dotted.rsplit(".", 1)[-1])
    return f"{dotted} (line {line})" if line else dotted


def _coerce(kind: str, value, where: str):
    if kind in ("int",) and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind == "float" and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind == "str" and isinstance(value, str):
        return value
    if kind == "range" and isinstance(value, list) and len(value) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        lo, hi = float(value[0]), float(value[1])
        if not lo < hi:
            raise ConfigError(f"{where}: range must satisfy lo < hi")
        return (lo, hi)
    expected = {"range": "[lo, hi] list of numbers"}.get(kind, kind)
    raise ConfigError(f"{where}: expected {expected}, got {value!r}")


def _walk(data: dict, schema: dict, prefix: str, text: str) -> dict:
    out = {}
    for key, value in data.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            raise ConfigError(f"unknown key {_where(text, dotted)}")
        kind = schema[key]
        if isinstance(kind, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{_where(text, dotted)}: expected a table")
            out[key] = _walk(value, kind, dotted, text)
        else:
            out[key] = _coerce(kind, value, _where(text, dotted))
    return out


# -- assembly -----------------------------------------------------------------------


def _build(tree: dict) -> RunConfig:
    mat = MaterialParams(**tree.get("material", {}))
    adm = AdmissibilitySettings(**tree.get("admissibility", {}))
    aud = dict(tree.get("audit", {}))
    ranges = JetRanges(**aud.pop("ranges", {}))
    audit = AuditSettings(ranges=ranges, **aud)
    sol = dict(tree.get("solver", {}))
    initial = InitialCondition(**sol.pop("initial", {}))
    bounds = StepBounds(**{k: sol.pop(k) for k in _BOUND_KEYS if k in sol})
    solver = SolverSettings(bounds=bounds, initial=initial, **sol)
    return RunConfig(mat, adm, audit, solver, OutputSettings(**tree.get("output", {})))


def _check_structure(cfg: RunConfig) -> list[str]:
    s, a, ad = cfg.solver, cfg.audit, cfg.admissibility
    checks = [
        (s.N >= 8, "solver.N ≥ 8"),
        (s.L > 0, "solver.L > 0"),
        (s.t_end >= 0, "solver.t_end ≥ 0"),
        (s.n_steps >= 0, "solver.n_steps ≥ 0"),
        (s.order in (2, 4), "solver.order in {2, 4}"),
        (s.diag_every >= 1, "solver.diag_every ≥ 1"),
        (s.snapshot_every >= 0, "solver.snapshot_every ≥ 0"),
        (all(getattr(s.bounds, k) > 0 for k in _BOUND_KEYS), "solver step-bound coefficients > 0"),
        (s.initial.profile in PROFILES, f"solver.initial.profile in {PROFILES}"),
        (s.initial.width > 0, "solver.initial.width > 0"),
        (a.n_samples >= 0, "audit.n_samples ≥ 0"),
        (0 <= a.seed < 2 ** 64, "0 ≤ audit.seed < 2^64"),
        (min(a.flux_samples, a.multiplier_samples) >= 1, "audit check sample counts ≥ 1"),
        (a.tau_grid >= 2, "audit.tau_grid ≥ 2"),
        (a.fd_step > 0, "audit.fd_step > 0"),
        (min(ad.n_rho, ad.n_c, ad.n_eps) >= 1, "admissibility grid sizes ≥ 1"),
        (0 < ad.eps_min <= ad.eps_max, "0 < admissibility.eps_min ≤ eps_max"),
    ]
    return [name for ok, name in checks if not ok]


def parse_config_text(text: str, thermodynamic: bool = True) -> RunConfig:
    """Parse and validate configuration text.

    With ``thermodynamic=False`` the material sign conditions are not
    enforced here, so that the admissibility check can report them itself.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    cfg = _build(_walk(data, _SCHEMA, "", text))
    problems = _check_structure(cfg)
    if problems:
        raise ConfigError("constraint violated: " + ", ".join(problems))
    try:
        cfg.material.validate(thermodynamic=thermodynamic)
    except ParameterError as exc:
        raise ConfigError(f"constraint {exc}") from exc
    return cfg


def parse_config(source=None, thermodynamic: bool = True) -> RunConfig:
    """Load a configuration from a path, ``"-"`` (stdin) or a text stream.

    ``None`` falls back to the path in ``$KORTMIX_CONFIG`` and then to the
    built-in defaults.
    """
    if source is None:
        source = os.environ.get(CONFIG_ENV) or None
    if source is None:
        text = ""
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        text = source.read()
    elif str(source) == "-":
        text = sys.stdin.read()
    else:
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc.strerror}") from exc
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config {source} is not valid UTF-8") from exc
    return parse_config_text(text, thermodynamic=thermodynamic)


# -- fault injection -------------------------------------------------------------

_TAU_KEY = re.compile(r"^tau(\d{1,2})$")


def apply_mutations(params: MaterialParams, mutations: dict[str, float]) -> MaterialParams:
    """Tamper with validated parameters, bypassing every check.

    Material field names replace the field; ``tauN`` keys that are not
    fields override the derived stress coefficient with index ``N``.
    """
    changes, override = {}, dict(params.tau_override)
    for key, value in mutations.items():
        m = _TAU_KEY.match(key)
        if key in _MATERIAL_KEYS:
            changes[key] = float(value)
        elif m and 0 <= int(m.group(1)) <= 12:
            override[int(m.group(1))] = float(value)
        else:
            raise ConfigError(f"cannot mutate unknown key {key!r}")
    return dataclasses.replace(params, tau_override=override, **changes)
