"""Command-line entry point: ``kortmix check-params | audit | simulate``.

Every command writes NDJSON records (one JSON object per line). Each record
has a ``record`` type tag, the configuration ``digest`` and a ``tampered``
flag that is true only when ``--mutate`` was used. Exit codes are 0 on
success, 1 on configuration errors, 2 on a thermodynamic violation and 3
when the solver aborts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import audit as au
from . import solver1d as sv
from .config import CONFIG_ENV, ConfigError, RunConfig, apply_mutations, parse_config
from .material import DomainError, check_admissibility

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_UNSTABLE = 0, 1, 2, 3


class _Output:
    """Single writer for NDJSON records; stdout plus an optional file."""

    def __init__(self, digest: str, mutations: dict, stream=None):
        self.digest = digest
        self.mutations = mutations
        self.stream = stream if stream is not None else sys.stdout

    def record(self, kind: str, payload: dict) -> dict:
        rec = {"record": kind, "digest": self.digest, "tampered": bool(self.mutations)}
        if self.mutations:
            rec["mutations"] = dict(sorted(self.mutations.items()))
        rec.update(payload)
        return rec

    @staticmethod
    def dumps(rec: dict) -> str:
        return json.dumps(rec, sort_keys=False, allow_nan=True)

    def emit(self, kind: str, payload: dict, fh=None) -> None:
        line = self.dumps(self.record(kind, payload))
        (fh or self.stream).write(line + "\n")


def _parse_mutation(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected K=V, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value for {key.strip()!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help=f"TOML configuration ('-' for stdin; default: ${CONFIG_ENV} or built-ins)")
    common.add_argument("--seed", type=int, help="override audit.seed")
    common.add_argument("--samples", type=int, metavar="N", help="override audit.n_samples")
    common.add_argument("--out", metavar="DIR", help="write outputs under DIR (overrides output.dir)")
    common.add_argument("--dump-samples", action="store_true",
                        help="audit: also emit one NDJSON record per sample")
    common.add_argument("--mutate", action="append", default=[], type=_parse_mutation, metavar="K=V",
                        help="fault injection: tamper with a material key or tauN after validation")
    parser = argparse.ArgumentParser(prog="kortmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-params", parents=[common], help="check thermodynamic admissibility")
    sub.add_parser("audit", parents=[common], help="verify the entropy-production identity")
    sub.add_parser("simulate", parents=[common], help="run the periodic 1-D solver")
    return parser


def _effective_config(args) -> RunConfig:
    cfg = parse_config(args.config, thermodynamic=args.command != "check-params")
    audit = cfg.audit
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be in [0, 2^64)")
        audit = dataclasses.replace(audit, seed=args.seed)
    if args.samples is not None:
        if args.samples < 0:
            raise ConfigError("--samples must be ≥ 0")
        audit = dataclasses.replace(audit, n_samples=args.samples)
    output = cfg.output
    if args.out is not None:
        output = dataclasses.replace(output, dir=args.out)
    return dataclasses.replace(cfg, audit=audit, output=output)


def _out_dir(cfg: RunConfig) -> Path | None:
    if not cfg.output.dir:
        return None
    path = Path(cfg.output.dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- commands ---------------------------------------------------------------------


def cmd_check_params(cfg: RunConfig, params, out: _Output) -> int:
    a = cfg.admissibility
    rep = check_admissibility(params, n_rho=a.n_rho, n_c=a.n_c, eps_range=(a.eps_min, a.eps_max),
                              n_eps=a.n_eps)
    payload = {"passed": rep.passed, "failing": rep.failing(),
               "conditions": [c.to_dict() for c in rep.conditions]}
    _write_report(cfg, out, "admissibility", payload)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_audit(cfg: RunConfig, params, out: _Output, dump_samples: bool = False) -> int:
    a = cfg.audit
    try:
        identity = au.run_identity_audit(
            params, n_samples=a.n_samples, seed=a.seed, ranges=a.ranges,
            tol_identity=a.tol_identity, tol_sign=a.tol_sign, tol_invariance=a.tol_invariance,
            keep_samples=dump_samples)
        checks = (au.check_flux_locality(params, n_samples=a.flux_samples, seed=a.seed)
                  + au.check_multiplier_consistency(params, n_samples=a.multiplier_samples,
                                                    seed=a.seed, h=a.fd_step, ranges=a.ranges)
                  + au.check_tau_consistency(params, n=a.tau_grid, ranges=a.ranges, h=a.fd_step)
                  + [au.check_concavity_grid(params, n_rho=cfg.admissibility.n_rho,
                                             n_c=cfg.admissibility.n_c)])
    except DomainError as exc:
        _write_report(cfg, out, "audit", {"passed": False, "error": f"domain error: {exc}"})
        return EXIT_VIOLATION
    passed = identity.passed and all(c.passed for c in checks)
    payload = {"passed": passed, "identity": identity.to_dict(),
               "checks": [c.to_dict() for c in checks]}
    _write_report(cfg, out, "audit", payload)
    if dump_samples:
        d = _out_dir(cfg)
        fh = open(d / cfg.output.samples, "w", encoding="utf-8") if d else None
        try:
            for s in identity.samples:
                out.emit("sample", s, fh)
        finally:
            if fh is not None:
                fh.close()
    return EXIT_OK if passed else EXIT_VIOLATION


def write_snapshot(path: Path, grid: sv.Grid1D, params, order: int) -> None:
    _, theta, sigma = sv.node_fields(grid, params, order)
    table = np.column_stack([grid.x, grid.rho, grid.c, grid.v, grid.eps, theta, sigma])
    np.savetxt(path, table, delimiter=",", header="x,rho,c,v,eps,theta,sigma", comments="",
               fmt="%.17g")


def cmd_simulate(cfg: RunConfig, params, out: _Output) -> int:
    settings = cfg.solver
    d = _out_dir(cfg)
    diag = open(d / cfg.output.diagnostics, "w", encoding="utf-8") if d else None

    def on_record(rec: sv.DiagnosticsRecord):
        out.emit("diagnostics", rec.to_dict(), diag)

    def on_snapshot(step: int, t: float, grid: sv.Grid1D):
        if d is not None:
            write_snapshot(d / f"{cfg.output.snapshot_prefix}_{step:07d}.csv", grid, params,
                           settings.order)

    try:
        result = sv.run(settings, params, on_record=on_record, on_snapshot=on_snapshot)
    except sv.SolverAbort as exc:
        payload = {"passed": False, "error": str(exc), "t": exc.t, "step": exc.step}
        if d is not None and exc.grid is not None:
            state = d / f"{cfg.output.snapshot_prefix}_abort.csv"
            table = np.column_stack([exc.grid.x, exc.grid.rho, exc.grid.c, exc.grid.v, exc.grid.eps])
            np.savetxt(state, table, delimiter=",", header="x,rho,c,v,eps", comments="", fmt="%.17g")
            payload["last_good_state"] = state.name
        _write_report(cfg, out, "abort", payload)
        return EXIT_UNSTABLE
    finally:
        if diag is not None:
            diag.close()
    first, last = result.records[0], result.records[-1]
    drift = {k: abs(getattr(last, k) - getattr(first, k)) / max(1.0, abs(getattr(first, k)))
             for k in ("M", "Mc", "P", "E")}
    payload = {"passed": True, "t": result.t, "steps": result.steps, "drift": drift,
               "entropy_gain": last.S - first.S, "min_entropy_change": result.min_entropy_change,
               "min_sigma": min(r.min_sigma for r in result.records)}
    _write_report(cfg, out, "summary", payload)
    return EXIT_OK


def _write_report(cfg: RunConfig, out: _Output, kind: str, payload: dict) -> None:
    out.emit(kind, payload)
    d = _out_dir(cfg)
    if d is not None:
        with open(d / cfg.output.report, "w", encoding="utf-8") as fh:
            out.emit(kind, payload, fh)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        params = apply_mutations(cfg.material, dict(args.mutate))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _Output(cfg.digest(), dict(args.mutate))
    if args.command == "check-params":
        return cmd_check_params(cfg, params, out)
    if args.command == "audit":
        return cmd_audit(cfg, params, out, dump_samples=args.dump_samples)
    return cmd_simulate(cfg, params, out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
