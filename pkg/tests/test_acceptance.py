"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line (visible even under
output capture) before asserting.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from kortmix import audit as au
from kortmix import constitutive as cst
from kortmix import solver1d as sv
from kortmix.config import apply_mutations
from kortmix.material import MaterialParams

PARAMS = MaterialParams()


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}", flush=True)
        assert ok, detail
    return emit


def kortmix(*argv, cwd=None):
    return subprocess.run([sys.executable, "-m", "kortmix", *argv], capture_output=True, cwd=cwd,
                          check=False)


@pytest.fixture(scope="module")
def default_simulation(tmp_path_factory):
    """Two default density-bump runs through the CLI, the first one timed."""
    runs = []
    for name in ("first", "second"):
        # same relative --out in separate working dirs, so the config digests agree
        cwd = tmp_path_factory.mktemp(name)
        start = time.perf_counter()
        proc = kortmix("simulate", "--out", "out", cwd=cwd)
        runs.append((proc, cwd / "out", time.perf_counter() - start))
    return runs


def test_1_identity(report):
    start = time.perf_counter()
    rep = au.run_identity_audit(PARAMS, n_samples=1000, seed=42, tol_identity=1e-9)
    elapsed = time.perf_counter() - start
    ok = rep.n_samples >= 1000 and rep.n_identity_fail == 0 and elapsed <= 10.0
    report(1, "sigma_direct == sigma_closed", ok,
           f"max rel err {rep.max_identity_error:.2e} over {rep.n_samples} jets in {elapsed:.2f} s")


def test_2_invariance(report):
    jets = au.sample_jets(1000, 42)
    base = au.sigma_direct(jets, PARAMS)
    worst = max(float(au.rel_err(au.sigma_direct(au.rerandomize_higher(jets, seed), PARAMS), base).max())
                for seed in (1, 2, 3))
    report(2, "invariance under higher-order slots", worst <= 1e-9, f"max rel change {worst:.2e}")


def test_3_sign_and_mutations(report):
    rep = au.run_identity_audit(PARAMS, n_samples=1000, seed=42)
    detected = {}
    # a2 < 0 makes s02'' negative
    for key, value in (("tau12", -1.0), ("q0", 0.5), ("s3", 0.1), ("a2", -0.5)):
        mutant = au.run_identity_audit(apply_mutations(PARAMS, {key: value}), n_samples=1000, seed=42)
        cli = kortmix("audit", "--mutate", f"{key}={value}")
        detected[key] = mutant.n_negative + mutant.n_identity_fail > 0 and cli.returncode == 2
    ok = rep.min_sigma >= -1e-12 and all(detected.values())
    report(3, "sigma >= 0 and mutations detected", ok,
           f"min sigma {rep.min_sigma:.3e}; detected {detected}")


def test_4_multipliers_and_tau(report):
    checks = au.check_multiplier_consistency(PARAMS, rtol=1e-6) + au.check_tau_consistency(PARAMS, n=10,
                                                                                           rtol=1e-6)
    worst = max(checks, key=lambda c: c.max_error)
    ok = all(c.passed for c in checks) and len(checks) == 9 + 9
    report(4, "multiplier partials and tau identities", ok,
           f"worst {worst.name} rel err {worst.max_error:.2e} over {len(checks)} checks")


def test_5_concavity(report):
    check = au.check_concavity_grid(PARAMS, tol=1e-12)
    report(5, "gradient part of s concave", check.passed, f"max eigenvalue {check.max_error:.3e}")


def test_6_korteweg(report):
    n = 500
    jets = au.sample_jets(n, 11).replace(c_g=np.zeros((n, 3)), c_h=np.zeros((n, 6)))
    a1, a2, a3, a4, p = cst.korteweg_reduction(jets.rho, jets.eps, PARAMS, c=jets.c)
    t = cst.stress_coefficients(jets.rho, jets.c, jets.eps, PARAMS)
    gr, H, I = jets.rho_g, jets.rho_hess, np.eye(3)
    iso = -p + a1 * np.einsum("ni,ni->n", gr, gr) + a2 * np.trace(H, axis1=1, axis2=2)
    korteweg = (iso[:, None, None] * I + a3[:, None, None] * np.einsum("ni,nj->nij", gr, gr)
                + a4[:, None, None] * H)
    viscous = (t[6] * jets.div_v)[:, None, None] * I + t[12][:, None, None] * jets.strain
    err = float(np.max(np.abs(cst.stress(jets, PARAMS) - viscous - korteweg)))
    rel = float(np.max(np.abs(a2 + jets.rho * a3) / np.abs(a2)))
    ok = err <= 1e-12 and np.all(a4 == 0) and rel <= 1e-12
    report(6, "Korteweg form at uniform c", ok,
           f"max |T - T_K| {err:.2e}, max|a4| {np.max(np.abs(a4)):.1e}, a2 + rho a3 rel {rel:.1e}")


def test_7_conservation(report, default_simulation):
    proc, out, elapsed = default_simulation[0]
    summary = json.loads(proc.stdout.decode().splitlines()[-1])
    drift = summary.get("drift", {})
    ok = (proc.returncode == 0 and summary["record"] == "summary" and elapsed <= 60.0
          and all(v <= 1e-8 for v in drift.values()) and summary["min_entropy_change"] >= -1e-10)
    worst = max(drift.values()) if drift else float("nan")
    report(7, "density bump N=256 conservation", ok,
           f"max drift {worst:.2e}, min dS {summary.get('min_entropy_change', float('nan')):.2e}, "
           f"{summary.get('steps')} steps in {elapsed:.1f} s")


def _spatial_order(order):
    grids = [sv.run(sv.SolverSettings(N=N, L=8.0, t_end=0.1, order=order, diag_every=10 ** 6,
                                      initial=sv.InitialCondition(profile="density_sine",
                                                                  amplitude=1e-2)), PARAMS).grid
             for N in (16, 32, 64)]
    errs = [np.max(np.abs(a.fields() - b.fields()[:, ::2])) for a, b in zip(grids, grids[1:])]
    return float(np.log2(errs[0] / errs[1]))


def _temporal_order():
    g0 = sv.initial_grid(32, 8.0, sv.InitialCondition(profile="density_sine", amplitude=0.1))
    T = 32 * sv.stable_dt(g0, PARAMS)

    def solve(n):
        g = g0
        for _ in range(n):
            g = sv.step_rk4(g, T / n, PARAMS)
        return g.fields()

    u = [solve(n) for n in (16, 32, 64)]
    return float(np.log2(np.max(np.abs(u[0] - u[1])) / np.max(np.abs(u[1] - u[2]))))


def test_8_convergence_orders(report):
    p2, p4, pt = _spatial_order(2), _spatial_order(4), _temporal_order()
    ok = abs(p2 - 2) <= 0.2 and abs(p4 - 4) <= 0.2 and abs(pt - 4) <= 0.3
    report(8, "convergence orders", ok, f"spatial {p2:.3f} (order 2), {p4:.3f} (order 4); RK4 {pt:.3f}")


def test_9_determinism(report, default_simulation, tmp_path):
    audits = [kortmix("audit", "--samples", "1000", "--seed", "42", "--dump-samples") for _ in range(2)]
    same_audit = audits[0].stdout == audits[1].stdout and audits[0].returncode == 0
    (p1, d1, _), (p2, d2, _) = default_simulation
    same_sim = (p1.stdout == p2.stdout
                and (d1 / "diagnostics.ndjson").read_bytes() == (d2 / "diagnostics.ndjson").read_bytes())
    n_lines = len(audits[0].stdout.splitlines())
    report(9, "byte-identical NDJSON", same_audit and same_sim,
           f"audit {'identical' if same_audit else 'DIFFERENT'} ({n_lines} lines), "
           f"simulate {'identical' if same_sim else 'DIFFERENT'}")
