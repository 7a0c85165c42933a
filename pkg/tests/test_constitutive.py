import dataclasses

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from kortmix import constitutive as cst
from kortmix.audit import sample_jets
from kortmix.jet import StateJet, pack_sym2, pack_sym3
from kortmix.material import DomainError, MaterialParams

LOCAL = MaterialParams(s3=0.0, K=0.0)


def test_entropy_coefficients_example(params):
    co = cst.entropy_coefficients(1.0, 0.5, 2.0, params)
    assert co.s_hat3 == pytest.approx(-0.1, abs=1e-15)
    assert co.s_hat2 == pytest.approx(2 * (0.7 / -1.5) * -0.1, rel=1e-14)
    assert co.s_hat2 == pytest.approx(0.09333333333333334, rel=1e-14)
    # (0.49 - 0.04)/2.25 * (-0.1) - 0.01 = -0.03
    assert co.s_hat1 == pytest.approx(-0.03, rel=1e-13)


def test_kappa2_enters_s1_only_through_J_rho():
    # flipping kappa2 and mapping c -> c' with equal J_rho leaves s_hat1 unchanged
    p, m = MaterialParams(kappa2=0.2), MaterialParams(kappa2=-0.2)
    a = cst.entropy_coefficients(1.0, 0.5, 2.0, p).s_hat1
    b = cst.entropy_coefficients(1.0, 0.9, 2.0, m).s_hat1  # J_rho = 0.7 in both
    assert a == pytest.approx(b, rel=1e-14)


def test_local_entropy_has_no_gradient_coefficients():
    co = cst.entropy_coefficients(1.2, 0.3, 1.0, LOCAL)
    assert co.s_hat1 == 0 and co.s_hat2 == 0 and co.s_hat3 == 0


def test_specific_entropy_equilibrium_and_homogeneity(params):
    eq = StateJet.equilibrium(1.1, 0.4, 1.5)
    assert cst.specific_entropy(eq, params) == pytest.approx(
        cst.entropy_coefficients(1.1, 0.4, 1.5, params).s_hat0)
    jet = sample_jets(1, 2)[0]
    s0 = cst.entropy_coefficients(jet.rho, jet.c, jet.eps, params).s_hat0
    base = cst.specific_entropy(jet, params) - s0
    scaled = jet.replace(rho_g=3 * jet.rho_g, c_g=3 * jet.c_g)
    assert cst.specific_entropy(scaled, params) - s0 == pytest.approx(9 * base, rel=1e-12)


def test_specific_entropy_term_by_term(params):
    jet = sample_jets(1, 4)[0]
    rho, c, eps = float(jet.rho), float(jet.c), float(jet.eps)
    Jr, Jc = rho * 0 + params.kappa1 * c + params.kappa2, -params.kappa1 * rho + params.kappa3
    x = Jr / Jc
    s0 = np.log(eps) + Jc * (0.1 * x + 0.25 * x * x) - np.log(rho)
    h3 = params.s3 / rho
    h1 = (Jr ** 2 - params.kappa2 ** 2) / Jc ** 2 * h3 - params.K / rho
    gr, gc = jet.rho_g, jet.c_g
    ref = s0 + h1 * gr @ gr + 2 * x * h3 * gr @ gc + h3 * gc @ gc
    assert cst.specific_entropy(jet, params) == pytest.approx(ref, rel=1e-14)


def test_temperature():
    assert cst.temperature(2.0, MaterialParams()) == pytest.approx(2.0)
    assert cst.temperature(1.0, MaterialParams(cv=2.0)) == pytest.approx(0.5)
    eps = np.random.default_rng(0).uniform(0.1, 5, 20)
    p = MaterialParams()
    np.testing.assert_allclose(cst.temperature(eps, p) * p.ds01(eps), 1.0, rtol=1e-15)
    with pytest.raises(DomainError):
        cst.temperature(0.0, p)


def test_flux_examples(params):
    Jm, q = cst.fluxes(StateJet.equilibrium(1.0, 0.5, 2.0), params)
    assert np.all(Jm == 0) and np.all(q == 0)
    jet = StateJet.equilibrium(1.0, 0.5, 2.0).replace(c_g=[1.0, 0, 0], eps_g=[0, 2.0, 0])
    Jm, q = cst.fluxes(jet, params)
    np.testing.assert_allclose(Jm, [-1.5, 0, 0], atol=1e-15)
    np.testing.assert_allclose(q, [0, -1.0, 0], atol=1e-15)


def test_fourier_form(params):
    # q = -k grad(theta) with k = -q0 cv and theta = eps/cv
    k = cst.heat_conductivity(1.0, 0.5, 2.0, params)
    assert k == pytest.approx(0.5)
    jet = StateJet.equilibrium(1.0, 0.5, 2.0).replace(eps_g=[0.3, -0.2, 1.0])
    _, q = cst.fluxes(jet, params)
    np.testing.assert_allclose(q, -k * jet.eps_g / params.cv, rtol=1e-15)


def test_tau10_tau11_zero_and_special_values(params):
    rng = np.random.default_rng(1)
    rho, c, eps = rng.uniform(0.6, 1.8, 50), rng.uniform(0, 1, 50), rng.uniform(0.5, 3, 50)
    t = cst.stress_coefficients(rho, c, eps, params)
    assert np.all(t[10] == 0) and np.all(t[11] == 0)
    theta = cst.temperature(eps, params)
    Jr, Jc = params.J_rho(c), params.J_c(rho)
    np.testing.assert_allclose(t[9], 2 * theta * params.s3, rtol=1e-14)
    np.testing.assert_allclose(t[5], -2 * rho * theta * Jr / Jc * params.s3, rtol=1e-14)
    A = (Jr ** 2 - params.kappa2 ** 2) / Jc ** 2 * params.s3 - params.K
    np.testing.assert_allclose(t[4], -2 * rho * theta * A, rtol=1e-13)
    np.testing.assert_allclose(t[7], 2 * theta * A, rtol=1e-13)
    np.testing.assert_allclose(t[4], -rho * t[7], rtol=1e-13)


def test_ideal_gas_limit():
    p = MaterialParams(s3=0.0, K=0.0, kappa1=0.0)
    rho, eps = 1.4, 2.2
    t = cst.stress_coefficients(rho, 0.3, eps, p)
    assert t[0] == pytest.approx(-rho * p.R * eps / p.cv, rel=1e-14)
    for k in (1, 2, 3, 4, 5, 7, 8, 9):
        assert t[k] == 0
    a1, a2, a3, a4, pr = cst.korteweg_reduction(rho, eps, p, c=0.3)
    assert a1 == a2 == a3 == a4 == 0
    assert pr == pytest.approx(rho * p.R * eps)


def test_equilibrium_stress_is_isotropic(params):
    T = cst.stress(StateJet.equilibrium(1.2, 0.4, 1.5), params)
    t0 = cst.stress_coefficients(1.2, 0.4, 1.5, params)[0]
    np.testing.assert_allclose(T, t0 * np.eye(3), rtol=1e-15)


def test_stress_symmetric(params):
    T = cst.stress(sample_jets(40, 8), params)
    assert np.array_equal(T, np.swapaxes(T, -1, -2))


def test_korteweg_form_at_uniform_concentration(params):
    jets = sample_jets(200, 9).replace(c_g=np.zeros((200, 3)), c_h=np.zeros((200, 6)))
    T = cst.stress(jets, params)
    rho, eps = jets.rho, jets.eps
    a1, a2, a3, a4, p = cst.korteweg_reduction(rho, eps, params, c=jets.c)
    t = cst.stress_coefficients(rho, jets.c, eps, params)
    gr, H = jets.rho_g, jets.rho_hess
    I = np.eye(3)
    iso = -p + a1 * np.einsum("ni,ni->n", gr, gr) + a2 * np.trace(H, axis1=1, axis2=2)
    korteweg = iso[:, None, None] * I + a3[:, None, None] * np.einsum("ni,nj->nij", gr, gr) \
        + a4[:, None, None] * H
    viscous = (t[6] * jets.div_v)[:, None, None] * I + t[12][:, None, None] * jets.strain
    np.testing.assert_allclose(T - viscous, korteweg, rtol=0, atol=1e-12)
    assert np.all(a4 == 0)
    np.testing.assert_allclose(a2, -rho * a3, rtol=1e-13)


def test_entropy_flux_examples(params):
    eq = StateJet.equilibrium(1.0, 0.5, 2.0)
    assert np.all(cst.entropy_flux(eq, params) == 0)
    jet = eq.replace(eps_g=[0.1, 0.5, -0.3], rho_h=np.ones(6), v_g=np.eye(3))
    _, q = cst.fluxes(jet, params)
    theta = cst.temperature(2.0, params)
    np.testing.assert_allclose(cst.entropy_flux(jet, params), q / theta, rtol=1e-15)
    jet = sample_jets(1, 3)[0]
    Jm, q = cst.fluxes(jet, LOCAL)
    x = LOCAL.J_rho(jet.c) / LOCAL.J_c(jet.rho)
    ref = q / cst.temperature(jet.eps, LOCAL) + LOCAL.kappa1 * LOCAL.ds02(x) * Jm
    np.testing.assert_allclose(cst.entropy_flux(jet, LOCAL), ref, rtol=1e-14)


def test_multiplier_examples(params):
    jets = sample_jets(30, 5)
    m = cst.lagrange_multipliers(jets, params)
    for name in ("lam3", "Lam3", "Lam4", "Th1", "Th2"):
        assert np.all(getattr(m, name) == 0), name
    np.testing.assert_allclose(m.lam4, 1.0 / cst.temperature(jets.eps, params), rtol=1e-15)
    eq = StateJet.equilibrium(1.3, 0.2, 1.0)
    meq = cst.lagrange_multipliers(eq, params)
    assert np.all(meq.Lam1 == 0)
    d = cst.entropy_coefficient_derivatives(1.3, 0.2, 1.0, params)
    assert meq.lam1 == pytest.approx(1.3 * d.ds0_drho)


def test_coefficient_derivatives_by_finite_differences(params):
    h = 1e-5
    rho, c, eps = 1.3, 0.35, 1.8
    d = cst.entropy_coefficient_derivatives(rho, c, eps, params)

    def co(r=rho, cc=c, e=eps):
        return cst.entropy_coefficients(r, cc, e, params)

    def fd(f, which):
        if which == "rho":
            return (f(r=rho + h) - f(r=rho - h)) / (2 * h)
        if which == "c":
            return (f(cc=c + h) - f(cc=c - h)) / (2 * h)
        return (f(e=eps + h) - f(e=eps - h)) / (2 * h)

    checks = {
        "ds0_drho": fd(lambda **k: co(**k).s_hat0, "rho"),
        "ds0_dc": fd(lambda **k: co(**k).s_hat0, "c"),
        "ds0_deps": fd(lambda **k: co(**k).s_hat0, "eps"),
        "ds1_drho": fd(lambda **k: co(**k).s_hat1, "rho"),
        "ds1_dc": fd(lambda **k: co(**k).s_hat1, "c"),
        "ds2_drho": fd(lambda **k: co(**k).s_hat2, "rho"),
        "ds2_dc": fd(lambda **k: co(**k).s_hat2, "c"),
        "ds3_drho": fd(lambda **k: co(**k).s_hat3, "rho"),
        "d2s0_dc2": fd(lambda **k: cst.entropy_coefficient_derivatives(
            k.get("r", rho), k.get("cc", c), eps, params).ds0_dc, "c"),
        "d2s0_drho_dc": fd(lambda **k: cst.entropy_coefficient_derivatives(
            k.get("r", rho), k.get("cc", c), eps, params).ds0_dc, "rho"),
        "d2s0_deps2": fd(lambda **k: params.ds01(k.get("e", eps)), "eps"),
    }
    for name, numeric in checks.items():
        exact = getattr(d, name)
        assert abs(exact - numeric) <= 1e-6 * max(1.0, abs(exact)), name


def rotate(jet: StateJet, R: np.ndarray) -> StateJet:
    """Apply a rigid rotation (x' = R x) to every slot of a single jet."""
    def vec(a):
        return R @ a

    def mat(a):
        return R @ a @ R.T

    def ten3(a):
        return np.einsum("ia,jb,kc,abc->ijk", R, R, R, a)

    vh = np.einsum("ia,jb,kc,abc->ijk", R, R, R, jet.v_hess)
    return StateJet(
        rho=jet.rho, rho_g=vec(jet.rho_g), rho_h=pack_sym2(mat(jet.rho_hess)),
        rho_t3=pack_sym3(ten3(jet.rho_third)),
        c=jet.c, c_g=vec(jet.c_g), c_h=pack_sym2(mat(jet.c_hess)), c_t3=pack_sym3(ten3(jet.c_third)),
        eps=jet.eps, eps_g=vec(jet.eps_g), eps_h=pack_sym2(mat(jet.eps_hess)),
        v=vec(jet.v), v_g=mat(jet.v_g), v_h=pack_sym2(vh),
    )


def test_objectivity_under_rotation(params):
    R = Rotation.from_euler("zyx", [0.7, -0.4, 1.9]).as_matrix()
    for i in range(5):
        jet = sample_jets(5, 21)[i]
        rj = rotate(jet, R)
        f, g = cst.flux_set(jet, params), cst.flux_set(rj, params)
        np.testing.assert_allclose(g.T, R @ f.T @ R.T, atol=1e-10)
        for name in ("Jm", "q", "Js"):
            np.testing.assert_allclose(getattr(g, name), R @ getattr(f, name), atol=1e-10)
        assert cst.specific_entropy(rj, params) == pytest.approx(cst.specific_entropy(jet, params), abs=1e-10)


def test_concavity_matrix_negative_semidefinite_when_admissible(params):
    rho, c = np.meshgrid(np.linspace(0.5, 2, 40), np.linspace(0, 1, 11))
    co = cst.entropy_coefficients(rho, c, 1.0, params)
    det = co.s_hat1 * co.s_hat3 - 0.25 * co.s_hat2 ** 2
    assert np.all(co.s_hat1 + co.s_hat3 <= 0) and np.all(det >= -1e-15)
    # with K = 0 the bound fails and s_hat1 turns positive somewhere
    co = cst.entropy_coefficients(rho, c, 1.0, dataclasses.replace(params, K=0.0))
    assert np.any(co.s_hat1 * co.s_hat3 - 0.25 * co.s_hat2 ** 2 < 0) or np.any(co.s_hat1 > 0)
