import numpy as np
import pytest

from hypflow.classifier import classify
from hypflow.examples import (burgers1d, burgers2d,
                              burgers_conservation_fluxes,
                              degenerate_symbol_ex_not, get_state, get_states,
                              kgz, kgz_charpoly, kgz_semilinear,
                              kgz_semilinear_conjugation, list_examples,
                              model_blocks, van_der_waals)
from hypflow.pde_sim import SolverConfig, evolve
from hypflow.semiclassical import Grid1D, GridFunction
from hypflow.system_model import eval_charpoly, eval_principal_symbol, spectrum


def test_registry_gate():
    # every entry and every documented parameter regime reproduces its verdict
    for name in list_examples():
        for sname, bundle in get_states(name).items():
            cl = classify(bundle.sys, bundle.phi, bundle.search_region)
            assert cl.regime == bundle.expected_regime, f"{name}/{sname}"


def test_dual_polynomial_evaluation():
    rng = np.random.default_rng(31)
    alpha, c = 1.0, 0.5
    sysk = kgz(alpha, c)
    sysb = burgers1d(1.0)
    sysv = van_der_waals()
    for _ in range(100):
        u, v, lam = rng.normal(size=3)
        phi_k = lambda t, x: np.array([u, v, 0.0, 0.0])
        a = eval_principal_symbol(sysk, phi_k, 0.0, [0.0], [1.0])
        assert abs(eval_charpoly(a, lam) - kgz_charpoly(lam, u, v, alpha, c)) <= 1e-10
        p1, p2 = rng.normal(size=2)
        phi_b = lambda t, x: np.array([p1, p2])
        ab = eval_principal_symbol(sysb, phi_b, 0.0, [0.0], [1.0])
        assert abs(eval_charpoly(ab, lam) - ((lam - p1) ** 2 + p2 ** 2)) <= 1e-10
        av = eval_principal_symbol(sysv, phi_b, 0.0, [0.0], [1.0])
        assert abs(eval_charpoly(av, lam) - (lam ** 2 - (p1 ** 2 - 1.0))) <= 1e-10


def test_burgers_eigenvalues_and_2d():
    sysb = burgers1d(2.0)   # b = 2
    phi = lambda t, x: np.array([0.4, 0.3])
    vals = spectrum(eval_principal_symbol(sysb, phi, 0.0, [0.0], [1.0]))
    assert np.allclose(np.sort(vals.imag), [-0.6, 0.6], atol=1e-10)
    sys2 = burgers2d(1.0)
    phi2 = lambda t, x: np.array([0.4, 0.3])
    for xi in ([1.0, 0.0], [0.3, 0.7], [1.0, -1.0]):
        vals = spectrum(eval_principal_symbol(sys2, phi2, 0.0, [0.0, 0.0], xi))
        expected_im = (xi[0] + xi[1]) * 0.3
        # double real root at xi1 + xi2 = 0 carries sqrt(eps)-level noise
        tol = 1e-10 if abs(expected_im) > 1e-6 else 1e-7
        assert abs(np.max(vals.imag) - abs(expected_im)) < tol
        assert np.allclose(vals.real, xi[0] * 0.4, atol=tol)


def test_kgz_requires_subsonic():
    with pytest.raises(ValueError):
        kgz(1.0, 1.0)
    with pytest.raises(ValueError):
        kgz_semilinear(-1.0)


def test_conservation_fluxes():
    b = lambda y: 1.0 + y ** 2
    f1, f2 = burgers_conservation_fluxes(b)
    u = np.array([0.7, 0.4])
    # int_0^w y (1+y^2)^2 dy = w^2/2 + w^4/2 + w^6/6
    w = u[1]
    exact = 0.5 * u[0] ** 2 - (w ** 2 / 2 + w ** 4 / 2 + w ** 6 / 6)
    assert abs(f1(u) - exact) < 1e-12
    assert f2(u) == u[0] * u[1]


def test_kgz_conjugation_roundtrip():
    c = 0.5
    assert np.allclose(kgz_semilinear_conjugation(np.zeros(4), c), np.zeros(4))
    rng = np.random.default_rng(12)
    for _ in range(50):
        w = rng.normal(size=4)
        back = kgz_semilinear_conjugation(
            kgz_semilinear_conjugation(w, c), c, inverse=True)
        assert np.max(np.abs(back - w)) < 1e-12


def test_kgz_trajectory_commutation():
    # evolve the original alpha=0 system and its semilinear conjugate;
    # the transform of one trajectory matches the other
    c = 0.5
    sys0 = kgz(0.0, c)
    syst = kgz_semilinear(c)
    n = 256
    grid = Grid1D(n, 2 * np.pi)
    xs = grid.nodes
    w0 = np.column_stack([0.05 * np.sin(xs), 0.03 * np.cos(xs),
                          0.02 * np.sin(2 * xs), 0.01 * np.cos(xs)])
    cfg = SolverConfig(n=n, dt=2.5e-3, t_final=0.5, max_speed=1.5,
                       sample_count=3, linf_cap=5.0)
    traj0 = evolve(sys0, GridFunction(grid, w0), cfg)
    wt0 = kgz_semilinear_conjugation(w0, c)
    trajt = evolve(syst, GridFunction(grid, wt0), cfg)
    got = kgz_semilinear_conjugation(traj0.states[-1].T, c)
    diff = got - trajt.states[-1].T
    l2 = np.sqrt(grid.dx * np.sum(diff ** 2))
    assert l2 <= 1e-4


def test_exnot_family():
    fam = degenerate_symbol_ex_not(0.7)
    for (t, x, xi) in ((0.1, 0.3, 1.0), (0.05, -0.2, 2.0)):
        lp, lm = fam.eigenvalues(t, x, xi)
        vals = spectrum(fam.symbol(t, [x], [xi]))
        assert abs(np.max(vals.imag) - max(lp.imag, lm.imag)) < 1e-10
        g = x * x * t - t * t + t ** 3 * 0.7
        assert abs(lp ** 2 - xi ** 2 * g) < 1e-12


def test_model_blocks():
    fam_m = model_blocks(-1)
    lp, lm = fam_m.eigenvalues(0.25)
    assert abs(lp - 0.5j) < 1e-12 and abs(lm + 0.5j) < 1e-12
    fam_p = model_blocks(+1)
    lp, lm = fam_p.eigenvalues(0.25)
    assert abs(lp - 0.5) < 1e-12 and abs(lm + 0.5) < 1e-12
    with pytest.raises(ValueError):
        model_blocks(-1, a_exponent=2)


def test_reference_solutions_consistent_at_t0():
    # closed-form time extensions agree with the initial datum at t = 0
    rng = np.random.default_rng(3)
    for name in list_examples():
        for sname, bundle in get_states(name).items():
            if bundle.phi.value is None:
                continue
            for _ in range(5):
                x = rng.uniform(-1.0, 1.0, size=bundle.phi.domain.dim)
                a = bundle.phi(0.0, x)
                b = bundle.phi.at0(x)
                assert np.max(np.abs(a - b)) < 1e-14
