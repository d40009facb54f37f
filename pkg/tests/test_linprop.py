
import numpy as np
import pytest

from blinstab.grid import GridFunction, GridSpec
from blinstab.linprop import (LinearSystem, eigen_run, propagate, random_initial_data,
                              verify_derivative_bound, verify_semigroup_bound)
from blinstab.norms import BLNormParams
from blinstab.profiles import ShearProfile


def test_eigenmode_grows_at_its_eigenvalue(ref_mode, erf_prof):
    t_end = 5 / ref_mode.lam.real
    run = eigen_run(ref_mode, erf_prof, t_end, times=np.linspace(0, t_end, 21))
    want = np.exp(ref_mode.lam.real * run.times)
    np.testing.assert_allclose(run.norms / run.norms[0], want, rtol=1e-3)


def test_imex_matches_crank_nicolson(ref_mode, erf_prof):
    t = np.linspace(0, 200, 5)
    cn = eigen_run(ref_mode, erf_prof, 200, times=t)
    imex = eigen_run(ref_mode, erf_prof, 200, times=t, scheme="imex")
    np.testing.assert_allclose(imex.norms, cn.norms, rtol=1e-3)


def test_linearity(ref_mode, erf_prof, rng):
    system = LinearSystem(erf_prof, ref_mode.alpha, ref_mode.nu, ref_mode.grid)
    g1 = random_initial_data(system, rng)
    g2 = random_initial_data(system, rng, sublayer=True)
    run = lambda g: propagate(None, ref_mode.alpha, ref_mode.nu, erf_prof, 50.0, grid=ref_mode.grid,
                              system=system, state0=g, times=[0, 25, 50]).states[-1]
    a, b = 2.0 - 1.0j, 0.5
    np.testing.assert_allclose(run(a * g1 + b * g2), a * run(g1) + b * run(g2), rtol=1e-10,
                               atol=1e-12 * np.abs(run(g1)).max())


def test_pure_heat_flow_sup_non_increasing():
    zero = lambda z: np.zeros_like(np.asarray(z, float))
    still = ShearProfile("rest", (zero,) * 5, U_plus=0.0, eta0=1.0)
    grid = GridSpec(N=80).build(None)
    w0 = GridFunction.from_callable(grid, lambda z: z ** 2 * np.exp(-z))
    params = BLNormParams(beta=1e-9, p=0, nu=1e-4, z_cap=30.0, refine=False)
    run = propagate(w0, 0.0, 1e-4, still, 400.0, 1.0, times=np.linspace(0, 400, 11), params=params)
    sups = [np.abs(run.omega(k).values).max() for k in range(len(run.times))]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(sups, sups[1:]))


def test_semigroup_constant_for_eigenmode(ref_mode, erf_prof):
    t_end = 5 / ref_mode.lam.real
    run = eigen_run(ref_mode, erf_prof, t_end, times=np.linspace(0, t_end, 11))
    gamma1 = 1.2 * ref_mode.lam.real / ref_mode.nu ** 0.25
    fit = verify_semigroup_bound(run, gamma1)
    assert fit.finite and fit.C <= 1.0
    assert fit.argmax_t == 0.0


def test_diffusive_regime_decays(erf_prof):
    nu, alpha = 1e-2, 8.0
    grid = GridSpec(N=80).build(alpha)
    # vorticity of the clamped stream function z^2 e^{-2z}
    w0 = GridFunction.from_callable(
        grid, lambda z: (2 - 8 * z + 4 * z ** 2 - alpha ** 2 * z ** 2) * np.exp(-2 * z))
    run = propagate(w0, alpha, nu, erf_prof, 1.0, times=np.linspace(0, 1, 6))
    assert np.all(np.diff(run.norms) < 0)
    assert np.all(np.diff(run.dnorms) < 0)
    # decay at least at the diffusive rate alpha^2 sqrt(nu) / 4 of the envelope
    fit = verify_semigroup_bound(run, 1.0)
    assert fit.C == pytest.approx(1.0, rel=1e-9) and fit.argmax_t == 0.0


def test_incompatible_data_is_damped(erf_prof):
    # no-slip projection of data with nonzero wall flux leaves a stiff wall
    # component; the backward-Euler start must remove it in the first step
    nu, alpha = 1e-2, 8.0
    grid = GridSpec(N=80).build(alpha)
    w0 = GridFunction.from_callable(grid, lambda z: z * np.exp(-2 * z))
    run = propagate(w0, alpha, nu, erf_prof, 0.5, times=[0.0, 0.5])
    assert run.norms[1] < 1e-2 * run.norms[0]


def test_derivative_of_sublayer_data(ref_mode, erf_prof, rng):
    # a wall layer of width nu^{1/8} makes ||d_z w0|| / ||w0|| of order nu^{-1/8}
    system = LinearSystem(erf_prof, ref_mode.alpha, ref_mode.nu, ref_mode.grid)
    run = propagate(None, ref_mode.alpha, ref_mode.nu, erf_prof, 100.0, grid=ref_mode.grid,
                    system=system, state0=random_initial_data(system, rng, sublayer=True),
                    times=np.linspace(0, 100, 11))
    ratio = run.dnorms[0] / run.norms[0]
    assert 0.1 < ratio * ref_mode.nu ** 0.125 < 10
    gamma1 = 1.2 * ref_mode.lam.real / ref_mode.nu ** 0.25
    assert verify_derivative_bound(run, gamma1).finite


def test_zero_data_stays_zero(ref_mode, erf_prof):
    run = propagate(GridFunction.zeros(ref_mode.grid, ref_mode.alpha), ref_mode.alpha, ref_mode.nu,
                    erf_prof, 10.0, times=[0, 10])
    assert np.all(run.norms == 0)
    assert verify_semigroup_bound(run, 1.0).C == 0.0
