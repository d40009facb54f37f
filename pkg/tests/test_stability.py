import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blinstab.errors import UnderResolvedError
from blinstab.grid import GridSpec, build_grid
from blinstab.profiles import shear_layer_profile
from blinstab.stability import (build_growing_mode, check_sublayer_resolution, critical_point,
                                leading_eigenvalue, loglog_fit, max_growth, mode_structure,
                                neutral_points, os_spectrum, physical_velocity_sup,
                                rayleigh_spectrum, reynolds, viscosity)

# Frozen oracle: erf profile, nu = 1e-8, alpha = 0.143, spectral N = 150.
REF_LAMBDA = 0.0021001285 - 0.0307465586j


def test_reference_eigenvalue_frozen(ref_mode):
    assert ref_mode.lam.real == pytest.approx(REF_LAMBDA.real, rel=1e-6)
    assert ref_mode.lam.imag == pytest.approx(REF_LAMBDA.imag, rel=1e-6)
    assert ref_mode.residual < 1e-6


def test_reference_eigenvalue_independent_discretisations(erf_prof, ref_mode):
    fd = leading_eigenvalue(erf_prof, 0.143, 1e-8, GridSpec(N=1200, backend="fd"))
    fine = leading_eigenvalue(erf_prof, 0.143, 1e-8, GridSpec(N=200))
    assert abs(fd.lam - ref_mode.lam) / abs(ref_mode.lam) < 1e-4
    assert abs(fine.lam - ref_mode.lam) / abs(ref_mode.lam) < 1e-5


def test_unstable_growth_scale(ref_mode):
    # growth rate of order nu^{1/4} near the most unstable wavenumber
    assert 0.1 < ref_mode.lam.real / 1e-8 ** 0.25 < 1.0


def test_spectrum_sorted_and_filtered(erf_prof):
    grid = GridSpec(N=120).build(0.143)
    spec = os_spectrum(erf_prof, 0.143, 1e-7, grid, n_modes=5)
    growth = [s.lam.real for s in spec]
    assert growth == sorted(growth, reverse=True)
    assert all(abs(s.c.real - erf_prof.U_plus) > 1e-3 for s in spec)


def test_alpha_zero_is_pure_diffusion(exp_profile):
    s = leading_eigenvalue(exp_profile, 0.0, 1e-4, GridSpec(N=60))
    assert s is None or s.lam.real <= 0


def test_exponential_stable_at_moderate_reynolds(exp_profile):
    # R = 1000 lies far below the critical Reynolds number of the exponential profile
    nu = 1e-6
    s = leading_eigenvalue(exp_profile, nu ** 0.125, nu, GridSpec(N=100))
    assert s.lam.real < 0


def test_exponential_unstable_above_critical_reynolds(exp_profile):
    nu = viscosity(6e4)
    s = leading_eigenvalue(exp_profile, 0.155, nu, GridSpec(N=150))
    assert s.lam.real > 0
    below = leading_eigenvalue(exp_profile, 0.155, viscosity(4e4), GridSpec(N=150))
    assert below.lam.real < 0


def test_no_growth_at_large_viscosity(erf_prof):
    mg = max_growth(erf_prof, 1.0, GridSpec(N=60), n_alpha=6)
    assert mg.alpha_star is None and mg.lam_star == 0


def test_max_growth_wavenumber_and_monotonicity(erf_prof):
    spec = GridSpec(N=150)
    lams = []
    for nu in (1e-8, 1e-7):
        mg = max_growth(erf_prof, nu, spec, n_alpha=10)
        assert 0.5 * nu ** 0.125 <= mg.alpha_star <= 2 * nu ** 0.125
        lams.append(mg.growth)
    assert lams[0] > lams[1] > 0


def test_neutral_points_bracket_and_subcritical(erf_prof):
    a, b, info = neutral_points(erf_prof, 2e4, GridSpec(N=100), n_alpha=12)
    assert info["status"] == "ok" and a < b
    lo, hi = info["bracket_low"]
    assert lo <= a <= hi
    spec = GridSpec(N=100)
    nu = viscosity(2e4)
    from blinstab.stability import leading_growth
    assert leading_growth(erf_prof, lo, nu, spec) < 0 < leading_growth(erf_prof, hi, nu, spec)
    assert neutral_points(erf_prof, 1e3, spec, n_alpha=10)[2]["status"] == "stable"


def test_rayleigh_monotone_profile_stable(exp_profile):
    assert rayleigh_spectrum(exp_profile, 0.5, GridSpec(N=100).build(0.5)).stable


def test_rayleigh_inflected_profile_unstable():
    prof = shear_layer_profile()
    res = rayleigh_spectrum(prof, 0.3, GridSpec(N=100).build(0.3))
    assert not res.stable
    U = prof.U(np.linspace(0, 20, 2001))
    centre, radius = 0.5 * (U.min() + U.max()), 0.5 * (U.max() - U.min())
    assert all(abs(c - centre) <= radius * (1 + 1e-9) for c, _ in res.modes)


def test_sublayer_resolution_guard():
    with pytest.raises(UnderResolvedError) as exc:
        check_sublayer_resolution(build_grid(16, z_max=60.0), 1e-12)
    assert exc.value.required_N > 16


def test_reynolds_viscosity_roundtrip():
    assert viscosity(reynolds(3e-9)) == pytest.approx(3e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-5, 5))
def test_loglog_fit_recovers_power_law(k, c):
    x = np.geomspace(1e-8, 1e-5, 7)
    fit = loglog_fit(x, np.exp(c) * x ** k)
    assert fit["slope"] == pytest.approx(k, abs=1e-9)
    assert fit["intercept"] == pytest.approx(c, abs=1e-7)


def test_growing_mode_reality_and_zero_amplitude(ref_mode):
    fam = build_growing_mode(ref_mode, 1e-3, phase=0.4)
    assert fam.max_asymmetry() < 1e-15
    x = np.linspace(0, 2 * np.pi / ref_mode.alpha, 9)
    assert np.max(np.abs(fam.physical(x).imag)) < 1e-15
    zero = build_growing_mode(ref_mode, 0.0)
    assert all(np.all(f.values == 0) for _, f in zero.items())
    assert physical_velocity_sup(zero.streams and type(zero)(zero.alpha_base, zero.streams)) == 0.0


def test_mode_structure_scales(erf_prof, ref_mode):
    rep = mode_structure(ref_mode, erf_prof)
    nu, a = ref_mode.nu, ref_mode.alpha
    assert 0.3 <= rep.delta_bl_fit / nu ** 0.125 <= 3
    assert 0.3 <= rep.delta_cr_fit / (a * reynolds(nu)) ** (-1 / 3) <= 3
    assert rep.z_critical == pytest.approx(critical_point(erf_prof, ref_mode.c.real), rel=1e-9)
