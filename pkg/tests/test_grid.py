import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blinstab.errors import ConfigError, DomainError, UsageError
from blinstab.grid import (GridFunction, GridSpec, ModeFamily, build_grid, cheb, clenshaw_curtis,
                           fornberg_weights)


@pytest.fixture(scope="module")
def g64():
    return build_grid(64, L=4.0, z_max=60.0)


def test_cheb_differentiates_polynomials():
    x, D = cheb(20)
    np.testing.assert_allclose(D @ x ** 5, 5 * x ** 4, atol=1e-11)


def test_clenshaw_curtis_integrates_polynomials():
    x, _ = cheb(17)
    w = clenshaw_curtis(17)
    assert w @ x ** 8 == pytest.approx(2 / 9, abs=1e-14)
    assert w.sum() == pytest.approx(2.0, abs=1e-14)


def test_fornberg_central_second_derivative():
    w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    np.testing.assert_allclose(w[:, 2], [1, -2, 1], atol=1e-14)


def test_constant_has_zero_derivative(g64):
    assert np.max(np.abs(g64.diff(np.ones(64)))) < 1e-10


def test_exponential_derivative(g64):
    f = np.exp(-g64.z)
    inner = slice(1, -1)
    np.testing.assert_allclose(g64.diff(f)[inner], -f[inner], atol=1e-8)
    np.testing.assert_allclose(g64.diff(f, 2)[inner], f[inner], atol=1e-6)


def test_integration_of_exponential(g64):
    # int_0^zmax e^{-z} dz
    assert g64.integrate(np.exp(-g64.z)) == pytest.approx(1 - np.exp(-60.0), abs=1e-10)


def test_spectral_refinement_converges():
    errs = []
    for N in (32, 64, 128):
        g = build_grid(N, L=2.0, z_max=60.0)
        f = np.sin(g.z) * np.exp(-g.z)
        exact = (np.cos(g.z) - np.sin(g.z)) * np.exp(-g.z)
        errs.append(np.max(np.abs(g.diff(f) - exact)))
    # spectral accuracy: doubling N gains far more than the second-order factor 4
    assert errs[1] < errs[0] / 100
    assert errs[2] < errs[1] / 1e4


def test_fd_backend_is_high_order():
    errs = []
    for N in (200, 400):
        g = build_grid(N, backend="fd", z_max=60.0)
        f = np.exp(-g.z)
        errs.append(np.max(np.abs(g.diff(f) + f)))
    assert errs[1] < errs[0] / 16


@pytest.mark.parametrize("backend", ["spectral", "fd"])
def test_interpolation_exact_at_nodes_and_constants(backend):
    g = build_grid(80, backend=backend, z_max=60.0)
    vals = np.exp(-g.z) * np.cos(g.z)
    np.testing.assert_allclose(g.interpolation_matrix(g.z[::7]) @ vals, vals[::7], atol=1e-14)
    zq = np.array([0.013, 0.5, 3.3, 17.0])
    np.testing.assert_allclose(g.interpolation_matrix(zq) @ np.ones(80), 1.0, atol=1e-10)


def test_offnode_interpolation_of_exponential():
    g = build_grid(120, z_max=60.0)
    zq = np.linspace(0.01, 20.0, 57)
    np.testing.assert_allclose(g.evaluate(np.exp(-g.z), zq), np.exp(-zq), atol=1e-8)
    np.testing.assert_allclose(g.interpolation_matrix(zq) @ np.exp(-g.z), np.exp(-zq), atol=1e-8)


def test_barycentric_weights_finite_at_large_N():
    g = build_grid(400, z_max=60.0)
    v = g.evaluate(np.exp(-g.z), [0.3, 2.0])
    np.testing.assert_allclose(v, np.exp(-np.array([0.3, 2.0])), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 40.0))
def test_evaluate_agrees_with_matrix(zq):
    g = build_grid(60, z_max=60.0)
    vals = 1.0 / (1.0 + g.z) ** 2
    a = g.evaluate(vals, zq)[0]
    b = (g.interpolation_matrix(zq) @ vals)[0]
    assert a == pytest.approx(b, abs=1e-10)


def test_grid_validation():
    with pytest.raises(ConfigError):
        build_grid(4)
    with pytest.raises(ConfigError):
        build_grid(64, backend="wavelet")
    with pytest.raises(DomainError):
        build_grid(64).interpolation_matrix([-1.0])


def test_gridspec_domain_grows_with_wavelength():
    spec = GridSpec()
    assert spec.z_max_for(0.01) == 1e4
    assert spec.z_max_for(1.0) == 100.0
    assert spec.z_max_for(5.0) == spec.z_max_min
    assert spec.build(0.5).z_max == spec.z_max_for(0.5)


def test_gridfunction_checks():
    g = build_grid(32)
    with pytest.raises(UsageError):
        GridFunction(g, np.zeros(5))
    with pytest.raises(DomainError):
        GridFunction(g, np.full(32, np.nan))
    other = build_grid(40)
    with pytest.raises(UsageError):
        GridFunction.zeros(g) + GridFunction.zeros(other)


def test_mode_family_reality():
    g = build_grid(32)
    f = GridFunction.from_callable(g, lambda z: (1 + 2j) * np.exp(-z), 0.3)
    fam = ModeFamily(0.3, {1: f, -1: f.conj()})
    assert fam.max_asymmetry() == 0.0
    x = np.linspace(0, 2 * np.pi / 0.3, 11)
    assert np.max(np.abs(fam.physical(x).imag)) < 1e-14
    assert fam[5].values.sum() == 0
