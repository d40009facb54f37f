import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blinstab.errors import DomainError, UsageError
from blinstab.grid import GridFunction, ModeFamily, build_grid
from blinstab.elliptic import (check_estimate_A1, check_estimate_A2, check_estimate_A2bis,
                               cumulative_integral, invert_laplace_2d, solve_halfline,
                               solve_zero_mode)
from blinstab.norms import BLNormParams

G = build_grid(200, z_max=60.0)
Z = G.z


def _gf(fn, alpha=None):
    return GridFunction.from_callable(G, fn, alpha)


def _sublayer(delta, beta=0.25):
    return _gf(lambda z: np.exp(-z / delta) * np.exp(-beta * z) / delta)


def test_zero_forcing_gives_zero():
    r = solve_halfline(GridFunction.zeros(G), 1.0)
    assert np.max(np.abs(r.phi.values)) == 0.0


@pytest.mark.parametrize("method", ["green", "operator"])
def test_closed_form_solution(method):
    r = solve_halfline(_gf(lambda z: np.exp(-z)), 1.0, method=method)
    np.testing.assert_allclose(r.phi.values, -0.5 * Z * np.exp(-Z), atol=1e-9)
    np.testing.assert_allclose(r.dphi.values, -0.5 * (1 - Z) * np.exp(-Z), atol=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 6.0), st.floats(0.3, 3.0), st.floats(0.0, 4.0), st.floats(0.05, 0.5))
def test_green_and_operator_agree(alpha, rate, waves, width):
    # alpha * z_max >= 30 so the Dirichlet row at z_max matches the bounded solution;
    # at most 4 radians per e-fold keeps the oscillation resolved where it matters
    f = _gf(lambda z: np.exp(-rate * z) * np.cos(waves * rate * z) + np.exp(-z / width))
    r = solve_halfline(f, alpha)
    assert r.dual_gap <= 1e-7 * max(1.0, np.max(np.abs(r.phi.values)))


def test_equation_residual():
    f = _sublayer(0.1)
    for a in (1.0, 2.0, 4.0):
        r = solve_halfline(f, a)
        lhs = G.diff(r.phi.values, 2) - a * a * r.phi.values - f.values
        assert np.max(np.abs(lhs[1:-1])) < 1e-8 * np.max(np.abs(f.values))


def test_alpha_zero_rejected():
    with pytest.raises(DomainError):
        solve_halfline(_gf(lambda z: np.exp(-z)), 0.0)
    with pytest.raises(UsageError):
        solve_halfline(_gf(lambda z: np.exp(-z)), 1.0, method="fft")


def test_cumulative_integral():
    np.testing.assert_allclose(cumulative_integral(_gf(lambda z: np.exp(-z))), 1 - np.exp(-Z),
                               atol=1e-12)


def test_zero_mode_closed_form():
    # -phi'' = e^{-z}, phi(0) = 0, phi' -> 0:  phi = 1 - e^{-z}
    r = solve_zero_mode(_gf(lambda z: np.exp(-z)))
    np.testing.assert_allclose(r.phi.values, 1 - np.exp(-Z), atol=1e-12)
    np.testing.assert_allclose(r.dphi.values, np.exp(-Z), atol=1e-12)


def test_A1_examples():
    assert check_estimate_A1(GridFunction.zeros(G), 1.0, 0.25).C == 0.0
    f = _gf(lambda z: np.exp(-z))
    Cs = [check_estimate_A1(f, a, 0.25, z_cap=30.0).C for a in (1, 2, 4, 8)]
    assert max(Cs) / min(Cs) <= 2.0
    assert check_estimate_A1(f.scaled(10.0), 2.0, 0.25, z_cap=30.0).C == pytest.approx(Cs[1], rel=1e-12)
    assert not check_estimate_A1(f, 1.0, 0.6).hypothesis_ok


@pytest.mark.parametrize("a", [1.0, 2.0, 4.0])
def test_A2_stable_across_sublayer_widths(a):
    Cs = [check_estimate_A2(_sublayer(d), a, BLNormParams(delta_override=d, z_cap=30.0)).C
          for d in (0.2, 0.1, 0.05)]
    assert max(Cs) / min(Cs) <= 2.0


def test_A2_zero_and_smooth_consistency():
    params = BLNormParams(delta_override=0.1, z_cap=30.0)
    assert check_estimate_A2(GridFunction.zeros(G), 1.0, params).C == 0.0
    smooth = _gf(lambda z: np.exp(-0.5 * z))
    a2 = check_estimate_A2(smooth, 2.0, params).C
    a1 = check_estimate_A1(smooth, 2.0, 0.25, z_cap=30.0).C
    # without a sublayer the weighted and unweighted constants are the same order
    assert 0.1 < a2 / a1 < 10


def test_A2bis_bounded_and_residual():
    params = BLNormParams(delta_override=0.1, z_cap=30.0)
    assert check_estimate_A2bis(GridFunction.zeros(G), 1.0, params).C == 0.0
    f = _sublayer(0.1)
    res = [check_estimate_A2bis(f, a, params) for a in (1.0, 2.0, 4.0)]
    assert all(np.isfinite(r.C) and r.C < 20 for r in res)
    assert all(r.terms["equation_residual"] < 1e-8 * np.max(np.abs(f.values)) for r in res)


def test_A2bis_phi_second_derivative_term_scales_inversely_with_alpha():
    # ||phi''|| is dominated by ||f|| for a sublayer, so dividing by ||alpha f|| leaves ~ 1/alpha
    params = BLNormParams(delta_override=0.2, z_cap=30.0)
    f = _sublayer(0.2)
    t = {a: check_estimate_A2bis(f, a, params).terms for a in (1.0, 8.0)}
    r1 = t[1.0]["d2phi"] / t[1.0]["af"]
    r8 = t[8.0]["d2phi"] / t[8.0]["af"]
    assert r1 / r8 == pytest.approx(8.0, rel=0.15)


def test_invert_laplace_2d_closed_form():
    w = _gf(lambda z: np.exp(-z), 1.0)
    fam = ModeFamily(1.0, {1: w, -1: w.conj()})
    inv = invert_laplace_2d(fam, BLNormParams(delta_override=0.1, z_cap=30.0))
    np.testing.assert_allclose(inv.phi[1].values, 0.5 * Z * np.exp(-Z), atol=1e-9)
    np.testing.assert_allclose(inv.v2[1].values, -0.5j * Z * np.exp(-Z), atol=1e-9)
    assert np.isfinite(inv.constants["psi_inverse_v2"])
    zero = ModeFamily(1.0, {1: GridFunction.zeros(G, 1.0)})
    inv0 = invert_laplace_2d(zero, BLNormParams(delta_override=0.1))
    assert np.max(np.abs(inv0.v2[1].values)) == 0.0


def test_invert_laplace_2d_is_linear():
    w = _sublayer(0.1)
    params = BLNormParams(delta_override=0.1, z_cap=30.0)
    one = invert_laplace_2d(ModeFamily(0.5, {2: w}), params)
    three = invert_laplace_2d(ModeFamily(0.5, {2: w.scaled(3.0)}), params)
    np.testing.assert_allclose(three.phi[2].values, 3 * one.phi[2].values, atol=1e-12)
    assert three.constants["phi_velocity"] == pytest.approx(one.constants["phi_velocity"], rel=1e-10)
