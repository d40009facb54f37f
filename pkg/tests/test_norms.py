import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from blinstab.errors import ConfigError, DomainError, UsageError
from blinstab.grid import GridFunction, ModeFamily, build_grid
from blinstab.norms import (BLNormParams, TimeScales, algebra_constant, bl_norm,
                            bl_norm_algebra_check, c_nu_alpha, critical_times, layer_weight,
                            sup_alpha_norm, triple_norm, triple_norm_parts)

G = build_grid(150, z_max=60.0)
DELTA = 0.1


def _gf(fn):
    return GridFunction.from_callable(G, fn)


def _brute(fn, beta, delta, p, P=4, z_hi=20.0, n=10 ** 6):
    """Dense-sample sup of |f| exp(beta z) / W_p written out independently."""
    z = np.concatenate([np.linspace(0, 2.0, n // 2), np.linspace(2.0, z_hi, n // 2)])
    W = np.ones_like(z)
    for q in range(1, p + 1):
        W += delta ** -q / (1 + (z / delta) ** (P - 1 + q))
    return float(np.max(np.abs(fn(z)) * np.exp(beta * z) / W))


def test_zero_function_has_zero_norm():
    assert bl_norm(GridFunction.zeros(G), BLNormParams()) == 0.0


def test_weight_cancels_exactly():
    params = BLNormParams(beta=0.3, delta_override=DELTA, z_cap=30.0)
    assert bl_norm(_gf(lambda z: np.exp(-0.3 * z)), params, p=0) == pytest.approx(1.0, abs=1e-9)


def test_layer_weight_closed_form():
    params = BLNormParams(delta_override=0.2, P_weight=4)
    z = np.array([0.0, 0.2, 1.0])
    want = 1 + 5.0 / (1 + (z / 0.2) ** 4) + 25.0 / (1 + (z / 0.2) ** 5)
    np.testing.assert_allclose(layer_weight(z, params, 2), want, rtol=1e-14)


def test_sublayer_example_against_brute_force():
    d = DELTA
    fn = lambda z: np.exp(-2 * z) * (1 + 1 / d / (1 + (z / d) ** 4))
    params = BLNormParams(beta=1.0, delta_override=d, p=1, P_weight=4, z_cap=20.0)
    oracle = _brute(fn, 1.0, d, 1)
    assert oracle == pytest.approx(1.0, abs=1e-12)  # weight cancels the layer; sup at z = 0
    assert bl_norm(_gf(fn), params) == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("fn", [
    lambda z: z * np.exp(-z),
    lambda z: np.sin(2 * z) * np.exp(-0.8 * z),
    lambda z: np.exp(-z / DELTA) / DELTA + np.exp(-z),
    lambda z: (z / 0.3) * np.exp(-z / 0.3),
])
def test_refined_sup_matches_dense_oracle(fn):
    params = BLNormParams(beta=0.25, delta_override=DELTA, z_cap=20.0)
    oracle = _brute(fn, 0.25, DELTA, 1)
    assert bl_norm(_gf(fn), params) == pytest.approx(oracle, rel=1e-7)
    # node-only sampling can only underestimate
    coarse = bl_norm(_gf(fn), params.with_(refine=False, midpoints=False))
    assert coarse <= oracle * (1 + 1e-12)


amplitudes = st.floats(0.1, 3.0)
rates = st.floats(0.5, 3.0)


def _smooth(a, r, s):
    return lambda z: a * np.exp(-r * z) * np.cos(s * z) + 0.2 * a * z * np.exp(-r * z)


@settings(max_examples=30, deadline=None)
@given(amplitudes, rates, st.floats(0.0, 4.0), st.floats(1e-3, 1e3))
def test_homogeneity(a, r, s, c):
    params = BLNormParams(delta_override=DELTA)
    f = _gf(_smooth(a, r, s))
    assert bl_norm(f.scaled(c), params) == pytest.approx(c * bl_norm(f, params), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(amplitudes, rates, st.floats(0.0, 4.0), amplitudes, rates, st.floats(0.0, 4.0))
def test_triangle_inequality(a1, r1, s1, a2, r2, s2):
    params = BLNormParams(delta_override=DELTA)
    f, g = _gf(_smooth(a1, r1, s1)), _gf(_smooth(a2, r2, s2))
    assert bl_norm(f + g, params) <= (bl_norm(f, params) + bl_norm(g, params)) * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(amplitudes, rates, st.floats(0.0, 4.0), st.integers(0, 3))
def test_containment_in_p(a, r, s, p):
    params = BLNormParams(delta_override=DELTA)
    f = _gf(lambda z: _smooth(a, r, s)(z) + a / DELTA * np.exp(-z / DELTA))
    assert bl_norm(f, params, p + 1) <= bl_norm(f, params, p) * (1 + 1e-9)


def test_algebra_trivial_cases():
    params = BLNormParams(delta_override=DELTA)
    zero = GridFunction.zeros(G)
    chk = bl_norm_algebra_check(zero, zero, params, 1, 1)
    assert (chk.lhs, chk.rhs) == (0.0, 0.0)
    one = _gf(lambda z: np.ones_like(z))
    g = _gf(lambda z: np.exp(-z) * (1 + z))
    chk = bl_norm_algebra_check(one, g, params.with_(z_cap=20.0), 0, 0)
    assert chk.holds


@settings(max_examples=40, deadline=None)
@given(amplitudes, rates, st.floats(0.0, 4.0), amplitudes, rates, st.floats(0.0, 4.0))
def test_algebra_holds_with_sharp_constant(a1, r1, s1, a2, r2, s2):
    params = BLNormParams(delta_override=DELTA, z_cap=30.0)
    f = _gf(lambda z: _smooth(a1, r1, s1)(z) + a1 / DELTA * np.exp(-z / DELTA))
    g = _gf(_smooth(a2, r2, s2))
    assert bl_norm_algebra_check(f, g, params, 1, 1).holds_with_constant


def test_algebra_constant_one_fails_for_wall_layers():
    # f = g = e^{-z/d} fills the weight at the wall, where the pointwise
    # constant W_1^2 / W_2 = (1+1/d)^2 / (1+1/d+1/d^2) exceeds 1.
    params = BLNormParams(delta_override=DELTA, z_cap=30.0)
    fn = lambda z: np.exp(-z / DELTA)
    f = _gf(fn)
    chk = bl_norm_algebra_check(f, f, params, 1, 1)
    dense = _brute(lambda z: fn(z) ** 2, 0.25, DELTA, 2) / _brute(fn, 0.25, DELTA, 1) ** 2
    assert chk.lhs / chk.rhs == pytest.approx(dense, rel=1e-7)
    assert chk.lhs / chk.rhs > 1.05
    assert not chk.holds
    pointwise = (1 + 1 / DELTA) ** 2 / (1 + 1 / DELTA + 1 / DELTA ** 2)
    assert chk.holds_with_constant
    assert algebra_constant(params, 1, 1) == pytest.approx(pointwise, rel=1e-6)


def test_sup_alpha_norm():
    params = BLNormParams(delta_override=DELTA)
    f = _gf(lambda z: np.exp(-z))
    assert sup_alpha_norm([f], params) == bl_norm(f, params)
    assert sup_alpha_norm({1: f, 2: f.scaled(2.0)}, params) == pytest.approx(2 * bl_norm(f, params))
    with pytest.raises(UsageError):
        sup_alpha_norm([], params)


def test_triple_norm_zero_and_fourier_term():
    nu = 1e-8
    params = BLNormParams(nu=nu)
    zero = ModeFamily(0.5, {1: GridFunction.zeros(G, 0.5)})
    assert triple_norm(zero, nu, params) == 0.0
    const = ModeFamily(0.5, {1: GridFunction(G, np.ones(G.N), 0.5)})
    parts = triple_norm_parts(const, nu, params.with_(z_cap=30.0))
    assert parts.dx == pytest.approx(0.5 * parts.plain)
    assert parts.dz < 1e-8
    assert parts.value == pytest.approx(parts.plain * (1 + 0.5 * nu ** 0.125), rel=1e-6)


def test_c_nu_alpha_examples():
    assert c_nu_alpha(1e-8, 2.0) == 1.0
    assert c_nu_alpha(1e-8, 0.0) == 1.0
    assert c_nu_alpha(1e-8, 1e-8 ** 0.125) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(DomainError):
        c_nu_alpha(0.0, 0.1)


def test_critical_time_examples():
    ts = critical_times(TimeScales(p_exp=2, tau=0.3, gamma0=1.0, nu=1e-4))
    assert ts.T_star == pytest.approx(1.7 * math.log(1e4) / 0.1, rel=1e-12)
    assert ts.T_star == pytest.approx(156.6, abs=0.05)
    assert critical_times(TimeScales(p_exp=1, tau=1, gamma0=1.0, nu=1e-4)).T_star == 0.0
    a = critical_times(TimeScales(p_exp=2, tau=0.625, gamma0=0.7, nu=1e-6, theta0=1.0))
    assert a.T_1 == pytest.approx(a.T_star, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 3.0), st.floats(1e-10, 1e-3), st.floats(0.1, 2.0))
def test_critical_times_ordering(p, nu, g0):
    ts = critical_times(TimeScales(p_exp=p, tau=0.3, gamma0=g0, nu=nu))
    assume(ts.T_1 > 0)
    assert ts.T_1 <= ts.T_star
    assert ts.T_star >= 0 and ts.T_nu >= 0


@pytest.mark.parametrize("kw", [{"beta": 0}, {"gamma": -1}, {"nu": 0}, {"p": -1}, {"P_weight": 1},
                                {"delta_override": 0.0}])
def test_parameter_validation(kw):
    with pytest.raises(ConfigError):
        BLNormParams(**kw)


def test_delta_scaling():
    assert BLNormParams(gamma=2.0, nu=1e-8).delta == pytest.approx(2 * 0.1, rel=1e-12)
