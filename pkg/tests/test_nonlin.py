import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blinstab.errors import DomainError, UsageError
from blinstab.nonlin import (NonlinConfig, NonlinearSolver, SimSeries, load_checkpoint,
                             measure_instability, run_experiment, save_checkpoint,
                             sublayer_factor)

from conftest import REF_NU


def _synthetic(rate, seed, t_end=2000.0, n=201, nu=1e-8):
    t = np.linspace(0.0, t_end, n)
    v = seed * np.exp(rate * t)
    return SimSeries(t, v, 10 * v, 3 * v, np.zeros_like(t), nu, 0.1, complex(rate, -0.03), seed)


@pytest.fixture(scope="module")
def small_solver(ref_mode, erf_prof):
    return NonlinearSolver(erf_prof, REF_NU, ref_mode.alpha, ref_mode.grid, N_modes=4)


def test_zero_seed_stays_zero(ref_mode, erf_prof):
    cfg = NonlinConfig(N_modes=2, seed_amplitude=0.0, record_every=5)
    s = run_experiment(1.0, REF_NU, ref_mode, erf_prof, cfg, t_end=50.0)
    assert s.v_sup.max() == 0.0 and s.triple.max() == 0.0
    assert not s.flags["blowup"]


def test_small_seed_grows_at_linear_rate(ref_mode, erf_prof):
    cfg = NonlinConfig(N_modes=2, seed_amplitude=1e-12, record_every=5)
    s = run_experiment(1.0, REF_NU, ref_mode, erf_prof, cfg, t_end=200.0)
    assert s.v_sup[0] == pytest.approx(1e-12, rel=1e-6)
    rep = measure_instability(s)
    assert rep.growth_rate == pytest.approx(ref_mode.lam.real, rel=0.02)


def test_seed_has_requested_amplitude(small_solver, ref_mode):
    st_ = small_solver.seeded_state(ref_mode, 3e-9)
    v, w, triple, tail = small_solver.diagnostics(st_)
    assert v == pytest.approx(3e-9, rel=1e-3)
    assert w > v and triple > 0 and tail == 0.0


def test_single_mode_forces_only_mean_and_harmonic(small_solver, ref_mode):
    st_ = small_solver.seeded_state(ref_mode, 1e-3)
    nl = small_solver.nonlinear_term(st_)
    scale = max(np.abs(v).max() for v in nl.values())
    assert np.abs(nl[0]).max() > 1e-3 * scale
    assert np.abs(nl[2]).max() > 1e-3 * scale
    for n in (1, 3, 4):
        assert np.abs(nl[n]).max() <= 1e-10 * scale


def test_nonlinear_term_quadratic(small_solver, ref_mode):
    a = small_solver.nonlinear_term(small_solver.seeded_state(ref_mode, 1e-4))
    b = small_solver.nonlinear_term(small_solver.seeded_state(ref_mode, 2e-4))
    for n in (0, 2):
        np.testing.assert_allclose(b[n], 4 * a[n], rtol=1e-9, atol=1e-30)


def test_family_is_real(small_solver, ref_mode):
    fam = small_solver.family(small_solver.seeded_state(ref_mode, 1e-6))
    np.testing.assert_allclose(fam[-1].values, np.conj(fam[1].values))


@given(rate=st.floats(1e-4, 1e-1), seed=st.floats(1e-14, 1e-10))
@settings(max_examples=30, deadline=None)
def test_synthetic_rate_recovered(rate, seed):
    t_end = 20.0 / rate
    s = _synthetic(rate, seed, t_end=t_end)
    rep = measure_instability(s, linear_cap=seed * math.exp(0.5 * rate * t_end))
    assert rep.growth_rate == pytest.approx(rate, rel=1e-9)


def test_doubling_seed_shifts_crossing():
    rate, level = 0.002, 1e-6
    a = measure_instability(_synthetic(rate, 1e-12, 10000.0, 2001), linear_cap=1e-9,
                            levels={"x": level})
    b = measure_instability(_synthetic(rate, 2e-12, 10000.0, 2001), linear_cap=1e-9,
                            levels={"x": level})
    assert a.crossings["x"] - b.crossings["x"] == pytest.approx(math.log(2) / rate, rel=1e-6)


def test_crossing_missing_and_order_one():
    s = _synthetic(0.001, 1e-12, 100.0)
    rep = measure_instability(s, linear_cap=1.0, levels={"high": 1.0})
    assert rep.crossings["high"] is None
    assert not rep.reached_order_one


def test_fit_needs_linear_phase():
    s = _synthetic(0.01, 1.0, 100.0)
    with pytest.raises(DomainError):
        measure_instability(s, linear_cap=1e-3)


def test_sublayer_factor():
    assert sublayer_factor(_synthetic(0.01, 1e-9)) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        sublayer_factor(_synthetic(0.01, 0.0))


def test_checkpoint_round_trip(tmp_path, small_solver, ref_mode):
    state = small_solver.seeded_state(ref_mode, 1e-8)
    state = small_solver.step(small_solver.step(state, 0.5), 0.5)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, state, {"nu": REF_NU})
    back, meta = load_checkpoint(path)
    assert meta == {"nu": REF_NU}
    assert back.t == state.t and back.steps == state.steps
    for n in state.states:
        np.testing.assert_array_equal(back.states[n], state.states[n])
        np.testing.assert_array_equal(back.prev_nl[n], state.prev_nl[n])


def test_resume_matches_uninterrupted(tmp_path, ref_mode, erf_prof):
    ck = tmp_path / "run.npz"
    cfg = NonlinConfig(N_modes=2, seed_amplitude=1e-10, record_every=2, dt=1.0)
    full = run_experiment(1.0, REF_NU, ref_mode, erf_prof, cfg, t_end=8.0)
    run_experiment(1.0, REF_NU, ref_mode, erf_prof, cfg, t_end=4.0, checkpoint=ck)
    resumed = run_experiment(1.0, REF_NU, ref_mode, erf_prof, cfg, t_end=8.0, checkpoint=ck,
                             resume=True)
    assert resumed.t[-1] == pytest.approx(8.0)
    assert resumed.v_sup[-1] == pytest.approx(full.v_sup[-1], rel=1e-12)


def test_config_validation(ref_mode, erf_prof):
    with pytest.raises(UsageError):
        NonlinConfig(N_modes=0)
    with pytest.raises(DomainError):
        NonlinConfig(theta0=0.0)
    with pytest.raises(UsageError):
        run_experiment(1.0, 2 * REF_NU, ref_mode, erf_prof, NonlinConfig(N_modes=1), t_end=1.0)
