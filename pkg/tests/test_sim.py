import numpy as np
import pytest
from hypothesis import given, strategies as st

from aar_tilc.config import load_scenario
from aar_tilc.convergence import build_augmented, initial_state, iterate_recursion
from aar_tilc.disturbances import DrogueOffsetMap, bow_wave_force
from aar_tilc.errors import ConfigError, InsufficientSamples, SimTimeout
from aar_tilc.hose import solve_equilibrium
from aar_tilc.linalg import is_negative_definite_general
from aar_tilc.receiver import default_gains
from aar_tilc.sim import (CampaignResult, Scenario, aggregate, approach_speed_profile,
                          estimate_equilibrium, run_campaign, run_docking_attempt,
                          steady_state_counts, wilson_interval, with_overrides)
from aar_tilc.tilc import TilcGains, TilcState

M1 = np.array([[-0.25, 0, 0], [0, -0.41, -0.03], [0, -0.03, -0.24]])
M0 = np.array([-0.077, 0.639, -0.283])


def affine(**kw):
    base = dict(tier="affine", offset_map=DrogueOffsetMap(M0, M1), tilc=TilcGains(0.3, 0.8))
    base.update(kw)
    return Scenario(**base)


# ---- equilibrium estimation

def test_estimate_constant():
    t = np.linspace(0, 10, 1001)
    p = np.tile([1.0, 2.0, 3.0], (t.size, 1))
    np.testing.assert_allclose(estimate_equilibrium(t, p), [1, 2, 3], atol=1e-15)


def test_estimate_sinusoid_whole_periods():
    t = np.linspace(0, 10, 10001)
    p = np.column_stack([np.sin(2 * np.pi * t), 0.1 * np.cos(np.pi * t), 5 + 0 * t])
    np.testing.assert_allclose(estimate_equilibrium(t, p), [0, 0, 5], atol=1e-6)


def test_estimate_errors():
    with pytest.raises(InsufficientSamples):
        estimate_equilibrium([0.0], [[1, 2, 3]])
    with pytest.raises(InsufficientSamples):
        estimate_equilibrium([0.0, 0.5], [[1, 2, 3], [1, 2, 3]])


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_estimate_translation(a, b, c):
    t = np.linspace(0, 2, 201)
    p = np.column_stack([np.sin(t), t, t ** 2])
    shift = np.array([a, b, c])
    np.testing.assert_allclose(estimate_equilibrium(t, p + shift),
                               estimate_equilibrium(t, p) + shift, atol=1e-9)


# ---- affine tier

def test_affine_matches_recursion_without_noise():
    scn = affine()
    res = run_campaign(scn, 30)
    it = build_augmented(M1, 0.3, 0.8)
    X = iterate_recursion(it, initial_state(M1, M0, np.zeros(3), np.zeros(3)), 29).X
    D = np.array([a.p_dr_T - a.p_pr_T for a in res.attempts])
    E = np.array([a.e_pr for a in res.attempts])
    np.testing.assert_allclose(D, X[:, :3], atol=1e-8)
    np.testing.assert_allclose(E, X[:, 3:], atol=1e-8)


def test_affine_matches_recursion_with_noise():
    from aar_tilc.convergence import noise_vectors
    from aar_tilc.sim import affine_noise
    scn = affine(noise=with_overrides(affine().noise, B_dr=0.03, B_pr=0.02))
    K = 20
    res = run_campaign(scn, K)
    v = [affine_noise(scn, k) for k in range(1, K + 1)]
    v_dr, v_pr = np.array([a for a, _ in v]), np.array([b for _, b in v])
    it = build_augmented(M1, 0.3, 0.8)
    X0 = initial_state(M1, M0, np.zeros(3), np.zeros(3), v_dr[0], v_pr[0])
    X = iterate_recursion(it, X0, K - 1, noise_vectors(M1, v_dr, v_pr, "exact")).X
    D = np.array([a.p_dr_T - a.p_pr_T for a in res.attempts])
    np.testing.assert_allclose(D, X[:, :3], atol=1e-8)


def test_affine_converged_state_docks():
    scn = affine()
    state = run_campaign(scn, 60).final_state
    log = run_docking_attempt(scn, state)
    assert log.radial_error < 1e-3 and log.success


def test_affine_needs_map():
    with pytest.raises(ConfigError):
        Scenario(tier="affine")


# ---- physical tier

def test_undisturbed_docks_first_time():
    scn = Scenario(attempts=1)
    log = run_campaign(scn).attempts[0]
    assert log.success and log.radial_error < 0.05
    assert 0.45 <= log.closure_speed <= 1.05
    assert log.state_after.k == 1


def test_deterministic_rerun():
    scn = load_scenario()
    a = run_docking_attempt(scn, TilcState.zero())
    b = run_docking_attempt(scn, TilcState.zero())
    assert a.T == b.T
    assert np.array_equal(a.p_dr_T, b.p_dr_T) and np.array_equal(a.trajectory, b.trajectory)
    c = run_docking_attempt(with_overrides(scn, seed=scn.seed + 1), TilcState.zero())
    assert not np.array_equal(a.p_dr_e0, c.p_dr_e0)


def test_trajectory_decimation():
    scn = Scenario(attempts=1)
    log = run_docking_attempt(scn, TilcState.zero())
    tr = log.trajectory
    standby = tr[tr[:, 7] == 0]
    approach = tr[tr[:, 7] == 1]
    np.testing.assert_allclose(np.diff(standby[:, 0]), 10 * scn.dt, atol=1e-9)
    tail = approach[approach[:, 0] >= approach[-1, 0] - 0.5]
    np.testing.assert_allclose(np.diff(tail[:, 0]), scn.dt, atol=1e-9)
    assert np.all(np.diff(tr[:, 0]) > 0)


def test_closure_speed_profile():
    scn = load_scenario()
    log = run_docking_attempt(scn, TilcState.zero())
    tr = log.trajectory
    ap = tr[tr[:, 7] == 1]
    # evenly spaced decimated part only
    t, x = ap[:, 0], ap[:, 4:7]
    keep = t < t[-1] - 0.5
    v = approach_speed_profile(t[keep], x[keep])
    target = scn.autopilot.closure_speed
    assert np.all(np.abs(v - target) <= 0.1 * target)


def test_timeout_is_logged_failure():
    scn = Scenario(attempts=1, standby_offset=20.0, max_attempt_duration=20.0)
    res = run_campaign(scn)
    a = res.attempts[0]
    assert a.timeout and not a.success and a.summary()["radial_error"] is None
    assert a.state_after is a.state_before
    with pytest.raises(SimTimeout):
        run_docking_attempt(scn, TilcState.zero())


def test_scenario_validation():
    with pytest.raises(ConfigError):
        Scenario(R_C=0)
    with pytest.raises(ConfigError):
        Scenario(dt=0.05)
    with pytest.raises(ConfigError):
        Scenario(tilc=TilcGains(1.0, 0.5))
    with pytest.raises(ConfigError):
        Scenario(autopilot=default_gains(closure_speed=0.75), attempts=0)


# ---- statistics

def test_wilson_examples():
    lo, hi = wilson_interval(0, 0)
    assert (lo, hi) == (0.0, 1.0)
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
    lo, hi = wilson_interval(10, 10)
    assert hi == pytest.approx(1.0) and lo == pytest.approx(0.7225, abs=1e-4)


class _A:
    def __init__(self, k, success):
        self.k, self.success, self.timeout, self.radial_error = k, success, False, 0.1


def _result(flags, run=0):
    return CampaignResult([_A(i + 1, f) for i, f in enumerate(flags)], run)


def test_steady_state_counts():
    assert steady_state_counts(_result([0, 1, 1, 0, 1])) == (2, 3)
    assert steady_state_counts(_result([0, 0, 0])) == (0, 3)
    assert steady_state_counts(_result([1])) == (0, 0)


def test_aggregate_pools_runs():
    runs = [_result([0, 1, 1, 1]), _result([1, 0, 1, 1], 1), _result([0, 0, 0, 0], 2)]
    for r in runs:
        r.summary = lambda r=r: {"run": r.run}
    rep = aggregate(runs)
    assert rep["steady_state_successes"] == 2 + 2 + 0
    assert rep["steady_state_attempts"] == 2 + 3 + 4
    assert rep["runs_without_success"] == 1
    assert rep["overall_success_rate"] == pytest.approx(6 / 12)


# ---- static drogue response to the bow wave

def _static_jacobian():
    scn = load_scenario()
    p0 = solve_equilibrium(scn.hose)[1]

    def off(D):
        return solve_equilibrium(scn.hose, bow_wave_force(D, scn.bow))[1] - p0
    h = 1e-3
    return np.column_stack([(off(h * e) - off(-h * e)) / (2 * h) for e in np.eye(3)])


def test_static_lateral_response_negative_definite():
    J = _static_jacobian()
    assert is_negative_definite_general(J[1:, 1:])


@pytest.mark.xfail(reason="the hose is nearly inextensible along its axis, so the static "
                          "x-z compliance is close to singular and the full 3x3 response "
                          "is not robustly negative definite", strict=False)
def test_static_full_response_negative_definite():
    J = _static_jacobian()
    assert np.max(np.linalg.eigvalsh(0.5 * (J + J.T))) < -1e-2
