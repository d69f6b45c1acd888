import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermcont import estimates as est
from hermcont.solver import (NewtonFailure, ScalarProblem, SolverConfig, SphereBackend,
                             TorusBackend, continue_in_t, maximal_time, normalization_constant,
                             solve_at, t_schedule)


def _phi0_1d(X):
    return -1.2 * np.cos(X[:, 0])


def _phi0_2d(X):
    return -0.8 * np.cos(X[:, 0]) - 0.4 * np.sin(X[:, 0] + X[:, 1])


def test_t_schedule_shapes():
    s = t_schedule(0.0, 1e3, 25, "log")
    assert s[0] == 0.0 and s[1] == pytest.approx(1e-3) and s[-1] == pytest.approx(1e3)
    assert len(s) == 25 and all(b > a for a, b in zip(s, s[1:]))
    assert t_schedule(0.5, 1.0, 3, "linear") == pytest.approx((0.5, 0.75, 1.0))
    with pytest.raises(ValueError):
        t_schedule(0, 1, 0)


@pytest.mark.parametrize("kw", [dict(newton_tol=0), dict(damping=1.0), dict(t_schedule=()),
                                dict(t_schedule=(-1.0,)), dict(t_schedule=(0.0, 1.0, 1.0))])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_problem_validation():
    with pytest.raises(ValueError):
        ScalarProblem("normalized", SphereBackend(32))
    with pytest.raises(ValueError):
        ScalarProblem("other", TorusBackend(1, 16))
    with pytest.raises(ValueError):
        TorusBackend(3, 8)


@pytest.mark.parametrize("variant", ["normalized", "unnormalized"])
def test_flat_torus_stays_flat(variant):
    prob = ScalarProblem(variant, TorusBackend(2, 16))
    res = continue_in_t(prob, SolverConfig(t_schedule=t_schedule(0, 1e3, 8)))
    assert res.completed
    for s in res.states:
        assert np.all(s.phi == 0)
        assert est.contracted_scalar_identity(s, prob) == 0


def test_newton_residuals_strictly_decrease():
    prob = ScalarProblem("normalized", TorusBackend(1, 64, _phi0_1d))
    st_ = solve_at(prob, 3.0, prob.backend.phi0 / 4, SolverConfig())
    h = st_.history
    assert len(h) >= 2 and all(b < a for a, b in zip(h, h[1:]))


def test_restart_from_perturbed_state_is_unique():
    prob = ScalarProblem("normalized", TorusBackend(2, 32, _phi0_2d))
    cfg = SolverConfig()
    base = solve_at(prob, 5.0, np.zeros(prob.backend.grid.size), cfg)
    X = prob.backend.X
    again = solve_at(prob, 5.0, base.phi + 0.01 * np.cos(X[:, 1]) + 0.003, cfg)
    assert np.max(np.abs(again.phi - base.phi)) < 1e-8


def test_normalized_metric_is_rescaled_unnormalized():
    # ω_unnorm(t) solves ω = ω₀ - t Ric ω, so ω_unnorm/(t+1) solves the normalized equation
    be = TorusBackend(1, 64, _phi0_1d)
    t = 2.0
    cfg = SolverConfig()
    un = solve_at(ScalarProblem("unnormalized", be), t, np.zeros(64), cfg)
    no = solve_at(ScalarProblem("normalized", be), t, be.phi0 / (t + 1), cfg)
    assert np.allclose(no.omega.values, un.omega.values / (t + 1), atol=1e-9)


def test_torus_normalization_and_contracted_identity():
    prob = ScalarProblem("normalized", TorusBackend(2, 32, _phi0_2d))
    s = solve_at(prob, 10.0, np.zeros(prob.backend.grid.size), SolverConfig())
    assert normalization_constant(s, prob) < 1e-10
    assert est.contracted_scalar_identity(s, prob) < 1e-5
    with pytest.raises(ValueError):
        normalization_constant(s.__class__(0.0, s.phi, s.omega, 0.0, 0), prob)
    with pytest.raises(ValueError):
        normalization_constant(s, ScalarProblem("unnormalized", prob.backend))


def test_flat_normalization_grows_linearly_with_shift():
    prob = ScalarProblem("normalized", TorusBackend(1, 16))
    s = solve_at(prob, 3.0, np.zeros(16), SolverConfig())
    assert normalization_constant(s, prob) < 1e-10
    vals = []
    for eps in (1e-5, 2e-5):
        shifted = s.__class__(s.t, s.phi + eps, s.omega, 0.0, 0)
        vals.append(normalization_constant(shifted, prob))
    assert vals[1] == pytest.approx(2 * vals[0], rel=1e-3)


def test_round_sphere_closed_form():
    prob = ScalarProblem("unnormalized", SphereBackend(256))
    assert maximal_time(prob) == pytest.approx(1.0, abs=1e-12)
    cfg = SolverConfig(t_schedule=t_schedule(0.1, 0.99, 12, "linear"))
    res = continue_in_t(prob, cfg)
    assert res.completed
    for s in res.states:
        assert np.max(np.abs(s.omega.values[:, 0, 0].real / (1 - s.t) - 1)) < 1e-6
    with pytest.raises(NewtonFailure):
        solve_at(prob, 1.0, res.states[-1].phi, cfg)


@settings(max_examples=8)
@given(st.floats(-0.4, 0.4), st.floats(0.0, 0.3))
def test_sphere_maximal_time_by_quadrature(a, b):
    # ∫ρ R₀ dx = ∫(1 - ½ L log ρ) = 2, so T = ∫ρ/2 = 1 + b/3 for ρ = 1 + a x + b x²
    be = SphereBackend(256, rho=[1.0, a, b])
    assert be.maximal_time() == pytest.approx(1 + b / 3, rel=1e-5)


def test_sphere_singularity_detected_near_T():
    be = SphereBackend(256, rho=[1.0, 0.3, 0.2])
    prob = ScalarProblem("unnormalized", be)
    T = be.maximal_time()
    res = continue_in_t(prob, SolverConfig(t_schedule=t_schedule(0.1, 1.2, 12, "linear")))
    assert not res.completed
    assert res.failure_time <= T * (1 + 1e-3)
    assert res.states[-1].t > 0.97 * T


def test_torus_runs_far_and_reports_infinite_T():
    prob = ScalarProblem("unnormalized", TorusBackend(1, 64, _phi0_1d))
    assert math.isinf(maximal_time(prob))
    res = continue_in_t(prob, SolverConfig(t_schedule=t_schedule(0, 1e3, 12)))
    assert res.completed and res.states[-1].t == pytest.approx(1e3)


def test_non_positive_guess_is_a_newton_failure():
    prob = ScalarProblem("normalized", TorusBackend(1, 32))
    X = prob.backend.X
    with pytest.raises(NewtonFailure):
        solve_at(prob, 1.0, 10 * np.cos(X[:, 0]), SolverConfig())


def test_snapshot_is_json_ready():
    prob = ScalarProblem("normalized", TorusBackend(1, 8))
    s = solve_at(prob, 1.0, np.zeros(8), SolverConfig())
    snap = s.snapshot()
    assert snap["t"] == 1.0 and snap["domain"]["kind"] == "periodic-grid"
    assert len(snap["phi"]) == 8
