import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overdet.errors import DegenerateCritical, HorizonTooShort, InvalidParameters
from overdet.radial_ode import (
    OdeSolution,
    ProblemParams,
    RadialProfile,
    build_profile,
    integrate_ivp,
    locate_critical_points,
    nonlinearity,
    series_coefficients,
)

import oracles

# (r_1, mu_1, u(mu_1)) from oracles.richardson_rk4 (fixed-step RK4, h = 2e-3 and 1e-3)
FROZEN_RK4 = {
    (3, 3.0): (4.35287459594612, 7.43919469882548, -0.18479470383605545),
    (3, 4.0): (6.896848619378386, 15.515113311039462, -0.14019804869953417),
    (2, 4.0): (3.573900981927335, 7.234938587554428, -0.4217217190106238),
}
TAN_ROOTS = (4.493409457909063, 7.725251836937707)


# -- parameters ------------------------------------------------------------

def test_params_accept_admissible_range():
    ProblemParams(3, 3.0)
    ProblemParams(2, 7.0)
    ProblemParams(4, 3.9)


@pytest.mark.parametrize("N,p", [(3, 6.0), (3, 2.0), (3, 1.5), (4, 4.0), (1, 3.0), (2, 2.0)])
def test_params_reject_outside_range(N, p):
    with pytest.raises(InvalidParameters):
        ProblemParams(N, p)


def test_linear_limit_needs_oracle_mode():
    assert ProblemParams(3, 2.0, oracle_mode=True).linear_limit


@pytest.mark.parametrize("kw", [{"R_max": 0.0}, {"tol_ode": -1.0}, {"tol_root": 0.0}])
def test_params_reject_bad_numerics(kw):
    with pytest.raises(InvalidParameters):
        ProblemParams(3, 3.0, **kw)


def test_params_round_trip():
    p = ProblemParams(2, 4.5, R_max=30.0, tol_ode=1e-10, oracle_mode=False)
    assert ProblemParams.from_dict(p.to_dict()) == p


# -- nonlinearity ------------------------------------------------------------

def test_nonlinearity_examples():
    assert nonlinearity(0.0, 3.0) == (0.0, 0.0)
    f, df = nonlinearity(-2.0, 3.0)
    assert (f, df) == (-4.0, 4.0)
    f, df = nonlinearity(0.5, 2.5)
    assert f == pytest.approx(0.5**0.5 * 0.5, abs=1e-15)
    assert df == pytest.approx(1.5 * 0.5**0.5, abs=1e-15)
    assert f == pytest.approx(0.353553, abs=1e-6)
    assert df == pytest.approx(1.060660, abs=1e-6)


@given(u=st.floats(-1e3, 1e3), p=st.floats(2.0, 6.0))
def test_nonlinearity_odd_and_monotone(u, p):
    f, df = nonlinearity(u, p)
    g, dg = nonlinearity(-u, p)
    assert f == -g
    assert df == dg >= 0


# -- linear limit ------------------------------------------------------------

def test_linear_limit_is_sinc(sol_linear):
    r = np.linspace(0.5, 10.0, 40)
    u, du = sol_linear.dense_eval(r)
    assert np.max(np.abs(u - np.sin(r) / r)) < 1e-10
    assert np.max(np.abs(du - (r * np.cos(r) - np.sin(r)) / r**2)) < 1e-10


def test_linear_limit_zeros_and_critical_points(sol_linear):
    assert abs(sol_linear.zeros[0] - math.pi) < 1e-9
    assert abs(sol_linear.zeros[1] - 2 * math.pi) < 1e-9
    mus = locate_critical_points(sol_linear, 2)
    assert mus[0] == pytest.approx(oracles.tan_root(1), abs=1e-8)
    assert mus[1] == pytest.approx(oracles.tan_root(2), abs=1e-8)
    assert oracles.tan_root(1) == TAN_ROOTS[0]
    assert oracles.tan_root(2) == TAN_ROOTS[1]


def test_locate_zero_branches_is_empty(sol_linear):
    assert locate_critical_points(sol_linear, 0) == []


def test_linear_profile_closed_form(sol_linear):
    prof = build_profile(sol_linear, 1)
    mu = prof.mu_m
    r = prof.grid[1:]
    assert np.max(np.abs(prof.U_values[1:] - np.sin(mu * r) / (mu * r))) < 1e-10
    assert prof.c_m == pytest.approx(math.sin(mu) / mu, abs=1e-10)
    assert prof.c_m == pytest.approx(-0.217234, abs=1e-6)


# -- nonlinear trajectories -------------------------------------------------

@pytest.mark.parametrize("key", sorted(FROZEN_RK4))
def test_agrees_with_rk4_oracle(key):
    N, p = key
    sol = integrate_ivp(ProblemParams(N, p))
    r1, mu1, c1 = FROZEN_RK4[key]
    assert abs(sol.zeros[0] - r1) < 1e-8
    assert abs(sol.critical_points[0] - mu1) < 1e-8
    assert abs(sol.critical_values[0] - c1) < 1e-8


def test_rk4_oracle_freeze_is_current():
    got = oracles.richardson_rk4(3, 3.0)[0]
    assert np.allclose(got, FROZEN_RK4[(3, 3.0)], rtol=0, atol=1e-13)


def test_initial_conditions(sol33):
    assert sol33.u_values[0] == 1.0 and sol33.du_values[0] == 0.0
    u, du = sol33.dense_eval(np.array([0.0]))
    assert u[0] == 1.0 and du[0] == 0.0


@pytest.mark.parametrize("N,p", [(2, 4.0), (3, 3.0), (3, 4.0)])
def test_origin_curvature_fit(N, p):
    sol = integrate_ivp(ProblemParams(N, p))
    r = np.linspace(0.0, 2e-3, 21)
    u = sol.dense_eval(r)[0]
    coef = np.polyfit(r**2, u - 1.0, 2)
    assert abs(2 * coef[1] + 1.0 / N) < 1e-8


def test_series_matches_integrator(sol33):
    a, b, c = series_coefficients(3, 3.0)
    assert a == -1 / 6
    r = 0.05
    u = 1 + a * r**2 + b * r**4 + c * r**6
    assert abs(sol33.dense_eval(np.array([r]))[0][0] - u) < 1e-11


def test_critical_points_are_nondegenerate(sol33):
    for mu, val in zip(sol33.critical_points, sol33.critical_values):
        assert abs(sol33.dense_eval(np.array([mu]))[1][0]) < 1e-10
        assert abs(val) > 1e-3


def test_interlacing_and_alternation(sol33):
    z, mu = sol33.zeros, sol33.critical_points
    for m in range(min(len(z) - 1, len(mu))):
        assert z[m] < mu[m] < z[m + 1]
    signs = np.sign(sol33.critical_values)
    assert np.all(signs[1:] == -signs[:-1])


def test_energy_non_increasing(sol33):
    E = sol33.energy()
    assert np.all(np.diff(E) <= 1e-12)


@pytest.mark.parametrize("tol", [1e-10, 1e-11, 1e-12])
def test_tolerance_self_convergence(tol):
    coarse = integrate_ivp(ProblemParams(3, 3.0, tol_ode=tol))
    fine = integrate_ivp(ProblemParams(3, 3.0, tol_ode=tol / 2))
    assert abs(coarse.zeros[0] - fine.zeros[0]) < tol
    # u'(mu) = 0 is conditioned by 1/|u''(mu)| (~30 here)
    cond = 1.0 / abs(coarse.jet(coarse.critical_points[0], order=2)[2])
    assert abs(coarse.critical_points[0] - fine.critical_points[0]) < 10 * cond * tol


def test_jet_matches_ode(sol33):
    r = np.linspace(0.001, 20.0, 50)
    u, du, d2, d3 = sol33.jet(r, order=3)
    assert np.max(np.abs(d2 + 2 / r * du + np.abs(u) * u)) < 1e-12
    h = 1e-4
    fd3 = (sol33.jet(r + h, order=2)[2] - sol33.jet(r - h, order=2)[2]) / (2 * h)
    assert np.max(np.abs(fd3 - d3)) < 1e-6


def test_horizon_too_short():
    with pytest.raises(HorizonTooShort):
        integrate_ivp(ProblemParams(3, 3.0, R_max=3.0))
    sol = integrate_ivp(ProblemParams(3, 3.0, R_max=10.0))
    with pytest.raises(HorizonTooShort):
        locate_critical_points(sol, 3)


def test_degenerate_critical_value_detected(sol33):
    bad = OdeSolution(sol33.params, sol33.nodes, sol33.u_values, sol33.du_values,
                      sol33.zeros, sol33.critical_points, [0.0] + sol33.critical_values[1:])
    with pytest.raises(DegenerateCritical):
        locate_critical_points(bad, 1)


def test_jet_outside_horizon(sol33):
    with pytest.raises(ValueError):
        sol33.jet(np.array([60.0]))


# -- profiles -------------------------------------------------------------

@pytest.mark.parametrize("m", [1, 2])
def test_profile_invariants(sol33, m):
    prof = build_profile(sol33, m)
    mu = sol33.critical_points[m - 1]
    assert prof.mu_m == mu
    r = np.linspace(0, 1, 33)
    assert np.max(np.abs(prof.evaluate(r, 0)[0] - sol33.dense_eval(mu * r)[0])) < 1e-14
    assert prof.U_values[0] == 1.0
    assert abs(prof.dU_values[0]) == 0.0
    assert abs(prof.dU_values[-1]) < 1e-9
    assert prof.c_m == prof.U_values[-1] != 0
    assert abs(prof.d2U_at_1 - prof.closed_form_d2U_at_1()) < 1e-8
    assert len(prof.interior_zeros) == m
    assert np.all(np.diff(prof.grid) > 0)


def test_d2U_at_1_finite_difference(profile1):
    h = 1e-4
    r = np.array([1 - h, 1.0, 1 + h])
    U = profile1.extended_eval(r)
    fd = (U[0] - 2 * U[1] + U[2]) / h**2
    assert abs(fd - profile1.d2U_at_1) < 1e-5


def test_dense_eval_domain(profile1):
    with pytest.raises(ValueError):
        profile1.dense_eval(np.array([1.2]))
    assert np.isfinite(profile1.extended_eval(np.array([1.2]))).all()


def test_uniform_export(profile1):
    r, U, dU = profile1.uniform_export(65)
    assert r[0] == 0 and r[-1] == 1 and len(U) == len(dU) == 65
    assert U[-1] == pytest.approx(profile1.c_m, abs=1e-14)


def test_solution_round_trip(sol33):
    back = OdeSolution.from_dict(sol33.to_dict())
    assert back == sol33
    r = np.linspace(0.5, 40.0, 17)
    assert np.max(np.abs(back.dense_eval(r)[0] - sol33.dense_eval(r)[0])) < 1e-4


def test_profile_round_trip(profile2, sol33):
    back = RadialProfile.from_dict(profile2.to_dict(), solution=sol33)
    assert back == profile2
    assert np.allclose(back.evaluate(np.array([0.3]), 0), profile2.evaluate(np.array([0.3]), 0))
    with pytest.raises(ValueError):
        RadialProfile.from_dict(profile2.to_dict()).evaluate(np.array([0.5]))


def test_determinism():
    a = integrate_ivp(ProblemParams(3, 3.0, R_max=20.0))
    b = integrate_ivp(ProblemParams(3, 3.0, R_max=20.0))
    assert a.to_dict() == b.to_dict()


@settings(max_examples=6, deadline=None)
@given(N=st.sampled_from([2, 3, 4]), frac=st.floats(0.05, 0.5))
def test_property_interlacing_over_admissible_range(N, frac):
    # near the critical exponent the oscillations spread out beyond any desk horizon
    hi = 8.0 if N == 2 else 2 * N / (N - 2)
    p = 2.0 + frac * (hi - 2.0)
    sol = integrate_ivp(ProblemParams(N, p, R_max=300.0, tol_ode=1e-10, tol_root=1e-10))
    mus = locate_critical_points(sol, 2)
    z = sol.zeros
    assert z[0] < mus[0] < z[1] < mus[1]
    assert np.sign(sol.critical_values[0]) == -np.sign(sol.critical_values[1])
    assert np.all(np.diff(sol.energy()) <= 1e-9)
