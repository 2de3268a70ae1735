"""Paths, quadrature, branch tracking and the ODE integrator."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import airy

from bltk.contour import (CircleArc, Polyline, RaySegment, branch_sqrt, circle, dopri5,
                          gauss_kronrod, integrate_along_path, integrate_along_path_full,
                          path_from_csv, path_from_dict, path_to_csv, path_to_dict, segment,
                          solve_linear_ode, wronskian, wronskian_drift)
from bltk.errors import BranchError, NonConvergenceError, PathMismatchError, PreconditionError


# -- quadrature -------------------------------------------------------------------------

def test_residue_of_reciprocal_on_unit_circle():
    v = integrate_along_path("1/z", circle(0, 1), tol=1e-12)
    assert abs(v - 2j * math.pi) <= 1e-12


def test_identity_on_unit_segment():
    assert abs(integrate_along_path("z", segment(0, 1), tol=1e-12) - 0.5) <= 1e-12


def test_sqrt_on_positive_axis():
    assert abs(integrate_along_path("sqrt(z)", segment(0, 4), tol=1e-10) - 16 / 3) <= 1e-10


def test_gauss_kronrod_reports_error_and_panels():
    res = gauss_kronrod(lambda x: np.cos(x), [0.0, math.pi / 2], tol=1e-13)
    assert abs(res.value - 1.0) < 1e-13
    assert res.error <= 1e-13 and res.panels >= 1


def test_quadrature_through_pole_fails():
    with pytest.raises(Exception):
        integrate_along_path("1/z", segment(-1, 1), tol=1e-10)


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=14),
       st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_polynomials_of_design_degree_are_exact(coeffs, a, b):
    if abs(b - a) < 1e-3:
        b = a + 1
    f = lambda z: sum(c * z ** k for k, c in enumerate(coeffs))  # noqa: E731
    exact = sum(c * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(coeffs))
    got = integrate_along_path(f, segment(a, b), tol=1e-10)
    assert abs(got - exact) <= 1e-10 * max(1.0, abs(exact))


@given(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
       st.sampled_from(["exp(z)*cos(3*z)", "1/(z^2 + 16)", "sin(z)^2", "sqrt(z + 5)"]))
def test_reversal_negates(a, b, expr):
    if abs(b - a) < 1e-3:
        b = a + 1
    p = Polyline([a, (a + b) / 2 + 0.3j, b])
    fwd = integrate_along_path(expr, p, tol=1e-11)
    back = integrate_along_path(expr, p.reversed(), tol=1e-11)
    assert abs(fwd + back) <= 2e-11 * max(1.0, abs(fwd))


def test_full_result_carries_last_panel():
    res = integrate_along_path_full("exp(-z)", RaySegment(0.0, 0.0, 30.0), tol=1e-12)
    assert abs(res.value - (1 - math.exp(-30))) < 1e-12
    assert res.last_panel < 1e-6


# -- paths ---------------------------------------------------------------------------

def test_path_serialisation_round_trip():
    for p in (Polyline([0, 1 + 1j, 2]), RaySegment(0.3, 1.0, 4.0), CircleArc(1j, 2.0, 0.0, 1.0)):
        q = path_from_dict(path_to_dict(p))
        assert np.allclose(q.sample(5), p.sample(5))
    poly = Polyline([0, 1 + 1j, 2 - 0.5j])
    assert np.allclose(path_from_csv(path_to_csv(poly)).points, poly.points)


def test_degenerate_path_rejected():
    with pytest.raises(PreconditionError):
        Polyline([1.0])


# -- branch-continuous square roots ----------------------------------------------------

def test_branch_on_positive_axis_is_positive_root():
    b = branch_sqrt("z", segment(1, 4))
    x = np.linspace(1, 4, 31)
    assert np.allclose(b.at((x - 1) / 3), np.sqrt(x), rtol=1e-12)


def test_monodromy_flips_sign():
    b = branch_sqrt("z", circle(0, 1))
    assert abs(b.terminal - (-1)) < 1e-10


def test_path_through_zero_raises():
    with pytest.raises(BranchError):
        branch_sqrt("z", segment(-1 - 0j, 1))


@given(st.sampled_from(["z", "z^2 + 3", "exp(z)", "z^3 - 1 + 2*i"]),
       st.floats(0.5, 2.5), st.floats(0.0, 6.0))
def test_branch_squared_is_A(expr, radius, arg1):
    from bltk.expr import as_function
    A = as_function(expr)
    path = CircleArc(0.3 + 0.1j, radius, 0.0, arg1 + 0.1)
    try:
        b = branch_sqrt(A, path)
    except BranchError:
        return
    z = path.point(b.taus)
    a = np.asarray(A(z))
    assert np.max(np.abs(b.values ** 2 - a) / np.abs(a)) <= 1e-10


# -- ODEs ----------------------------------------------------------------------------

def test_sine_at_quarter_period():
    tr = solve_linear_ode(["1", 0], 2, segment(0, math.pi / 2), [0, 1], tol=1e-10)
    assert abs(tr.final[0] - 1) <= 1e-8


def _airy_series(z, n_terms=60):
    # y'' = -z y with y(0) = 1, y'(0) = 0: a_{k+3} = -a_k / ((k+2)(k+3))
    a = np.zeros(3 * n_terms + 3, dtype=complex)
    a[0] = 1
    for k in range(0, len(a) - 3):
        a[k + 3] = -a[k] / ((k + 2) * (k + 3))
    return sum(c * z ** k for k, c in enumerate(a))


def test_airy_type_equation_matches_power_series():
    tr = solve_linear_ode(["z", 0], 2, segment(0, 2), [1, 0], tol=1e-10)
    assert abs(tr.final[0] - _airy_series(2.0)) <= 1e-8


def test_linear_solution_of_trivial_equation():
    tr = solve_linear_ode([0, 0], 2, segment(0, 1 + 1j), [3, 2], tol=1e-10)
    assert abs(tr.final[0] - (3 + 2 * (1 + 1j))) <= 1e-12


def test_step_errors_within_tolerance():
    tr = solve_linear_ode(["z", 0], 2, segment(0, 5), [1, 0], tol=1e-9)
    assert np.all(tr.step_errors <= 1e-9)


def test_cos_sin_wronskian_drift():
    tr = solve_linear_ode(["1", 0], 2, segment(0, 10), np.eye(2), tol=1e-10)
    assert wronskian_drift(tr.column(0), tr.column(1)) <= 1e-9


def test_airy_pair_against_scipy_and_wronskian():
    # y'' + z y = 0 on the positive axis is solved by Ai(-x), Bi(-x)
    ai, aip, bi, bip = airy(0.0)
    y0 = np.array([[ai, bi], [-aip, -bip]], dtype=complex)
    tr = solve_linear_ode(["z", 0], 2, segment(0, 20), y0, tol=1e-10)
    a20, ap20, b20, bp20 = airy(-20.0)
    assert abs(tr.final[0, 0] - a20) < 1e-8
    assert abs(tr.final[0, 1] - b20) < 1e-8
    assert wronskian_drift(tr.column(0), tr.column(1)) <= 1e-8
    W = wronskian(tr.column(0), tr.column(1))
    assert abs(W[0] + 1 / math.pi) < 1e-14  # d/dx of Ai(-x) flips the sign of W(Ai, Bi)


def test_drift_of_different_paths_is_error():
    t1 = solve_linear_ode(["1", 0], 2, segment(0, 1), [1, 0])
    t2 = solve_linear_ode(["1", 0], 2, segment(0, 2), [0, 1])
    with pytest.raises(PathMismatchError):
        wronskian_drift(t1, t2)


@given(st.floats(0.5, 3.0), st.floats(-math.pi, math.pi))
def test_abel_conservation_bound(length, theta):
    tol = 1e-9
    path = segment(0, length * complex(math.cos(theta), math.sin(theta)))
    tr = solve_linear_ode(["z^2 - 1", 0], 2, path, np.eye(2), tol=tol)
    assert wronskian_drift(tr.column(0), tr.column(1)) <= 100 * tol * length


def test_third_order_system():
    # y''' - y = 0 with y = e^z
    tr = solve_linear_ode([-1, 0, 0], 3, segment(0, 1), [1, 1, 1], tol=1e-11)
    assert abs(tr.final[0] - math.e) < 1e-9


def test_trajectory_csv_columns():
    tr = solve_linear_ode(["1", 0], 2, segment(0, 1), [0, 1])
    header = tr.to_csv().splitlines()[0]
    assert header == "z.re,z.im,y.re,y.im,dy.re,dy.im,step_error"


def test_dopri5_lands_on_stops():
    y, hit = dopri5(lambda t, y: y, 0.0, 1.0, np.array([1.0 + 0j]), 1e-12, stops=[0.25, 0.5])
    assert abs(hit[0.5][0] - math.exp(0.5)) < 1e-10
    assert abs(y[0] - math.e) < 1e-10


def test_singular_coefficient_step_underflow():
    with pytest.raises(NonConvergenceError):
        solve_linear_ode(["1/(z-1)^4", 0], 2, segment(0, 1), [1, 0], tol=1e-10, max_steps=20000)
