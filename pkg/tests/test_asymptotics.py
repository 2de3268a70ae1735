"""Critical rays, Liouville variable, decay paths, tail integrals and Picard ray solutions."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bltk.asymptotics import (critical_rays, liouville_map, picard_ray_solution, tail_integral,
                              trace_decay_path, trace_decay_path_full, verify_decay)
from bltk.contour import segment
from bltk.errors import PreconditionError

# -- critical rays -------------------------------------------------------------


def test_linear_coefficient_rays():
    rays = critical_rays("z")
    assert np.allclose(rays, [0.0, 2 * math.pi / 3, 4 * math.pi / 3], atol=1e-15)


def test_quadratic_coefficient_rays():
    rays = critical_rays("-4*z^2")
    assert np.allclose(rays, [math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4, 7 * math.pi / 4],
                       atol=1e-14)


def test_constant_coefficient_has_no_rays():
    with pytest.raises(PreconditionError):
        critical_rays("5")


def test_non_polynomial_is_rejected():
    with pytest.raises(PreconditionError):
        critical_rays("exp(z)")


coef = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False,
                          allow_infinity=False)


@given(st.lists(coef, min_size=2, max_size=6))
def test_critical_rays_make_leading_term_positive(coeffs):
    n = len(coeffs) - 1
    rays = critical_rays(coeffs)
    assert len(rays) == n + 2
    assert all(0 <= t < 2 * math.pi for t in rays)
    assert rays == sorted(rays)
    for t in rays:
        w = coeffs[-1] * cmath.exp(1j * (n + 2) * t)
        assert w.real > 0 and abs(w.imag) <= 1e-9 * abs(w)


# -- Liouville variable -----------------------------------------------------------


def test_liouville_of_linear_coefficient():
    assert abs(liouville_map("z", 1, segment(1, 4)) - 14 / 3) < 1e-12


@pytest.mark.parametrize("x", [1.0, 5.0, 12.0])
def test_liouville_of_exponential(x):
    Z = liouville_map("exp(z)", 0, segment(0, x))
    assert abs(Z - 2 * (math.exp(x / 2) - 1)) <= 1e-12 * math.exp(x / 2)


def test_liouville_of_constant():
    assert abs(liouville_map("1", 0, segment(0, 1j)) - 1j) < 1e-14


def test_liouville_initial_choice_flips_sign():
    assert abs(liouville_map("z", 1, segment(1, 4), initial_choice=-1) + 14 / 3) < 1e-12


def test_liouville_rejects_wrong_start():
    with pytest.raises(PreconditionError):
        liouville_map("z", 2, segment(1, 4))


# -- decay-path tracing -----------------------------------------------------------


def test_trace_linear_coefficient_stays_on_real_axis():
    res = trace_decay_path_full("z", 1, 50.0)
    pts = np.array(res.path.points)
    assert np.max(np.abs(pts.imag)) <= 1e-8
    assert pts.real[-1] > 50.0 and np.all(np.diff(pts.real) > 0)


def test_trace_exponential_coefficient_is_positive_axis():
    pts = np.array(trace_decay_path("exp(z)", 1, 20.0).points)
    assert np.max(np.abs(pts.imag)) <= 1e-8
    assert abs(pts.real[-1] - 21.0) < 1e-8


def test_trace_constant_coefficient_is_straight_segment():
    res = trace_decay_path_full("1", 0, 7.5)
    pts = np.array(res.path.points)
    assert np.max(np.abs(pts.imag)) <= 1e-12
    assert abs(abs(pts[-1]) - 7.5) < 1e-9
    assert abs(res.s[-1] - 7.5) < 1e-12


def test_trace_stops_on_requested_circle():
    res = trace_decay_path_full("z", 1, 400.0, stop_radius=60.0)
    assert res.reason == "stop_radius"
    assert abs(abs(res.path.points[-1]) - 60.0) < 1e-9


@settings(max_examples=15)
@given(st.lists(coef, min_size=2, max_size=4),
       st.complex_numbers(min_magnitude=1.5, max_magnitude=3, allow_nan=False,
                          allow_infinity=False))
def test_traced_paths_keep_im_z_constant(coeffs, start):
    src = " + ".join(f"({c})*z^{k}" for k, c in enumerate(coeffs))
    try:
        res = trace_decay_path_full(src, start, 20.0)
    except Exception as exc:  # a zero of A on the way is a legitimate stop
        assert "zero of A" in str(exc)
        return
    assert res.im_drift <= 1e-6 * res.s[-1]
    eta_Z = (res.eta * res.Z).real
    assert np.all(np.diff(eta_Z) > -1e-9)


@pytest.mark.parametrize("A", ["z", "-4*z^2", "(1+2i)*z^3 + z"])
def test_paths_launched_on_critical_rays_stay_near_them(A):
    for theta in critical_rays(A):
        start = 2.0 * cmath.exp(1j * theta)
        res = trace_decay_path_full(A, start, 80.0)
        pts = np.array(res.path.points)
        far = pts[np.abs(pts) >= 10.0]
        assert len(far) > 0
        dev = np.abs(np.angle(far * cmath.exp(-1j * theta)))
        assert np.max(dev) <= 0.1
        assert np.all(np.diff(np.abs(res.Z)) > 0)


# -- decay verification -----------------------------------------------------------


def test_constant_coefficient_does_not_decay():
    rep = verify_decay("1", segment(0, 100), n_ic=2)
    assert abs(rep.fitted_rate) <= 0.02
    assert rep.wronskian_drift <= 1e-8


def test_exponential_coefficient_decays_at_quarter_rate():
    rep = verify_decay("exp(z)", segment(10, 22), n_ic=2)
    assert rep.model == "exponential"
    assert abs(rep.expected_rate + 0.25) < 1e-9
    assert abs(rep.fitted_rate + 0.25) <= 0.05
    assert rep.verdict


def test_linear_coefficient_envelope_follows_quarter_power():
    path = trace_decay_path("z", 1, 60.0)
    rep = verify_decay("z", path, n_ic=2)
    assert rep.model == "power"
    assert rep.normalized_ratio(30, 60) <= 3
    assert rep.wronskian_drift <= 1e-8


def test_random_initial_data_stay_within_basis_envelope():
    rep = verify_decay("z", trace_decay_path("z", 1, 30.0), n_ic=6, seed=3)
    # |c1 y1 + c2 y2| <= (|c1| + |c2|) max|y_k| <= sqrt(2) max|y_k| for a unit vector c
    assert rep.basis_ratio <= math.sqrt(2) * (1 + 1e-9)


# -- tail integral ------------------------------------------------------------------


def test_tail_integral_of_decaying_exponential():
    assert abs(tail_integral("exp(-z)", 0.0, 3.0, 60.0).value - 4 * math.exp(-3)) < 1e-6


def test_tail_integral_of_zero():
    assert tail_integral("0", 0.0, 3.0, 60.0).value == 0.0


def test_tail_integral_of_constant():
    assert abs(tail_integral("1", 0.0, 1.0, 3.0).value - 4.0) < 1e-13


def test_tail_integral_rejects_bad_limits():
    with pytest.raises(PreconditionError):
        tail_integral("1", 0.0, 3.0, 2.0)


# -- Picard ray solutions -----------------------------------------------------------


def test_picard_zero_coefficient_is_fixed_point():
    sol = picard_ray_solution("0", 0.0, 3.0, np.linspace(3, 10, 8))
    assert sol.iterations == 1
    assert np.max(np.abs(sol.u_values - 1)) <= 1e-15


def test_picard_decaying_exponential():
    grid = np.linspace(3.0, 40.0, 371)
    sol = picard_ray_solution("exp(-z)", 0.0, 3.0, grid)
    assert abs(sol.u_values[-1] - 1) <= 1e-5
    assert sol.residual <= 1e-6
    assert sol.observed_ratio <= 0.21
    assert sol.contraction_bound < 0.5
    assert abs(sol.v_values[-1] / 40 - 1) <= 0.05


def test_picard_rejects_large_tail():
    with pytest.raises(PreconditionError):
        picard_ray_solution("exp(-z)", 0.0, 0.5, np.linspace(1, 5, 5))


def test_picard_rejects_grid_below_start():
    with pytest.raises(PreconditionError):
        picard_ray_solution("exp(-z)", 0.0, 3.0, [2.0, 4.0])


@settings(max_examples=10)
@given(st.floats(min_value=3.0, max_value=6.0), st.floats(min_value=-0.4, max_value=0.4),
       st.floats(min_value=0.2, max_value=1.0))
def test_picard_iterates_contract(X, theta, scale):
    sol = picard_ray_solution(f"{scale}*exp(-z)", theta, X, np.linspace(X, X + 20, 21))
    assert sol.contraction_bound < 0.5
    assert sol.observed_ratio <= sol.contraction_bound + 0.1
    d = sol.differences
    for k in range(len(d) - 1):
        if d[k + 1] > 1e-12:
            assert d[k + 1] <= (sol.contraction_bound + 0.05) * d[k]
