"""Bank-Laine verification, coefficient extraction, Schwarzians and special structure."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bltk.banklaine import (bleq_residual, coefficient_from_product, extracted_coefficient,
                            schwarzian, special_b, third_order_residual, verify_bank_laine)
from bltk.errors import DomainError
from bltk.expr import as_function


def disc_points(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * np.pi, size=n)
    return r * np.exp(1j * t)


def jet(source, z, order):
    return as_function(source).jet(z, order)


# -- coefficient extraction ---------------------------------------------------

def test_exp_coefficient_at_origin():
    assert abs(coefficient_from_product(jet("exp(z)", 0.0, 2)) + 0.5) < 1e-15


def test_exp_coefficient_matches_closed_form(rng):
    pts = disc_points(rng, 100, 5.0)
    a = coefficient_from_product(jet("exp(z)", pts, 2))
    exact = -(1 + np.exp(-2 * pts)) / 4
    assert np.max(np.abs(a - exact) / (1 + np.abs(exact))) < 1e-12


@pytest.mark.parametrize("a,b,c", [(1.0, 0.0, 1.0), (2.0, 0.3, 0.5), (0.5j, -1.0, -2j),
                                   (1.5, 0.2j, -1 / 1.5)])
def test_exponential_family_has_constant_coefficient(rng, a, b, c):
    src = f"exp(({a})*z + ({b})) + ({c})"
    pts = disc_points(rng, 40, 2.0)
    vals = as_function(src)(pts)
    pts = pts[np.abs(vals) > 1e-3]
    A = coefficient_from_product(jet(src, pts, 2))
    assert np.max(np.abs(A + a * a / 4)) < 1e-10


def test_sine_coefficient_is_quarter(rng):
    pts = disc_points(rng, 30, 3.0)
    pts = pts[np.abs(np.sin(pts)) > 1e-3]
    A = coefficient_from_product(jet("sin(z)", pts, 2))
    assert np.max(np.abs(A - 0.25)) < 1e-12


def test_extraction_at_a_zero_is_a_domain_error():
    with pytest.raises(DomainError):
        coefficient_from_product(jet("sin(z)", 0.0, 2))


def test_extracted_coefficient_function_has_jet_derivative():
    A = extracted_coefficient("exp(z)")
    z = 0.4 - 0.3j
    j = A.jet(z, 1)
    assert abs(j.d0 + (1 + cmath.exp(-2 * z)) / 4) < 1e-13
    assert abs(j.d1 - cmath.exp(-2 * z) / 2) < 1e-13


def test_extraction_survives_huge_exponentials():
    # e^{z^2} at z = 30 overflows a double; the ratio form must not.
    z = 30.0
    A = coefficient_from_product(jet("exp(z^2)", z, 2))
    exact = -(z * z + 1)  # E'/E = 2z, E''/E = 4z^2 + 2, 1/E^2 underflows
    assert abs(A - exact) < 1e-12 * abs(exact)


# -- Schwarzian ---------------------------------------------------------------

def test_mobius_schwarzian_vanishes(rng):
    pts = disc_points(rng, 10, 2.0)
    S = schwarzian(jet("(2*z+1)/(z-3)", pts, 3))
    assert np.max(np.abs(S)) < 1e-12


@pytest.mark.parametrize("a", [1.0, 2.0, 0.5 + 1j, -3j])
def test_exponential_schwarzian(rng, a):
    pts = disc_points(rng, 10, 1.5)
    S = schwarzian(jet(f"exp(({a})*z)", pts, 3))
    assert np.max(np.abs(S / 2 + a * a / 4)) < 1e-10


def test_tangent_schwarzian_is_two(rng):
    pts = disc_points(rng, 10, 1.2)
    S = schwarzian(jet("tan(z)", pts, 3))
    assert np.max(np.abs(S - 2)) < 1e-10


def test_critical_point_is_flagged():
    with pytest.raises(DomainError):
        schwarzian(jet("z^2", 0.0, 3))


mobius = st.tuples(*[st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
                     for _ in range(4)]).filter(lambda t: abs(t[0] * t[3] - t[1] * t[2]) > 0.5)


@given(mobius, st.sampled_from(["exp(2*z)", "tan(z)", "z^3 + z", "exp(z) + z"]))
def test_schwarzian_is_mobius_invariant(coeffs, U):
    a, b, c, d = coeffs
    composed = f"(({a})*({U}) + ({b}))/(({c})*({U}) + ({d}))"
    zs = [0.3 + 0.2j, -0.4 + 0.1j, 0.1 - 0.5j]
    for z in zs:
        u = as_function(U)(z)
        if abs(c * u + d) < 1e-2:
            continue
        s0 = schwarzian(jet(U, z, 3))
        s1 = schwarzian(jet(composed, z, 3))
        assert abs(s1 - s0) <= 1e-8 * (1 + abs(s0))


@given(st.complex_numbers(min_magnitude=0.2, max_magnitude=3, allow_nan=False,
                          allow_infinity=False))
def test_product_coefficient_equals_half_schwarzian(a):
    # U = e^{az} gives E = U/U' = 1/a, whose extracted coefficient must be S(U)/2.
    U = f"exp(({a})*z)"
    E = f"1/({a})"
    for z in (0.1 + 0.2j, -0.3 + 0.05j):
        A_E = coefficient_from_product(jet(E, z, 2))
        S = schwarzian(jet(U, z, 3))
        assert abs(A_E - S / 2) <= 1e-8 * (1 + abs(S))


# -- third-order residual ----------------------------------------------------

def test_third_order_residual_for_exp_pair(rng):
    pts = disc_points(rng, 20, 3.0)
    res = third_order_residual("exp(z)", "-(1 + exp(-2*z))/4", pts)
    assert np.max(res) < 1e-9


def test_third_order_residual_for_sine():
    assert third_order_residual("sin(z)", "1/4", 0.7) < 1e-12


def test_third_order_residual_detects_wrong_pair():
    assert abs(third_order_residual("exp(z)", "0", 0.0) - 1.0) < 1e-15


@given(st.sampled_from([("exp(z)", "-(1 + exp(-2*z))/4"), ("sin(z)", "1/4"),
                        ("exp(2*z+1) + 0.5", "-1"),
                        ("exp(2*pi*i*z^2)*sin(pi*z)/pi", None)]),
       st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False))
def test_third_order_relation_holds_for_verified_pairs(pair, z):
    E, A = pair
    A = extracted_coefficient(E) if A is None else A
    if abs(as_function(E)(z)) < 1e-3:
        return
    e3 = abs(as_function(E).jet(z, 3).values()[3])
    assert third_order_residual(E, A, z) <= 1e-8 * (1 + e3)


def test_bleq_residual_zero_for_true_pair_and_large_otherwise():
    assert bleq_residual("sin(z)", "1/4", 0.3 + 0.1j) < 1e-14
    assert bleq_residual("sin(z)", "1", 0.3 + 0.1j) > 0.1


# -- special structure --------------------------------------------------------

def test_special_b_for_exp_minus_one(rng):
    pts = disc_points(rng, 20, 2.0)
    pts = pts[np.abs(np.expm1(pts)) > 1e-3]
    assert np.max(np.abs(special_b(jet("exp(z) - 1", pts, 1)) - 1)) < 1e-12


def test_special_b_for_z_exp_z():
    assert abs(special_b(jet("z*exp(z)", 1.0, 1)) - (2 * math.e - 1) / math.e) < 1e-14


def test_special_b_at_zero_is_domain_error():
    with pytest.raises(DomainError):
        special_b(jet("z*exp(z)", 0.0, 1))


# -- disc verification --------------------------------------------------------

def test_e2_verification_signs_alternate():
    rep = verify_bank_laine("exp(2*pi*i*z^2)*sin(pi*z)/pi", 0, 3.5)
    assert rep.is_bank_laine and not rep.is_special
    locs = sorted(round(r.location.real) for r in rep.zeros)
    assert locs == [-3, -2, -1, 0, 1, 2, 3]
    for rec, s in zip(rep.zeros, rep.signs):
        assert s == (-1) ** round(rec.location.real)
    assert rep.max_sign_error < 1e-8


def test_sine_verification_passes_with_alternating_signs():
    rep = verify_bank_laine("sin(z)", 0, 7.0)
    assert rep.is_bank_laine
    pairs = sorted(zip((r.location.real for r in rep.zeros), rep.signs))
    assert [s for _, s in pairs] == [(-1) ** k for k in range(-2, 3)]


def test_square_fails_with_multiple_zero():
    rep = verify_bank_laine("z^2", 0, 1.0)
    assert not rep.is_bank_laine
    assert "multiple zero" in rep.reason


def test_special_examples_are_classified():
    assert verify_bank_laine("exp(z) - 1", 0, 10.0).is_special
    assert verify_bank_laine("z*exp(z)", 0, 2.0).is_special
    rep = verify_bank_laine("exp(z) + 1", 0, 10.0)
    assert rep.is_bank_laine and not rep.is_special
    assert set(rep.signs) == {-1}


def test_non_bank_laine_derivative_is_reported():
    rep = verify_bank_laine("2*sin(z)", 0, 4.0)
    assert not rep.is_bank_laine
    assert "not +-1" in rep.reason


def test_report_json_shape():
    d = verify_bank_laine("sin(z)", 0, 4.0).to_dict()
    for key in ("zeros", "signs", "is_bank_laine", "is_special", "max_sign_error"):
        assert key in d
