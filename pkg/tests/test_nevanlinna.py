"""Proximity, characteristic, deficiency, order and exponent of convergence."""

import math

import numpy as np
import pytest

from bltk.errors import DomainError, PreconditionError
from bltk.nevanlinna import (FINITE_RANGE, characteristic, convergence_exponent,
                             convergence_exponent_full, default_radii, deficiency_estimate,
                             log_convexity_defect, nevanlinna_profile, order_estimate, proximity)
from bltk.zeros import counting_function

E2 = "exp(2*pi*i*z^2)*sin(pi*z)/pi"


# -- proximity and characteristic ------------------------------------------------------

def test_proximity_of_exponential_at_infinity():
    assert abs(proximity("exp(z)", 10.0) - 10 / math.pi) <= 0.01


def test_proximity_of_identity_at_infinity():
    assert abs(proximity("z", math.e) - 1.0) <= 1e-10


def test_proximity_of_identity_to_zero_vanishes_outside_unit_disc():
    assert proximity("z", 2.0, 0) == 0.0


def test_proximity_with_zero_on_circle_is_finite():
    # sin(z) vanishes at z = pi on the circle |z| = pi: an integrable log singularity
    m = proximity("sin(z)", math.pi, 0)
    assert math.isfinite(m) and 0 <= m < 1


def test_proximity_preconditions():
    with pytest.raises(PreconditionError):
        proximity("z", 0.5)
    with pytest.raises(PreconditionError):
        proximity("z", 2.0, nodes=32)


def test_characteristic_of_exponential():
    assert abs(characteristic("exp(z)", 20.0) - 20 / math.pi) <= 0.02


def test_characteristic_of_gaussian_exponential():
    assert abs(characteristic("exp(z^2)", 5.0) - 25 / math.pi) <= 0.05


def test_characteristic_of_identity():
    assert abs(characteristic("z", math.e ** 2) - 2.0) <= 1e-10


def test_characteristic_of_quotient_adds_pole_counting():
    # f = 1/z has m(r, f) = 0 for r >= 1 and one pole at 0: T = log r
    r = 5.0
    assert abs(characteristic("1", r, denominator="z") - math.log(r)) <= 1e-6


# -- deficiency -------------------------------------------------------------------------

def test_exponential_has_full_deficiency_at_zero():
    est = deficiency_estimate("exp(z)", 0, [10, 20, 40])
    assert abs(est.delta - 1.0) <= 0.02
    assert est.note == FINITE_RANGE


def test_half_deficiency_example():
    est = deficiency_estimate("-exp(2*z) - exp(z)", 0, [10, 20, 40])
    assert abs(float(est) - 0.5) <= 0.05


def test_sine_has_no_deficiency_at_zero():
    assert abs(deficiency_estimate("sin(z)", 0, [10, 20, 40]).delta) <= 0.05


def test_deficiency_preconditions():
    with pytest.raises(PreconditionError):
        deficiency_estimate("exp(z)", 0, [10, 20])
    with pytest.raises(PreconditionError):
        deficiency_estimate("exp(z)", 0, [10, 20, 30])
    with pytest.raises(DomainError):
        deficiency_estimate("1 + z/1000", 0, [1, 2, 4])


@pytest.mark.parametrize("f", ["exp(z)", "sin(z)", "-exp(2*z) - exp(z)", "exp(z) + z"])
def test_deficiency_is_stable_under_node_doubling(f):
    radii = [8, 16, 32]
    d1 = deficiency_estimate(f, 0, radii, nodes=256).delta
    d2 = deficiency_estimate(f, 0, radii, nodes=512).delta
    assert -0.05 <= d1 <= 1.05
    assert abs(d1 - d2) <= 0.01


# -- order and exponent of convergence ----------------------------------------------

def test_order_of_exponential():
    assert abs(order_estimate("exp(z)", default_radii(40)) - 1.0) <= 0.05


def test_order_of_gaussian_exponential():
    assert abs(order_estimate("exp(z^2)", default_radii(20)) - 2.0) <= 0.05


def test_order_needs_five_radii():
    with pytest.raises(PreconditionError):
        order_estimate("exp(z)", [1, 2, 4, 8])


def test_sine_exponent_of_convergence():
    cd = counting_function("sin(pi*z)", default_radii(64, r_min=1.5))
    lam = convergence_exponent(cd)
    assert abs(lam - 1.0) <= 0.05
    assert abs(lam - INTEGER_ZEROS_SLOPE_64) <= 1e-3


def test_exponential_is_zero_free():
    fit = convergence_exponent_full(counting_function("exp(z)", default_radii(20)))
    assert fit.zero_free and fit.value == 0.0


# Least-squares slope of log N against log r over the top decade of default_radii(64, 1.5)
# for N(r) = log r + 2 sum_{1 <= k <= r} log(r/k), the counting function of the integers.
INTEGER_ZEROS_SLOPE_64 = 1.0473021475244928


def test_e2_exponent_below_its_order():
    cd = counting_function(E2, default_radii(64, r_min=1.5))
    lam = convergence_exponent(cd)
    assert abs(lam - 1.0) <= 0.05
    assert abs(lam - INTEGER_ZEROS_SLOPE_64) <= 1e-3


def test_e2_order_is_two():
    assert abs(order_estimate(E2, default_radii(32)) - 2.0) <= 0.05


# -- profiles and invariants -----------------------------------------------------------

PROFILE_CASES = [("sin(z)", 0, 20.0), ("sin(z)", 1, 20.0), ("exp(z) - 1", 0, 20.0),
                 ("exp(z) - 1", 1, 20.0), ("exp(z) + 1", 0, 20.0), ("z*exp(z)", 1, 16.0),
                 (E2, 0, 8.0), (E2, 1, 3.0)]


@pytest.fixture(scope="module")
def profiles():
    return {(f, a): nevanlinna_profile(f, a, radii=default_radii(r)) for f, a, r in PROFILE_CASES}


@pytest.mark.parametrize("f,a,r", PROFILE_CASES)
def test_first_fundamental_theorem_is_bounded(profiles, f, a, r):
    p = profiles[(f, a)]
    gap = [abs(T - m - N) for T, m, N in zip(p.T_values, p.m_values, p.N_values)]
    assert max(gap) <= gap[0] + 1.0


@pytest.mark.parametrize("f,a,r", PROFILE_CASES)
def test_characteristic_is_nondecreasing_and_log_convex(profiles, f, a, r):
    p = profiles[(f, a)]
    assert np.all(np.diff(p.T_values) >= -1e-6)
    assert p.log_convexity_defect() >= -1e-3


def test_profile_serialisations():
    p = nevanlinna_profile("exp(z)", 0, radii=default_radii(8))
    lines = p.to_csv().strip().splitlines()
    assert lines[0] == "r,m,N,T" and len(lines) == len(p.radii) + 1
    d = p.to_dict()
    assert d["estimate"] == FINITE_RANGE
    assert abs(d["order"] - 1.0) < 0.1


def test_log_convexity_defect_detects_concavity():
    radii = [1, 2, 4, 8]
    assert log_convexity_defect(radii, [1, 2, 3, 4]) == pytest.approx(0.0, abs=1e-12)
    assert log_convexity_defect(radii, [1, 3, 4, 4.5]) < -0.1


def test_entire_profile_delta_in_range(profiles):
    for p in profiles.values():
        assert -0.05 <= p.delta_estimate <= 1.05
