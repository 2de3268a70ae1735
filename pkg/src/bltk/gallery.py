"""Registered Bank-Laine examples that verify themselves.

Each :class:`GalleryEntry` bundles evaluators (grammar expressions or native
jet functions) with a list of machine-checkable assertions; every assertion
names the library operation it exercises and its tolerance.
:func:`verify_example` runs them and returns a :class:`GalleryReport`.

The entry ``infinite-order`` uses a function outside the expression grammar:
``h(z) = int_1^z (1 - e^{-t})/t dt + int_1^oo e^{-t}/t dt``, evaluated by
adaptive quadrature along the segment from 1, with ``E = e^h`` zero-free and
``A`` recovered from ``E``.
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jet as J
from .asymptotics import tail_integral
from .banklaine import (bleq_residual, coefficient_from_product, extracted_coefficient,
                        schwarzian, special_b, third_order_residual, verify_bank_laine)
from .contour import gauss_kronrod
from .errors import BLTKError, PreconditionError
from .expr import ExprFunction, Function, NativeFunction, as_function
from .jet import Jet
from .nevanlinna import deficiency_estimate

SEED = 20240531


def _c(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def seeded_points(n: int, radius: float, seed: int = SEED) -> np.ndarray:
    """``n`` reproducible points, uniform in the disc ``|z| <= radius``."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))


# -- the quadrature-defined entire function h --------------------------------------

_H_PRIME = ExprFunction("(1 - exp(-z))/z")


def _h_prime_integrand(t):
    t = np.asarray(t, dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = -np.expm1(-t) / t
    return np.where(t == 0, 1.0 + 0j, v)


@functools.lru_cache(maxsize=None)
def exp_integral_at_one() -> float:
    """``int_1^oo e^{-t}/t dt`` by adaptive quadrature (tail beyond 60 is below 1e-27)."""
    res = gauss_kronrod(lambda t: np.exp(-t) / t, [1.0, 2.0, 5.0, 15.0, 60.0], tol=1e-16,
                        rel_floor=1e-16)
    return float(res.value.real)


@functools.lru_cache(maxsize=4096)
def _h_scalar(z: complex) -> complex:
    if z == 1:
        return complex(exp_integral_at_one())
    d = z - 1.0
    n = max(1, int(math.ceil(abs(d) / 4.0)))
    res = gauss_kronrod(lambda s: d * _h_prime_integrand(1.0 + d * s), np.linspace(0.0, 1.0, n + 1),
                        tol=1e-15 * max(1.0, abs(d)), rel_floor=1e-16)
    return complex(res.value) + exp_integral_at_one()


def h_values(z):
    """``h(z)`` for scalar or array ``z`` (quadrature along the segment ``[1, z]``)."""
    arr = np.asarray(z, dtype=complex)
    out = np.array([_h_scalar(complex(w)) for w in arr.ravel()], dtype=complex).reshape(arr.shape)
    return complex(out) if out.ndim == 0 else out


def _h_jet(z, order: int) -> Jet:
    coeffs = [np.asarray(h_values(z), dtype=complex)]
    if order >= 1:
        hp = _H_PRIME.jet(z, order - 1)
        coeffs.extend(hp.m[k] * np.exp(hp.lsc) for k in range(order))
    return Jet(tuple(coeffs))


H = NativeFunction(_h_jet, name="h", max_order=3)
E_INFINITE_ORDER = NativeFunction(lambda z, order: J.exp(_h_jet(z, order)), name="exp(h)",
                                  max_order=3)


A_INFINITE_ORDER = extracted_coefficient(E_INFINITE_ORDER)


def g1_on_axis(x: float) -> complex:
    """``g1(x) = exp((h(x) - log x)/2 + (1/2) int_x^oo G(t) dt)`` with ``G = e^{-h} - 1/t``.

    The tail integral runs along the positive axis to ``x + 60`` where ``G``
    is below ``e^{-60}``.
    """
    if not x > 0:
        raise PreconditionError("g1 is evaluated on the positive axis")

    def G(t):
        return np.exp(-np.asarray(h_values(t))) - 1.0 / t

    tail = gauss_kronrod(G, np.linspace(x, x + 60.0, 7), tol=1e-15).value
    return cmath.exp(0.5 * (_h_scalar(complex(x)) - math.log(x)) + 0.5 * tail)


# -- entries -------------------------------------------------------------------------

@dataclass
class CheckResult:
    operation: str
    description: str
    measured: object
    tolerance: object
    passed: bool

    def to_dict(self) -> dict:
        return {"operation": self.operation, "description": self.description,
                "measured": self.measured, "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class GalleryEntry:
    """A named example: evaluators plus assertions.

    ``checks`` are callables ``(jobs) -> list[CheckResult]``.
    """

    name: str
    summary: str
    E: Function | None = None
    A: Function | None = None
    f: Function | None = None
    checks: list = field(default_factory=list)
    provenance: str = ""


@dataclass
class GalleryReport:
    name: str
    passed: bool
    results: list

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "results": [r.to_dict() for r in self.results]}


def _max_coefficient_error(E, A_exact: Callable, points) -> float:
    E = as_function(E)
    err = 0.0
    for z in points:
        got = coefficient_from_product(E.jet(complex(z), 2))
        err = max(err, abs(got - A_exact(complex(z))))
    return err


def _coefficient_check(E, A_exact, n, radius, tol, what):
    def run(jobs):
        pts = seeded_points(n, radius)
        err = _max_coefficient_error(E, A_exact, pts)
        return [CheckResult("coefficient_from_product", f"{what} at {n} seeded points, |z| <= {radius:g}",
                            err, tol, err <= tol)]
    return run


def _bl_check(E, radius, tol=1e-8, expect_special=None, expect_signs=None, expect_count=None):
    def run(jobs):
        rep = verify_bank_laine(E, 0.0, radius, tol, jobs=jobs)
        out = [CheckResult("verify_bank_laine", f"E' = +-1 at every zero in |z| < {radius:g}",
                           {"zeros": len(rep.zeros), "max_sign_error": rep.max_sign_error,
                            "max_modulus_error": rep.max_modulus_error, "reason": rep.reason},
                           tol, rep.is_bank_laine)]
        if expect_count is not None:
            out.append(CheckResult("locate_zeros", "number of zeros", len(rep.zeros), expect_count,
                                   len(rep.zeros) == expect_count))
        if expect_special is not None:
            out.append(CheckResult("verify_bank_laine", "special (all signs +1)", rep.is_special,
                                   expect_special, rep.is_special == expect_special))
        if expect_signs is not None:
            want = [expect_signs(r.location) for r in rep.zeros]
            out.append(CheckResult("verify_bank_laine", "signs of E' at the zeros", rep.signs, want,
                                   rep.signs == want))
        return out
    return run


def _bleq_check(E, A, n=50, radius=3.0, tol=1e-8):
    """Relation residual at seeded points where ``|E| >= 1e-3``."""
    def run(jobs):
        Ef, Af = as_function(E), as_function(A)
        worst, used = 0.0, 0
        for z in seeded_points(4 * n, radius, SEED + 1):
            if used == n:
                break
            if abs(Ef.jet(complex(z), 0).d0) < 1e-3:
                continue
            worst = max(worst, bleq_residual(Ef, Af, complex(z)))
            used += 1
        return [CheckResult("bleq_residual", f"relation between E and A at {used} seeded points",
                            worst, tol, worst <= tol and used == n)]
    return run


def _third_order_check(E, A, n=20, radius=3.0, tol=1e-8):
    def run(jobs):
        Ef = as_function(E)
        worst = 0.0
        for z in seeded_points(n, radius, SEED + 2):
            e3 = abs(Ef.jet(complex(z), 3).d3)
            worst = max(worst, third_order_residual(E, A, complex(z)) / (1.0 + e3))
        return [CheckResult("third_order_residual", "E''' + 4AE' + 2A'E relative to 1 + |E'''|",
                            worst, tol, worst <= tol)]
    return run


def _e2_critical_point(jobs):
    E = as_function(E2)
    z = 10.0 + 1j / (40.0 * math.pi)
    for _ in range(50):
        j = E.jet(z, 2)
        step = complex(j.m[1] / j.m[2])
        z -= step
        if abs(step) < 1e-15 * abs(z):
            break
    val = abs(complex(E.jet(z, 0).d0))
    return [CheckResult("jet", "critical point of E2 near z = 10: |E2| there",
                        {"critical_point": _c(z), "abs_E": val}, 0.05,
                        abs(z - 10) < 0.1 and val <= 0.05)]


def _e2_path_probe(jobs):
    E = as_function(E2)
    x = np.linspace(25.0, 100.0, 2001)
    on_path = float(np.max(np.abs(E(x + 1j / np.sqrt(x)))))
    arcs = {}
    for k in (25, 100):
        y = np.linspace(0.0, 1.0 / math.sqrt(k), 201)
        arcs[str(k)] = float(np.max(np.abs(E(k + 1j * y))))
    worst = max(on_path, *arcs.values())
    return [CheckResult("jet", "max |E2| on z = x + i/sqrt(x), 25 <= x <= 100, and on the arcs "
                        "k + iy, 0 <= y <= 1/sqrt(k), k in {25, 100}",
                        {"path": on_path, "arcs": arcs}, 0.05, worst <= 0.05)]


def _infinite_order_checks(jobs):
    out = []
    for x in (10.0, 20.0, 30.0):
        g = abs(g1_on_axis(x) - 1.0)
        out.append(CheckResult("g1_on_axis", f"|g1({x:g}) - 1|", g, 1e-3, g <= 1e-3))
        a = abs(complex(A_INFINITE_ORDER(x)))
        out.append(CheckResult("coefficient_from_product", f"|A({x:g})| against x^-6", a, x ** -6,
                               a <= x ** -6))
    t = tail_integral(A_INFINITE_ORDER, 0.0, 5.0, 60.0)
    out.append(CheckResult("tail_integral", "int_5^60 r |A(r)| dr", t.value, 0.5, t.value < 0.5))
    return out


def _deficiency_checks(jobs):
    d1 = deficiency_estimate("-exp(2*z) - exp(z)", 0.0, [10.0, 20.0, 40.0])
    d2 = deficiency_estimate("exp(z)", 0.0, [10.0, 20.0, 40.0])
    return [CheckResult("deficiency_estimate", "value 0 for A = -e^{2z} - e^z, radii {10, 20, 40}",
                        d1.delta, {"expected": 0.5, "tol": 0.05}, abs(d1.delta - 0.5) <= 0.05),
            CheckResult("deficiency_estimate", "value 0 for f'/f = e^z, radii {10, 20, 40}",
                        d2.delta, {"expected": 1.0, "tol": 0.02}, abs(d2.delta - 1.0) <= 0.02)]


def _log_derivative_check(jobs):
    f = as_function("exp(exp(z))")
    worst = 0.0
    for z in seeded_points(20, 2.0, SEED + 3):
        j = f.jet(complex(z), 2)
        want = cmath.exp(2 * z) + cmath.exp(z)
        worst = max(worst, abs(complex(j.ratio(2)) - want) / (1 + abs(want)))
    return [CheckResult("jet", "f''/f = e^{2z} + e^z for f = exp(e^z)", worst, 1e-10, worst <= 1e-10)]


def _special_b_check(E, B_exact, tol=1e-10):
    def run(jobs):
        Ef = as_function(E)
        worst = 0.0
        for z in seeded_points(10, 2.0, SEED + 4):
            j = Ef.jet(complex(z), 1)
            worst = max(worst, abs(special_b(j) - B_exact(complex(z))))
        return [CheckResult("special_b", "(E' - 1)/E against its closed form", worst, tol, worst <= tol)]
    return run


def _schwarzian_check(U, value, tol=1e-9):
    def run(jobs):
        Uf = as_function(U)
        worst = 0.0
        for z in seeded_points(10, 1.0, SEED + 5):
            worst = max(worst, abs(schwarzian(Uf.jet(complex(z), 3)) - value))
        return [CheckResult("schwarzian", f"S({U}) = {value}", worst, tol, worst <= tol)]
    return run


E2 = ExprFunction("exp(2*pi*i*z^2)*sin(pi*z)/pi")

GALLERY: dict[str, GalleryEntry] = {}


def register(entry: GalleryEntry) -> GalleryEntry:
    if entry.name in GALLERY:
        raise ValueError(f"duplicate gallery entry {entry.name!r}")
    GALLERY[entry.name] = entry
    return entry


register(GalleryEntry(
    "exp-bl", "E = e^{2z} + 1/2 (a = 2, c = 1/2, ac = 1) with constant A = -a^2/4 = -1",
    E=as_function("exp(2*z) + 1/2"), A=as_function("-1"),
    checks=[_coefficient_check("exp(2*z) + 1/2", lambda z: -1.0, 20, 3.0, 1e-10, "A = -1"),
            _bl_check("exp(2*z) + 1/2", 5.0, expect_signs=lambda z: -1),
            _bleq_check("exp(2*z) + 1/2", "-1"),
            _third_order_check("exp(2*z) + 1/2", "-1"),
            _schwarzian_check("exp(2*z)", -2.0)],
    provenance="exponential Bank-Laine family e^{az+b} + c with ac = +-1"))

register(GalleryEntry(
    "e2", "E2 = e^{2 pi i z^2} sin(pi z)/pi: zeros at the integers, order 2, exponent of convergence 1",
    E=E2,
    checks=[_bl_check(E2, 5.5, expect_count=11, expect_signs=lambda z: -1 if round(z.real) % 2 else 1),
            _e2_critical_point, _e2_path_probe],
    provenance="finite-order Bank-Laine function with an indirect singularity over 0"))

register(GalleryEntry(
    "infinite-order", "zero-free E = e^h with h defined by quadrature; A is small on the positive axis",
    E=E_INFINITE_ORDER, A=A_INFINITE_ORDER, f=H,
    checks=[_infinite_order_checks],
    provenance="infinite-order example where the ray solution with u ~ 1 exists"))

register(GalleryEntry(
    "standard-exp", "E = e^z with A = -(1 + e^{-2z})/4",
    E=as_function("exp(z)"), A=as_function("-(1 + exp(-2*z))/4"),
    checks=[_coefficient_check("exp(z)", lambda z: -(1 + cmath.exp(-2 * z)) / 4, 100, 5.0, 1e-10,
                               "A = -(1 + e^{-2z})/4"),
            _bl_check("exp(z)", 5.0, expect_count=0),
            _bleq_check("exp(z)", "-(1 + exp(-2*z))/4"),
            _third_order_check("exp(z)", "-(1 + exp(-2*z))/4")],
    provenance="the simplest zero-free Bank-Laine function"))

register(GalleryEntry(
    "deficiency", "f = exp(e^z): A = -(e^{2z} + e^z) has deficiency 1/2 at 0, f'/f = e^z has 1",
    A=as_function("-exp(2*z) - exp(z)"), f=as_function("exp(exp(z))"),
    checks=[_log_derivative_check, _deficiency_checks],
    provenance="coefficient with a deficient zero value"))

register(GalleryEntry(
    "special", "special Bank-Laine functions e^z - 1 and z e^z; e^z + 1 is Bank-Laine but not special",
    E=as_function("exp(z) - 1"), A=as_function("-1/4"),
    checks=[_bl_check("exp(z) - 1", 10.0, expect_special=True),
            _bl_check("z*exp(z)", 10.0, expect_special=True),
            _bl_check("exp(z) + 1", 10.0, expect_special=False),
            _special_b_check("exp(z) - 1", lambda z: 1.0),
            _bleq_check("exp(z) - 1", "-1/4"), _bleq_check("exp(z) + 1", "-1/4")],
    provenance="E' = BE + 1 with B entire"))

register(GalleryEntry(
    "sine", "E = sin z = 2 sin(z/2) cos(z/2) with A = 1/4",
    E=as_function("sin(z)"), A=as_function("1/4"),
    checks=[_bl_check("sin(z)", 10.0, expect_count=7,
                      expect_signs=lambda z: -1 if round(z.real / math.pi) % 2 else 1),
            _bleq_check("sin(z)", "1/4"), _third_order_check("sin(z)", "1/4"),
            _schwarzian_check("tan(z)", 2.0)],
    provenance="trigonometric Bank-Laine function"))


def list_examples() -> list[dict]:
    return [{"name": e.name, "summary": e.summary, "provenance": e.provenance}
            for e in GALLERY.values()]


def verify_example(name: str, jobs: int = 1) -> GalleryReport:
    """Run every assertion of the entry ``name``.

    Raises
    ------
    KeyError
        Unknown entry name.
    """
    if name not in GALLERY:
        raise KeyError(f"unknown gallery entry {name!r}; known: {', '.join(GALLERY)}")
    results = []
    for check in GALLERY[name].checks:
        try:
            results.extend(check(jobs))
        except BLTKError as exc:
            results.append(CheckResult(getattr(check, "__name__", "check"), "numerical failure",
                                       str(exc), None, False))
    return GalleryReport(name, all(r.passed for r in results), results)
