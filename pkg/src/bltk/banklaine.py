"""Bank-Laine structure: products of normalised solutions and their coefficient.

If ``f1, f2`` solve ``y'' + A y = 0`` with Wronskian 1 then ``E = f1 f2``
satisfies ``4A = ((E')^2 - 2 E E'' - 1) / E^2`` and, at every zero of ``E``,
``E' = +-1``.  Conversely ``A`` is recovered from ``E``, and the quotient
``U = f2/f1`` (with ``E = U/U'``) has Schwarzian derivative ``2A``.
Differentiating the relation gives the linear third-order equation
``E''' + 4 A E' + 2 A' E = 0``.

All pointwise routines work on jets and use derivative ratios ``E^(k)/E`` so
they stay finite when ``E`` itself is outside the floating point range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .expr import Function, NativeFunction, as_function
from .jet import Jet
from .zeros import ZeroRecord, locate_zeros


def _inv_square(j: Jet):
    """``1 / E^2`` from the mantissa and log-scale (may underflow to 0)."""
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        return np.exp(-2.0 * j.lsc) / (j.m[0] * j.m[0])


def coefficient_from_product(E_jet: Jet):
    """``A = ((E')^2 - 2 E'' E - 1) / (4 E^2)`` from a jet of order >= 2.

    Raises
    ------
    DomainError
        Where ``E = 0`` (the quotient is undefined there even though ``A``
        extends analytically).
    """
    if E_jet.order < 2:
        raise ValueError("coefficient extraction needs E, E', E''")
    if np.any(E_jet.m[0] == 0):
        raise DomainError("E vanishes at the point; A is not recoverable from the quotient")
    r1, r2 = E_jet.ratio(1), E_jet.ratio(2)
    with np.errstate(over="ignore", invalid="ignore"):
        out = 0.25 * (r1 * r1 - 2.0 * r2 - _inv_square(E_jet))
    if not np.all(np.isfinite(out)):
        raise DomainError("E too close to zero for coefficient extraction")
    return complex(out) if np.ndim(out) == 0 else out


def extracted_coefficient(E) -> Function:
    """``A`` as a :class:`Function` built from ``E`` (jets up to order 1).

    The derivative ``A'`` comes from jet arithmetic on ``E, E', E''``
    (which needs ``E'''``), never from finite differences.
    """
    E = as_function(E)

    def jet_fn(z, order):
        e = E.jet(z, order + 2)
        e0 = e.truncate(order)
        e1 = Jet(e.m[1:order + 2], e.lsc)
        e2 = Jet(e.m[2:order + 3], e.lsc)
        if np.any(e0.m[0] == 0):
            raise DomainError("E vanishes at the point", z if np.ndim(z) == 0 else None)
        num = e1 * e1 - 2.0 * (e0 * e2) - 1.0
        return num / (4.0 * (e0 * e0))

    return NativeFunction(jet_fn, name=f"A[{E.name}]", max_order=1)


def schwarzian(U_jet: Jet):
    """``S(U) = U'''/U' - (3/2) (U''/U')^2`` from a jet of order 3.

    Raises
    ------
    DomainError
        At a critical point ``U' = 0``.
    """
    if U_jet.order < 3:
        raise ValueError("the Schwarzian needs U', U'', U'''")
    m1 = U_jet.m[1]
    scale = np.maximum(np.abs(U_jet.m[2]), np.abs(U_jet.m[3]))
    if np.any((m1 == 0) | (np.abs(m1) <= 1e-14 * scale)):
        raise DomainError("U' = 0: critical point")
    with np.errstate(over="ignore", invalid="ignore"):
        q2 = U_jet.m[2] / m1
        out = U_jet.m[3] / m1 - 1.5 * q2 * q2
    return complex(out) if np.ndim(out) == 0 else out


def special_b(E_jet: Jet):
    """``B = (E' - 1)/E``, entire exactly when ``E`` is special Bank-Laine."""
    if np.any(E_jet.m[0] == 0):
        raise DomainError("E vanishes at the point")
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        inv = np.exp(-E_jet.lsc) / E_jet.m[0]
        out = E_jet.ratio(1) - inv
    return complex(out) if np.ndim(out) == 0 else out


def third_order_residual(E, A, z) -> float:
    """``|E''' + 4 A E' + 2 A' E|`` at ``z``."""
    E, A = as_function(E), as_function(A)
    e = E.jet(z, 3)
    a = A.jet(z, 1)
    with np.errstate(over="ignore", invalid="ignore"):
        mant = e.m[3] + 4.0 * a.d0 * e.m[1] + 2.0 * a.d1 * e.m[0]
        out = np.abs(mant) * np.exp(e.lsc)
    return float(out) if np.ndim(out) == 0 else out


def bleq_residual(E, A, z):
    """Relative mismatch ``|A - A_E| / (1 + |A|)`` between a coefficient and the
    one extracted from ``E``; zero exactly when the pair satisfies the
    Bank-Laine relation at ``z``."""
    E, A = as_function(E), as_function(A)
    a_e = coefficient_from_product(E.jet(z, 2))
    a = A(z)
    out = np.abs(a - a_e) / (1.0 + np.abs(a))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class BankLaineReport:
    """Outcome of :func:`verify_bank_laine`.

    ``derivatives`` holds ``E'`` at each zero and ``signs`` the nearest of
    ``+1, -1``; ``max_sign_error`` is the largest ``|E' - sign|``.
    """

    zeros: list
    derivatives: list
    signs: list
    is_bank_laine: bool
    is_special: bool
    max_sign_error: float
    max_modulus_error: float
    reason: str = ""
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def c(z):
            z = complex(z)
            return {"re": z.real, "im": z.imag}
        return {
            "zeros": [c(r.location) for r in self.zeros],
            "multiplicities": [r.multiplicity for r in self.zeros],
            "derivatives": [c(d) for d in self.derivatives],
            "signs": list(self.signs),
            "is_bank_laine": self.is_bank_laine,
            "is_special": self.is_special,
            "max_sign_error": self.max_sign_error,
            "max_modulus_error": self.max_modulus_error,
            "reason": self.reason,
            **self.meta,
        }


def verify_bank_laine(E, center=0.0, radius: float = 1.0, tol: float = 1e-8,
                      jobs: int = 1) -> BankLaineReport:
    """Check ``E' = +-1`` at every zero of ``E`` in ``|z - center| < radius``.

    Each zero must be simple, with ``||E'| - 1| <= tol`` and ``E'`` within
    ``tol`` of ``+1`` or ``-1``.  The report is special when every sign is
    ``+1``.
    """
    E = as_function(E)
    zeros: list[ZeroRecord] = locate_zeros(E, center, radius, jobs=jobs)
    derivs, signs = [], []
    reason = ""
    for rec in zeros:
        if rec.multiplicity > 1 or rec.cluster:
            z = rec.location
            reason = reason or f"multiple zero at {_fmt(z)} (multiplicity {rec.multiplicity})"
            derivs.append(complex("nan"))
            signs.append(0)
            continue
        j = E.jet(rec.location, 1)
        with np.errstate(over="ignore"):
            d1 = complex(j.m[1] * math.exp(float(j.lsc)))
        derivs.append(d1)
        signs.append(1 if d1.real >= 0 else -1)
    finite = [(d, s) for d, s in zip(derivs, signs) if s != 0]
    sign_err = max((abs(d - s) for d, s in finite), default=0.0)
    mod_err = max((abs(abs(d) - 1.0) for d, _ in finite), default=0.0)
    simple = all(s != 0 for s in signs)
    ok = simple and sign_err <= tol and mod_err <= tol
    if simple and not ok:
        worst = max(finite, key=lambda p: abs(p[0] - p[1]))
        reason = f"E' = {_fmt(worst[0])} at a zero is not +-1 within {tol:g}"
    special = ok and all(s == 1 for s in signs)
    return BankLaineReport(zeros, derivs, signs, ok, special, float(sign_err), float(mod_err),
                           reason, {"center": {"re": complex(center).real, "im": complex(center).imag},
                                    "radius": radius, "tol": tol})


def _fmt(z) -> str:
    z = complex(z)
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z.real)):
        return f"{z.real:.12g}"
    return f"{z.real:.12g}{z.imag:+.12g}i"
