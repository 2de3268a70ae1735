"""Truncated Taylor jets (value plus derivatives up to third order).

A :class:`Jet` stores the derivatives of a function at a point as a mantissa
tuple together with a real log-scale ``lsc``: the true ``k``-th derivative is
``exp(lsc) * m[k]``.  The log-scale keeps functions such as ``exp(2*pi*i*z^2)``
representable on circles of radius 100, where the value itself is far outside
the double precision range; logarithmic derivatives and ``log|f|`` are always
available without overflow.

Every operation works elementwise on numpy arrays, so one evaluation can cover
a whole quadrature grid.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

MAX_ORDER = 3

# mantissas larger than this are folded into the log-scale
_RENORM_ABOVE = 1e150
# exp/sin/... switch to the log-scaled route beyond this real exponent
_SCALED_EXP_BEYOND = 600.0


def _arr(x):
    return np.asarray(x, dtype=complex)


def _first_bad(mask, values):
    mask, values = np.broadcast_arrays(mask, values)
    return np.ravel(values)[np.ravel(mask)][0]


class Jet:
    """Value and derivatives ``f, f', f'', f'''`` of a function at a point.

    Parameters
    ----------
    coeffs : sequence
        Mantissas ``m[0..order]``; ``len(coeffs) - 1`` is the jet order.
    lsc : float or ndarray
        Real log-scale; the represented derivatives are ``exp(lsc) * m[k]``.
    """

    __slots__ = ("m", "lsc")

    def __init__(self, coeffs, lsc=0.0):
        if not 1 <= len(coeffs) <= MAX_ORDER + 1:
            raise ValueError("jet order must be between 0 and 3")
        self.m = tuple(_arr(c) for c in coeffs)
        self.lsc = np.asarray(lsc, dtype=float)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value, order: int, like=None) -> "Jet":
        v = _arr(value)
        if like is not None:
            v = np.broadcast_to(v, np.shape(like)).astype(complex)
        zero = np.zeros_like(v)
        return cls((v,) + (zero,) * order)

    @classmethod
    def variable(cls, z, order: int) -> "Jet":
        z = _arr(z)
        coeffs = [z, np.ones_like(z)] + [np.zeros_like(z)] * (order - 1)
        return cls(tuple(coeffs[: order + 1]))

    # -- inspection -------------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.m) - 1

    @property
    def scaled(self) -> bool:
        return bool(np.any(self.lsc != 0.0))

    def _value(self, k: int):
        if k > self.order:
            return _scalar_or_array(np.full(np.shape(self.m[0]), np.nan + 0j))
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.m[k] * np.exp(self.lsc) if self.scaled else self.m[k]
        return _scalar_or_array(out)

    d0 = property(lambda self: self._value(0))
    d1 = property(lambda self: self._value(1))
    d2 = property(lambda self: self._value(2))
    d3 = property(lambda self: self._value(3))

    def values(self) -> tuple:
        return tuple(self._value(k) for k in range(self.order + 1))

    def ratio(self, k: int):
        """``f^(k) / f`` -- scale free, so it never overflows."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return _scalar_or_array(self.m[k] / self.m[0])

    def log_abs(self):
        """``log|f|`` computed from the mantissa and the log-scale."""
        with np.errstate(divide="ignore"):
            return _scalar_or_array(self.lsc + np.log(np.abs(self.m[0])))

    def derivative(self) -> "Jet":
        """The jet of ``f'``, one order lower."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet(self.m[1:], self.lsc)

    def truncate(self, order: int) -> "Jet":
        return Jet(self.m[: order + 1], self.lsc)

    def unscaled(self) -> "Jet":
        """Fold the log-scale into the mantissa; overflow is a domain error."""
        if not self.scaled:
            return self
        with np.errstate(over="ignore", invalid="ignore"):
            f = np.exp(self.lsc)
            coeffs = tuple(c * f for c in self.m)
        if not np.all(np.isfinite(coeffs[0])):
            raise DomainError("value exceeds floating point range")
        return Jet(coeffs)

    def __repr__(self):
        vals = ", ".join(repr(v) for v in self.values())
        return f"Jet(order={self.order}: {vals})"

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        n = min(self.order, other.order)
        if not (self.scaled or other.scaled):
            return Jet(tuple(self.m[k] + other.m[k] for k in range(n + 1)))
        top = np.maximum(self.lsc, other.lsc)
        sa = np.exp(self.lsc - top)
        sb = np.exp(other.lsc - top)
        return Jet(tuple(sa * self.m[k] + sb * other.m[k] for k in range(n + 1)), top)

    __radd__ = __add__

    def __neg__(self):
        return Jet(tuple(-c for c in self.m), self.lsc)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = _arr(other)
            return Jet(tuple(c * a for a in self.m), self.lsc)
        # operands within [1e-150, 1e150] keep every product term finite
        lhs, rhs = _renormalized(self.m, self.lsc), _renormalized(other.m, other.lsc)
        a, b = lhs.m, rhs.m
        n = min(self.order, other.order)
        out = [a[0] * b[0]]
        if n >= 1:
            out.append(a[1] * b[0] + a[0] * b[1])
        if n >= 2:
            out.append(a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2])
        if n >= 3:
            out.append(a[3] * b[0] + 3.0 * (a[2] * b[1] + a[1] * b[2]) + a[0] * b[3])
        return _renormalized(out, lhs.lsc + rhs.lsc)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        b = self.m
        if np.any(b[0] == 0):
            raise DomainError("division by zero (pole)")
        r0 = 1.0 / b[0]
        out = [r0]
        n = self.order
        if n >= 1:
            out.append(-b[1] * r0 * r0)
        if n >= 2:
            out.append((2.0 * b[1] * b[1] - b[0] * b[2]) * r0**3)
        if n >= 3:
            out.append((-6.0 * b[1] ** 3 + 6.0 * b[0] * b[1] * b[2] - b[0] ** 2 * b[3]) * r0**4)
        return _renormalized(out, -self.lsc)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            c = _arr(other)
            if np.any(c == 0):
                raise DomainError("division by zero (pole)")
            return Jet(tuple(a / c for a in self.m), self.lsc)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def ipow(self, n: int) -> "Jet":
        """Integer power by repeated squaring (no branch cut)."""
        if n < 0:
            return self.ipow(-n).reciprocal()
        result = Jet.constant(1.0, self.order, like=self.m[0])
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result


def _scalar_or_array(x):
    x = np.asarray(x)
    return complex(x) if x.ndim == 0 and np.iscomplexobj(x) else (float(x) if x.ndim == 0 else x)


def _renormalized(coeffs, lsc) -> Jet:
    mag = np.abs(coeffs[0])
    for c in coeffs[1:]:
        mag = np.maximum(mag, np.abs(c))
    off = (mag > _RENORM_ABOVE) | ((mag > 0) & (mag < 1.0 / _RENORM_ABOVE))
    if np.any(off):
        with np.errstate(divide="ignore"):
            shift = np.where(off, np.log(np.where(off, mag, 1.0)), 0.0)
        f = np.exp(-shift)
        coeffs = [c * f for c in coeffs]
        lsc = lsc + shift
    return Jet(tuple(coeffs), lsc)


# -- composition ----------------------------------------------------------

def compose(u: Jet, g) -> Jet:
    """Chain rule: the jet of ``g(u)`` given ``g, g', g'', g'''`` at ``u.d0``."""
    n = u.order
    out = [g[0]]
    if n >= 1:
        out.append(g[1] * u.m[1])
    if n >= 2:
        out.append(g[2] * u.m[1] ** 2 + g[1] * u.m[2])
    if n >= 3:
        out.append(g[3] * u.m[1] ** 3 + 3.0 * g[2] * u.m[1] * u.m[2] + g[1] * u.m[3])
    return Jet(tuple(out))


def _exp_of(phi: Jet) -> Jet:
    """``exp(phi)`` for an unscaled jet, derivatives from Faa di Bruno."""
    p = phi.m
    n = phi.order
    re = p[0].real
    big = np.abs(re) > _SCALED_EXP_BEYOND
    if np.any(big):
        lsc = np.where(big, re, 0.0)
        base = np.exp(p[0] - lsc)
    else:
        lsc = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            base = np.exp(p[0])
    out = [base]
    if n >= 1:
        out.append(base * p[1])
    if n >= 2:
        out.append(base * (p[2] + p[1] ** 2))
    if n >= 3:
        out.append(base * (p[3] + 3.0 * p[1] * p[2] + p[1] ** 3))
    return _renormalized(out, lsc)


def exp(u: Jet) -> Jet:
    return _exp_of(u.unscaled())


def _log_ratios(u: Jet):
    """Derivatives of ``log u`` (beyond the value), all scale free."""
    m0 = u.m[0]
    r = [u.m[k] / m0 for k in range(1, u.order + 1)]
    out = []
    if u.order >= 1:
        out.append(r[0])
    if u.order >= 2:
        out.append(r[1] - r[0] ** 2)
    if u.order >= 3:
        out.append(r[2] - 3.0 * r[0] * r[1] + 2.0 * r[0] ** 3)
    return out


def _check_cut(u: Jet, what: str):
    m0 = u.m[0]
    zero = m0 == 0
    if np.any(zero):
        raise DomainError(f"{what} singular at zero", _first_bad(zero, m0))
    cut = (m0.imag == 0) & (m0.real < 0)
    if np.any(cut):
        raise DomainError(f"{what} evaluated on its branch cut", _first_bad(cut, m0))


def log(u: Jet) -> Jet:
    """Principal logarithm; the negative real axis is a domain error."""
    _check_cut(u, "log")
    value = u.lsc + np.log(u.m[0])
    return Jet((value, *_log_ratios(u)))


def cpow(u: Jet, c) -> Jet:
    """``u**c = exp(c log u)`` on the principal branch, for a constant ``c``."""
    _check_cut(u, "power")
    c = complex(c)
    L = log(u)
    return _exp_of(Jet(tuple(c * x for x in L.m)))


def sqrt(u: Jet) -> Jet:
    return cpow(u, 0.5)


def _trig_pair(u: Jet, rotate: complex, kind: str) -> Jet:
    """sin/cos (``rotate=1j``) or sinh/cosh (``rotate=1``) via scaled exponentials.

    Only used where the direct formula would overflow: the exponential route
    loses relative accuracy near zeros of the result.
    """
    ep = _exp_of(Jet(tuple(rotate * x for x in u.m)))
    em = _exp_of(Jet(tuple(-rotate * x for x in u.m)))
    if kind == "sin":
        return (ep - em) * (-0.5j)
    if kind == "cos":
        return (ep + em) * 0.5
    if kind == "sinh":
        return (ep - em) * 0.5
    return (ep + em) * 0.5


_DIRECT = {
    "sin": lambda x: (np.sin(x), np.cos(x), -np.sin(x), -np.cos(x)),
    "cos": lambda x: (np.cos(x), -np.sin(x), -np.cos(x), np.sin(x)),
    "sinh": lambda x: (np.sinh(x), np.cosh(x), np.sinh(x), np.cosh(x)),
    "cosh": lambda x: (np.cosh(x), np.sinh(x), np.cosh(x), np.sinh(x)),
}


def _trig(u: Jet, kind: str) -> Jet:
    u = u.unscaled()
    x = u.m[0]
    growth = np.abs(x.imag) if kind in ("sin", "cos") else np.abs(x.real)
    big = growth > _SCALED_EXP_BEYOND
    with np.errstate(over="ignore", invalid="ignore"):
        direct = compose(u, _DIRECT[kind](x))
    if not np.any(big):
        return direct
    alt = _trig_pair(u, 1j if kind in ("sin", "cos") else 1.0, kind)
    lsc = np.where(big, alt.lsc, 0.0)
    coeffs = tuple(np.where(big, a, d) for a, d in zip(alt.m, direct.m))
    return Jet(coeffs, lsc)


def sin(u):
    return _trig(u, "sin")


def cos(u):
    return _trig(u, "cos")


def sinh(u):
    return _trig(u, "sinh")


def cosh(u):
    return _trig(u, "cosh")


def tan(u: Jet) -> Jet:
    u = u.unscaled()
    c = np.cos(u.m[0])
    if np.any(c == 0):
        raise DomainError("tan evaluated at a pole", _first_bad(c == 0, u.m[0]))
    with np.errstate(over="ignore", invalid="ignore"):
        t = np.tan(u.m[0])
    s = 1.0 + t * t
    return compose(u, (t, s, 2.0 * t * s, 2.0 * s * (1.0 + 3.0 * t * t)))


FUNCTIONS = {
    "exp": exp,
    "log": log,
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "sinh": sinh,
    "cosh": cosh,
    "sqrt": sqrt,
}
