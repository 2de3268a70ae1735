"""Numerical Nevanlinna theory on finite ranges of radii.

``m(r, f)`` is the circle mean of ``log+ |f|``; ``N(r, 1/(f - a))`` the
integrated counting function of the ``a``-points; ``T = m + N``.  Growth
quantities (order, exponent of convergence, deficiency) are limits as
``r -> infinity``; here they are replaced by least-squares slopes and minima
over the top decade of a finite geometric grid, and every report says so.

Functions known only through the differential equation are handled by
:func:`ode_product_profile`, which integrates ``y'' + A y = 0`` outward along
many rays at once and reads the product ``E = f1 f2`` off at checkpoint
circles.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .contour import dopri5, gauss_kronrod
from .errors import DomainError, PreconditionError
from .expr import Function, NativeFunction, as_function
from .zeros import CountingData, counting_function

LOG_CAP = 700.0  # stands in for log 1/|f - a| where f - a evaluates to exactly 0
FINITE_RANGE = "finite-range estimate"


def default_radii(r_max: float, r_min: float = 1.0, ratio: float = math.sqrt(2.0)) -> list[float]:
    """Geometric grid ``r_min, r_min*ratio, ...`` ending exactly at ``r_max``."""
    out = []
    r = r_min
    while r < r_max * (1 - 1e-12):
        out.append(r)
        r *= ratio
    out.append(float(r_max))
    return out


def _shifted(f: Function, a) -> Function:
    """``f - a`` as a :class:`Function` (scale-aware subtraction on jets)."""
    if a == 0:
        return f
    return NativeFunction(lambda z, order: f.jet(z, order) - a, name=f"({f.name})-({a})")


def _log_abs(f: Function, z) -> np.ndarray:
    with np.errstate(all="ignore"):
        return np.real(np.asarray(f.log_abs(z), dtype=float))


def _circle_integrand(f: Function, r: float, a):
    """``theta -> log+ |g(r e^{i theta})|`` with ``g = f`` or ``1/(f - a)``, capped."""
    g = f if a is None else _shifted(f, a)
    sign = 1.0 if a is None else -1.0

    def integrand(theta):
        la = sign * _log_abs(g, r * np.exp(1j * np.asarray(theta)))
        if a is None:
            return np.clip(la, 0.0, None)
        la = np.where(np.isfinite(la), la, LOG_CAP)
        return np.clip(la, 0.0, LOG_CAP)

    return integrand


def proximity(f, r: float, a=None, nodes: int = 256, rel_tol: float = 1e-4) -> float:
    """``m(r, f)`` for ``a = None`` (the value infinity), else ``m(r, 1/(f - a))``.

    Adaptive Gauss-Kronrod in the angle starting from ``nodes // 15`` panels,
    with absolute error target ``rel_tol * (1 + m)``.  Near ``a``-points the
    integrand ``log 1/|f - a|`` has integrable logarithmic singularities,
    which the adaptive bisection resolves; genuinely large values far from
    any ``a``-point (``1/e^z`` on the left half plane) are kept exactly.
    A node that lands on an ``a``-point gets the finite stand-in
    ``LOG_CAP``, so the panel is refined instead of producing ``inf``.
    """
    if not r >= 1:
        raise PreconditionError("proximity is defined here for r >= 1")
    if nodes < 64:
        raise PreconditionError("need at least 64 nodes")
    f = as_function(f)
    integrand = _circle_integrand(f, r, a)
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    rough = math.fsum(integrand(theta)) / nodes
    panels = max(4, nodes // 15)
    breaks = np.linspace(0.0, 2.0 * np.pi, panels + 1)
    target = rel_tol * (1.0 + rough) * 2.0 * np.pi
    res = gauss_kronrod(integrand, breaks, tol=target, max_panels=200000)
    return float(res.value.real) / (2.0 * np.pi)


def characteristic(f, r: float, denominator=None, nodes: int = 256) -> float:
    """``T(r, f) = m(r, f) + N(r, f)``.

    For an entire ``f`` (``denominator=None``) ``N(r, f) = 0``.  For a quotient
    pass the numerator as ``f`` and the denominator separately; its zeros are
    counted with :func:`bltk.zeros.counting_function`.
    """
    f = as_function(f)
    if denominator is None:
        return proximity(f, r, None, nodes)
    q = as_function(denominator)
    quotient = NativeFunction(lambda z, order: f.jet(z, order) / q.jet(z, order),
                              name=f"({f.name})/({q.name})")
    m = proximity(quotient, r, None, nodes)
    N = counting_function(q, [r]).N_values[0] if r >= 1 else 0.0
    return m + N


@dataclass
class DeficiencyEstimate:
    """``min m/T`` over the top half of the radii and its trend."""

    delta: float
    trend: float
    radii: list
    ratios: list
    T_values: list
    m_values: list
    note: str = FINITE_RANGE

    def __float__(self):
        return float(self.delta)


def deficiency_estimate(f, a, radii, nodes: int = 256, denominator=None) -> DeficiencyEstimate:
    """Finite-range estimate of ``delta(a, f) = liminf m(r, 1/(f-a)) / T(r, f)``.

    Returns the minimum of the ratio over the top half of the radii (the
    last ``ceil(n/2)``), together with the trend ``ratio(last) - ratio(first)``
    which flags non-monotone behaviour.

    Raises
    ------
    PreconditionError
        Fewer than three radii, radii not increasing, or spanning less than a
        factor of four.
    DomainError
        ``T < 1`` at some radius (the function is too small to estimate).
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3 or any(b <= a_ for a_, b in zip(radii, radii[1:])):
        raise PreconditionError("need at least three increasing radii")
    if radii[-1] < 4 * radii[0]:
        raise PreconditionError("radii must span at least a factor of four")
    f = as_function(f)
    Ts, ms, ratios = [], [], []
    for r in radii:
        T = characteristic(f, r, denominator, nodes)
        if T < 1:
            raise DomainError(f"T({r:g}) = {T:.3g} < 1: too small for a deficiency estimate")
        m = proximity(f, r, a, nodes)
        Ts.append(T)
        ms.append(m)
        ratios.append(m / T)
    top = ratios[len(ratios) // 2:]
    return DeficiencyEstimate(min(top), ratios[-1] - ratios[0], radii, ratios, Ts, ms)


def _top_decade(radii, values):
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = radii >= radii[-1] / 10.0
    return radii[sel], values[sel]


def _slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    xm = x.mean()
    return float(np.sum((x - xm) * (y - y.mean())) / np.sum((x - xm) ** 2))


def order_from_values(radii, T_values) -> float:
    """Slope of ``log T`` against ``log r`` over the top decade of the grid."""
    r, T = _top_decade(radii, T_values)
    if len(r) < 2:
        raise PreconditionError("need at least two radii in the top decade")
    if np.any(T <= 0):
        raise DomainError("nonpositive T values")
    return _slope(np.log(r), np.log(T))


def order_estimate(f, radii, nodes: int = 256, denominator=None) -> float:
    """Finite-range order: least-squares slope of ``log T`` vs ``log r`` (top decade).

    ``f`` may also be a :class:`NevanProfile`, whose ``T_values`` are used.
    """
    if isinstance(f, NevanProfile):
        return order_from_values(f.radii, f.T_values)
    radii = [float(r) for r in radii]
    if len(radii) < 5:
        raise PreconditionError("need at least five radii")
    T = [characteristic(f, r, denominator, nodes) for r in radii]
    return order_from_values(radii, T)


@dataclass
class ExponentFit:
    value: float
    zero_free: bool
    points: int
    note: str = FINITE_RANGE

    def __float__(self):
        return float(self.value)


def convergence_exponent_full(counting: CountingData) -> ExponentFit:
    """Slope of ``log N`` against ``log r`` over the top decade, with a zero-free flag."""
    r, N = _top_decade(counting.radii, counting.N_values)
    n = np.asarray(counting.n_values)
    if np.all(n == 0):
        return ExponentFit(0.0, True, len(r))
    keep = N > 0
    if keep.sum() < 2:
        raise PreconditionError("need N > 0 at two or more radii of the top decade")
    return ExponentFit(_slope(np.log(r[keep]), np.log(N[keep])), False, int(keep.sum()))


def convergence_exponent(counting: CountingData) -> float:
    """Finite-range exponent of convergence of the zeros (0.0 if zero-free)."""
    return convergence_exponent_full(counting).value


@dataclass
class NevanProfile:
    """Nevanlinna functionals of ``f`` and the value ``target`` on a radii grid.

    ``m_values`` are ``m(r, 1/(f - target))`` (``m(r, f)`` for the value
    infinity, ``target=None``), ``N_values`` the matching counting function and
    ``T_values`` the characteristic ``T(r, f)``.
    """

    radii: list
    m_values: list
    N_values: list
    T_values: list
    target: complex | None
    fitted_order: float
    fitted_lambda: float
    delta_estimate: float
    n_values: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "m", "N", "T"])
        for row in zip(self.radii, self.m_values, self.N_values, self.T_values):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        t = self.target
        return {
            "order": self.fitted_order,
            "lambda": self.fitted_lambda,
            "delta": self.delta_estimate,
            "target": None if t is None else {"re": complex(t).real, "im": complex(t).imag},
            "radii": [float(r) for r in self.radii],
            "m": [float(v) for v in self.m_values],
            "N": [float(v) for v in self.N_values],
            "T": [float(v) for v in self.T_values],
            "n": [int(v) for v in self.n_values],
            "estimate": FINITE_RANGE,
            **self.meta,
        }

    def log_convexity_defect(self) -> float:
        """Most negative divided second difference of ``T`` in ``log r`` (0 if convex)."""
        return log_convexity_defect(self.radii, self.T_values)


def log_convexity_defect(radii, T_values) -> float:
    x = np.log(np.asarray(radii, dtype=float))
    T = np.asarray(T_values, dtype=float)
    if len(x) < 3:
        return 0.0
    d1 = np.diff(T) / np.diff(x)
    d2 = np.diff(d1) / (0.5 * (x[2:] - x[:-2]))
    return float(min(0.0, d2.min()))


def nevanlinna_profile(f, target=0.0, radii=None, r_max: float = 20.0, nodes: int = 256,
                       count_tol: float = 1e-8) -> NevanProfile:
    """Profile of an entire function given by an expression.

    ``N`` is computed by :func:`bltk.zeros.counting_function` applied to
    ``f - target`` (zero for ``target=None``).
    """
    f = as_function(f)
    radii = default_radii(r_max) if radii is None else [float(r) for r in radii]
    T = [proximity(f, r, None, nodes) for r in radii]
    if target is None:
        m = list(T)
        N = [0.0] * len(radii)
        n = [0] * len(radii)
    else:
        m = [proximity(f, r, target, nodes) for r in radii]
        cd = counting_function(_shifted(f, target), radii, tol=count_tol)
        N, n = cd.N_values, cd.n_values
    meta = {"nodes": nodes, "count_tol": count_tol}
    try:
        order = order_from_values(radii, T)
    except (PreconditionError, DomainError) as exc:
        # bounded functions have T = 0 on |z| >= 1: no slope to fit
        order = float("nan")
        meta["order_note"] = str(exc)
    lam = (convergence_exponent(CountingData(radii, n, 0, N)) if any(n) else 0.0)
    top = [mi / Ti for mi, Ti in zip(m[len(m) // 2:], T[len(T) // 2:]) if Ti > 0]
    delta = min(top) if top else float("nan")
    return NevanProfile(radii, m, N, T, target, order, lam, delta, n, meta)


# -- functions defined by the differential equation ---------------------------------

@dataclass
class RayProduct:
    """``E = f1 f2`` on checkpoint circles from outward ray integrations.

    ``log_abs_E[k, j]`` and ``arg_E[k, j]`` refer to radius ``radii[k]`` and
    angle ``2 pi j / nodes``.
    """

    radii: np.ndarray
    nodes: int
    log_abs_E: np.ndarray
    E: np.ndarray
    scaled_drift: float
    steps: int


def ray_product(A, radii, nodes: int = 4096, tol: float = 1e-10, Y0=None) -> RayProduct:
    """Integrate ``y'' + A y = 0`` from 0 along ``nodes`` rays to ``max(radii)``.

    The fundamental matrix starting from ``Y0`` (default identity, so
    ``f1(0) = 1, f1'(0) = 0, f2(0) = 0, f2'(0) = 1`` and ``W(f1, f2) = 1``)
    is advanced on all rays with one shared step sequence and recorded at
    every radius.

    ``scaled_drift`` is ``max |W - W(0)| / (|f1 f2'| + |f1' f2|)``: the solutions
    grow like ``exp(c r^{3/2})``, so the Wronskian can only be checked relative to
    the size of the products it is formed from.
    """
    A = as_function(A)
    radii = np.asarray(sorted(float(r) for r in radii))
    if radii[0] <= 0:
        raise PreconditionError("radii must be positive")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    u = np.exp(1j * theta)
    Y0 = np.eye(2, dtype=complex) if Y0 is None else np.asarray(Y0, dtype=complex)
    state = np.zeros((4, nodes), dtype=complex)
    state[0], state[1], state[2], state[3] = Y0[0, 0], Y0[1, 0], Y0[0, 1], Y0[1, 1]
    W0 = Y0[0, 0] * Y0[1, 1] - Y0[1, 0] * Y0[0, 1]

    def rhs(t, y):
        a = np.asarray(A(t * u), dtype=complex)
        out = np.empty_like(y)
        out[0] = u * y[1]
        out[1] = -u * a * y[0]
        out[2] = u * y[3]
        out[3] = -u * a * y[2]
        return out

    info = {}
    _, hit = dopri5(rhs, 0.0, float(radii[-1]), state, tol, stops=list(radii), info=info,
                    max_steps=2_000_000)
    E = np.empty((len(radii), nodes), dtype=complex)
    drift = 0.0
    for k, r in enumerate(radii):
        f1, d1, f2, d2 = hit[float(r)]
        E[k] = f1 * f2
        W = f1 * d2 - d1 * f2
        size = np.maximum(np.abs(f1 * d2) + np.abs(d1 * f2), 1.0)
        drift = max(drift, float(np.max(np.abs(W - W0) / size)))
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(E))
    return RayProduct(radii, nodes, log_abs, E, drift, info["steps"])


def _winding(E_circle: np.ndarray) -> tuple[int, float]:
    """Winding number of a closed sampled curve around 0 and the largest phase step."""
    ph = np.angle(E_circle)
    d = np.diff(np.concatenate([ph, ph[:1]]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(math.fsum(d) / (2.0 * np.pi))), float(np.max(np.abs(d)))


def ode_product_profile(A, r_max: float = 40.0, radii=None, nodes: int = 4096,
                        tol: float = 1e-10, max_nodes: int = 8192,
                        phase_step: float = 1.0) -> NevanProfile:
    """Nevanlinna profile of ``E = f1 f2`` for ``y'' + A y = 0`` (value 0).

    ``T(r, E) = m(r, E)`` and ``m(r, 1/E)`` are trapezoid means over the ray
    grid.  ``n(r)`` is the winding number of
    ``E`` on each circle; if some phase step exceeds ``phase_step`` radians the
    whole computation is repeated with twice as many rays (up to
    ``max_nodes``), otherwise the radius is flagged unreliable.  ``N(r)``
    comes from Jensen's formula, ``N(r) = mean log|E| - log|E'(0)|`` (``E`` has
    a simple zero at 0 for the default initial data), and is cross-checked
    against the integral of ``n(t)/t`` over the grid.
    """
    radii = default_radii(r_max) if radii is None else [float(r) for r in radii]
    while True:
        rp = ray_product(A, radii, nodes, tol)
        wind = [_winding(rp.E[k]) for k in range(len(radii))]
        worst = max(w[1] for w in wind)
        if worst <= phase_step or nodes * 2 > max_nodes:
            break
        nodes *= 2
    n_vals = [w[0] for w in wind]
    unreliable = [float(r) for r, w in zip(radii, wind) if w[1] > phase_step]
    mean_log = np.array([math.fsum(row) / nodes for row in rp.log_abs_E])
    T = [math.fsum(np.clip(row, 0.0, None)) / nodes for row in rp.log_abs_E]
    m0 = [math.fsum(np.clip(-row, 0.0, LOG_CAP)) / nodes for row in rp.log_abs_E]
    # E = f1 f2 with f2(0) = 0, f2'(0) = 1, f1(0) = 1: E'(0) = 1, so the Jensen constant is 0
    N = list(mean_log)
    # cross-check: trapezoid of n(t)/t on the grid (coarse; reported only)
    lr = np.log(radii)
    n_arr = np.array(n_vals, dtype=float)
    N_trap = np.concatenate([[N[0]], N[0] + np.cumsum(0.5 * (n_arr[1:] + n_arr[:-1]) * np.diff(lr))])
    order = order_from_values(radii, T)
    lam = convergence_exponent(CountingData(radii, n_vals, 1, N))
    top = [mi / Ti for mi, Ti in zip(m0[len(m0) // 2:], T[len(T) // 2:]) if Ti > 0]
    meta = {"nodes": nodes, "tol": tol, "scaled_wronskian_drift": rp.scaled_drift,
            "steps": rp.steps, "max_phase_step": worst, "unreliable_radii": unreliable,
            "jensen_vs_counting": [float(a - b) for a, b in zip(N, N_trap)],
            "counting_source": "winding number; N from Jensen's formula"}
    return NevanProfile(radii, m0, N, T, 0.0, order, lam, min(top) if top else float("nan"),
                        n_vals, meta)
