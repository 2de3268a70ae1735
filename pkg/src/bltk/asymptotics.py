"""Asymptotics of ``y'' + A(z) y = 0``: Liouville variables, decay paths, ray solutions.

With ``Z = \\int sqrt(A) dz`` and ``W = A^{1/4} y`` the equation becomes
``W_ZZ + (1 + G) W = 0`` where ``G = (5/16) A'^2/A^3 - (1/4) A''/A^2``.  Where
``G`` is small the solutions behave like ``A^{-1/4} e^{+-iZ}``, so on curves
along which ``Z`` runs through real values (``Im Z`` constant) every solution
has modulus of order ``|A|^{-1/4}``.  This module

* finds the critical rays of a polynomial coefficient,
* evaluates ``Z`` along a path with a continuous branch of ``sqrt(A)``,
* traces the curves ``Im Z = const`` ("decay paths") from a starting point,
* integrates the equation along such a path and measures the amplitude
  envelope of all solutions, either with the Runge-Kutta solver or, when the
  path carries very many oscillations, with a Magnus integrator in the
  Liouville variables whose step size does not depend on the frequency,
* builds the solution ``u ~ 1`` on a ray by Picard iteration of the Volterra
  equation ``u(x) = 1 + \\int_x^inf (x - r) A u dr``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .contour import (
    DEFAULT_ODE_TOL,
    Path,
    Sampled,
    branch_sqrt,
    dopri5,
    gauss_kronrod,
    integrate_along_path,
    path_to_dict,
    solve_linear_ode,
)
from .errors import BranchError, DomainError, NonConvergenceError, PreconditionError
from .expr import Function, as_function

BURN_IN = 0.25
MODEL_R2 = 0.99
# paths with more oscillations than this are integrated in Liouville variables
OSCILLATION_THRESHOLD = 2000.0


# -- critical rays -------------------------------------------------------------

def _poly_coeffs(A) -> list[complex]:
    if isinstance(A, (list, tuple, np.ndarray)):
        coeffs = [complex(c) for c in A]
    else:
        coeffs = as_function(A).polynomial
        if coeffs is None:
            raise PreconditionError("coefficient is not a polynomial")
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    return coeffs


def critical_rays(A) -> list[float]:
    """Angles ``theta`` in ``[0, 2 pi)`` with ``a_n exp(i (n+2) theta) > 0``.

    ``A`` is a polynomial given as ascending coefficients or as an expression.

    Raises
    ------
    PreconditionError
        Degree 0 or a non-polynomial coefficient.
    """
    coeffs = _poly_coeffs(A)
    n = len(coeffs) - 1
    if n < 1:
        raise PreconditionError("a constant coefficient has no critical rays")
    base = -cmath.phase(coeffs[-1])
    two_pi = 2.0 * math.pi
    rays = []
    for k in range(n + 2):
        t = math.fmod(base + two_pi * k, two_pi * (n + 2)) / (n + 2)
        t = t + two_pi if t < 0 else t
        rays.append(0.0 if t >= two_pi else t)
    return sorted(rays)


# -- Liouville variable ------------------------------------------------------

def liouville_map(A, z0, path: Path, initial_choice: int = 1, tol: float = 1e-12) -> complex:
    """``Z = \\int sqrt(A) dz`` along ``path`` (which must start at ``z0``).

    The square root is continued along the path starting from
    ``initial_choice`` times the principal root at ``z0``.

    Raises
    ------
    BranchError
        ``A`` vanishes on the path.
    """
    z0 = complex(z0)
    if abs(path.start - z0) > 1e-12 * max(1.0, abs(z0)):
        raise PreconditionError("path does not start at z0")
    root = branch_sqrt(A, path, initial_choice)
    return integrate_along_path(root, path, tol)


def _Z_at_vertices(A: Function, points: np.ndarray, q0: complex) -> np.ndarray:
    """Cumulative ``\\int sqrt(A) dz`` at the vertices of a densely sampled polyline.

    Ten-point Gauss-Legendre per chord; the root is continued chord by chord.
    """
    x, w = np.polynomial.legendre.leggauss(10)
    a, b = points[:-1], points[1:]
    zq = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x[None, :]
    vals = np.sqrt(np.asarray(A(zq), dtype=complex))
    ends = np.sqrt(np.asarray(A(b), dtype=complex))
    ref = q0
    out = np.empty(len(points), dtype=complex)
    out[0] = 0.0
    for k in range(len(a)):
        v = vals[k]
        v = np.where(np.abs(v - ref) <= np.abs(v + ref), v, -v)
        out[k + 1] = out[k] + 0.5 * (b[k] - a[k]) * np.dot(w, v)
        e = ends[k]
        ref = e if abs(e - ref) <= abs(e + ref) else -e
    return out


# -- decay paths ---------------------------------------------------------------

@dataclass
class TraceResult:
    """A traced curve ``Im Z = const`` with its diagnostics.

    ``s`` is arc length and ``Z`` the Liouville variable (relative to the
    start) at the vertices of ``path``; ``eta`` is the direction sign.
    """

    path: Sampled
    s: np.ndarray
    Z: np.ndarray
    eta: int
    reason: str

    @property
    def im_drift(self) -> float:
        return float(np.max(np.abs(self.Z.imag - self.Z[0].imag)))

    def to_dict(self) -> dict:
        return {"path": path_to_dict(self.path), "eta": self.eta, "reason": self.reason,
                "arc_length": float(self.s[-1]), "im_Z_drift": self.im_drift}


class _NearZero(Exception):
    def __init__(self, z):
        self.z = z


def trace_decay_path_full(A, start, arc_length: float, tol: float = 1e-10,
                          stop_radius: float | None = None, min_abs: float = 1e-8,
                          max_step: float = 0.25) -> TraceResult:
    """Trace ``dz/ds = eta conj(sqrt A)/|sqrt A|`` (unit speed) from ``start``.

    Along the solution ``dZ/ds = eta |sqrt A|`` is real, so ``Im Z`` stays
    constant and ``eta Z`` increases: this is the curve ``dz/ds = eta/sqrt(A)``
    reparametrised by arc length.  ``eta`` is the sign that makes ``|z|``
    increase at the start.  Tracing stops after ``arc_length`` or when
    ``|z|`` reaches ``stop_radius``; the last vertex is then placed on the
    circle.

    Raises
    ------
    BranchError
        ``|A|`` drops below ``min_abs``; the partial path (if any) is attached
        as ``exc.partial``.
    """
    A = as_function(A)
    start = complex(start)
    a0 = A.scalar(start)
    if abs(a0) < min_abs:
        raise BranchError("zero of A at the start point", start)
    q0 = cmath.sqrt(a0)
    # d|z|/ds = Re(conj(z) dz/ds)/|z| = eta Re(z q)/(|z||q|)
    eta = -1 if (start * q0).real < 0 else 1
    state = {"q": q0}

    def root(z):
        a = A.scalar(z)
        if not abs(a) >= min_abs:
            raise _NearZero(z)
        q = cmath.sqrt(a)
        ref = state["q"]
        return q if abs(q - ref) <= abs(q + ref) else -q

    def rhs(s, y):
        q = root(complex(y[0]))
        return np.array([eta * q.conjugate() / abs(q)])

    pts, ss = [start], [0.0]

    class _Reached(Exception):
        pass

    def on_step(s, y, err):
        z = complex(y[0])
        state["q"] = root(z)
        pts.append(z)
        ss.append(s)
        if stop_radius is not None and abs(z) >= stop_radius:
            raise _Reached

    reason = "arc_length"
    try:
        dopri5(rhs, 0.0, float(arc_length), np.array([start]), tol, on_step=on_step,
               hmax=max_step)
    except _Reached:
        reason = "stop_radius"
        z1, z2 = pts[-2], pts[-1]
        r1, r2 = abs(z1), abs(z2)
        if r2 != r1:
            lam = (stop_radius - r1) / (r2 - r1)
            pts[-1] = z1 + lam * (z2 - z1)
            ss[-1] = ss[-2] + lam * (ss[-1] - ss[-2])
    except _NearZero as exc:
        exc_out = BranchError("approach to a zero of A while tracing", exc.z)
        exc_out.partial = Sampled(pts) if len(pts) >= 2 and pts[-1] != pts[0] else None
        raise exc_out from None
    points = np.array(pts)
    Z = _Z_at_vertices(A, points, q0)
    return TraceResult(Sampled(pts), np.array(ss), Z, eta, reason)


def trace_decay_path(A, start, arc_length: float, tol: float = 1e-10,
                     stop_radius: float | None = None, **kwargs) -> Sampled:
    """The path of :func:`trace_decay_path_full` as a sampled polyline."""
    return trace_decay_path_full(A, start, arc_length, tol, stop_radius, **kwargs).path


# -- Magnus integration in Liouville variables --------------------------------

def _inv_and_G(A: Function, z):
    """``1/A``, ``A'/A`` and ``G`` at points ``z`` from jets (scale-safe)."""
    j = A.jet(z, 2)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        inv = np.exp(-j.lsc) / j.m[0]
        r1 = j.m[1] / j.m[0]
        r2 = j.m[2] / j.m[0]
        G = (0.3125 * r1 * r1 - 0.25 * r2) * inv
    if not np.all(np.isfinite(G)):
        raise DomainError("A vanishes near the path; Liouville variables break down")
    return inv, r1, G


_NCHEB = 12
_CHEB_U = np.cos(np.pi * (np.arange(_NCHEB) + 0.5) / _NCHEB)
_CHEB_T = np.cos(np.pi * np.outer(np.arange(_NCHEB), np.arange(_NCHEB) + 0.5) / _NCHEB) * (2.0 / _NCHEB)
_CHEB_T[0] *= 0.5
_SQ3 = math.sqrt(3.0)


def _osc_moment(c: np.ndarray, omega: float) -> complex:
    """``\\int_{-1}^{1} p(u) exp(i omega u) du`` for the Chebyshev series ``c``."""
    cheb = np.polynomial.chebyshev
    n = len(c)
    if abs(omega) <= 2.0 * n * n:
        m = n + int(abs(omega)) + 16
        x, w = np.polynomial.legendre.leggauss(m)
        return complex(np.dot(w, cheb.chebval(x, c) * np.exp(1j * omega * x)))
    # repeated integration by parts terminates for a polynomial and is
    # well conditioned once omega exceeds the square of the degree
    total = 0j
    d = c
    ep, em = cmath.exp(1j * omega), cmath.exp(-1j * omega)
    denom = 1j * omega
    sign = 1.0
    for _ in range(n):
        total += sign * (cheb.chebval(1.0, d) * ep - cheb.chebval(-1.0, d) * em) / denom
        d = cheb.chebder(d)
        denom *= 1j * omega
        sign = -sign
        if len(d) == 0 or not np.any(d):
            break
    return total


def _omega(t0: float, t1: float, g: np.ndarray) -> tuple[np.ndarray, float]:
    """Magnus exponent for ``(a, b)`` over ``[t0, t1]`` from ``G`` at Chebyshev nodes.

    Returns the traceless 2x2 exponent and an estimate of the error caused by
    the polynomial fit of ``G``.
    """
    h = t1 - t0
    c = 0.5 * (t0 + t1)
    coef = _CHEB_T @ g
    k = np.arange(0, _NCHEB, 2)
    mu0 = 0.5 * h * np.dot(coef[::2], 2.0 / (1.0 - k * k))
    mup = 0.5 * h * cmath.exp(2j * c) * _osc_moment(coef, h)
    mum = 0.5 * h * cmath.exp(-2j * c) * _osc_moment(coef, -h)
    om = np.array([[0.5j * mu0, 0.5j * mum], [-0.5j * mup, -0.5j * mu0]])
    if h <= 1.0:
        # second Magnus term by the two-point Gauss rule (fourth order overall)
        cheb = np.polynomial.chebyshev
        mats = []
        for u in (-1.0 / _SQ3, 1.0 / _SQ3):
            gz = complex(cheb.chebval(u, coef))
            e = cmath.exp(2j * (c + 0.5 * h * u))
            mats.append(0.5j * gz * np.array([[1.0, 1.0 / e], [-e, -1.0]]))
        m1, m2 = mats
        om = om + (_SQ3 / 12.0) * h * h * (m2 @ m1 - m1 @ m2)
    fit_err = h * float(abs(coef[-1]) + abs(coef[-2]))
    return om, fit_err


def _expm_traceless(om: np.ndarray) -> np.ndarray:
    d2 = om[0, 0] * om[0, 0] + om[0, 1] * om[1, 0]
    d = cmath.sqrt(d2)
    if abs(d) < 1e-4:
        ch = 1 + d2 / 2 + d2 * d2 / 24
        sh = 1 + d2 / 6 + d2 * d2 / 120
    else:
        ch = cmath.cosh(d)
        sh = cmath.sinh(d) / d
    return ch * np.eye(2) + sh * om


class _ZetaCurve:
    """The curve ``z(zeta)`` with ``dz/dzeta = 1/q``, ``q`` a continuous root of ``A``.

    Also continues ``s = sqrt(q)`` (a fourth root of ``A``).
    """

    def __init__(self, A: Function, z0: complex, q0: complex, tol: float):
        self.A = A
        self.tol = tol
        self.state = (0.0, complex(z0), complex(q0), cmath.sqrt(q0), None)

    def _root(self, z, ref):
        q = cmath.sqrt(self.A.scalar(z))
        return q if abs(q - ref) <= abs(q + ref) else -q

    def points(self, state, zetas):
        """``(z, q, s)`` at increasing ``zetas`` starting from ``state``; new state at the last."""
        t0, z0, q0, s0, h0 = state
        ref = {"q": q0, "s": s0}

        def rhs(t, y):
            return np.array([1.0 / self._root(complex(y[0]), ref["q"])])

        track = {}

        def on_step(t, y, err):
            q = self._root(complex(y[0]), ref["q"])
            s = cmath.sqrt(q)
            ref["q"] = q
            ref["s"] = s if abs(s - ref["s"]) <= abs(s + ref["s"]) else -s
            track[t] = (ref["q"], ref["s"])

        info = {}
        y_end, hit = dopri5(rhs, t0, zetas[-1], np.array([z0]), self.tol, stops=zetas,
                            on_step=on_step, h0=h0, info=info)
        zs = np.array([complex(hit[t][0]) for t in zetas])
        qs = np.array([track[t][0] for t in zetas])
        ss = np.array([track[t][1] for t in zetas])
        new_state = (zetas[-1], complex(y_end[0]), qs[-1], ss[-1], info["h"])
        return zs, qs, ss, new_state


@dataclass
class LiouvilleSolution:
    """Nodes of a Magnus integration in Liouville variables."""

    zetas: np.ndarray
    zs: np.ndarray
    ys: np.ndarray  # (nodes, 2, m)
    ab: np.ndarray  # (nodes, 2, m) coefficients of e^{i zeta}, e^{-i zeta}
    steps: int
    rejected: int


def liouville_magnus(A, z0, zeta_end: float, Y0, tol: float = DEFAULT_ODE_TOL,
                     q0: complex | None = None, max_dz: float = math.inf,
                     max_steps: int = 200_000) -> LiouvilleSolution:
    """Integrate ``y'' + A y = 0`` along the curve ``Z - Z(z0) = zeta in [0, zeta_end]``.

    In the variables ``W = A^{1/4} y = a e^{i zeta} + b e^{-i zeta}`` the
    coefficients ``(a, b)`` satisfy a linear system whose matrix is ``G`` times
    a pure oscillation.  Each step applies the exponential of a Magnus
    exponent: ``G`` is fitted by a Chebyshev polynomial and its products with
    ``exp(+-2 i zeta)`` are integrated exactly, so the step length is limited
    by the variation of ``G`` and not by the oscillation.  Short steps add the
    second Magnus term.  The local error is estimated by comparing one step
    with two half steps.  The propagators have determinant one, so the
    Wronskian is conserved to rounding error.

    Parameters
    ----------
    zeta_end : float
        Positive length of the curve in the ``zeta`` variable.
    q0 : complex, optional
        Root of ``A(z0)`` defining the direction (``dz/dzeta = 1/q``).
    max_dz : float
        Upper bound for ``|z|`` increments between output nodes.
    """
    A = as_function(A)
    z0 = complex(z0)
    Y0 = np.array(Y0, dtype=complex)
    if Y0.ndim == 1:
        Y0 = Y0[:, None]
    if not zeta_end > 0:
        raise PreconditionError("zeta_end must be positive")
    a0 = A.scalar(z0)
    if q0 is None:
        q0 = cmath.sqrt(a0)
    curve = _ZetaCurve(A, z0, q0, tol=min(1e-12, tol))
    _, s0 = curve.state[2], curve.state[3]
    inv, r1, _ = _inv_and_G(A, np.array([z0]))
    u = (Y0[1] + 0.25 * r1[0] * Y0[0]) / q0
    ab = np.array([0.5 * s0 * (Y0[0] - 1j * u), 0.5 * s0 * (Y0[0] + 1j * u)])

    state = curve.state
    out_t, out_z, out_q, out_s, out_ab = [0.0], [z0], [q0], [s0], [ab.copy()]
    t = 0.0
    h = min(0.25, zeta_end)
    steps = rejected = 0
    u_full = 0.5 * (_CHEB_U + 1.0)
    while t < zeta_end:
        if steps + rejected > max_steps:
            raise NonConvergenceError("Liouville-Magnus integration exceeded its step budget")
        h = min(h, zeta_end - t)
        if zeta_end - t - h < 1e-12 * zeta_end:
            h = zeta_end - t
        t1 = t + h
        tm = t + 0.5 * h
        full = t + h * u_full[::-1]
        half1 = t + 0.5 * h * u_full[::-1]
        half2 = tm + 0.5 * h * u_full[::-1]
        grid = np.unique(np.concatenate([full, half1, half2, [tm, t1]]))
        grid = grid[grid > t]
        zs, qs, ss, new_state = curve.points(state, list(grid))
        _, _, G = _inv_and_G(A, zs)
        lookup = dict(zip(grid.tolist(), G))

        def g_at(nodes):
            return np.array([lookup[v] for v in nodes.tolist()])[::-1]

        om_f, e_f = _omega(t, t1, g_at(full))
        om_1, e_1 = _omega(t, tm, g_at(half1))
        om_2, e_2 = _omega(tm, t1, g_at(half2))
        P_full = _expm_traceless(om_f)
        P_half = _expm_traceless(om_2) @ _expm_traceless(om_1)
        err = float(np.max(np.abs(P_full - P_half))) + e_1 + e_2
        dz = abs(zs[-1] - state[1])
        if err <= tol and (dz <= max_dz or h < 1e-9):
            steps += 1
            ab = P_half @ ab
            t, state = t1, new_state
            out_t.append(t)
            out_z.append(zs[-1])
            out_q.append(qs[-1])
            out_s.append(ss[-1])
            out_ab.append(ab.copy())
            fac = min(2.0, max(0.3, 0.9 * (tol / max(err, 1e-300)) ** (1.0 / 3.0)))
            if dz > 0:
                fac = min(fac, 0.95 * max_dz / dz)
            h *= fac
        else:
            rejected += 1
            fac = 0.9 * (tol / err) ** (1.0 / 3.0) if err > tol else 1.0
            if dz > max_dz:
                fac = min(fac, 0.9 * max_dz / dz)
            h *= min(0.9, max(0.1, fac))
            if h < 1e-13 * max(1.0, t):
                raise NonConvergenceError(f"Liouville-Magnus step underflow at zeta = {t}")
    zetas = np.array(out_t)
    zs = np.array(out_z)
    qs = np.array(out_q)
    ss = np.array(out_s)
    abs_ = np.array(out_ab)
    ph = np.exp(1j * zetas)[:, None]
    ae = abs_[:, 0, :] * ph
    be = abs_[:, 1, :] / ph
    W = ae + be
    Wz = 1j * (ae - be)
    _, r1s, _ = _inv_and_G(A, zs)
    y = W / ss[:, None]
    dy = qs[:, None] * Wz / ss[:, None] - 0.25 * r1s[:, None] * y
    ys = np.stack([y, dy], axis=1)
    return LiouvilleSolution(zetas, zs, ys, abs_, steps, rejected)


# -- decay verification --------------------------------------------------------

def amplitude(A, z, y, dy) -> np.ndarray:
    """Local amplitude of a solution: ``(|y - i u| + |y + i u|)/2``,
    ``u = (y' + A'/(4A) y)/sqrt(A)``.

    For ``y = A^{-1/4}(a e^{iZ} + b e^{-iZ})`` this is
    ``|A|^{-1/4}(|a e^{iZ}| + |b e^{-iZ}|)``, the envelope of ``|y|`` over an
    oscillation; it does not depend on the branch of the roots.
    """
    A = as_function(A)
    z = np.asarray(z, dtype=complex)
    _, r1, _ = _inv_and_G(A, z)
    q = np.sqrt(np.asarray(A(z), dtype=complex))
    shape = (slice(None),) + (None,) * (np.ndim(y) - 1)
    u = (dy + 0.25 * r1[shape] * y) / q[shape]
    return 0.5 * (np.abs(y - 1j * u) + np.abs(y + 1j * u))


@dataclass
class DecayReport:
    """Envelope of all solutions along a path and its fitted decay law.

    ``envelope`` is the maximum over the two basis solutions of their local
    amplitude; ``raw`` the maximum of ``|y|`` itself.  ``fitted_rate`` is the
    slope of ``log envelope`` against ``log|z|`` (``model == "power"``) or
    against ``Re z`` (``model == "exponential"``) beyond the burn-in, and
    ``expected_rate`` the slope predicted by the ``|A|^{-1/4}`` law.
    Fits over a finite stretch of path are finite-range estimates.
    """

    path: Path
    s: np.ndarray
    z: np.ndarray
    envelope: np.ndarray
    raw: np.ndarray
    abs_A: np.ndarray
    fitted_rate: float
    expected_rate: float
    model: str
    verdict: bool
    method: str
    burn_in: float
    wronskian_drift: float
    basis_ratio: float
    n_ic: int
    meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.s.tolist(), self.envelope.tolist()))

    def normalized_ratio(self, r_lo: float, r_hi: float) -> float:
        """max/min of ``envelope * |A|^{1/4}`` over nodes with ``r_lo <= |z| <= r_hi``."""
        sel = (np.abs(self.z) >= r_lo) & (np.abs(self.z) <= r_hi)
        if not np.any(sel):
            raise PreconditionError("no samples in the requested range")
        v = self.envelope[sel] * self.abs_A[sel] ** 0.25
        return float(v.max() / v.min())

    def to_dict(self, max_samples: int = 512) -> dict:
        idx = np.unique(np.linspace(0, len(self.s) - 1, min(max_samples, len(self.s))).astype(int))
        return {
            "model": self.model,
            "fitted_rate": self.fitted_rate,
            "expected_rate": self.expected_rate,
            "verdict": self.verdict,
            "method": self.method,
            "burn_in": self.burn_in,
            "wronskian_drift": self.wronskian_drift,
            "basis_ratio": self.basis_ratio,
            "n_ic": self.n_ic,
            "estimate": "finite-range estimate",
            "samples": [{"s": float(self.s[i]), "z": {"re": float(self.z[i].real), "im": float(self.z[i].imag)},
                         "envelope": float(self.envelope[i])} for i in idx],
            **self.meta,
        }

    def rows(self):
        for s, z, e, r in zip(self.s, self.z, self.envelope, self.raw):
            yield {"s": s, "z.re": z.real, "z.im": z.imag, "envelope": e, "max_abs_y": r}


def _linfit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        return 0.0, 0.0
    slope = np.sum((x - xm) * (y - ym)) / sxx
    ss_res = np.sum((y - ym - slope * (x - xm)) ** 2)
    ss_tot = np.sum((y - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(r2)


def _random_ics(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    return v / np.linalg.norm(v, axis=0)


def verify_decay(A, path: Path, n_ic: int = 4, tol: float = DEFAULT_ODE_TOL, seed: int = 0,
                 method: str = "auto", burn_in: float = BURN_IN,
                 oscillation_threshold: float = OSCILLATION_THRESHOLD) -> DecayReport:
    """Integrate a solution basis along ``path`` and measure the envelope.

    The ``n_ic`` seeded random unit initial vectors ``c`` give the solutions
    ``Y c`` of the integrated fundamental matrix ``Y``; their amplitudes
    are compared with the basis envelope (``basis_ratio``).

    Parameters
    ----------
    method : {"auto", "rk", "liouville"}
        ``"rk"`` uses :func:`bltk.contour.solve_linear_ode` on the path itself;
        ``"liouville"`` uses :func:`liouville_magnus` along the curve
        ``Im Z = const`` from the path start to ``Re Z`` at the path end, which
        requires the path to be such a curve; ``"auto"`` picks the latter only
        when the path carries more than ``oscillation_threshold`` oscillations.

    Notes
    -----
    The model is ``"power"`` for polynomial ``A``.  Otherwise ``log|A|`` is
    regressed on ``Re z`` over the samples and the ``"exponential"`` model is
    chosen when ``R^2 >= 0.99``.  The verdict is true when the envelope beyond
    the burn-in never rises above its running minimum by more than a relative
    ``1e-8``.
    """
    A = as_function(A)
    ics = _random_ics(n_ic, seed) if n_ic > 0 else np.zeros((2, 0), dtype=complex)
    Y0 = np.eye(2, dtype=complex)
    Z = liouville_map(A, path.start, path, tol=1e-10)
    oscillations = abs(Z) / (2.0 * math.pi)
    decay_like = abs(Z.imag) <= 1e-6 * max(1.0, abs(Z))
    if method == "auto":
        method = "liouville" if oscillations > oscillation_threshold and decay_like else "rk"
    meta = {"oscillations": oscillations, "Z_end": {"re": Z.real, "im": Z.imag}}
    if method == "rk":
        traj = solve_linear_ode([A, 0], 2, path, Y0, tol)
        zs, ys = traj.zs, traj.ys
        meta["steps"] = len(zs) - 1
    elif method == "liouville":
        if not decay_like:
            raise PreconditionError("path is not a curve of constant Im Z; use method='rk'")
        q0 = cmath.sqrt(A.scalar(path.start))
        if Z.real < 0:
            q0 = -q0
        sol = liouville_magnus(A, path.start, abs(Z.real), Y0, tol, q0=q0, max_dz=path.length / 256)
        zs, ys = sol.zs, sol.ys
        meta.update(steps=sol.steps, rejected=sol.rejected,
                    end_mismatch=float(abs(zs[-1] - path.end)))
    else:
        raise ValueError(f"unknown method {method!r}")
    # the solution with initial data c is the basis combination Y c
    ys = np.concatenate([ys, ys @ ics], axis=2)
    amp = amplitude(A, zs, ys[:, 0, :], ys[:, 1, :])
    env = amp[:, :2].max(axis=1)
    raw = np.abs(ys[:, 0, :2]).max(axis=1)
    basis_ratio = float(np.max(amp[:, 2:].max(axis=1) / env)) if n_ic > 0 else 0.0
    W = ys[:, 0, 0] * ys[:, 1, 1] - ys[:, 1, 0] * ys[:, 0, 1]
    drift = float(np.max(np.abs(W - W[0])) / max(1.0, abs(W[0])))
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(zs)))])
    tail = s >= burn_in * s[-1]
    abs_A = np.abs(np.asarray(A(zs), dtype=complex))
    poly = A.polynomial
    if poly is not None:
        model = "power"
        coeffs = [c for c in poly]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        expected = -(len(coeffs) - 1) / 4.0
    else:
        slope_a, r2 = _linfit(zs[tail].real, np.log(abs_A[tail]))
        if r2 >= MODEL_R2:
            model, expected = "exponential", -slope_a / 4.0
        else:
            slope_p, _ = _linfit(np.log(np.abs(zs[tail])), np.log(abs_A[tail]))
            model, expected = "power", -slope_p / 4.0
        meta["log_abs_A_r2"] = r2
    x = zs[tail].real if model == "exponential" else np.log(np.abs(zs[tail]))
    rate, fit_r2 = _linfit(x, np.log(env[tail]))
    run_min = np.minimum.accumulate(env[tail])
    verdict = bool(np.all(env[tail] <= run_min * (1.0 + 1e-8)))
    meta["fit_r2"] = fit_r2
    return DecayReport(path, s, zs, env, raw, abs_A, rate, expected, model, verdict, method,
                       burn_in, drift, basis_ratio, n_ic, meta)


# -- tail integrals and Picard iteration on a ray ---------------------------------

@dataclass
class TailIntegral:
    """``\\int_X^cutoff r |A(r e^{i theta})| dr`` with diagnostics.

    ``last_panel`` is the magnitude of the final quadrature panel, a heuristic
    indicator of how much the integral beyond ``cutoff`` might still add;
    ``decay_scale`` is the length over which ``r |A|`` drops by ``e`` near
    the cutoff (``inf`` if it does not decay).
    """

    value: float
    error: float
    last_panel: float
    decay_scale: float

    def to_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "last_panel": self.last_panel,
                "decay_scale": self.decay_scale if math.isfinite(self.decay_scale) else None}


def tail_integral(A, theta: float, X: float, cutoff: float, tol: float = 1e-12) -> TailIntegral:
    """``\\int_X^cutoff r |A(r e^{i theta})| dr`` by adaptive Gauss-Kronrod."""
    if not cutoff > X >= 1:
        raise PreconditionError("need cutoff > X >= 1")
    A = as_function(A)
    u = cmath.exp(1j * theta)

    def integrand(r):
        return r * np.abs(np.asarray(A(r * u), dtype=complex))

    res = gauss_kronrod(integrand, np.array([X, cutoff], dtype=float), tol=tol)
    g1, g0 = integrand(np.array([cutoff])), integrand(np.array([cutoff - 1.0]))
    g1, g0 = float(g1[0]), float(g0[0])
    scale = 1.0 / math.log(g0 / g1) if g1 > 0 and g0 > g1 else math.inf
    return TailIntegral(float(res.value.real), res.error, res.last_panel, scale)


@dataclass
class PicardSolution:
    """Solution ``u ~ 1`` of ``u'' + e^{2 i theta} A(x e^{i theta}) u = 0`` on a ray.

    ``iterations`` is the smallest ``j`` with ``|u_{j+1} - u_j| <= tol``;
    ``differences`` are the sup-norm distances between successive iterates;
    ``observed_ratio`` the largest ratio of consecutive differences.  The
    second solution ``v = u (X + \\int_X^x u^{-2})`` has Wronskian one with
    ``u``; ``v_values`` holds it on ``x_grid``.
    """

    x_grid: np.ndarray
    u_values: np.ndarray
    iterations: int
    contraction_bound: float
    residual: float
    observed_ratio: float
    differences: list
    cutoff: float
    truncation_error: float
    v_values: np.ndarray
    v_residual: float
    theta: float
    X: float

    def to_dict(self) -> dict:
        def c(z):
            return {"re": float(z.real), "im": float(z.imag)}
        return {
            "theta": self.theta, "X": self.X, "cutoff": self.cutoff,
            "iterations": self.iterations, "contraction_bound": self.contraction_bound,
            "observed_ratio": self.observed_ratio, "residual": self.residual,
            "truncation_error": self.truncation_error, "differences": list(self.differences),
            "v_residual": self.v_residual,
            "x_grid": self.x_grid.tolist(),
            "u": [c(v) for v in self.u_values],
            "v": [c(v) for v in self.v_values],
        }


def _cumulative_from_right(f: np.ndarray, h: float) -> np.ndarray:
    """``F[i] = \\int_{x_i}^{x_end} f`` on a uniform grid, fourth-order accurate."""
    n = len(f)
    if n < 4:
        raise PreconditionError("need at least four grid points")
    seg = np.empty(n - 1, dtype=f.dtype)
    # cubic through four neighbouring samples, integrated over the middle interval
    seg[1:-1] = h / 24.0 * (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:])
    seg[0] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
    seg[-1] = h / 24.0 * (9.0 * f[-1] + 19.0 * f[-2] - 5.0 * f[-3] + f[-4])
    out = np.zeros(n, dtype=f.dtype)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def _cumulative_from_left(f: np.ndarray, h: float) -> np.ndarray:
    return _cumulative_from_right(f[::-1], h)[::-1]


def _second_derivative(u: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central second difference at interior points ``2..n-3``."""
    return (-u[:-4] + 16.0 * u[1:-3] - 30.0 * u[2:-2] + 16.0 * u[3:-1] - u[4:]) / (12.0 * h * h)


def _interp_cubic(x0: float, h: float, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Local cubic Lagrange interpolation on a uniform grid."""
    n = len(vals)
    pos = (np.asarray(x, dtype=float) - x0) / h
    i = np.clip(np.floor(pos).astype(int) - 1, 0, n - 4)
    t = pos - i
    w0 = -(t - 1) * (t - 2) * (t - 3) / 6.0
    w1 = t * (t - 2) * (t - 3) / 2.0
    w2 = -t * (t - 1) * (t - 3) / 2.0
    w3 = t * (t - 1) * (t - 2) / 6.0
    return w0 * vals[i] + w1 * vals[i + 1] + w2 * vals[i + 2] + w3 * vals[i + 3]


def picard_ray_solution(A, theta: float, X: float, x_grid, tol: float = 1e-13,
                        max_iter: int = 100, h: float = 0.01,
                        cutoff: float | None = None) -> PicardSolution:
    """Solve ``u = 1 + \\int_x^C (x - r) a(r) u(r) dr``, ``a(r) = e^{2i theta} A(r e^{i theta})``.

    Iterates from ``u_0 = 0`` on a uniform grid of step ``h`` over ``[X, C]``
    until successive iterates differ by at most ``tol``.  The truncation
    point ``C`` defaults to ``max(x_grid) + 10 L`` with ``L`` the decay scale
    of ``r|A|`` reported by :func:`tail_integral`.  The integral of ``r|A|``
    over ``[X, C]`` bounds the contraction factor of the iteration and must be
    below 1/2.

    The reported ``residual`` is ``max |u'' + a u|`` over interior grid points
    (fourth-order differences) plus a bound for the part of the integral
    beyond ``C``.

    Raises
    ------
    PreconditionError
        The contraction condition fails.
    NonConvergenceError
        ``max_iter`` iterations without reaching ``tol``.
    """
    A = as_function(A)
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim != 1 or len(x_grid) == 0 or np.any(np.diff(x_grid) <= 0) or x_grid[0] < X:
        raise PreconditionError("x_grid must be increasing and >= X")
    x_max = float(x_grid[-1])
    if cutoff is None:
        probe = tail_integral(A, theta, X, max(x_max, X + 1.0) + 10.0)
        scale = probe.decay_scale if math.isfinite(probe.decay_scale) else 10.0
        cutoff = max(x_max, X + 1.0) + 10.0 * scale
    tail = tail_integral(A, theta, X, cutoff)
    bound = tail.value
    # the integral beyond the cutoff, estimated from the decay at the cutoff
    beyond = tail.last_panel if not math.isfinite(tail.decay_scale) else (
        cutoff * abs(A.scalar(cutoff * cmath.exp(1j * theta))) * tail.decay_scale * (1 + tail.decay_scale / cutoff))
    if not bound + beyond < 0.5:
        raise PreconditionError(f"contraction condition fails: integral of r|A| is {bound + beyond:.4g} >= 1/2")
    n = int(math.ceil((cutoff - X) / h)) + 1
    x = np.linspace(X, cutoff, n)
    hh = x[1] - x[0]
    a = cmath.exp(2j * theta) * np.asarray(A(x * cmath.exp(1j * theta)), dtype=complex)
    a = np.broadcast_to(a, x.shape).astype(complex)

    u = np.zeros(n, dtype=complex)
    diffs = []
    for j in range(1, max_iter + 1):
        au = a * u
        u_new = 1.0 + x * _cumulative_from_right(au, hh) - _cumulative_from_right(x * au, hh)
        d = float(np.max(np.abs(u_new - u)))
        diffs.append(d)
        u = u_new
        if d <= tol:
            break
    else:
        raise NonConvergenceError(f"Picard iteration did not reach {tol:g} in {max_iter} iterations")
    ratios = [diffs[k + 1] / diffs[k] for k in range(len(diffs) - 1) if diffs[k] > 0 and diffs[k + 1] > 1e3 * tol]
    observed = max(ratios) if ratios else 0.0
    trunc = beyond * float(np.max(np.abs(u)))
    res_u = float(np.max(np.abs(_second_derivative(u, hh) + (a * u)[2:-2])))
    # second solution v = u (X + int_X^x u^-2)
    w = _cumulative_from_left(1.0 / (u * u), hh)
    v = u * (X + w)
    res_v = float(np.max(np.abs(_second_derivative(v, hh) + (a * v)[2:-2])))
    return PicardSolution(
        x_grid=x_grid,
        u_values=_interp_cubic(X, hh, u, x_grid),
        # the last pass only confirms that u_{j} is already a fixed point to tol
        iterations=max(1, len(diffs) - 1),
        contraction_bound=bound + beyond,
        residual=res_u + trunc,
        observed_ratio=observed,
        differences=diffs,
        cutoff=float(cutoff),
        truncation_error=trunc,
        v_values=_interp_cubic(X, hh, v, x_grid),
        v_residual=res_v,
        theta=float(theta),
        X=float(X),
    )
