"""Paths in the complex plane, adaptive quadrature and linear ODE integration along them.

Every path is a concatenation of smooth pieces; piece ``k`` is parametrised by
``tau`` in ``[k, k+1]`` so a single real "global parameter" addresses any
point on the path.  Quadrature (batched Gauss-Kronrod 7/15) and the ODE
integrator (Dormand-Prince 5(4) with PI step control) both work in that
parameter.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BranchError, DomainError, NonConvergenceError, PathMismatchError, PreconditionError
from .expr import Function, as_function

DEFAULT_ODE_TOL = 1e-10
DEFAULT_QUAD_TOL = 1e-10


# -- paths ------------------------------------------------------------------

class Path:
    """Oriented piecewise-smooth path; subclasses provide :meth:`z_dz`."""

    n_pieces: int = 1

    def z_dz(self, tau):
        """Points and derivatives ``dz/dtau`` at global parameters ``tau``."""
        raise NotImplementedError

    def point(self, tau):
        return self.z_dz(tau)[0]

    def z_dz_scalar(self, tau: float) -> tuple[complex, complex]:
        z, dz = self.z_dz(tau)
        return complex(z), complex(dz)

    @property
    def start(self) -> complex:
        return complex(self.point(0.0))

    @property
    def end(self) -> complex:
        return complex(self.point(float(self.n_pieces)))

    @property
    def length(self) -> float:
        return float(np.sum(self.piece_lengths()))

    def piece_lengths(self) -> np.ndarray:
        # 16-point Gauss-Legendre per piece is exact for lines and ample for arcs
        x, w = np.polynomial.legendre.leggauss(16)
        out = []
        for k in range(self.n_pieces):
            tau = k + 0.5 * (x + 1.0)
            out.append(0.5 * np.sum(w * np.abs(self.z_dz(tau)[1])))
        return np.array(out)

    def reversed(self) -> "Path":
        raise NotImplementedError

    def sample(self, per_piece: int = 8) -> np.ndarray:
        tau = np.concatenate([k + np.linspace(0.0, 1.0, per_piece, endpoint=False)
                              for k in range(self.n_pieces)] + [[float(self.n_pieces)]])
        return self.point(tau)


@dataclass(frozen=True)
class Polyline(Path):
    points: tuple

    def __init__(self, points):
        pts = tuple(complex(p) for p in points)
        if len(pts) < 2:
            raise PreconditionError("a polyline needs at least two points")
        if all(p == pts[0] for p in pts):
            raise PreconditionError("path has zero length")
        object.__setattr__(self, "points", pts)

    @property
    def n_pieces(self) -> int:
        return len(self.points) - 1

    def _arrays(self):
        pts = np.asarray(self.points)
        return pts[:-1], np.diff(pts)

    def z_dz(self, tau):
        tau = np.asarray(tau, dtype=float)
        base, delta = self._arrays()
        k = np.clip(np.floor(tau).astype(int), 0, self.n_pieces - 1)
        t = tau - k
        return base[k] + t * delta[k], delta[k]

    def z_dz_scalar(self, tau):
        pts = self.points
        k = min(max(int(math.floor(tau)), 0), len(pts) - 2)
        d = pts[k + 1] - pts[k]
        return pts[k] + (tau - k) * d, d

    def piece_lengths(self):
        return np.abs(np.diff(np.asarray(self.points)))

    def reversed(self):
        return type(self)(self.points[::-1])


class Sampled(Polyline):
    """Polyline produced by a path tracer."""


def segment(a, b) -> Polyline:
    return Polyline([a, b])


@dataclass(frozen=True)
class RaySegment(Path):
    """``z = t exp(i theta)`` for ``t`` from ``t0`` to ``t1``."""

    theta: float
    t0: float
    t1: float

    def __post_init__(self):
        if self.t0 == self.t1:
            raise PreconditionError("ray segment has zero length")

    def z_dz(self, tau):
        tau = np.asarray(tau, dtype=float)
        u = complex(math.cos(self.theta), math.sin(self.theta))
        d = (self.t1 - self.t0) * u
        return (self.t0 + tau * (self.t1 - self.t0)) * u, np.broadcast_to(d, tau.shape).astype(complex)

    def piece_lengths(self):
        return np.array([abs(self.t1 - self.t0)])

    def reversed(self):
        return RaySegment(self.theta, self.t1, self.t0)


@dataclass(frozen=True)
class CircleArc(Path):
    """``z = center + radius exp(i phi)`` for ``phi`` from ``arg0`` to ``arg1``."""

    center: complex
    radius: float
    arg0: float
    arg1: float

    def __post_init__(self):
        if not self.radius > 0:
            raise PreconditionError("radius must be positive")
        if self.arg0 == self.arg1:
            raise PreconditionError("arc has zero length")

    def z_dz(self, tau):
        tau = np.asarray(tau, dtype=float)
        span = self.arg1 - self.arg0
        e = np.exp(1j * (self.arg0 + tau * span))
        return self.center + self.radius * e, 1j * self.radius * span * e

    def piece_lengths(self):
        return np.array([self.radius * abs(self.arg1 - self.arg0)])

    def reversed(self):
        return CircleArc(self.center, self.radius, self.arg1, self.arg0)


def circle(center=0.0, radius=1.0) -> CircleArc:
    return CircleArc(complex(center), float(radius), 0.0, 2.0 * math.pi)


def path_to_dict(path: Path) -> dict:
    if isinstance(path, Polyline):
        kind = "sampled" if isinstance(path, Sampled) else "polyline"
        return {"kind": kind, "points": [_cjson(p) for p in path.points]}
    if isinstance(path, RaySegment):
        return {"kind": "ray", "theta": path.theta, "t0": path.t0, "t1": path.t1}
    if isinstance(path, CircleArc):
        return {"kind": "arc", "center": _cjson(path.center), "radius": path.radius,
                "arg0": path.arg0, "arg1": path.arg1}
    raise TypeError(path)


def path_from_dict(d: dict) -> Path:
    kind = d["kind"]
    if kind in ("polyline", "sampled"):
        pts = [_cfrom(p) for p in d["points"]]
        return Sampled(pts) if kind == "sampled" else Polyline(pts)
    if kind == "ray":
        return RaySegment(float(d["theta"]), float(d["t0"]), float(d["t1"]))
    if kind == "arc":
        return CircleArc(_cfrom(d["center"]), float(d["radius"]), float(d["arg0"]), float(d["arg1"]))
    raise ValueError(f"unknown path kind {kind!r}")


def path_to_csv(path: Path) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z.re", "z.im"])
    pts = path.points if isinstance(path, Polyline) else path.sample(64)
    for p in pts:
        w.writerow([repr(p.real), repr(p.imag)])
    return buf.getvalue()


def path_from_csv(text: str) -> Sampled:
    rows = list(csv.DictReader(io.StringIO(text)))
    return Sampled([complex(float(r["z.re"]), float(r["z.im"])) for r in rows])


def _cjson(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _cfrom(d) -> complex:
    if isinstance(d, dict):
        return complex(float(d["re"]), float(d["im"]))
    return complex(d)


# -- quadrature ---------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss 7-point weights on the odd-indexed Kronrod nodes
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass
class QuadResult:
    value: complex
    error: float
    panels: int
    last_panel: float = 0.0


def gauss_kronrod(func: Callable, breaks: Sequence[float], tol: float = DEFAULT_QUAD_TOL,
                  max_panels: int = 20000, rel_floor: float = 1e-14) -> QuadResult:
    """Adaptive G7/K15 integration of ``func`` over ``[breaks[0], breaks[-1]]``.

    ``func`` is vectorised over a 2-D array of abscissae.  Panels never cross
    the supplied breakpoints.  The error estimate is ``|K15 - G7|`` summed
    over panels; the target is ``max(tol, rel_floor * integral of |f|)``.

    Panels are refined in batches: every panel whose error exceeds its
    length-proportional share of the tolerance is bisected in the same
    vectorised pass.
    """
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    total_len = abs(breaks[-1] - breaks[0])
    upper = breaks[-1]
    done_val, done_err, done_abs = 0j, 0.0, 0.0
    last = 0.0
    n_done = 0
    while True:
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * GK_NODES[None, :]
        fx = np.asarray(func(x), dtype=complex)
        if not np.all(np.isfinite(fx)):
            raise DomainError("integrand is not finite on the path")
        k15 = half * (fx @ GK_WEIGHTS)
        g7 = half * (fx @ G_WEIGHTS)
        err = np.abs(k15 - g7)
        absint = np.abs(half) * (np.abs(fx) @ GK_WEIGHTS)
        at_end = b == upper
        if np.any(at_end):
            last = float(np.abs(k15[at_end][0]))
        value = done_val + k15.sum()
        target = max(tol, rel_floor * (done_abs + absint.sum()))
        total_err = done_err + err.sum()
        if total_err <= target:
            return QuadResult(complex(value), float(total_err), n_done + len(a), last)
        share = target * np.abs(b - a) / total_len
        split = err > 0.5 * share
        if not np.any(split):
            split = err >= np.max(err)
        keep = ~split
        done_val += k15[keep].sum()
        done_err += err[keep].sum()
        done_abs += absint[keep].sum()
        n_done += int(keep.sum())
        a, b, m = a[split], b[split], mid[split]
        if n_done + 2 * len(a) > max_panels:
            raise NonConvergenceError(
                f"quadrature did not converge within {max_panels} panels (error {total_err:.3g})")
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        order = np.argsort(a)
        a, b = a[order], b[order]


class PathFunction:
    """A function defined on a path (not on the plane), addressed by ``tau``."""

    def at(self, tau, z):
        raise NotImplementedError


def integrate_along_path(f, path: Path, tol: float = DEFAULT_QUAD_TOL, max_panels: int = 20000) -> complex:
    """``integral of f(z) dz`` along ``path``.

    ``f`` is anything :func:`bltk.expr.as_function` accepts, or a
    :class:`PathFunction` (such as a tracked square-root branch).

    Raises
    ------
    DomainError
        If ``f`` is singular or non-finite on the path.
    NonConvergenceError
        If ``max_panels`` is exhausted.
    """
    return integrate_along_path_full(f, path, tol, max_panels).value


def integrate_along_path_full(f, path: Path, tol: float = DEFAULT_QUAD_TOL, max_panels: int = 20000) -> QuadResult:
    if isinstance(f, PathFunction):
        def integrand(tau):
            z, dz = path.z_dz(tau)
            return f.at(tau, z) * dz
    else:
        fn = as_function(f)

        def integrand(tau):
            z, dz = path.z_dz(tau)
            return fn(z) * dz
    breaks = np.arange(path.n_pieces + 1, dtype=float)
    return gauss_kronrod(integrand, breaks, tol, max_panels)


# -- branch-continuous square roots -------------------------------------------

@dataclass
class BranchSqrt(PathFunction):
    """A continuous branch of ``sqrt(A)`` along a path.

    ``taus``/``values`` is the tracked table; evaluation at other parameters
    picks the root of ``A`` closest to the nearest tabulated value.
    """

    A: Function
    path: Path
    taus: np.ndarray
    values: np.ndarray

    def at(self, tau, z=None):
        tau = np.asarray(tau, dtype=float)
        if z is None:
            z = self.path.point(tau)
        r = np.sqrt(np.asarray(self.A(z), dtype=complex))
        idx = np.clip(np.searchsorted(self.taus, tau), 0, len(self.taus) - 1)
        lo = np.clip(idx - 1, 0, len(self.taus) - 1)
        near = np.where(np.abs(self.taus[lo] - tau) < np.abs(self.taus[idx] - tau), lo, idx)
        ref = self.values[near]
        return np.where(np.abs(r - ref) <= np.abs(r + ref), r, -r)

    @property
    def terminal(self) -> complex:
        return complex(self.values[-1])

    @property
    def points(self) -> np.ndarray:
        return self.path.point(self.taus)


def branch_sqrt(A, path: Path, initial_choice: int = 1, min_abs: float = 1e-12,
                max_angle: float = math.pi / 2, max_nodes: int = 5_000_000) -> BranchSqrt:
    """Track ``sqrt(A)`` continuously along ``path``.

    Each step moves to the root closest to the previous value; a step is halved
    whenever ``arg A`` would jump by more than ``max_angle`` (so the root
    itself turns by less than ``max_angle / 2``).  Steps also stay below a
    sixteenth of a piece so the table is dense enough for later lookups.

    Raises
    ------
    BranchError
        If ``|A|`` drops below ``min_abs`` on the path or the step size
        collapses (a zero of ``A`` on the path).
    """
    if initial_choice not in (1, -1):
        raise ValueError("initial_choice must be +1 or -1")
    A = as_function(A)
    z0 = path.start
    a0 = A.scalar(z0)
    if abs(a0) < min_abs:
        raise BranchError("zero of A on path", z0)
    taus, vals = [0.0], [initial_choice * np.sqrt(a0)]
    tau, prev_a, prev = 0.0, a0, vals[0]
    end = float(path.n_pieces)
    h = 1.0 / 16
    while tau < end:
        next_break = min(math.floor(tau + 1e-12) + 1.0, end)
        step = min(h, next_break - tau)
        nt = next_break if tau + step >= next_break - 1e-12 else tau + step
        z = path.z_dz_scalar(nt)[0]
        a = A.scalar(z)
        if abs(a) < min_abs:
            raise BranchError("zero of A on path", z)
        if abs(np.angle(a / prev_a)) > max_angle:
            h = step / 2
            if h < 1e-13:
                raise BranchError("zero of A on path", z)
            continue
        r = np.sqrt(a)
        r = r if abs(r - prev) <= abs(r + prev) else -r
        taus.append(nt)
        vals.append(r)
        tau, prev_a, prev = nt, a, r
        h = min(2 * step, 1.0 / 16)
        if len(taus) > max_nodes:
            raise NonConvergenceError("branch tracking exceeded the node budget")
    return BranchSqrt(A, path, np.array(taus), np.array(vals, dtype=complex))


# -- Dormand-Prince 5(4) ------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

# PI controller exponents (Gustafsson; the values used by Hairer's DOPRI5)
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


def dopri5(rhs: Callable, t0: float, t1: float, y0: np.ndarray, tol: float,
           stops: Sequence[float] = (), on_step: Callable | None = None,
           h0: float | None = None, max_steps: int = 1_000_000, hmin: float = 1e-14,
           hmax: float = math.inf, info: dict | None = None):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (``t1 > t0``).

    The error norm is the maximum of ``|err| / (1 + |y|)`` over all
    components (absolute for small, relative for large solutions), so
    ``tol`` bounds each accepted local error in that mixed sense.  ``stops``
    are parameters the integrator lands on exactly.  ``on_step(t, y, err)``
    is called after every accepted step.  Returns ``(y(t1), {stop: y})``;
    if ``info`` is given it receives the final proposed step ``"h"`` and the
    number of attempted steps ``"steps"``.
    """
    y = np.array(y0, dtype=complex)
    t = float(t0)
    span = t1 - t0
    if span <= 0:
        raise ValueError("dopri5 integrates forward only")
    targets = sorted(s for s in stops if t0 < s <= t1)
    if not targets or targets[-1] != t1:
        targets.append(t1)
    hit = {}
    k1 = rhs(t, y)
    if h0 is None:
        scale = 1.0 + np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(k1) / scale)
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h0 = min(h0 * (tol / 1e-6) ** 0.2, span)
    h = min(max(h0, hmin * max(1.0, abs(t))), hmax)
    err_prev = 1e-4
    steps = 0
    ti = 0
    while ti < len(targets):
        target = targets[ti]
        h = min(h, hmax)
        h_free = h
        last = t + h >= target - 1e-14 * max(1.0, abs(target))
        if last:
            h = target - t
        ks = [k1]
        for s in range(1, 7):
            acc = y + h * sum(a * k for a, k in zip(_A[s], ks) if a)
            ks.append(rhs(t + _C[s] * h, acc))
        y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b)
        err_vec = h * sum(e * k for e, k in zip(_E, ks) if e)
        scale = 1.0 + np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) / tol
        if not np.isfinite(err):
            err = 1e10
        steps += 1
        if steps > max_steps:
            raise NonConvergenceError(f"ODE integration exceeded {max_steps} steps at t = {t}")
        if err <= 1.0:
            t = target if last else t + h
            y = y_new
            k1 = ks[6]
            if on_step is not None:
                on_step(t, y, err * tol)
            fac = 0.9 * max(err, 1e-10) ** (-_ALPHA) * err_prev**_BETA
            fac = min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
            if last:
                hit[target] = y.copy()
                ti += 1
                # a step clipped to land on a stop says little about the next one
                h = max(h * fac, min(h_free, h * 5.0))
            else:
                h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-_ALPHA))
            if h < hmin * max(1.0, abs(t)):
                raise NonConvergenceError(f"step size underflow at t = {t} (singular coefficient?)")
    if info is not None:
        info["h"] = h
        info["steps"] = steps
    return y, hit


def _dopri5_second_order(Afun, path: Path, piece: int, Y, tol: float, h: float | None,
                         on_step: Callable, max_steps: int, hmin: float = 1e-14):
    """DOPRI5 specialised to ``y'' + A y = 0`` on one path piece.

    Same tableau, error norm and PI controller as :func:`dopri5`, written on
    plain Python complex lists: for the 2x2 fundamental matrix this is several
    times faster than the array version, which matters on long oscillatory
    paths.  ``Y`` is the flat list ``[y_1, y_1', y_2, y_2', ...]``.
    """
    n = len(Y)
    zdz = path.z_dz_scalar

    def rhs(t, Y):
        z, dz = zdz(t)
        ad = -Afun(z) * dz
        out = [0j] * n
        for j in range(0, n, 2):
            out[j] = dz * Y[j + 1]
            out[j + 1] = ad * Y[j]
        return out

    a21 = 1 / 5
    a31, a32 = 3 / 40, 9 / 40
    a41, a42, a43 = 44 / 45, -56 / 15, 32 / 9
    a51, a52, a53, a54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
    a61, a62, a63, a64, a65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
    b1, b3, b4, b5, b6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
    e1, e3, e4, e5, e6, e7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                              22 / 525, -1 / 40)
    t, t_end = float(piece), float(piece + 1)
    # evaluate just inside the piece so the derivative belongs to it
    t_hi = t_end - 1e-15 * max(1.0, t_end)
    k1 = rhs(t, Y)
    if h is None:
        d0 = max(abs(v) / (1 + abs(v)) for v in Y)
        d1 = max(abs(v) / (1 + abs(v)) for v in k1)
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h * (tol / 1e-6) ** 0.2, 1.0)
    err_prev = 1e-4
    steps = 0
    while t < t_end:
        h_free = h
        last = t + h >= t_end - 1e-14 * max(1.0, t_end)
        if last:
            h = t_end - t
        k2 = rhs(t + 0.2 * h, [y + h * a21 * q1 for y, q1 in zip(Y, k1)])
        k3 = rhs(t + 0.3 * h, [y + h * (a31 * q1 + a32 * q2) for y, q1, q2 in zip(Y, k1, k2)])
        k4 = rhs(t + 0.8 * h, [y + h * (a41 * q1 + a42 * q2 + a43 * q3)
                               for y, q1, q2, q3 in zip(Y, k1, k2, k3)])
        k5 = rhs(t + 8 / 9 * h, [y + h * (a51 * q1 + a52 * q2 + a53 * q3 + a54 * q4)
                                 for y, q1, q2, q3, q4 in zip(Y, k1, k2, k3, k4)])
        k6 = rhs(min(t + h, t_hi), [y + h * (a61 * q1 + a62 * q2 + a63 * q3 + a64 * q4 + a65 * q5)
                                    for y, q1, q2, q3, q4, q5 in zip(Y, k1, k2, k3, k4, k5)])
        Yn = [y + h * (b1 * q1 + b3 * q3 + b4 * q4 + b5 * q5 + b6 * q6)
              for y, q1, q3, q4, q5, q6 in zip(Y, k1, k3, k4, k5, k6)]
        k7 = rhs(min(t + h, t_hi), Yn)
        err = max(abs(h * (e1 * q1 + e3 * q3 + e4 * q4 + e5 * q5 + e6 * q6 + e7 * q7))
                  / (1.0 + max(abs(y), abs(yn)))
                  for y, yn, q1, q3, q4, q5, q6, q7 in zip(Y, Yn, k1, k3, k4, k5, k6, k7)) / tol
        if err != err or err == math.inf:
            err = 1e10
        steps += 1
        if steps > max_steps:
            raise NonConvergenceError(f"ODE integration exceeded {max_steps} steps at tau = {t}")
        if err <= 1.0:
            t = t_end if last else t + h
            Y, k1 = Yn, k7
            on_step(t, Y, err * tol)
            fac = min(5.0, max(0.2, 0.9 * max(err, 1e-10) ** (-_ALPHA) * err_prev**_BETA))
            err_prev = max(err, 1e-4)
            h = max(h * fac, min(h_free, h * 5.0)) if last else h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-_ALPHA))
            if h < hmin * max(1.0, abs(t)):
                raise NonConvergenceError(f"step size underflow at tau = {t} (singular coefficient?)")
    return Y, h


# -- linear ODEs along paths ------------------------------------------------

@dataclass
class OdeTrajectory:
    """Solution samples ``(z, Y, step_error)``; ``Y[k]`` is ``y^(k)``.

    ``ys`` has shape ``(n_nodes, dim)`` for a single solution or
    ``(n_nodes, dim, m)`` when ``m`` solutions share the node set.
    """

    path: Path
    taus: np.ndarray
    zs: np.ndarray
    ys: np.ndarray
    step_errors: np.ndarray
    tol: float
    wronskian_drift: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.ys.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.ys[-1]

    @property
    def error_estimate(self) -> float:
        return float(np.sum(self.step_errors))

    def column(self, j: int) -> "OdeTrajectory":
        if self.ys.ndim != 3:
            raise ValueError("trajectory holds a single solution")
        return OdeTrajectory(self.path, self.taus, self.zs, self.ys[:, :, j], self.step_errors, self.tol)

    def to_rows(self) -> list[dict]:
        if self.ys.ndim != 2:
            raise ValueError("export one solution at a time (use .column)")
        rows = []
        for z, y, e in zip(self.zs, self.ys, self.step_errors):
            row = {"z.re": z.real, "z.im": z.imag, "y.re": y[0].real, "y.im": y[0].imag,
                   "dy.re": y[1].real, "dy.im": y[1].imag, "step_error": float(e)}
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        rows = self.to_rows()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) for k, v in r.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"tol": self.tol, "wronskian_drift": self.wronskian_drift,
                           "nodes": self.to_rows()}, sort_keys=True)


def _coefficient_functions(coeffs, dim):
    if dim not in (2, 3):
        raise PreconditionError("dim must be 2 or 3")
    if len(coeffs) != dim:
        raise PreconditionError(f"need {dim} coefficients c_0..c_{dim - 1}")
    out = []
    for c in coeffs:
        if c is None or (isinstance(c, (int, float, complex)) and c == 0):
            out.append(None)
        else:
            out.append(as_function(c))
    return out


def companion_rhs(coeffs: list, dim: int):
    """``Y' = M(z) Y`` for ``y^(dim) + sum_k c_k(z) y^(k) = 0``; returns ``f(z, dz, Y)``."""
    funcs = _coefficient_functions(coeffs, dim)
    terms = [(k, c.scalar) for k, c in enumerate(funcs) if c is not None]

    def f(z, dz, Y):
        out = np.empty_like(Y)
        out[:-1] = Y[1:]
        acc = 0
        for k, c in terms:
            acc = acc - c(z) * Y[k]
        out[-1] = acc
        return dz * out

    return f


def solve_linear_ode(coeffs, dim: int, path: Path, y0, tol: float = DEFAULT_ODE_TOL,
                     max_steps: int = 2_000_000) -> OdeTrajectory:
    """Integrate ``y^(dim) + sum_k coeffs[k](z) y^(k) = 0`` along ``path``.

    ``coeffs[k]`` multiplies ``y^(k)`` (``None`` or ``0`` for absent terms), so
    ``y'' + A y = 0`` is ``coeffs=[A, 0]``.  ``y0`` holds ``(y, y', ...)`` at the
    path start, or a ``(dim, m)`` matrix for ``m`` solutions integrated on a
    shared node set (needed for Wronskians).

    Raises
    ------
    NonConvergenceError
        Step size underflow near a coefficient singularity, or ``max_steps``.
    """
    rhs_z = companion_rhs(coeffs, dim)
    Y0 = np.array(y0, dtype=complex)
    if Y0.shape[0] != dim:
        raise PreconditionError(f"initial state must have {dim} rows")

    def rhs(tau, Y):
        z, dz = path.z_dz_scalar(tau)
        return rhs_z(z, dz, Y)

    taus, ys, errs = [0.0], [Y0.copy()], [0.0]
    funcs = _coefficient_functions(coeffs, dim)
    fast = dim == 2 and funcs[1] is None and funcs[0] is not None

    if fast:
        shape = Y0.shape

        def record_flat(t, y, e):
            taus.append(t)
            ys.append(np.array(y).reshape(shape[::-1]).T if len(shape) == 2 else np.array(y))
            errs.append(e)

        flat = list(Y0.T.ravel()) if Y0.ndim == 2 else list(Y0)
        h = None
        for k in range(path.n_pieces):
            flat, h = _dopri5_second_order(funcs[0].scalar, path, k, flat, tol, h,
                                           record_flat, max_steps)
    else:
        def record(t, y, e):
            taus.append(t)
            ys.append(y.copy())
            errs.append(e)

        Y = Y0
        for k in range(path.n_pieces):
            Y, _ = dopri5(rhs, float(k), float(k + 1), Y, tol, on_step=record, max_steps=max_steps)
    taus = np.array(taus)
    traj = OdeTrajectory(path, taus, path.point(taus), np.array(ys), np.array(errs), tol)
    if dim == 2 and Y0.ndim == 2 and Y0.shape[1] == 2:
        traj.wronskian_drift = wronskian_drift(traj.column(0), traj.column(1))
    return traj


def wronskian(t1: OdeTrajectory, t2: OdeTrajectory) -> np.ndarray:
    return t1.ys[:, 0] * t2.ys[:, 1] - t1.ys[:, 1] * t2.ys[:, 0]


def wronskian_drift(t1: OdeTrajectory, t2: OdeTrajectory, scaled: bool = False) -> float:
    """``max |W(z) - W(start)| / max(1, |W(start)|)`` over the shared nodes.

    With ``scaled=True`` the denominator also includes the size of the two
    products ``|f1 f2'| + |f1' f2|`` at each node, which is the attainable
    accuracy when the solutions themselves are huge.

    Raises
    ------
    PathMismatchError
        If the trajectories do not share path and node set.
    """
    if t1.path != t2.path or len(t1.zs) != len(t2.zs) or not np.array_equal(t1.zs, t2.zs):
        raise PathMismatchError("trajectories do not share a path and node set")
    W = wronskian(t1, t2)
    denom = np.full(W.shape, max(1.0, abs(W[0])))
    if scaled:
        size = np.abs(t1.ys[:, 0] * t2.ys[:, 1]) + np.abs(t1.ys[:, 1] * t2.ys[:, 0])
        denom = np.maximum(denom, size)
    return float(np.max(np.abs(W - W[0]) / denom))
