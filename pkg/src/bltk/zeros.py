"""Counting and locating zeros of analytic functions.

Counting uses the argument principle, ``(1/2 pi i) \\oint f'/f dz``, evaluated
with logarithmic derivatives taken from jets (so functions far outside the
floating point range on the contour are fine).  Discs use the periodic
trapezoid rule, which converges geometrically for analytic integrands;
rectangles use adaptive Gauss-Kronrod on each edge.  Location is by
quadrisection down to boxes holding one zero (or one multiple zero), followed
by damped Newton refinement.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contour import Polyline, gauss_kronrod
from .errors import DomainError, NonConvergenceError, PreconditionError
from .expr import Function, as_function

# deterministic radius perturbations tried when a zero sits on the circle
RADIUS_PERTURBATIONS = (0.0, 0.003, -0.003, 0.007, -0.007, 0.01)
ROUNDING_LIMIT = 0.1
MAX_DEPTH = 40
MIN_BOX = 1e-9
NEWTON_MAX_ITER = 50
# split fractions for quadrisection; asymmetric so that symmetric zero sets
# (integers, lattices) do not land on the dividing lines
_SPLITS = ((0.5123, 0.4877), (0.4711, 0.5289), (0.5371, 0.4629), (0.4419, 0.5581))


@dataclass(frozen=True)
class ZeroRecord:
    """A located zero.

    ``residual`` is ``|f|`` at ``location``; ``cluster`` marks records that
    aggregate zeros the subdivision could not separate.
    """

    location: complex
    multiplicity: int
    residual: float
    cluster: bool = False

    def to_dict(self) -> dict:
        z = complex(self.location)
        return {"location": {"re": z.real, "im": z.imag}, "multiplicity": self.multiplicity,
                "residual": self.residual, "cluster": self.cluster}


@dataclass
class CountingData:
    """Counting function ``n(r)`` and integrated counting function ``N(r)``."""

    radii: list
    n_values: list
    n0: int
    N_values: list
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "n", "N"])
        for r, n, N in zip(self.radii, self.n_values, self.N_values):
            w.writerow([repr(float(r)), int(n), repr(float(N))])
        return buf.getvalue()


# -- counting in discs -------------------------------------------------------

def _logderiv(f: Function, z):
    with np.errstate(all="ignore"):
        return np.asarray(f.logderiv(z), dtype=complex)


def _circle_count(f: Function, center: complex, radius: float, tol: float,
                  max_nodes: int) -> float:
    """Winding number by the periodic trapezoid rule with node doubling."""
    n = 64
    prev = None
    while n <= max_nodes:
        theta = 2.0 * np.pi * np.arange(n) / n
        w = radius * np.exp(1j * theta)
        g = _logderiv(f, center + w) * w
        if not np.all(np.isfinite(g)):
            raise DomainError("zero of f on the circle", complex(center + w[~np.isfinite(g)][0]))
        val = g.mean()
        floor = 1e3 * np.finfo(float).eps * float(np.mean(np.abs(g)))
        if prev is not None and abs(val - prev) <= max(tol, floor):
            return val
        prev = val
        n *= 2
    raise NonConvergenceError(f"circle count did not settle with {max_nodes} nodes "
                              f"(zero close to |z - c| = {radius}?)")


def count_zeros_disc(f, center=0.0, radius: float = 1.0, tol: float = 1e-8,
                     max_nodes: int = 1 << 18, return_radius: bool = False):
    """Number of zeros (with multiplicity) of ``f`` in ``|z - center| < radius``.

    The argument-principle integral is rounded to the nearest integer; the
    rounding distance must be below 0.1.  If the circle passes through or too
    close to a zero, the radius is perturbed by +0.3%, -0.3%, +0.7%, -0.7%
    and +1% in that order before giving up.

    Parameters
    ----------
    f : str, Expr or Function
        Analytic function; only its logarithmic derivative is used.
    return_radius : bool
        Also return the radius actually used.

    Raises
    ------
    NonConvergenceError
        Every perturbed circle failed.
    """
    f = as_function(f)
    center = complex(center)
    if not radius > 0:
        raise PreconditionError("radius must be positive")
    last_exc = None
    for eps in RADIUS_PERTURBATIONS:
        r = radius * (1.0 + eps)
        try:
            val = _circle_count(f, center, r, tol, max_nodes)
        except (DomainError, NonConvergenceError) as exc:
            last_exc = exc
            continue
        k = round(val.real)
        if abs(val - k) < ROUNDING_LIMIT:
            return (int(k), r) if return_radius else int(k)
        last_exc = NonConvergenceError(f"argument principle gave {val:.4g}, not near an integer")
    raise NonConvergenceError(f"zero on or near the circle |z - {center}| = {radius} "
                              f"could not be avoided by perturbation: {last_exc}")


# -- boxes ---------------------------------------------------------------------

@dataclass(frozen=True)
class _Box:
    x0: float
    x1: float
    y0: float
    y1: float
    depth: int = 0

    @property
    def size(self) -> float:
        return max(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def corners(self):
        return [complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1), complex(self.x0, self.y0)]

    def children(self, fx: float, fy: float):
        xm = self.x0 + fx * (self.x1 - self.x0)
        ym = self.y0 + fy * (self.y1 - self.y0)
        d = self.depth + 1
        return [_Box(self.x0, xm, self.y0, ym, d), _Box(xm, self.x1, self.y0, ym, d),
                _Box(self.x0, xm, ym, self.y1, d), _Box(xm, self.x1, ym, self.y1, d)]


def _box_moments(f: Function, box: _Box, tol: float, powers=(0,)):
    """``(1/2 pi i) \\oint z^p f'/f dz`` around the box for each ``p``."""
    path = Polyline(box.corners())
    c = box.center
    out = []
    for p in powers:
        def integrand(tau, p=p):
            z, dz = path.z_dz(tau)
            g = _logderiv(f, z)
            if not np.all(np.isfinite(g)):
                raise DomainError("zero of f on a box edge")
            return g * (z - c) ** p * dz
        res = gauss_kronrod(integrand, np.arange(5.0), tol=tol * 2 * np.pi * box.size**p)
        out.append(res.value / (2j * np.pi))
    return out


def _box_count(f: Function, box: _Box, tol: float) -> int | None:
    """Integer zero count of a box, or None when an edge is too close to a zero."""
    try:
        (val,) = _box_moments(f, box, tol)
    except (DomainError, NonConvergenceError):
        return None
    k = round(val.real)
    if abs(val - k) >= ROUNDING_LIMIT or k < 0:
        return None
    return int(k)


def _newton(f: Function, z0: complex, m: int, box: _Box, tol: float):
    """Damped (modified, for multiplicity ``m``) Newton iteration inside ``box``."""
    z = complex(z0)
    limit = box.size
    for _ in range(NEWTON_MAX_ITER):
        ld = complex(_logderiv(f, z))
        if not math.isfinite(abs(ld)):
            break  # landed exactly on the zero
        step = m / ld
        if abs(step) > limit:
            step *= limit / abs(step)
        z -= step
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(z)):
            break
    return z


def _residual(f: Function, z: complex) -> float:
    with np.errstate(all="ignore"):
        la = float(np.real(f.log_abs(z)))
    return 0.0 if la == -math.inf else math.exp(min(la, 700.0))


def locate_zeros(f, center=0.0, radius: float = 1.0, tol: float = 1e-10,
                 quad_tol: float = 1e-6, jobs: int = 1) -> list[ZeroRecord]:
    """Zeros of ``f`` in the open disc ``|z - center| < radius``.

    The enclosing square is quadrisected until each box holds one zero, or a
    single multiple zero (recognised from the first two argument-principle
    moments), then each zero is polished by Newton's method with the
    multiplicity taken from the box count.  Boxes that still hold several
    zeros at depth 40 or below size 1e-9 are reported as one record with
    ``cluster=True`` and a warning.

    Returns records sorted by (real, imaginary) part of the location.
    """
    f = as_function(f)
    center = complex(center)
    # the square must not pass through zeros; grow it slightly if needed
    root = None
    for grow in (1.0013, 1.0131, 1.0377, 1.0613):
        h = radius * grow
        cand = _Box(center.real - h, center.real + h, center.imag - h, center.imag + h)
        count = _box_count(f, cand, quad_tol)
        if count is not None:
            root = (cand, count)
            break
    if root is None:
        raise NonConvergenceError("could not find a zero-free enclosing square")

    def resolve(box: _Box, m: int) -> list[ZeroRecord]:
        if m == 0:
            return []
        if m == 1:
            s1, = _box_moments(f, box, quad_tol, powers=(1,))
            z = _newton(f, box.center + s1, 1, box, tol)
            return [ZeroRecord(z, 1, _residual(f, z))]
        s1, s2 = _box_moments(f, box, quad_tol, powers=(1, 2))
        mean = s1 / m
        spread = abs(s2 / m - mean * mean)
        if spread <= (1e-6 * box.size) ** 2 + 1e-3 * quad_tol * box.size**2:
            # the complex second moment can vanish for distinct zeros (e.g. z^4 - 3z + 1),
            # so confirm the multiple zero by counting in a small disc around it
            z = _newton(f, box.center + mean, m, box, tol)
            try:
                confirmed = count_zeros_disc(f, z, 1e-4 * box.size, quad_tol) == m
            except (DomainError, NonConvergenceError):
                confirmed = False
            if confirmed:
                return [ZeroRecord(z, m, _residual(f, z))]
        if box.depth >= MAX_DEPTH or box.size < MIN_BOX:
            warnings.warn(f"unresolved cluster of {m} zeros near {box.center}", RuntimeWarning)
            z = box.center + mean
            return [ZeroRecord(z, m, _residual(f, z), cluster=True)]
        for fx, fy in _SPLITS:
            kids = box.children(fx, fy)
            counts = [_box_count(f, k, quad_tol) for k in kids]
            if None not in counts and sum(counts) == m:
                break
        else:
            warnings.warn(f"could not split box around {box.center}", RuntimeWarning)
            z = box.center + mean
            return [ZeroRecord(z, m, _residual(f, z), cluster=True)]
        out = []
        for k, c in zip(kids, counts):
            out.extend(resolve(k, c))
        return out

    box, count = root
    if jobs > 1 and count > 1:
        # split once and resolve the four quadrants concurrently
        kids = box.children(*_SPLITS[0])
        counts = [_box_count(f, k, quad_tol) for k in kids]
        if None in counts or sum(counts) != count:
            records = resolve(box, count)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                parts = list(pool.map(resolve, kids, counts))
            records = [r for p in parts for r in p]
    else:
        records = resolve(box, count)
    inside = [r for r in records if abs(r.location - center) < radius]
    return sorted(inside, key=lambda r: (round(r.location.real, 12), round(r.location.imag, 12)))


# -- counting function --------------------------------------------------------

def counting_function(f, radii, tol: float = 1e-8, rel_width: float = 1e-3,
                      jobs: int = 1) -> CountingData:
    """``n(r, 1/f)`` and ``N(r, 1/f)`` at the given radii.

    ``n`` is evaluated by :func:`count_zeros_disc` on a geometric grid of
    radii; every interval where ``n`` jumps is bisected (in ``log t``) until
    its ratio is below ``1 + rel_width``, which locates the moduli of the
    zeros.  The piecewise constant integrand ``(n(t) - n0)/t`` is then
    integrated exactly on this refined grid, the jump placed at the midpoint
    of its final interval, so ``N`` carries at most
    ``rel_width / 2`` of error per zero.

    Parameters
    ----------
    radii : sequence of float
        Increasing, all ``>= 1``.
    """
    f = as_function(f)
    radii = [float(r) for r in radii]
    if not radii:
        raise PreconditionError("need at least one radius")
    if any(r < 1 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must be increasing and >= 1")

    cache: dict[float, int] = {}

    def n_at(t: float) -> int:
        if t not in cache:
            cache[t] = count_zeros_disc(f, 0.0, t, tol)
        return cache[t]

    t_small = 1e-6
    n0 = n_at(t_small)
    grid = [t_small]
    t = t_small
    while t < radii[-1]:
        t = min(2 * t, radii[-1])
        grid.append(t)
    grid = sorted(set(grid) | set(radii))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for t, n in zip(grid, pool.map(lambda s: count_zeros_disc(f, 0.0, s, tol), grid)):
                cache[t] = n
    # jumps located by bisection in log t
    jumps = []  # (position, size)
    stack = [(a, b) for a, b in zip(grid, grid[1:]) if n_at(a) != n_at(b)]
    while stack:
        a, b = stack.pop()
        if b / a <= 1.0 + rel_width:
            jumps.append((math.sqrt(a * b), n_at(b) - n_at(a)))
            continue
        m = math.sqrt(a * b)
        for lo, hi in ((a, m), (m, b)):
            if n_at(lo) != n_at(hi):
                stack.append((lo, hi))
    jumps.sort()
    n_values, N_values = [], []
    for r in radii:
        n_values.append(n_at(r))
        N = sum(size * math.log(r / pos) for pos, size in jumps if pos < r)
        N_values.append(N + n0 * math.log(r))
    meta = {"jumps": len(jumps), "counts": len(cache), "rel_width": rel_width}
    return CountingData(radii, n_values, n0, N_values, meta)
