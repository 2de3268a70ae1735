"""Command-line front end: ``bltk <subcommand> ...``.

Every subcommand writes one JSON document to stdout (keys sorted, complex
numbers as ``{"re": ..., "im": ...}``) or, with ``--format table``, a short
human-readable table to stderr.  ``--out FILE`` additionally writes CSV plot
data (complex columns suffixed ``.re``/``.im``).

Exit codes: 0 success/pass, 1 verification failed, 2 usage error (including
unparsable expressions), 3 numerical failure.

Configuration
-------------
Defaults for tolerances, grids, seeds and node counts come from an INI file
with a ``[bltk]`` section, located by ``--config FILE`` or the environment
variable ``BLTK_CONFIG``; command-line flags override it.  Recognised keys::

    [bltk]
    tol = 1e-8          ; Bank-Laine sign tolerance
    ode_tol = 1e-10     ; ODE / path tracing tolerance
    quad_tol = 1e-12    ; tail-integral tolerance
    picard_tol = 1e-13
    nodes = 256         ; circle quadrature start nodes
    ray_nodes = 4096    ; rays for profiles of ODE-built E
    n_ic = 4
    seed = 0
    jobs = 1
    rmax = 20
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import BLTKError, ParseError

DEFAULTS = {
    "tol": 1e-8,
    "ode_tol": 1e-10,
    "quad_tol": 1e-12,
    "picard_tol": 1e-13,
    "nodes": 256,
    "ray_nodes": 4096,
    "n_ic": 4,
    "seed": 0,
    "jobs": 1,
    "rmax": 20.0,
}
_INT_KEYS = {"nodes", "ray_nodes", "n_ic", "seed", "jobs"}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- helpers -------------------------------------------------------------------------

def load_config(path: str | None) -> dict:
    """Defaults overlaid with the ``[bltk]`` section of ``path`` (if any)."""
    cfg = dict(DEFAULTS)
    path = path or os.environ.get("BLTK_CONFIG")
    if not path:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise UsageError(f"cannot read config file {path!r}")
    if parser.has_section("bltk"):
        for key, value in parser.items("bltk"):
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            cfg[key] = int(value) if key in _INT_KEYS else float(value)
    return cfg


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and complex numbers for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return {"re": jsonable(z.real), "im": jsonable(z.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2)


def parse_complex(text: str) -> complex:
    """``"1+2i"``, ``"1+2j"``, ``"-3"`` or any constant expression such as ``"pi/2"``."""
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        pass
    from .expr import as_function
    try:
        return complex(as_function(text)(0.0))
    except (BLTKError, ValueError, TypeError) as exc:
        raise UsageError(f"not a complex number: {text!r}") from exc


def parse_grid(spec: str) -> np.ndarray:
    """``"x0:x1:nx,y0:y1:ny"`` -> tensor grid of complex points (row-major in y)."""
    try:
        xs, ys = spec.split(",")
        x0, x1, nx = xs.split(":")
        y0, y1, ny = ys.split(":")
        gx = np.linspace(float(x0), float(x1), int(nx))
        gy = np.linspace(float(y0), float(y1), int(ny))
    except ValueError as exc:
        raise UsageError(f"bad grid spec {spec!r}; expected x0:x1:nx,y0:y1:ny") from exc
    return (gx[None, :] + 1j * gy[:, None]).ravel()


def read_points(path: str) -> np.ndarray:
    """One point per line: ``re,im`` or a complex literal; ``#`` starts a comment."""
    pts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line or line.lower().startswith("z.re"):
                continue
            if "," in line:
                re_, im_ = line.split(",")[:2]
                pts.append(complex(float(re_), float(im_)))
            else:
                pts.append(parse_complex(line))
    return np.asarray(pts, dtype=complex)


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for k, v in r.items()})


def _points(args) -> np.ndarray:
    if args.points:
        return read_points(args.points)
    if args.grid:
        return parse_grid(args.grid)
    raise UsageError("give --points FILE or --grid SPEC")


def _table(pairs) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in pairs) + "\n"


# -- subcommands ---------------------------------------------------------------------

def cmd_check_bl(args, cfg):
    from .banklaine import verify_bank_laine
    rep = verify_bank_laine(args.expr, parse_complex(args.center), args.radius,
                            tol=args.tol or cfg["tol"], jobs=cfg["jobs"])
    if args.out:
        write_csv(args.out, [{"z.re": complex(r.location).real, "z.im": complex(r.location).imag,
                              "multiplicity": r.multiplicity, "dE.re": complex(d).real,
                              "dE.im": complex(d).imag} for r, d in zip(rep.zeros, rep.derivatives)])
    table = [("zeros", len(rep.zeros)), ("bank-laine", rep.is_bank_laine),
             ("special", rep.is_special), ("max |E' - sign|", f"{rep.max_sign_error:.3e}")]
    if rep.reason:
        table.append(("reason", rep.reason))
    return rep.to_dict(), table, rep.is_bank_laine


def cmd_extract_a(args, cfg):
    from .banklaine import coefficient_from_product
    from .expr import as_function
    E = as_function(args.expr)
    rows, out = [], []
    for z in _points(args):
        a = coefficient_from_product(E.jet(complex(z), 2))
        out.append({"z": complex(z), "A": complex(a)})
        rows.append({"z.re": z.real, "z.im": z.imag, "A.re": a.real, "A.im": a.imag})
    if args.out:
        write_csv(args.out, rows)
    return {"expr": args.expr, "values": out}, [("points", len(out))], True


def cmd_schwarzian(args, cfg):
    from .banklaine import schwarzian
    from .expr import as_function
    U = as_function(args.expr)
    rows, out = [], []
    for z in _points(args):
        s = schwarzian(U.jet(complex(z), 3))
        out.append({"z": complex(z), "S": complex(s)})
        rows.append({"z.re": z.real, "z.im": z.imag, "S.re": s.real, "S.im": s.imag})
    if args.out:
        write_csv(args.out, rows)
    return {"expr": args.expr, "values": out}, [("points", len(out))], True


def cmd_trace(args, cfg):
    from .asymptotics import trace_decay_path_full
    from .contour import path_to_csv
    res = trace_decay_path_full(args.coeff, parse_complex(args.start), args.length,
                                tol=args.tol or cfg["ode_tol"], stop_radius=args.stop_radius)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(path_to_csv(res.path))
    end = res.path.points[-1]
    return res.to_dict(), [("arc length", f"{res.s[-1]:.6g}"), ("end", f"{end:.6g}"),
                           ("Im Z drift", f"{res.im_drift:.3e}"), ("stop", res.reason)], True


def cmd_decay(args, cfg):
    from .asymptotics import trace_decay_path, verify_decay
    from .contour import path_from_csv
    tol = args.tol or cfg["ode_tol"]
    if args.path:
        with open(args.path, encoding="utf-8") as fh:
            path = path_from_csv(fh.read())
    else:
        path = trace_decay_path(args.coeff, parse_complex(args.start), args.length, tol=tol,
                                stop_radius=args.stop_radius)
    rep = verify_decay(args.coeff, path, n_ic=args.n_ic or cfg["n_ic"], tol=tol,
                       seed=cfg["seed"] if args.seed is None else args.seed, method=args.method)
    if args.out:
        write_csv(args.out, list(rep.rows()))
    return rep.to_dict(), [("model", rep.model), ("fitted rate", f"{rep.fitted_rate:.6g}"),
                           ("expected rate", f"{rep.expected_rate:.6g}"),
                           ("wronskian drift", f"{rep.wronskian_drift:.3e}"),
                           ("verdict", rep.verdict)], rep.verdict


def cmd_nevan(args, cfg):
    from .nevanlinna import default_radii, nevanlinna_profile, ode_product_profile
    rmax = args.rmax or cfg["rmax"]
    if args.ode_coeff:
        if args.target not in ("0", "0.0"):
            raise UsageError("profiles of ODE-built E are computed for the value 0 only")
        prof = ode_product_profile(args.ode_coeff, r_max=rmax, nodes=cfg["ray_nodes"],
                                   tol=cfg["ode_tol"])
    else:
        target = None if args.target.lower() in ("inf", "infinity") else parse_complex(args.target)
        prof = nevanlinna_profile(args.expr, target, default_radii(rmax), nodes=cfg["nodes"])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(prof.to_csv())
    return prof.to_dict(), [("order", f"{prof.fitted_order:.4f}"), ("lambda", f"{prof.fitted_lambda:.4f}"),
                            ("delta", f"{prof.delta_estimate:.4f}"), ("note", "finite-range estimate")], True


def cmd_picard(args, cfg):
    from .asymptotics import picard_ray_solution
    grid = np.linspace(args.xmin, args.xmax, args.points)
    sol = picard_ray_solution(args.coeff, args.theta, args.xmin, grid,
                              tol=args.tol or cfg["picard_tol"])
    if args.out:
        write_csv(args.out, [{"x": x, "u.re": u.real, "u.im": u.imag, "v.re": v.real, "v.im": v.imag}
                             for x, u, v in zip(sol.x_grid, sol.u_values, sol.v_values)])
    return sol.to_dict(), [("iterations", sol.iterations), ("contraction bound", f"{sol.contraction_bound:.6g}"),
                           ("observed ratio", f"{sol.observed_ratio:.4g}"),
                           ("residual", f"{sol.residual:.3e}")], True


def cmd_tail(args, cfg):
    from .asymptotics import tail_integral
    res = tail_integral(args.coeff, args.theta, getattr(args, "from"), args.to,
                        tol=args.tol or cfg["quad_tol"])
    return res.to_dict(), [("value", f"{res.value:.12g}"), ("error", f"{res.error:.3e}"),
                           ("last panel", f"{res.last_panel:.3e}")], True


def cmd_gallery(args, cfg):
    from .gallery import list_examples, verify_example
    if args.action == "list":
        entries = list_examples()
        return {"entries": entries}, [(e["name"], e["summary"]) for e in entries], True
    if not args.name:
        raise UsageError("gallery verify needs an entry name")
    try:
        rep = verify_example(args.name, jobs=cfg["jobs"])
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    table = [(f"{r.operation}: {r.description}", "pass" if r.passed else "FAIL") for r in rep.results]
    return rep.to_dict(), table, rep.passed


# -- parser ----------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (overrides $BLTK_CONFIG)")
    common.add_argument("--format", choices=("json", "table"), default="json",
                        help="json to stdout (default) or a table to stderr")
    common.add_argument("--out", help="write CSV plot data to this file")
    common.add_argument("--jobs", type=int, help="worker bound for parallel evaluation")
    common.add_argument("--tol", type=float, help="override the subcommand's main tolerance")

    p = _Parser(prog="bltk", description="Bank-Laine functions, y'' + A y = 0 and value distribution.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("check-bl", parents=[common], help="check E' = +-1 at the zeros of E in a disc")
    s.add_argument("--expr", required=True)
    s.add_argument("--center", default="0")
    s.add_argument("--radius", type=float, required=True)
    s.set_defaults(func=cmd_check_bl)

    for name, func, what in (("extract-a", cmd_extract_a, "coefficient A recovered from E"),
                             ("schwarzian", cmd_schwarzian, "Schwarzian derivative of U")):
        s = sub.add_parser(name, parents=[common], help=what)
        s.add_argument("--expr", required=True)
        g = s.add_mutually_exclusive_group(required=True)
        g.add_argument("--points", help="file with one point per line (re,im or 1+2i)")
        g.add_argument("--grid", help="tensor grid x0:x1:nx,y0:y1:ny")
        s.set_defaults(func=func)

    s = sub.add_parser("trace", parents=[common], help="trace a curve Im Z = const from a start point")
    s.add_argument("--coeff", required=True)
    s.add_argument("--start", required=True)
    s.add_argument("--length", type=float, required=True)
    s.add_argument("--stop-radius", type=float)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("decay", parents=[common], help="integrate solutions along a path and fit the decay")
    s.add_argument("--coeff", required=True)
    s.add_argument("--path", help="sampled path CSV (z.re,z.im); default: trace one")
    s.add_argument("--start", default="1")
    s.add_argument("--length", type=float, default=200.0)
    s.add_argument("--stop-radius", type=float)
    s.add_argument("--n-ic", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--method", choices=("auto", "rk", "liouville"), default="auto")
    s.set_defaults(func=cmd_decay)

    s = sub.add_parser("nevan", parents=[common], help="Nevanlinna profile on a geometric radii grid")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--expr")
    g.add_argument("--ode-coeff", help="A for E = f1 f2 built from y'' + A y = 0")
    s.add_argument("--target", default="0", help="value a, or 'inf'")
    s.add_argument("--rmax", type=float)
    s.set_defaults(func=cmd_nevan)

    s = sub.add_parser("picard", parents=[common], help="solution u ~ 1 on a ray by Picard iteration")
    s.add_argument("--coeff", required=True)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--xmin", type=float, required=True)
    s.add_argument("--xmax", type=float, required=True)
    s.add_argument("--points", type=int, default=371)
    s.set_defaults(func=cmd_picard)

    s = sub.add_parser("tail", parents=[common], help="integral of r|A(r e^{i theta})| over [from, to]")
    s.add_argument("--coeff", required=True)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--from", type=float, required=True)
    s.add_argument("--to", type=float, required=True)
    s.set_defaults(func=cmd_tail)

    s = sub.add_parser("gallery", parents=[common], help="list or verify the built-in examples")
    s.add_argument("action", choices=("list", "verify"))
    s.add_argument("name", nargs="?")
    s.set_defaults(func=cmd_gallery)
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    """Run the CLI with ``argv`` and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        if args.jobs:
            cfg["jobs"] = args.jobs
        payload, table, ok = args.func(args, cfg)
    except (UsageError, ParseError) as exc:
        stderr.write(f"bltk: usage error: {exc}\n")
        return EXIT_USAGE
    except BLTKError as exc:
        stderr.write(f"bltk: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        stderr.write(f"bltk: {exc}\n")
        return EXIT_USAGE
    if args.format == "json":
        stdout.write(dumps(payload) + "\n")
    else:
        stderr.write(_table([(k, str(v)) for k, v in table]))
    if not ok and isinstance(payload, dict) and payload.get("reason"):
        stderr.write(f"bltk: {payload['reason']}\n")
    return EXIT_OK if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
