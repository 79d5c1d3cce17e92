"""Command-line front end.

Exit status: 0 when a result was computed (including a "fails" verdict),
2 on invalid input, 3 when a numerical procedure did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from .bodyspec import BodySpecError, load_body
from .numerics import DEFAULT_TOL, ConvergenceError, sphere_grid

__all__ = ["main", "run", "export_plot_data", "format_numbers"]

DIGITS = 12

EPILOG = f"""\
numerical defaults:
  quadrature        rel {DEFAULT_TOL.quad_rel:g}, abs {DEFAULT_TOL.quad_abs:g}
  finite differences base step {DEFAULT_TOL.deriv_step:g} x t_max, {DEFAULT_TOL.richardson_levels} Richardson levels
  root finding      bracket width {DEFAULT_TOL.root_tol:g}
  LZERO_THREADS     caps worker threads for direction sweeps (default 1)
exit status: 0 result computed, 2 input error, 3 no convergence
"""


class InputError(ValueError):
    pass


def format_numbers(obj):
    """Round every float to 12 significant digits (recursively)."""
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{DIGITS}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [format_numbers(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: format_numbers(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [format_numbers(v) for v in obj]
    return obj


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{float(x):.{DIGITS}g}"


def export_plot_data(report: dict, path) -> None:
    """Write the series of a report as CSV with a commented header line.

    ``series`` rows (t, A) give columns ``t,A``; ``per_direction`` rows give
    ``xi_1..xi_n`` followed by ``weight``, ``log_ft`` and ``density`` where
    present.  A report without rows produces a header-only file.
    """
    header, rows, note = _table(report)
    with open(path, "w", newline="") as fh:
        _write_table(fh, header, rows, note)


def _table(report: dict):
    if "series" in report:
        header = ["t", "A"]
        rows = [[_fmt(t), _fmt(a)] for t, a in report["series"]]
        return header, rows, "section function samples: t, A(t)"
    if "records" in report:
        header = ["N", "a_N", "closed_form_value", "numeric_I", "verdict"]
        rows = [[_fmt(r[k]) for k in header] for r in report["records"]]
        return header, rows, "counterexample scan"
    per = report.get("per_direction", [])
    dim = len(per[0]["xi"]) if per else int(report.get("dim", 0))
    cols = [c for c in ("weight", "log_ft", "density") if per and c in per[0]]
    if not per:
        cols = ["weight", "log_ft", "density"]
    header = [f"xi_{i + 1}" for i in range(dim)] + cols
    rows = [[_fmt(v) for v in d["xi"]] + [_fmt(d[c]) for c in cols] for d in per]
    return header, rows, "per-direction values; weights are quadrature weights on the sphere"


def _write_table(fh, header, rows, note):
    fh.write(f"# {note}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--body", help="body spec: inline JSON, a .json file, or a kind name (ball, lq, ...)")
    common.add_argument("--dim", type=int, help="dimension for bodies given by kind name")
    common.add_argument("--xi", help="direction, comma separated (default: last basis vector)")
    common.add_argument("--grid-res", type=int, help="sphere grid resolution")
    common.add_argument("--a", type=float, help="transverse semi-axis of kernel ellipsoids")
    common.add_argument("--b", type=float, default=1.0, help="axial semi-axis of kernel ellipsoids (default 1)")
    common.add_argument("--sigma", type=float, help="cap radius for measure discretization")
    common.add_argument("--p", type=float, help="fit: nonzero p in (-1, 1) fits a p-sum of ellipsoids")
    common.add_argument("--N", type=float, nargs="+", help="counterexample parameter(s)")
    common.add_argument("--samples", type=int, help="sample count")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(
        prog="lzero",
        description="Log-norm transforms of star bodies and their embeddings in L0.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("embed-test", "classify a body by the sign of the transform of ln||x||"),
        ("log-ft", "transform of ln||x|| at one direction"),
        ("measure", "spectral density on a sphere grid"),
        ("constant", "constant C of the log representation"),
        ("verify-repr", "check ln||x|| = int ln|(x,xi)| dmu + C at sample points"),
        ("fit", "approximate by a product of ellipsoid norms"),
        ("dyadic", "dyadic weights for an ellipsoid product"),
        ("counterexample", "four-dimensional body of revolution"),
        ("cauchy-mc", "Monte Carlo log-moment of a Cauchy linear form"),
        ("radial-distance", "radial metric between two bodies"),
        ("sections", "parallel section function samples"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=text, description=text, epilog=EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        if name == "dyadic":
            sp.add_argument("--depth", type=int, default=10, help="dyadic depth (default 10)")
        if name == "cauchy-mc":
            sp.add_argument("--a0", type=float, default=1.0, help="constant coefficient (default 1)")
            sp.add_argument("--coeffs", default="1", help="Cauchy coefficients, comma separated (default 1)")
        if name == "radial-distance":
            sp.add_argument("--other", required=True, help="second body spec")
    return parser


def _body(args):
    if not args.body:
        raise InputError("--body is required")
    return load_body(args.body, args.dim)


def _vec(text: str, n: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise InputError(f"cannot parse vector {text!r}") from None
    if n is not None and len(v) != n:
        raise InputError(f"vector has {len(v)} entries, expected {n}")
    if not np.any(v):
        raise InputError("vector must be nonzero")
    return v


def _xi(args, n):
    if args.xi:
        return _vec(args.xi, n)
    e = np.zeros(n)
    e[-1] = 1.0
    return e


def _grid(args, n, default=None):
    from .embedding import EMBED_RESOLUTION

    res = args.grid_res or (default or EMBED_RESOLUTION.get(n))
    return sphere_grid(n, res)


def _cmd_embed_test(args):
    from .embedding import embeds_in_L0

    K = _body(args)
    rep = embeds_in_L0(K, _grid(args, K.dim))
    out = rep.to_dict()
    out["dim"] = K.dim
    return out


def _cmd_log_ft(args):
    from .embedding import log_ft_detail

    K = _body(args)
    xi = _xi(args, K.dim)
    r = log_ft_detail(K, xi)
    return {"dim": K.dim, "xi": xi.tolist(), "log_ft": r.value, "method": r.method, "noisy": r.noisy,
            "error_estimate": r.error}


def _cmd_measure(args):
    from .embedding import spectral_measure_density

    K = _body(args)
    grid = _grid(args, K.dim)
    d = spectral_measure_density(K, grid)
    n = K.dim
    per = [
        {"xi": x.tolist(), "weight": float(w), "log_ft": float(-v * (2 * math.pi) ** n), "density": float(v)}
        for x, w, v in zip(grid.nodes, grid.weights, d.values)
    ]
    return {"dim": n, "mass": d.mass, "per_direction": per}


def _cmd_constant(args):
    from .embedding import embedding_constant

    K = _body(args)
    grid = sphere_grid(K.dim, args.grid_res) if args.grid_res else None
    return {"dim": K.dim, "constant_C": embedding_constant(K, grid)}


def _random_directions(n, count, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _cmd_verify_repr(args):
    from .embedding import closed_form_density, embedding_constant, transform_density, verify_log_representation

    K = _body(args)
    density = closed_form_density(K)
    source = "closed_form"
    if density is None:
        density, source = transform_density(K), "section_formulas"
    C = embedding_constant(K)
    pts = _random_directions(K.dim, args.samples or 5, args.seed)
    res = args.grid_res or (40 if source == "closed_form" else 12)
    rep = verify_log_representation(K, density, C, pts, resolution=res)
    return {"dim": K.dim, "density_source": source, "constant_C": C, "max_residual": rep.max_residual,
            "passed": rep.passed, "tol": rep.tol, "residuals": rep.residuals.tolist(), "points": pts.tolist()}


def _fit(args, K):
    from .approximation import FIT_RESOLUTION, fit_ellipsoid_product

    if args.a is None or args.sigma is None:
        raise InputError("fit needs --a and --sigma")
    grid = sphere_grid(K.dim, args.grid_res or FIT_RESOLUTION[K.dim])
    return fit_ellipsoid_product(K, args.a, args.b, args.sigma, grid)


def _cmd_fit(args):
    K = _body(args)
    if args.p is not None and args.p != 0:
        return _fit_psum(args, K)
    r = _fit(args, K)
    return {"dim": K.dim, "a": r.a, "b": r.b, "sigma": r.sigma, "sup_log_error": r.error, "atoms": r.atoms,
            "weight_sum": math.fsum(r.product.weights), "product": r.product.to_list()}


def _fit_psum(args, K):
    from .approximation import fit_psum

    r = fit_psum(K, args.p, args.a if args.a is not None else 0.5, args.b)
    return {"dim": K.dim, "p": r.p, "sup_error": r.error,
            "parts": [{"xi": E.axis.tolist(), "a": E.a, "b": E.b} for E in r.parts]}


def _cmd_dyadic(args):
    from .approximation import EllipsoidProduct, dyadicize_weights, sup_log_error
    from .bodies import DirectionalEllipsoid, LogBlend

    K = _body(args)
    if isinstance(K, LogBlend) and all(isinstance(p, DirectionalEllipsoid) for p in K.parts):
        P = EllipsoidProduct(K.parts, K.weights)
    else:
        P = _fit(args, K).product
    D = dyadicize_weights(P, args.depth)
    g = sphere_grid(K.dim)
    pert = float(np.max(np.abs(D.log_gauge(g.nodes) - P.log_gauge(g.nodes))))
    return {"dim": K.dim, "depth": args.depth, "parts": len(D.parts), "weight_sum": math.fsum(D.weights),
            "sup_log_perturbation": pert, "product": D.to_list()}


def _cmd_counterexample(args):
    from .experiments import counterexample_value

    Ns = args.N if args.N is not None else [1.0]
    if any(N < 0 for N in Ns):
        raise InputError("N must be non-negative")
    recs = [counterexample_value(N, args.grid_res) for N in Ns]
    if len(recs) == 1:
        return recs[0].to_dict()
    return {"records": [r.to_dict() for r in recs]}


def _cmd_cauchy_mc(args):
    from .experiments import cauchy_log_moment_mc

    coeffs = [float(x) for x in args.coeffs.split(",") if x.strip()] if args.coeffs else []
    r = cauchy_log_moment_mc(args.a0, coeffs, args.samples or 1_000_000, args.seed)
    out = r.to_dict()
    out["z_score"] = r.z_score
    return out


def _cmd_radial_distance(args):
    from .bodies import radial_distance

    K = _body(args)
    L = load_body(args.other, args.dim)
    grid = sphere_grid(K.dim, args.grid_res) if args.grid_res else None
    return {"dim": K.dim, "radial_distance": radial_distance(K, L, grid)}


def _cmd_sections(args):
    from .sections import section_profile

    K = _body(args)
    xi = _xi(args, K.dim)
    prof = section_profile(K, xi)
    count = args.samples or 101
    ts = np.linspace(-prof.t_max, prof.t_max, count)
    vals = prof(ts)
    return {"dim": K.dim, "xi": xi.tolist(), "t_max": prof.t_max, "method": prof.method,
            "series": [[float(t), float(a)] for t, a in zip(ts, vals)]}


COMMANDS = {
    "embed-test": _cmd_embed_test,
    "log-ft": _cmd_log_ft,
    "measure": _cmd_measure,
    "constant": _cmd_constant,
    "verify-repr": _cmd_verify_repr,
    "fit": _cmd_fit,
    "dyadic": _cmd_dyadic,
    "counterexample": _cmd_counterexample,
    "cauchy-mc": _cmd_cauchy_mc,
    "radial-distance": _cmd_radial_distance,
    "sections": _cmd_sections,
}


def _render(report: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        _write_table(buf, *_table(report))
        return buf.getvalue()
    return json.dumps(format_numbers(report), sort_keys=True) + "\n"


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        report = COMMANDS[args.command](args)
    except (BodySpecError, InputError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: no convergence: {exc}", file=stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    report["seed"] = args.seed
    text = _render(report, args.format)
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=stderr)
            return 2
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())
