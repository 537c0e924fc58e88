"""Command-line front end: ``pfk eig|cap|cheeger|verify|sweep``.

Exit codes: 0 success, 1 asserted check failures, 2 invalid input,
3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .capacity import (
    CondenserProblem,
    ball_capacity,
    cheeger_constant,
    concentric_capacity,
    solve_condenser,
)
from .discretize import export_csv, rasterize
from .errors import InvalidInputError, PFKError, SolverError
from .geometry import Annulus, Ball, Rectangle, domain_from_record
from .spectral import SolverOptions, eigen_grid, eigen_radial_shoot
from .verify import VerifyConfig, _default_resolution, run_suite

EXIT_OK, EXIT_CHECKS, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

DEFAULT_CATALOG = {
    "domains": [
        {"name": "unit disk", "domain": {"type": "ball", "n": 2, "r": 1.0}},
        {"name": "unit square", "domain": {"type": "rectangle", "a": 1.0, "b": 1.0}},
        {"name": "2x1 rectangle", "domain": {"type": "rectangle", "a": 2.0, "b": 1.0}},
        {"name": "square of area pi", "domain": {"type": "rectangle", "a": math.sqrt(math.pi),
                                                 "b": math.sqrt(math.pi)}},
        {"name": "annulus(0.5,1)", "domain": {"type": "annulus", "n": 2, "rho": 0.5, "R": 1.0}},
    ],
    "p_list": [1.25, 1.5, 2.0, 3.0, 4.0],
}

_SHORTHAND = re.compile(r"^\s*(ball|disk|rectangle|annulus)\s*\(([^)]*)\)\s*$", re.IGNORECASE)


# Parsing helpers -------------------------------------------------------------------


def _load_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed JSON: {exc}") from None


def parse_domain(text):
    """A domain from an inline record, ``@file`` or shorthand like ``rectangle(2,1)``."""
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text()
        except OSError as exc:
            raise InvalidInputError(f"cannot read domain file: {exc}") from None
    m = _SHORTHAND.match(text)
    if m:
        kind = m.group(1).lower()
        try:
            args = [float(a) for a in m.group(2).split(",") if a.strip()]
        except ValueError:
            raise InvalidInputError(f"bad shorthand arguments in {text!r}") from None
        if kind in ("ball", "disk") and len(args) == 1:
            return Ball(2, args[0])
        if kind == "ball" and len(args) == 2:
            return Ball(int(args[0]), args[1])
        if kind == "rectangle" and len(args) == 2:
            return Rectangle(*args)
        if kind == "annulus" and len(args) == 2:
            return Annulus(*args)
        raise InvalidInputError(f"wrong number of arguments in {text!r}")
    return domain_from_record(_load_json(text))


def load_catalog(source):
    """``(names, domains, p_list, resolution, tolerances)`` from ``default`` or a JSON file."""
    if source == "default":
        doc = DEFAULT_CATALOG
    else:
        try:
            doc = _load_json(Path(source).read_text())
        except OSError as exc:
            raise InvalidInputError(f"cannot read catalog: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("domains"), list) or not doc["domains"]:
        raise InvalidInputError("catalog needs a nonempty 'domains' list")
    names, domains = [], []
    for i, entry in enumerate(doc["domains"]):
        if not isinstance(entry, dict) or "domain" not in entry:
            raise InvalidInputError(f"catalog entry {i} needs a 'domain' record")
        name = str(entry.get("name", f"domain{i}"))
        if name in names:
            raise InvalidInputError(f"duplicate catalog name {name!r}")
        names.append(name)
        domains.append(domain_from_record(entry["domain"]))
    p_list = doc.get("p_list", DEFAULT_CATALOG["p_list"])
    resolution = doc.get("resolution")
    tolerances = doc.get("tolerances", {})
    if not isinstance(p_list, list) or not isinstance(tolerances, dict):
        raise InvalidInputError("catalog 'p_list' must be a list and 'tolerances' an object")
    return names, domains, [float(p) for p in p_list], resolution, tolerances


def _tol_override(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance must be a number, got {value!r}") from None


# Commands ------------------------------------------------------------------------------


def cmd_eig(args):
    d = parse_domain(args.domain)
    if args.method == "radial":
        if not isinstance(d, Ball):
            raise InvalidInputError("the radial method needs a ball")
        res = eigen_radial_shoot(d.n, args.p, d.radius, tol=args.tol or 1e-10)
    else:
        opts = SolverOptions(tolerance=args.tol or 1e-6)
        mask = rasterize(d, args.resolution)
        res = eigen_grid(mask, args.p, opts)
        if args.out:
            export_csv(res.eigenfunction, args.out)
    print(f"lambda     {float(res.lam)!r}")
    print(f"iterations {res.iterations}")
    print(f"residual   {res.residual:.3e}")
    print(f"converged  {res.converged}")
    if not res.converged:
        print("eigen solver did not converge within the iteration cap", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_cap(args):
    if args.inner is None and args.outer is None:
        if not args.analytic or args.n is None or args.r is None:
            raise InvalidInputError("give --inner/--outer, or --analytic with --n, --p and --r")
        value, case = ball_capacity(args.n, args.p, args.r)
        print(f"capacity   {float(value)!r}")
        print(f"case       {case}")
        return EXIT_OK
    if args.inner is None or args.outer is None:
        raise InvalidInputError("--inner and --outer go together")
    inner, outer = parse_domain(args.inner), parse_domain(args.outer)
    opts = SolverOptions()
    res = solve_condenser(CondenserProblem(inner, outer, args.p, args.resolution), opts)
    print(f"capacity   {float(res.value)!r}")
    if args.analytic:
        if not (isinstance(inner, Ball) and isinstance(outer, Ball) and inner.center == outer.center):
            raise InvalidInputError("--analytic with sets needs concentric balls")
        exact = concentric_capacity(inner.n, args.p, inner.radius, outer.radius)
        print(f"analytic   {float(exact)!r}")
        print(f"rel. gap   {(res.value - exact) / exact:.3e}")
    if not res.converged:
        print("condenser solve did not converge", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_cheeger(args):
    print(f"cheeger    {float(cheeger_constant(parse_domain(args.domain)))!r}")
    return EXIT_OK


def cmd_verify(args):
    names, domains, p_list, resolution, tolerances = load_catalog(args.catalog)
    if args.p_list is not None:
        p_list = args.p_list
    if args.resolution is not None:
        resolution = args.resolution
    cfg = VerifyConfig(jobs=args.jobs, limits=args.limits)
    if resolution is not None:
        cfg = replace(cfg, resolution=int(resolution))
    overrides = dict(tolerances)
    overrides.update(dict(args.set_tol or []))
    cfg = cfg.with_tolerances(overrides)
    suite = run_suite(domains, p_list, cfg)
    body = {"json": suite.to_json, "csv": suite.to_csv, "text": suite.to_text}[args.format]()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"report.{'txt' if args.format == 'text' else args.format}").write_text(body)
        print(suite.to_text(), end="")
    else:
        print(body, end="")
    failures = suite.failures()
    for r in failures:
        print(f"FAILED: {r.name} ({r.context.get('domain', '')}, p={r.context.get('p', '-')}) "
              f"margin {r.margin:.3g} < -{r.tolerance:g}" + (f" [{r.error}]" if r.error else ""),
              file=sys.stderr)
    return EXIT_CHECKS if failures else EXIT_OK


def cmd_sweep(args):
    if args.steps < 1:
        raise InvalidInputError("--steps must be at least 1")
    d = parse_domain(args.domain)
    if args.spacing == "geometric":
        ps = np.geomspace(args.p_from, args.p_to, args.steps + 1)
    else:
        ps = np.linspace(args.p_from, args.p_to, args.steps + 1)
    opts = SolverOptions()
    mask = None if d.dim != 2 else rasterize(d, args.resolution)
    print(f"{'p':>10} {args.quantity:>20}")
    code = EXIT_OK
    for p in ps:
        p = float(p)
        if isinstance(d, Ball) and (args.method == "radial" or d.dim != 2):
            lam = eigen_radial_shoot(d.n, p, d.radius).lam
        elif mask is not None:
            res = eigen_grid(mask, p, opts)
            lam = res.lam
            if not res.converged:
                code = EXIT_SOLVER
        else:
            raise InvalidInputError("non-ball domains are solved on planar grids only")
        value = lam ** (1.0 / p) if args.quantity == "eig-root" else lam
        print(f"{p:>10.6g} {value:>20.12g}")
    return code


# Entry point ------------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="pfk", description="p-Laplacian eigenvalues, capacities and inequality checks")
    sub = parser.add_subparsers(dest="command", required=True)
    default_res = _default_resolution()

    p = sub.add_parser("eig", help="principal eigenvalue of a domain")
    p.add_argument("--domain", required=True, help="inline JSON record, @file, or shorthand such as ball(1)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--resolution", type=int, default=default_res)
    p.add_argument("--method", choices=("grid", "radial"), default="grid")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", help="write the eigenfunction as CSV (grid method)")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("cap", help="p-capacity of a condenser or a ball")
    p.add_argument("--inner")
    p.add_argument("--outer")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--analytic", action="store_true")
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=float)
    p.add_argument("--resolution", type=int, default=default_res)
    p.set_defaults(func=cmd_cap)

    p = sub.add_parser("cheeger", help="Cheeger constant of a domain")
    p.add_argument("--domain", required=True)
    p.set_defaults(func=cmd_cheeger)

    p = sub.add_parser("verify", help="run the inequality suite over a catalog")
    p.add_argument("--catalog", required=True, help="catalog JSON file or 'default'")
    p.add_argument("--p-list", type=float, nargs="*")
    p.add_argument("--format", choices=("json", "csv", "text"), default="text")
    p.add_argument("--out", help="directory for the report file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resolution", type=int)
    p.add_argument("--limits", action="store_true", help="include the p->1 and p->infinity limit checks")
    p.add_argument("--set-tol", type=_tol_override, action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="tabulate lambda_p or lambda_p^(1/p) over a range of p")
    p.add_argument("--domain", required=True)
    p.add_argument("--p-from", type=float, required=True)
    p.add_argument("--p-to", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--quantity", choices=("eig", "eig-root"), default="eig")
    p.add_argument("--spacing", choices=("linear", "geometric"), default="linear")
    p.add_argument("--method", choices=("grid", "radial"), default="grid")
    p.add_argument("--resolution", type=int, default=default_res)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # usage errors (2) and --help (0)
            return EXIT_OK if not exc.code else EXIT_INPUT
        if getattr(args, "jobs", 1) < 1:
            raise InvalidInputError("--jobs must be at least 1")
        return args.func(args)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PFKError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
