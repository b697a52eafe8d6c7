"""Command-line front end: tables of prices, coefficients and diagnostics.

Every table is written as CSV (a ``#`` line echoing the configuration, a
header row, then rows with floats in shortest round-trip form) or as JSON.  Commands that
produce several tables write them one after another to stdout, or to
``<out>_<table>.<ext>`` when ``--out`` is given.

Exit codes: 0 success, 1 numerical failure (failing rows are still
emitted with a status column), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .payoff_kernel import (
    ConvergenceError,
    DomainError,
    ModelParams,
    QuadSpec,
    eval_G_complex,
    eval_g0,
    eval_g_inf,
    eval_g_with_error,
    mckean_tail,
    payoff_bound,
)
from .pricer import (
    double_integral_price,
    gaussian_moment,
    implied_vol_strike,
    price_strike,
    series_price,
    value_integral,
)
from .scaling_limit import (
    contour_samples,
    convergence_radius,
    scaling_limit_check,
    sigma_hat_series,
    sigma_hat_sq,
    solve_lambda,
)
from .series_engine import (
    MAX_PAYOFF_ORDER,
    derive_payoff_series,
    error_bound,
    extrapolate_radius_algebraic,
    extrapolate_root_test,
    implied_variance_series,
    optimal_truncation,
    root_test,
)
from .series_core import RationalScalar


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# grids and output
# --------------------------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """``a``, ``a,b,c`` or ``start:step:stop`` (stop included within half a step)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise UsageError(f"range needs start:step:stop, got {text!r}")
            start, step, stop = parts
            if not step > 0:
                raise UsageError(f"range step must be positive in {text!r}")
            n = int(math.floor((stop - start) / step + 0.5))
            if n < 0:
                raise UsageError(f"empty range {text!r}")
            vals = [start + i * step for i in range(n + 1)]
            # snap accumulated rounding so printed grids are clean
            vals = [float(f"{v:.12g}") for v in vals]
        else:
            vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"cannot parse grid {text!r}") from exc
    if not vals:
        raise UsageError(f"empty grid {text!r}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise UsageError(f"grid must be strictly increasing: {text!r}")
    return vals


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest string that round-trips
    return str(v)


def _config_echo(args: argparse.Namespace) -> str:
    items = {k: v for k, v in vars(args).items() if k not in ("func", "out", "jobs")}
    return " ".join(f"{k}={items[k]}" for k in sorted(items))


def render(table: Table, args: argparse.Namespace) -> str:
    if args.format == "json":
        def conv(v):
            if isinstance(v, (np.floating, float)):
                v = float(v)
                return v if math.isfinite(v) else str(v)
            if isinstance(v, np.integer):
                return int(v)
            return v

        doc = {
            "command": args.command,
            "table": table.name,
            "config": {k: str(v) for k, v in sorted(vars(args).items()) if k not in ("func", "out", "jobs")},
            "columns": table.columns,
            "rows": [[conv(v) for v in r] for r in table.rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    lines = [f"# sabrlab {__version__} {args.command} table={table.name} {_config_echo(args)}", ",".join(table.columns)]
    lines += [",".join(_fmt(v) for v in r) for r in table.rows]
    return "\n".join(lines) + "\n"


def emit(tables: Sequence[Table], args: argparse.Namespace) -> None:
    ext = "json" if args.format == "json" else "csv"
    if args.out is None:
        for t in tables:
            sys.stdout.write(render(t, args))
        return
    out = Path(args.out)
    if len(tables) == 1:
        out.write_text(render(tables[0], args))
        return
    stem = out.with_suffix("") if out.suffix else out
    for t in tables:
        Path(f"{stem}_{t.name}.{ext}").write_text(render(t, args))


def pmap(fn: Callable, items: Iterable, jobs: int) -> list:
    """Ordered parallel map (the compiled kernel releases the GIL)."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _quad(args) -> QuadSpec:
    kw = {}
    if args.tol is not None:
        kw["abs_tol"] = args.tol
        kw["rel_tol"] = args.tol
    if getattr(args, "umax", None) is not None:
        kw["u_max"] = args.umax
    return QuadSpec(**kw)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_price(args) -> list[Table]:
    quad_spec = _quad(args)
    Ts = parse_grid(args.T)
    sigmas = parse_grid(args.sigma0)
    omegas = parse_grid(args.omega)
    Ks = [args.S0] if args.atm or args.K is None else parse_grid(args.K)
    jobs = [(T, K, s, w) for s in sigmas for w in omegas for K in Ks for T in Ts]

    def one(job):
        T, K, s, w = job
        params = ModelParams(s, w, args.S0, K)
        try:
            if args.method == "quadrature":
                r = price_strike(T, params, quad_spec)
            elif args.method == "double":
                r = double_integral_price(T, params)
            else:
                if K != args.S0:
                    raise DomainError("the series method is ATM only")
                r = series_price(T, params, args.order)
            call = r.value + max(args.S0 - K, 0.0)
            try:
                iv = implied_vol_strike(call, args.S0, K, T).sigma_bs
            except (DomainError, ConvergenceError):
                iv = math.nan
            return [T, K, s, w, r.value, r.abs_err_est, iv, r.method]
        except ConvergenceError as exc:
            return [T, K, s, w, math.nan, math.nan, math.nan, f"error: {exc}"]

    rows = pmap(one, jobs, args.jobs)
    args._failed = any(isinstance(r[-1], str) and r[-1].startswith("error") for r in rows)
    return [Table("price", ["T", "K", "sigma0", "omega", "value", "err_est", "implied_vol", "status"], rows)]


def cmd_series(args) -> list[Table]:
    N = args.order
    if not 0 <= N <= MAX_PAYOFF_ORDER:
        raise UsageError(f"--order must lie in [0, {MAX_PAYOFF_ORDER}]")
    sigma = Fraction(args.sigma0) if args.sigma0 is not None else None
    cols = ["k", "numerator", "denominator", "pi_pow", "sqrt2_pow", "value", "polynomial_in_sigma0_sq"]
    rows = []
    if args.kind in ("payoff", "value"):
        ps = derive_payoff_series(N, args.kernel)
        factor = 1
        for k in range(N + 1):
            if args.kind == "value":
                factor = 2**k * math.factorial(k)
            poly = ps.r[k] * factor
            if sigma is None:
                x = ps.exact(k, 0) * factor if poly.degree < 1 else None
            else:
                x = ps.exact(k, sigma) * factor
            if x is None:
                rows.append([k, "", "", ps.prefactor.pi_pow, ps.prefactor.sqrt2_pow, math.nan, poly.to_str("s")])
            else:
                rows.append([k, x.numerator, x.denominator, x.pi_pow, x.sqrt2_pow, float(x), poly.to_str("s")])
    elif args.kind == "implied-variance":
        c = implied_variance_series(N=N)
        for k, p in enumerate(c.coeffs):
            if sigma is None and p.degree >= 1:
                rows.append([k, "", "", 0, 0, math.nan, p.to_str("s")])
            else:
                x = RationalScalar(p(Fraction(sigma or 0) ** 2))
                rows.append([k, x.numerator, x.denominator, 0, 0, float(x), p.to_str("s")])
    elif args.kind == "scaling":
        S = sigma_hat_series(N)
        for k, v in enumerate(S.coeffs):
            x = RationalScalar(Fraction(v))
            rows.append([k, x.numerator, x.denominator, 0, 0, float(x), str(v)])
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(args.kind)
    return [Table(args.kind, cols, rows)]


def cmd_diverge(args) -> list[Table]:
    Ts = parse_grid(args.T)
    kernel = "unit" if args.sigma0 is None else "sabr"
    sig = 0.0 if args.sigma0 is None else float(args.sigma0)
    ps = derive_payoff_series(args.order, kernel)
    quad_spec = _quad(args)

    def reference(T):
        if kernel == "unit":
            return value_integral(T, None, "unit", quad_spec)[0]
        return value_integral(T, ModelParams(sig), "sabr", quad_spec)[0]

    refs = pmap(reference, Ts, args.jobs)
    partial = Table("partial_sums", ["T", "n", "term", "partial_sum", "neglected_term", "reference", "abs_error", "optimal"])
    trunc = Table(
        "truncation",
        ["T", "N_star", "eps_star", "abs_error_at_N_star", "bound", "n_star_estimate", "n_star_analytic"],
    )
    for T, ref in zip(Ts, refs):
        rep = optimal_truncation(T, ps, sig, reference=ref)
        for n in range(len(rep.terms) - 1):
            partial.rows.append(
                [T, n, rep.terms[n], rep.partial_sums[n], abs(rep.terms[n + 1]), ref, rep.errors[n], int(n == rep.N_star)]
            )
        trunc.rows.append(
            [T, rep.N_star, rep.eps_star, rep.errors[rep.N_star], rep.bound, rep.n_star_estimate, rep.n_star_analytic]
        )

    rt_ps = derive_payoff_series(args.rt_order, "sabr")
    coeffs = rt_ps.coefficients(args.rt_sigma0)
    pts = root_test(coeffs, "payoff")
    rt = Table("root_test", ["n", "inv_n", "reduced_coeff"])
    for inv, red in pts:
        rt.rows.append([int(round(1 / inv)), inv, red])
    idx = list(range(1, len(coeffs)))
    lin = extrapolate_root_test(pts)
    alg = extrapolate_radius_algebraic(idx, coeffs[1:], step=2)
    fit = Table("root_fit", ["method", "radius", "ratio_to_pi"])
    fit.rows.append(["linear_in_inv_n_last8", lin, lin / math.pi])
    fit.rows.append(["algebraic_prefactor_last8", alg, alg / math.pi])

    err = Table("error", ["T", "case", "sigma0", "bound", "measured_tail", "value", "rel_tail"])
    err_T = parse_grid(args.err_T)
    cases = [("V0", None)] + [("sabr", float(s)) for s in parse_grid(args.err_sigma0)]

    def err_row(job):
        T, (case, s) = job
        if s is None:
            f = lambda u: ((g := eval_g0(u)), 4e-16 * np.abs(g))
            tail, _ = gaussian_moment(T, f, 2.0, quad_spec, lo=math.pi)
            val = value_integral(T, None, "unit", quad_spec)[0]
            return [T, case, math.nan, error_bound(T, 2.0), tail, val, tail / val]
        p = ModelParams(s)
        f = lambda u: eval_g_with_error(u, p, quad_spec, 0.0)
        tail, _ = gaussian_moment(T, f, s, quad_spec, lo=math.pi, oscillating=True)
        val = value_integral(T, p, "sabr", quad_spec)[0]
        return [T, case, s, error_bound(T, s), tail, val, tail / val]

    err.rows = pmap(err_row, [(T, c) for c in cases for T in err_T], args.jobs)
    return [partial, trunc, rt, fit, err]


def cmd_scaling(args) -> list[Table]:
    taus = parse_grid(args.tau)
    S = sigma_hat_series(args.order).to_float()
    lam = Table("lambda", ["tau", "lambda", "sigma_hat_sq", "series_value", "abs_diff"])
    for t in taus:
        closed = sigma_hat_sq(t)
        ser = float(S(t))
        lam.rows.append([t, solve_lambda(abs(t)), closed, ser, abs(closed - ser)])
    rr = convergence_radius()
    radius = Table("radius", ["y0", "tau0", "Tc_omega_sigma0"], [[rr.y0, rr.tau0, rr.Tc_omega_sigma0]])
    sigmas = parse_grid(args.sigma0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        chk = scaling_limit_check(args.check_tau, sigmas, quad_spec=_quad(args))
    limit = Table(
        "limit",
        ["tau", "sigma0", "T", "covered_call", "exponent", "target", "rel_err", "delta_v", "saddle", "ratio"],
        [[args.check_tau, r.sigma0, r.T, r.covered_call, r.exponent, r.target, r.rel_err, r.delta_v, r.saddle, r.delta_v / r.saddle] for r in chk],
    )
    xs = parse_grid(args.contour_x)
    ys = contour_samples(args.contour_tau, xs)
    contour = Table("contour", ["tau", "x", "y"], [[args.contour_tau, x, y] for x, y in zip(xs, ys)])
    return [lam, radius, limit, contour]


def cmd_payoff(args) -> list[Table]:
    s0 = float(args.sigma0)
    p = ModelParams(s0)
    quad_spec = _quad(args)
    us = parse_grid(args.u)
    if args.complex:
        ys = parse_grid(args.y)
        pts = [complex(x, y) for y in ys for x in us]

        def one(z):
            r = eval_G_complex(z, p, quad_spec)
            return [z.real, z.imag, r.quadrant, r.value.real, r.value.imag]

        return [Table("G_complex", ["x", "y", "quadrant", "re_G", "im_G"], pmap(one, pts, args.jobs))]
    if any(u <= 0 for u in us):
        raise UsageError("--u values must be positive")
    g, e = eval_g_with_error(np.array(us), p, quad_spec, 0.0)
    rows = [
        [u, gi, ei, float(eval_g0(u)), float(eval_g_inf(u)), float(payoff_bound(u, s0))]
        for u, gi, ei in zip(us, g, e)
    ]
    return [Table("payoff", ["u", "g", "g_err", "g0", "g_inf", "bound"], rows)]


def cmd_kernel(args) -> list[Table]:
    Ts = parse_grid(args.T)
    ss = parse_grid(args.s)
    jobs = [(t, s) for t in Ts for s in ss]
    rows = pmap(lambda j: [j[0], j[1], mckean_tail(j[0], j[1])], jobs, args.jobs)
    return [Table("kernel", ["t", "s", "G"], rows)]


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out", default=None, help="output file (prefix when a command writes several tables)")
    sp.add_argument("--tol", type=float, default=None, help="absolute and relative quadrature tolerance")
    sp.add_argument("--jobs", type=int, default=1, help="worker threads for grid rows")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sabrlab", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("price", help="time values, error estimates and implied vols")
    sp.add_argument("--sigma0", required=True)
    sp.add_argument("--T", required=True)
    sp.add_argument("--omega", default="1")
    sp.add_argument("--K", default=None)
    sp.add_argument("--S0", type=float, default=1.0)
    sp.add_argument("--atm", action="store_true", help="force K = S0")
    sp.add_argument("--method", choices=("quadrature", "double", "series"), default="quadrature")
    sp.add_argument("--order", type=int, default=4, help="truncation order for --method series")
    sp.add_argument("--umax", type=float, default=None)
    _common(sp)
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("series", help="exact series coefficients")
    sp.add_argument("--kind", choices=("payoff", "value", "implied-variance", "scaling"), default="payoff")
    sp.add_argument("--order", type=int, default=12)
    sp.add_argument("--sigma0", default=None, help="rational value such as 1/2; omitted means symbolic")
    sp.add_argument("--kernel", choices=("sabr", "unit"), default="sabr")
    _common(sp)
    sp.set_defaults(func=cmd_series)

    sp = sub.add_parser("diverge", help="partial sums, optimal truncation, root test, error bound")
    sp.add_argument("--T", default="0.25,0.5,1,2")
    sp.add_argument("--sigma0", default=None, help="SABR payoff; omitted means the h = 1 case")
    sp.add_argument("--order", type=int, default=24)
    sp.add_argument("--rt-order", dest="rt_order", type=int, default=40)
    sp.add_argument("--rt-sigma0", dest="rt_sigma0", type=float, default=0.5)
    sp.add_argument("--err-T", dest="err_T", default="0.25:0.25:1")
    sp.add_argument("--err-sigma0", dest="err_sigma0", default="0.1,0.5,1.0")
    _common(sp)
    sp.set_defaults(func=cmd_diverge)

    sp = sub.add_parser("scaling", help="large-sigma0 scaling limit tables")
    sp.add_argument("--tau", default="0:0.05:0.6")
    sp.add_argument("--order", type=int, default=20)
    sp.add_argument("--sigma0", default="25,50,100,200")
    sp.add_argument("--check-tau", dest="check_tau", type=float, default=0.5)
    sp.add_argument("--contour-tau", dest="contour_tau", type=float, default=1.0)
    sp.add_argument("--contour-x", dest="contour_x", default="0:0.25:5")
    _common(sp)
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("payoff", help="sample g, g0, g_inf or the complex continuation")
    sp.add_argument("--sigma0", required=True)
    sp.add_argument("--u", required=True, help="real grid (real parts with --complex)")
    sp.add_argument("--y", default="0", help="imaginary parts for --complex")
    sp.add_argument("--complex", action="store_true")
    _common(sp)
    sp.set_defaults(func=cmd_payoff)

    sp = sub.add_parser("kernel", help="sample the heat-kernel tail G(t, s)")
    sp.add_argument("--T", required=True)
    sp.add_argument("--s", required=True)
    _common(sp)
    sp.set_defaults(func=cmd_kernel)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args._failed = False
    try:
        tables = args.func(args)
    except (UsageError, DomainError) as exc:
        ap.exit(2, f"sabrlab {args.command}: error: {exc}\n")
    except ConvergenceError as exc:
        sys.stderr.write(f"sabrlab {args.command}: numerical failure: {exc}\n")
        return 1
    failed = args._failed
    del args._failed
    emit(tables, args)
    return 1 if failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
