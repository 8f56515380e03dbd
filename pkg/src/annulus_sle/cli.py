"""Command-line front end: ``annulus-sle <subcommand> [flags]``.

Every run writes one ``#``-prefixed JSON metadata line holding the full run
configuration, followed by a CSV data section (or a JSON document with
``--format json``).  Exit codes: 0 success, 2 invalid input, 1 runtime failure.
"""

import argparse
import csv
import io
import json
import math
import re
import sys
import warnings
from dataclasses import asdict

from . import __version__, conformal, loewner, mc, pde, rng, special_fn, xval
from .special_fn import AnnulusParam, DomainError

COLUMNS = {
    "eval": ["fn", "a", "x", "value", "value_imag"],
    "bracket": ["a", "x", "lower", "upper"],
    "pde": ["a", "x", "F", "H"],
    "mc": ["a", "x", "n_paths", "estimate", "stderr", "n_absorbed", "n_killed"],
    "sle": ["a", "x", "n_paths", "estimate", "stderr", "accepted_early_fraction"],
    "compare": ["a", "x", "f_pde", "f_mc", "mc_stderr", "f_direct", "direct_stderr",
                "bracket_lo", "bracket_hi", "in_bracket", "pde_mc_ok", "direct_mc_ok",
                "consistent"],
    "fit": ["kind", "x", "slope", "target", "rel_error", "r2"],
}

EVAL_FNS = ("eta", "theta1", "theta1_over_sin", "weier_zeta", "weier_p", "xi2", "dilog_pair",
            "modulus_L", "elliptic_K", "change_factor", "prefactor", "functional_increment")


class UsageError(Exception):
    pass


# ------------------------------------------------------------- validation


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}")


def _params(args):
    """AnnulusParam list from --a or --q (exactly one of them)."""
    if (args.a is None) == (args.q is None):
        raise UsageError("give exactly one of --a or --q")
    if args.a is not None:
        vals = args.a
        if any(not (v < 0 and math.isfinite(v)) for v in vals):
            raise UsageError("--a values must be finite and negative")
        return [AnnulusParam(v) for v in vals]
    if any(not 0 < v < 1 for v in args.q):
        raise UsageError("--q values must lie in (0, 1)")
    return [AnnulusParam.from_q(v) for v in args.q]


def _xs(args, closed=False):
    lo_ok = (lambda v: 0 <= v <= 2 * math.pi) if closed else (lambda v: 0 < v < 2 * math.pi)
    if any(not lo_ok(v) for v in args.x):
        raise UsageError("--x values must lie in " + ("[0, 2pi]" if closed else "(0, 2pi)"))
    return args.x


def _positive_int(name, v):
    if v < 1:
        raise UsageError(f"{name} must be positive")
    return v


def _legendre(args):
    return mc.LegendreConfig(db_base=args.db_base, eps_abs=args.eps_abs,
                             kill_delta=args.kill_delta, heun=args.heun)


# ------------------------------------------------------------- subcommands


def _cmd_eval(args):
    fn = args.fn
    ps = _params(args)
    xs = _xs(args, closed=True) if args.x else [0.0]
    y = args.y
    rows = []
    for p in ps:
        for x in xs:
            if fn == "eta":
                v = special_fn.eta(p, args.method)
            elif fn == "theta1":
                v = special_fn.theta1(x, p, args.method)
            elif fn == "theta1_over_sin":
                v = special_fn.theta1_over_sin(x, p, args.method)
            elif fn == "weier_zeta":
                v = special_fn.weier_zeta(complex(x, y), p)
            elif fn == "weier_p":
                v = special_fn.weier_p(complex(x, y), p)
            elif fn == "xi2":
                v = special_fn.xi2(complex(args.z, y), x, p)
            elif fn == "dilog_pair":
                v = special_fn.dilog_pair(x)
            elif fn == "modulus_L":
                v = conformal.modulus_L(p).L
            elif fn == "elliptic_K":
                v = conformal.elliptic_K(p)
            elif fn == "change_factor":
                v = conformal.change_factor(p, x)
            elif fn == "prefactor":
                v = mc.prefactor(x, p)
            else:
                v = mc.functional_increment(x, p.a)
            v = complex(v)
            rows.append([fn, p.a, x, v.real, v.imag])
    return rows, {}


def _cmd_bracket(args):
    ps = _params(args)
    xs = _xs(args)
    rows = []
    for p in ps:
        for x in xs:
            b = conformal.bracket_F(p, x)
            rows.append([p.a, x, b.lower, b.upper])
    return rows, {}


def _cmd_pde(args):
    if not -0.1 <= args.a_start <= -0.005:
        raise UsageError("--a-start must lie in [-0.1, -0.005]")
    if not args.a_end < args.a_start:
        raise UsageError("--a-end must lie below --a-start")
    if args.nx < 8 or args.nx % 2:
        raise UsageError("--nx must be even and >= 8")
    if not args.rel_step > 0:
        raise UsageError("--rel-step must be positive")
    _positive_int("--every-a", args.every_a)
    _positive_int("--every-x", args.every_x)
    a_out = args.a_out or []
    if any(not args.a_end <= v <= args.a_start for v in a_out):
        raise UsageError("--a-out values must lie in [a_end, a_start]")
    grid = pde.Grid(n_cells=args.nx, rel_step=args.rel_step, richardson=not args.no_richardson)
    sol = pde.solve(args.a_start, args.a_end, grid=grid, stops=a_out)
    levels = a_out if a_out else list(sol.a_levels[::args.every_a])
    if not a_out and levels[-1] != sol.a_levels[-1]:
        levels.append(sol.a_levels[-1])
    xs = args.x if args.x else list(sol.x_nodes[args.every_x - 1::args.every_x])
    rows = []
    for a in levels:
        F = pde.F_lookup_many(sol, a, xs)
        for x, f in zip(xs, F):
            rows.append([float(a), float(x), float(f), float(1.0 - f)])
    return rows, {"solver": sol.metadata}


def _cmd_mc(args):
    ps = _params(args)
    xs = _xs(args)
    _positive_int("--paths", args.paths)
    cfg = _legendre(args)
    seed = rng.check_seed(args.seed)
    rows = []
    for i, p in enumerate(ps):
        for j, x in enumerate(xs):
            s = xval.row_seed(seed, i * len(xs) + j)
            e = mc.estimate_F_feynman_kac(p, x, args.paths, cfg, s, args.threads)
            rows.append([p.a, x, e.n_paths, e.mean, e.stderr, e.n_absorbed, e.n_killed])
    return rows, {"legendre": asdict(cfg)}


def _cmd_sle(args):
    _positive_int("--paths", args.paths)
    cfg = loewner.SamplerConfig(rel_step=args.rel_step)
    seed = rng.check_seed(args.seed)
    if args.validate:
        e = loewner.estimate_slit_validation(args.paths, seed, cfg, args.threads)
        exact = 2 ** -1.25
        return [[math.nan, math.nan, e.n_paths, e.mean, e.stderr, e.accepted_early_fraction]], {
            "event": "slit validation", "exact": exact}
    ps = _params(args)
    xs = _xs(args)
    rows = []
    for i, p in enumerate(ps):
        for j, x in enumerate(xs):
            s = xval.row_seed(seed, i * len(xs) + j)
            e = loewner.estimate_F_direct(p, x, args.paths, s, cfg, args.threads)
            rows.append([p.a, x, e.n_paths, e.mean, e.stderr, e.accepted_early_fraction])
    return rows, {"sampler": asdict(cfg)}


def _read_points(path):
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}")
    pts = []
    for row in csv.reader(lines):
        try:
            a, x = float(row[0]), float(row[1])
        except (ValueError, IndexError):
            continue  # header or malformed line
        pts.append((a, x))
    if not pts:
        raise UsageError(f"no (a, x) rows in {path}")
    return pts


def _cmd_compare(args):
    if args.points:
        pts = _read_points(args.points)
    else:
        ps = _params(args)
        pts = [(p.a, x) for p in ps for x in _xs(args)]
    for a, x in pts:
        if not (a < 0 and 0 < x < 2 * math.pi):
            raise UsageError(f"invalid point (a={a}, x={x})")
    if args.mc_paths < 0 or args.direct_paths < 0:
        raise UsageError("path counts must be nonnegative")
    cfg = xval.CompareConfig(mc_paths=args.mc_paths, direct_paths=args.direct_paths,
                             legendre=_legendre(args))
    res = xval.compare_methods(pts, cfg, seed=rng.check_seed(args.seed), threads=args.threads)
    rows = [[r.a, r.x, r.f_pde, r.f_mc, r.mc_stderr, r.f_direct, r.direct_stderr,
             r.bracket_lo, r.bracket_hi, r.in_bracket, r.pde_mc_ok, r.direct_mc_ok,
             r.consistent] for r in res]
    return rows, {"notes": [r.notes for r in res]}


def _cmd_fit(args):
    rows = []
    extra = {}
    if args.kind in ("q1", "all"):
        for x in (math.pi / 2, math.pi):
            f = xval.fit_q1_slope(x)
            rows.append(["q1", x, f.slope, f.target, f.rel_error, f.r2])
            extra[f"q1_{x:.6f}"] = f.extra
    if args.kind in ("joint", "all"):
        f = xval.fit_joint_hit_rate()
        rows.append(["joint", math.pi, f.slope, f.target, f.rel_error, f.r2])
        extra["joint"] = f.extra
    if args.kind in ("q0", "all"):
        sol = pde.solve(-0.02, -4.0)
        for x in (math.pi / 2, math.pi):
            f = xval.fit_q0_exponent(x, sol)
            rows.append(["q0", x, f.slope, f.target, f.rel_error, f.r2])
            extra[f"q0_{x:.6f}"] = f.extra
    return rows, {"fits": extra}


# ------------------------------------------------------------------ output


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if hasattr(o, "item"):
        return _jsonable(o.item())
    return o


def render(sub, rows, meta, fmt):
    out = io.StringIO()
    if fmt == "json":
        doc = {"metadata": meta, "columns": COLUMNS[sub], "rows": rows}
        json.dump(_jsonable(doc), out, sort_keys=True, indent=1)
        out.write("\n")
        return out.getvalue()
    out.write("# " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    out.write(",".join(COLUMNS[sub]) + "\n")
    for r in rows:
        out.write(",".join(_fmt(v) for v in r) + "\n")
    return out.getvalue()


# ------------------------------------------------------------------ parser


def build_parser():
    ap = argparse.ArgumentParser(prog="annulus-sle",
                                 description="SLE(8/3) annulus crossing probability toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, seeded=False, threaded=False):
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if seeded:
            p.add_argument("--seed", type=int, default=rng.DEFAULT_SEED,
                           help=f"unsigned 64-bit seed (default {rng.DEFAULT_SEED})")
        if threaded:
            p.add_argument("--threads", type=int, default=None,
                           help="worker threads (default $ANNULUS_SLE_THREADS or all cores)")

    def where(p, need_x=True):
        p.add_argument("--a", type=_floats, help="log-modulus a < 0 (comma list)")
        p.add_argument("--q", type=_floats, help="modulus q in (0, 1) (comma list)")
        p.add_argument("--x", type=_floats, default=[] if not need_x else None,
                       required=need_x, help="boundary angle(s) in (0, 2pi)")

    def legendre(p):
        d = mc.LegendreConfig()
        p.add_argument("--db-base", type=float, default=d.db_base)
        p.add_argument("--eps-abs", type=float, default=d.eps_abs)
        p.add_argument("--kill-delta", type=float, default=d.kill_delta)
        p.add_argument("--heun", action=argparse.BooleanOptionalAction, default=d.heun)

    p = sub.add_parser("eval", help="evaluate one special function")
    common(p)
    where(p, need_x=False)
    p.add_argument("--fn", choices=EVAL_FNS, required=True)
    p.add_argument("--y", type=float, default=0.0, help="imaginary part for zeta/wp/xi2")
    p.add_argument("--z", type=float, default=1.0, help="real part of z for xi2")
    p.add_argument("--method", choices=("auto", "series", "modular"), default="auto")

    p = sub.add_parser("bracket", help="restriction bounds on F")
    common(p)
    where(p)

    p = sub.add_parser("pde", help="solve the evolution equation and write the F table")
    common(p)
    p.add_argument("--a-start", type=float, default=-0.02)
    p.add_argument("--a-end", type=float, default=-4.0)
    p.add_argument("--nx", type=int, default=2048)
    p.add_argument("--rel-step", type=float, default=pde.Grid().rel_step)
    p.add_argument("--no-richardson", action="store_true")
    p.add_argument("--a-out", type=_floats, help="output levels (default every --every-a)")
    p.add_argument("--x", type=_floats, help="output angles (default every --every-x node)")
    p.add_argument("--every-a", type=int, default=10)
    p.add_argument("--every-x", type=int, default=16)

    p = sub.add_parser("mc", help="Feynman-Kac Monte Carlo estimate of F")
    common(p, seeded=True, threaded=True)
    where(p)
    p.add_argument("--paths", type=int, default=100_000)
    legendre(p)

    p = sub.add_parser("sle", help="direct SLE(8/3) trace sampler")
    common(p, seeded=True, threaded=True)
    where(p, need_x=False)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--rel-step", type=float, default=loewner.SamplerConfig().rel_step)
    p.add_argument("--validate", action="store_true",
                   help="run the exact slit-avoidance calibration instead")

    p = sub.add_parser("compare", help="cross-method comparison table")
    common(p, seeded=True, threaded=True)
    where(p, need_x=False)
    p.add_argument("--points", help="CSV file of a,x rows")
    p.add_argument("--mc-paths", type=int, default=100_000)
    p.add_argument("--direct-paths", type=int, default=0)
    legendre(p)

    p = sub.add_parser("fit", help="asymptotic exponent fits")
    common(p)
    p.add_argument("--kind", choices=("q1", "q0", "joint", "all"), default="all")
    return ap


HANDLERS = {"eval": _cmd_eval, "bracket": _cmd_bracket, "pde": _cmd_pde, "mc": _cmd_mc,
            "sle": _cmd_sle, "compare": _cmd_compare, "fit": _cmd_fit}


_NUMBER_LIST = re.compile(r"^-(\d|\.\d)[\d.eE+,-]*$")


def _join_negative_lists(argv):
    """``--a -1,-2`` -> ``--a=-1,-2``; argparse would read ``-1,-2`` as a flag."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NUMBER_LIST.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def run(argv=None):
    ap = build_parser()
    argv = _join_negative_lists(sys.argv[1:] if argv is None else list(argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    if hasattr(args, "seed"):
        try:
            rng.check_seed(args.seed)
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format")}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rows, extra = HANDLERS[args.cmd](args)
    except (UsageError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - report any runtime failure as exit 1
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    notes = sorted({str(w.message) for w in caught if "TBB" not in str(w.message)})
    meta = {"subcommand": args.cmd, "version": __version__, "config": config, **extra}
    if notes:
        meta["warnings"] = notes
    text = render(args.cmd, rows, meta, args.format)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as e:
            print(f"error: cannot write {args.out}: {e}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
