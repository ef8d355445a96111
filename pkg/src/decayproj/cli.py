"""Command-line front end: ``decayproj {model,bounds,project,ortho,validate}``.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numeric
precondition violation.  ``DECAYPROJ_THREADS`` caps BLAS threads.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import io
from . import models as md
from . import orthobasis as ob
from . import projector as pj
from . import validate as vd
from .errors import PreconditionError
from .matrix import SpectralModel, normalize, spectral_interval

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- argument types -----------------------------------------------------------


def _positive(x):
    v = float(x)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x}")
    return v


def _nonneg(x):
    v = float(x)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {x}")
    return v


def _open_half(x):
    v = float(x)
    if not 0 < v < 0.5:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1/2), got {x}")
    return v


def _chi(x):
    v = float(x)
    if not v > 1:
        raise argparse.ArgumentTypeError(f"chi must exceed 1, got {x}")
    return v


def _unit_open(x):
    v = float(x)
    if not -1 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (-1, 1), got {x}")
    return v


def _pos_int(x):
    v = int(x)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {x}")
    return v


def _nonneg_int(x):
    v = int(x)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {x}")
    return v


# -- commands -----------------------------------------------------------------


def cmd_model(args):
    kind = args.kind
    if kind in ("gapped_random",) or (kind == "synthetic_decay" and args.decay_kind == "random_phase"):
        if args.seed is None:
            raise UsageError(f"model {kind} is randomized and requires --seed")
    if kind == "gapped_random":
        if not 0 < args.a < 1:
            raise UsageError("--a must lie in (0, 1)")
        params = {"m": args.m, "a": args.a, "n_e": args.n_e, "seed": args.seed}
    elif kind == "synthetic_decay":
        params = {"c": args.c, "alpha": args.alpha, "kind": args.decay_kind, "seed": args.seed}
    else:
        params = {}
    spec = md.ModelSpec(kind, args.n, params)
    H, model = spec.build()
    out = Path(args.out)
    io.write_matrix_market(out, H, comment=spec.to_json())
    record = spec.to_record()
    if model is not None:
        record["spectral_model"] = _model_record(model)
    io.write_json(out.with_suffix(".json"), record)
    print(f"wrote {out} (n={H.n}, nnz={H.nnz})")
    return EXIT_OK


def _model_record(s):
    return {
        "lo": s.lo, "hi": s.hi, "mu": s.mu, "eps_minus": s.eps_minus, "eps_plus": s.eps_plus,
        "beta": s.beta, "n_e": s.n_e,
    }


def _bernstein_preflight(args):
    cb = bd.chi_bar_fd(args.beta, args.mu)
    if args.chi is not None and not args.chi < cb:
        raise PreconditionError("bounds", f"chi = {args.chi} is not below chi_bar = {cb:.10g}")
    return cb


def cmd_bounds(args):
    prefix = Path(args.out)
    if args.family in ("bernstein", "envelope", "achieser") and args.beta is None:
        raise UsageError(f"--family {args.family} needs --beta")
    if args.chi_bar:
        if args.beta is None:
            raise UsageError("--chi-bar needs --beta")
        print(f"{bd.chi_bar_fd(args.beta, args.mu):.7f}")
        return EXIT_OK
    if args.figure:
        return _figure(args, prefix)
    metric = args.metric
    fam = args.family
    if fam == "bernstein":
        _bernstein_preflight(args)
        chi = args.chi if args.chi is not None else bd.select_chi(args.beta, args.mu, args.dmax // 2 or 1, args.m, metric)
        b = bd.bernstein_fd_bound(args.beta, args.mu, chi, args.m, metric)
    elif fam == "envelope":
        _bernstein_preflight(args)
        b = bd.fd_envelope(
            args.beta, args.mu, args.grid, chi_min=args.chi_min, m=args.m, metric=metric, extra=args.chis or ()
        )
    elif fam == "achieser":
        if args.chi is None:
            raise UsageError("--family achieser needs --chi")
        _bernstein_preflight(args)
        b = bd.achieser_fd_bound(args.beta, args.mu, args.chi, args.m, metric, args.tau)
    elif fam == "projector":
        if args.gap is None or args.delta is None:
            raise UsageError("--family projector needs --gap and --delta")
        spec = SpectralModel(-1.0, 1.0, args.mu, args.mu - args.gap / 2, args.mu + args.gap / 2)
        b = bd.projector_bound(spec, args.delta, args.chi, args.m, metric)
    elif fam == "hasson":
        b = bd.hasson_bound(args.a, args.b, args.K, metric, args.m)
    elif fam == "chui-hasson":
        if args.xi is None:
            b = bd.select_xi(args.a, args.b, m=args.m, metric=metric)
        else:
            b = bd.chui_hasson_bound(args.a, args.b, args.xi, args.m, metric)
    elif fam == "heat":
        if args.chi is None or args.beta is None:
            raise UsageError("--family heat needs --beta and --chi")
        b = bd.heat_bound(None, args.beta, args.chi, interval=(args.lo, args.hi), m=args.m, metric=metric)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(fam)
    d = np.arange(1, args.dmax + 1)
    io.write_csv(prefix.with_suffix(".csv"), ["distance", "bound"], zip(d, b.rate(d)))
    rec = b.to_record()
    rec["samples"] = [[int(x), float(y)] for x, y in zip(d, b.rate(d))]
    io.write_json(prefix.with_suffix(".json"), rec)
    print(f"wrote {prefix.with_suffix('.csv')} and {prefix.with_suffix('.json')}")
    return EXIT_OK


def _figure(args, prefix):
    fig = args.figure
    if fig == "fd-bounds":
        if args.beta is None:
            raise UsageError("--figure fd-bounds needs --beta")
        cb = bd.chi_bar_fd(args.beta, args.mu)
        chis = args.chis or [1.0 + f * (cb - 1.0) for f in (0.3, 0.6, 0.9)]
        for c in chis:
            if not 1 < c < cb:
                raise PreconditionError("bounds", f"chi = {c} outside (1, {cb:.10g})")
        curves = [bd.bernstein_fd_bound(args.beta, args.mu, c, args.m, args.metric) for c in chis]
        env = bd.envelope(curves)
        d = np.arange(1, args.dmax + 1)
        cols = [c.rate(d) for c in curves] + [env.rate(d)]
        header = ["distance"] + [f"chi={c:.6g}" for c in chis] + ["envelope"]
        io.write_csv(prefix.with_suffix(".csv"), header, zip(d, *cols))
        rec = {"figure": fig, "beta": args.beta, "mu": args.mu, "chi_bar": cb, "chis": chis,
               "curves": [c.to_record() for c in curves], "envelope": env.to_record()}
    elif fig == "c-vs-chi":
        if args.beta is None:
            raise UsageError("--figure c-vs-chi needs --beta")
        grid = bd.chi_grid(args.beta, args.mu, args.grid)
        rows = []
        for c in grid:
            b = bd.bernstein_fd_bound(args.beta, args.mu, c, args.m, args.metric)
            rows.append((float(c), b.constants["c"], b.constants["alpha"], b.constants["M"]))
        io.write_csv(prefix.with_suffix(".csv"), ["chi", "c", "alpha", "M"], rows)
        rec = {"figure": fig, "beta": args.beta, "mu": args.mu, "rows": rows}
    elif fig in ("chi-xi", "beta-gamma"):
        delta = args.delta if args.delta is not None else 1e-5
        gaps = np.linspace(args.gap_min, args.gap_max, args.grid)
        rows = []
        for g in gaps:
            beta = bd.beta_from_gap(g, delta)
            if fig == "chi-xi":
                rows.append((float(g), 1.0 / bd.xi_bar(g / 2.0, 1.0), 1.0 / bd.chi_bar_fd(beta, 0.0)))
            else:
                rows.append((float(g), beta))
        header = ["gap", "inv_xi_bar", "inv_chi_bar"] if fig == "chi-xi" else ["gap", "beta"]
        io.write_csv(prefix.with_suffix(".csv"), header, rows)
        rec = {"figure": fig, "delta": delta, "rows": rows}
    else:  # pragma: no cover
        raise UsageError(fig)
    io.write_json(prefix.with_suffix(".json"), rec)
    print(f"wrote {prefix.with_suffix('.csv')} and {prefix.with_suffix('.json')}")
    return EXIT_OK


def _read(path):
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    try:
        return io.read_matrix_market(path)
    except ValueError as e:
        raise UsageError(f"cannot read {path}: {e}") from e


def _spectral_model(args, H):
    """Gap data from flags, or from dense eigenvalues split at ``mu``."""
    if args.eps_minus is not None or args.eps_plus is not None:
        if args.eps_minus is None or args.eps_plus is None:
            raise UsageError("--eps-minus and --eps-plus go together")
        lo, hi = (args.lo, args.hi) if args.lo is not None else spectral_interval(H)
        lo, hi = min(lo, args.eps_minus), max(hi, args.eps_plus)
        mu = args.mu if args.mu is not None else 0.5 * (args.eps_minus + args.eps_plus)
        return SpectralModel(lo, hi, mu, args.eps_minus, args.eps_plus, n_e=args.n_e)
    if args.mu is None:
        raise UsageError("need --mu or --eps-minus/--eps-plus")
    w = np.linalg.eigvalsh(H.toarray())
    n_e = int(np.sum(w < args.mu))
    return SpectralModel.from_eigenvalues(w, n_e)


def cmd_project(args):
    H = _read(args.input)
    method = args.method
    info = {}
    if method == "oracle":
        if args.mu is None:
            raise UsageError("--method oracle needs --mu")
        res = pj.oracle_projector(H, args.mu)
        oracle = None
    elif method == "fd":
        if args.mu is None or args.beta is None:
            raise UsageError("--method fd needs --mu and --beta")
        res = pj.oracle_fd(H, args.beta, args.mu)
        oracle = None
    elif method == "chebyshev":
        amap = None
        if args.auto_band is not None:
            spec = _spectral_model(args, H)
        if args.normalize:
            H, amap = normalize(H, spectral_interval(H))
            info["normalization"] = {"scale": amap.scale, "shift": amap.shift}
        if args.auto_band is not None:
            if amap is not None:
                spec = spec.mapped(amap)
            res = pj.chebyshev_auto(H, spec, args.auto_band, metric=args.metric)
        else:
            if args.degree is None or args.beta is None:
                raise UsageError("--method chebyshev needs --degree and --beta, or --auto-band")
            mu = 0.0 if args.mu is None else args.mu
            coeffs = pj.cheb_coeffs_fd(args.beta, mu, args.degree, nodes=args.cheb_nodes)
            pattern = None if args.pattern_m is None else pj.Pattern(args.metric, args.pattern_m)
            res = pj.cheb_apply(H, coeffs, pattern)
        oracle = pj.oracle_fd(H, res.info["beta"], res.info["mu"]) if args.compare else None
    elif method == "contour":
        spec = _spectral_model(args, H)
        circle = None
        if args.center is not None or args.radius is not None:
            if args.center is None or args.radius is None:
                raise UsageError("--center and --radius go together")
            circle = (args.center, args.radius)
        res = pj.contour_projector(H, spec, args.nodes, circle)
        oracle = pj.oracle_projector(H, spec.mu) if args.compare else None
    else:  # pragma: no cover
        raise UsageError(method)
    metrics = dict(res.metrics)
    if oracle is not None:
        metrics.update({k: v for k, v in pj.verify_density(res, oracle).items() if k.endswith("_error")})
    out = Path(args.out)
    io.write_matrix_market(out, res.dense() if not hasattr(res.P, "tocoo") else res.to_hermitian())
    record = dict(res.to_record(), metrics=metrics, **info)
    io.write_json(Path(args.metrics) if args.metrics else out.with_suffix(".json"), record)
    print(json.dumps({k: metrics[k] for k in ("trace", "idempotency_defect") if k in metrics}))
    return EXIT_OK


def cmd_ortho(args):
    S = _read(args.overlap)
    if args.normalize_overlap:
        S = ob.normalize_overlap(S)
    H = _read(args.hamiltonian) if args.hamiltonian else None
    prefix = Path(args.out)
    kind = "lowdin" if args.factor == "lowdin" else "inverse_cholesky"
    fs = ob.factor_set(S, kind, args.drop_tol)
    report = {"factor": fs.to_record()}
    io.write_general(prefix.with_name(prefix.name + "_Z.mtx"), fs.Z)
    if H is not None:
        Ht = ob.congruence(H, fs.Z)
        io.write_matrix_market(prefix.with_name(prefix.name + "_Ht.mtx"), Ht)
        w = np.linalg.eigvalsh(Ht.toarray())
        report["spectrum_vs_pencil"] = float(np.max(np.abs(w - ob.generalized_eigenvalues(H, S))))
        if args.compare:
            other = "inverse_cholesky" if kind == "lowdin" else "lowdin"
            w2 = np.linalg.eigvalsh(ob.congruence(H, ob.factor_set(S, other).Z).toarray())
            report["spectrum_vs_other_factor"] = float(np.max(np.abs(w - w2)))
    if args.sweep:
        rows = []
        for tol in np.logspace(-1, -10, 10):
            Z = ob.inverse_cholesky(S, tol)
            Sd = S.toarray()
            r = float(np.linalg.norm(Z.conj().T @ Sd @ Z - np.eye(S.n), 2))
            rows.append((float(tol), r, int(np.count_nonzero(Z))))
        io.write_csv(prefix.with_name(prefix.name + "_sweep.csv"), ["drop_tol", "residual", "nnz"], rows)
        report["sweep"] = rows
    io.write_json(prefix.with_suffix(".json"), report)
    print(f"wrote {prefix.with_suffix('.json')}")
    return EXIT_OK


def cmd_validate(args):
    only = None
    if args.only:
        only = [t for chunk in args.only for t in chunk.split(",") if t]
    try:
        checks = vd.select(only)
    except ValueError as e:
        raise UsageError(str(e))
    runs = []
    for _ in range(args.repeat):
        runs.append([vd.run_check(c, args.seed) for c in checks])
    final = runs[-1]
    for r in final:
        print(r.line())
    strip = lambda rs: [json.dumps(io._clean({**x.to_record(), "elapsed": None, "detail": _timeless(x.detail)}),
                                   sort_keys=True) for x in rs]
    deterministic = all(strip(r) == strip(runs[0]) for r in runs)
    passed = all(r.passed for r in final)
    record = {"seed": args.seed, "repeat": args.repeat, "deterministic": deterministic,
              "passed": passed, "checks": [r.to_record() for r in final]}
    if args.json:
        io.write_json(args.json, record)
    if args.repeat > 1:
        print(f"deterministic across {args.repeat} runs: {deterministic}")
    return EXIT_OK if passed and deterministic else EXIT_FAIL


def _timeless(detail):
    return {k: v for k, v in detail.items() if k != "seconds"}


# -- parser -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="decayproj", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model", help="emit a model Hamiltonian")
    m.add_argument("--kind", required=True, choices=md.KINDS)
    m.add_argument("--n", type=_pos_int, required=True)
    m.add_argument("--m", type=_pos_int, default=1)
    m.add_argument("--a", type=_positive, default=0.5)
    m.add_argument("--n-e", type=_pos_int, default=None)
    m.add_argument("--c", type=_positive, default=1.0)
    m.add_argument("--alpha", type=_positive, default=0.5)
    m.add_argument("--decay-kind", choices=("exact_envelope", "random_phase"), default="exact_envelope")
    m.add_argument("--seed", type=int)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_model)

    b = sub.add_parser("bounds", help="evaluate a decay-bound family")
    b.add_argument("--family", default="bernstein",
                   choices=("bernstein", "envelope", "achieser", "projector", "hasson", "chui-hasson", "heat"))
    b.add_argument("--beta", type=_positive)
    b.add_argument("--mu", type=_unit_open, default=0.0)
    b.add_argument("--chi", type=_chi)
    b.add_argument("--chis", type=_chi, nargs="+")
    b.add_argument("--chi-min", type=_chi)
    b.add_argument("--chi-bar", action="store_true", help="print chi_bar and exit")
    b.add_argument("--m", type=_pos_int, default=1)
    b.add_argument("--metric", choices=bd.METRICS, default="band")
    b.add_argument("--dmax", type=_pos_int, default=100)
    b.add_argument("--grid", type=_pos_int, default=50)
    b.add_argument("--gap", type=_positive)
    b.add_argument("--gap-min", type=_positive, default=0.05)
    b.add_argument("--gap-max", type=_positive, default=0.5)
    b.add_argument("--delta", type=_open_half)
    b.add_argument("--tau", type=_positive, default=1e-12)
    b.add_argument("--a", type=_positive, default=0.25)
    b.add_argument("--b", type=_positive, default=1.0)
    b.add_argument("--K", type=_positive, default=1.0)
    b.add_argument("--xi", type=_chi)
    b.add_argument("--lo", type=float, default=-1.0)
    b.add_argument("--hi", type=float, default=1.0)
    b.add_argument("--figure", choices=("fd-bounds", "c-vs-chi", "chi-xi", "beta-gamma"))
    b.add_argument("--out", default="bounds")
    b.set_defaults(func=cmd_bounds)

    pr = sub.add_parser("project", help="compute a density matrix")
    pr.add_argument("input")
    pr.add_argument("--method", choices=("oracle", "fd", "chebyshev", "contour"), default="oracle")
    pr.add_argument("--mu", type=float)
    pr.add_argument("--beta", type=_nonneg)
    pr.add_argument("--degree", type=_nonneg_int)
    pr.add_argument("--cheb-nodes", type=_pos_int)
    pr.add_argument("--auto-band", type=_positive, metavar="EPS")
    pr.add_argument("--pattern-m", type=_nonneg_int)
    pr.add_argument("--metric", choices=bd.METRICS, default="band")
    pr.add_argument("--normalize", action="store_true")
    pr.add_argument("--nodes", type=_pos_int, default=64)
    pr.add_argument("--center", type=float)
    pr.add_argument("--radius", type=_positive)
    pr.add_argument("--lo", type=float)
    pr.add_argument("--hi", type=float)
    pr.add_argument("--eps-minus", type=float)
    pr.add_argument("--eps-plus", type=float)
    pr.add_argument("--n-e", type=_pos_int)
    pr.add_argument("--compare", action="store_true", help="record errors against the dense oracle")
    pr.add_argument("--out", default="P.mtx")
    pr.add_argument("--metrics")
    pr.set_defaults(func=cmd_project)

    o = sub.add_parser("ortho", help="orthogonalize with an overlap factor")
    o.add_argument("--overlap", required=True)
    o.add_argument("--hamiltonian")
    o.add_argument("--factor", choices=("cholesky", "lowdin"), default="cholesky")
    o.add_argument("--drop-tol", type=_nonneg, default=0.0)
    o.add_argument("--normalize-overlap", action="store_true")
    o.add_argument("--sweep", action="store_true")
    o.add_argument("--compare", action="store_true")
    o.add_argument("--out", default="ortho")
    o.set_defaults(func=cmd_ortho)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--only", nargs="+", help="check ids or groups: " + ", ".join(vd.GROUPS))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--repeat", type=_pos_int, default=1)
    v.add_argument("--json")
    v.set_defaults(func=cmd_validate)
    return p


def _thread_limit():
    val = os.environ.get("DECAYPROJ_THREADS")
    if not val:
        return None
    try:
        k = int(val)
    except ValueError:
        raise UsageError(f"DECAYPROJ_THREADS must be an integer, got {val!r}")
    if k < 1:
        raise UsageError("DECAYPROJ_THREADS must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limiter = _thread_limit()
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as e:
        print(f"decayproj: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as e:
        print(f"decayproj: precondition violated in {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as e:
        print(f"decayproj: I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
