"""``bifirom`` command-line interface.

Exit codes: 0 success, 1 usage/config/input error, 2 numerical failure.
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, store
from .config import ConfigError, load_config, parse_int_list
from .errors import BifiromError, NumericalError
from .experiment import prepare
from .offline import build_artifact
from .online import online_solve
from .problems import list_problems
from .report import ERROR_COLUMNS, emit_csv, format_real, log10_histogram, write_rows
from .verify import convergence_study

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _log(msg):
    print(f"[bifirom] {msg}", file=sys.stderr, flush=True)


def _fmt_vec(v):
    return ",".join(format_real(x) for x in np.atleast_1d(v))


def _output_dir(cfg, override):
    out = Path(override) if override else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_offline(args):
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    art = build_artifact(cfg.offline(), workers=args.workers)
    store.save(art, args.out)
    m = art.metadata
    _log(
        f"offline {cfg.problem}: N_rb={art.N_rb} n_L={art.n_L} n_f={art.n_f}, "
        f"{m['hf_runs']} HF runs, {time.perf_counter() - t0:.2f}s -> {args.out}"
    )
    return 0


def cmd_online(args):
    art = store.load(args.artifact)
    try:
        mu = [float(t) for t in args.mu.split(",")]
    except ValueError:
        raise ConfigError(f"--mu expects comma-separated reals, got {args.mu!r}") from None
    rep = online_solve(art, mu, ls=args.ls)
    lines = {
        "problem": art.problem_id,
        "mu": _fmt_vec(rep.mu),
        "N_rb": art.N_rb,
        "n_L": art.n_L,
        "n_f": art.n_f,
        "lf_iterations": rep.lf_iterations,
        "a_l": _fmt_vec(rep.a_l),
        "b_l": _fmt_vec(rep.b_l),
        "u_rb": _fmt_vec(rep.u_rb),
        "ls_residual_operator": format_real(rep.ls_residuals["operator"]),
        "ls_residual_rhs": format_real(rep.ls_residuals["rhs"]),
        "reduced_residual": format_real(rep.reduced_residual),
        "reduced_condition": format_real(rep.condition),
        "u_r_norm": format_real(np.linalg.norm(rep.u_r)),
    }
    for k, v in rep.timings.items():
        lines[f"time_{k}"] = format_real(v)
    lines["time_total"] = format_real(rep.total_time)
    for k, v in rep.flops.items():
        lines[f"flops_{k}"] = v
    for k, v in lines.items():
        print(f"{k}: {v}")
    if args.dump_solution:
        np.asarray(rep.u_r, dtype="<f8").tofile(args.dump_solution)
    return 0


def cmd_bench(args):
    cfg = load_config(args.config)
    nrbs = parse_int_list(args.nrb_list) if args.nrb_list else list(cfg.nrb_list or [cfg.N_rb])
    for n in nrbs:
        cfg.offline(n)  # validates each size against n_p
    out = _output_dir(cfg, args.out)
    exp = prepare(cfg, workers=args.workers, log=_log)
    rows, summary = [], []
    columns = None
    for n in nrbs:
        art, table = exp.run(n)
        columns = table.columns
        rows.extend(table.rows)
        s = table.summary()
        s["N_rb_requested"] = n
        s["hf_runs_total"] = exp.runner.runs
        s["offline_seconds"] = art.metadata["timings"]["total"]
        summary.append(s)
    write_rows(out / "errors.csv", columns, rows)
    write_rows(out / "summary.csv", list(summary[0].keys()), summary)
    rep = exp.lemma(art)
    (out / "lemma.txt").write_text("\n".join(rep.lines()) + "\n", encoding="utf-8")
    _log(f"wrote {out / 'errors.csv'}, {out / 'summary.csv'}, {out / 'lemma.txt'}")
    return 0


def cmd_compare(args):
    cfg = load_config(args.config)
    out = _output_dir(cfg, args.out)
    exp = prepare(cfg, workers=args.workers, log=_log)
    art, table = exp.run(cfg.N_rb)
    mu_cols = [f"mu_{j + 1}" for j in range(table.param_dim)]
    emit_csv(table, out / "compare.csv", columns=mu_cols + ["N_rb", *ERROR_COLUMNS])
    hists = {c: dict(((lo, hi), n) for lo, hi, n in log10_histogram(table.column(c))) for c in ERROR_COLUMNS}
    bins = sorted(set().union(*[h.keys() for h in hists.values()]))
    hist_rows = [
        {"log10_lo": lo, "log10_hi": hi, **{c: hists[c].get((lo, hi), 0) for c in ERROR_COLUMNS}}
        for lo, hi in bins
    ]
    write_rows(out / "hist.csv", ["log10_lo", "log10_hi", *ERROR_COLUMNS], hist_rows)
    m = table.means
    print(f"proposed mean e_u: {format_real(m['e_u'])}")
    print(f"reference mean e_u: {format_real(m['e_u_ref'])}")
    print(f"low-fidelity mean e_u: {format_real(m['e_u_lf'])}")
    print(f"excluded points: {len(table.excluded)}")
    _log(f"wrote {out / 'compare.csv'}, {out / 'hist.csv'}")
    return 0


def cmd_fem_verify(args):
    rows = convergence_study(tuple(parse_int_list(args.grids)))
    print("n,h,l2_error,h1_error,l2_order,h1_order")
    for r in rows:
        print(",".join(format_real(v) for v in (r.n, r.h, r.l2, r.h1, r.l2_order, r.h1_order)))
    return 0


def cmd_list_problems(args):
    for p in list_problems():
        dom = ",".join(f"{v:.6g}" for v in p.spatial_domain)
        box = " x ".join(f"[{a:g},{b:g}]" for a, b in p.param_domain)
        print(
            f"{p.id}: {p.nonlinearity}, {p.n_fields} field(s), params {box}, domain [{dom}], "
            f"rhs {'parametric' if p.rhs_parametric else 'fixed'}; {p.description}"
        )
    return 0


def build_parser():
    ap = _Parser(prog="bifirom", description="Bi-fidelity reduced-basis models")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_workers(p):
        p.add_argument("--workers", type=int, default=None, help="worker pool size (default: BIFIROM_THREADS or cores)")
        return p

    p = with_workers(sub.add_parser("offline", help="build and save an artifact"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("online", help="single online query")
    p.add_argument("--artifact", required=True)
    p.add_argument("--mu", required=True, help="comma-separated parameter values")
    p.add_argument("--ls", choices=("gram", "qr"), default="gram")
    p.add_argument("--dump-solution", default=None, help="write u_r as raw little-endian f64")
    p.set_defaults(func=cmd_online)

    p = with_workers(sub.add_parser("bench", help="sweep over basis sizes"))
    p.add_argument("--config", required=True)
    p.add_argument("--nrb-list", default=None)
    p.add_argument("--out", default=None, help="override [output] dir")
    p.set_defaults(func=cmd_bench)

    p = with_workers(sub.add_parser("compare", help="proposed vs reference vs low-fidelity"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override [output] dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fem-verify", help="manufactured-solution convergence table")
    p.add_argument("--grids", default="8,16,32")
    p.set_defaults(func=cmd_fem_verify)

    p = sub.add_parser("list-problems", help="registered problems")
    p.set_defaults(func=cmd_list_problems)
    return ap


def cli(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"bifirom: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (BifiromError, ValueError, KeyError, OSError) as exc:
        print(f"bifirom: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
