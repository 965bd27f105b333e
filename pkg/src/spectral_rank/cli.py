"""Command-line front end.

Subcommands: fit, ci, test-topk, screen, two-sample, simulate, diagnose.
Results go to stdout as CSV or JSON, progress and errors to stderr.  Exit
status is 0 on success, 1 for usage or data errors and 2 for numerical or
fitting failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapSpec
from .data import ComparisonDataset, check_rankability, parse_choice_csv
from .errors import FitError, NumericError, SpectralRankError
from .inference import (INTERVAL_COLUMNS, rank_cis, screen_top_k, test_top_k,
                        two_sample_item_test, two_sample_topk_test)
from .simulation import load_scenario_config, monte_carlo_run
from .spectral import SpectralFit, WeightScheme, fit as spectral_fit

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# fit result serialisation


def format_fit_csv(f: SpectralFit, labels=None) -> str:
    """Fit as CSV: ``# key=value`` metadata lines, then ``item,label,theta,pi``."""
    buf = io.StringIO()
    buf.write(f"# scheme={_scheme_name(f)}\n")
    buf.write(f"# d={f.d!r}\n")
    buf.write(f"# iterations={f.iterations}\n")
    buf.write(f"# residual={f.residual!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item", "label", "theta", "pi"])
    for i in range(f.n_items):
        lab = labels[i] if labels is not None else str(i)
        w.writerow([i, lab, repr(float(f.theta[i])), repr(float(f.pi_hat[i]))])
    return buf.getvalue()


def read_fit_csv(source) -> dict:
    """Parse :func:`format_fit_csv` output back into plain values."""
    text = source if isinstance(source, str) else source.read()
    meta, rows = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    recs = list(reader)
    return {
        "scheme": meta.get("scheme"),
        "d": float(meta["d"]) if "d" in meta else None,
        "iterations": int(meta["iterations"]) if "iterations" in meta else None,
        "residual": float(meta["residual"]) if "residual" in meta else None,
        "labels": [r["label"] for r in recs],
        "theta": np.array([float(r["theta"]) for r in recs]),
        "pi": np.array([float(r["pi"]) for r in recs]),
    }


def _scheme_name(f: SpectralFit) -> str:
    if f.initial is not None:
        return "two-step"
    return {"constant": "constant", "size": "vanilla", "scores": "oracle"}[f.scheme.kind]


def _fit_json(f: SpectralFit, labels=None) -> dict:
    return {
        "scheme": _scheme_name(f),
        "d": f.d,
        "iterations": f.iterations,
        "residual": f.residual,
        "items": list(labels) if labels is not None else list(range(f.n_items)),
        "theta": [float(x) for x in f.theta],
        "pi": [float(x) for x in f.pi_hat],
    }


# --------------------------------------------------------------------------
# helpers


def _load(path: str, break_mode: str | None) -> ComparisonDataset:
    brk = break_mode == "multilevel"
    if path == "-":
        return parse_choice_csv(sys.stdin.read(), break_rankings=brk)
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_choice_csv(raw, break_rankings=brk)


def _read_theta_file(path: str, n: int) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    if "theta" in text.splitlines()[0] or text.startswith("#"):
        theta = read_fit_csv(text)["theta"]
    else:
        toks = text.replace(",", " ").split()
        try:
            theta = np.array([float(t) for t in toks])
        except ValueError:
            raise UsageError(f"{path}: expected numeric scores") from None
    if theta.shape != (n,):
        raise UsageError(f"{path}: expected {n} scores, found {theta.shape[0]}")
    return theta


def _scheme(arg: str, n: int):
    if arg.startswith("oracle:"):
        return WeightScheme.scores(_read_theta_file(arg[len("oracle:"):], n))
    key = {"constant": "constant", "vanilla": "vanilla", "two-step": "two_step",
           "two_step": "two_step"}.get(arg)
    if key is None:
        raise UsageError(f"unknown scheme {arg!r}; use constant, vanilla, "
                         "oracle:<file> or two-step")
    return key


def _items(ds: ComparisonDataset, arg: str | None) -> list[int]:
    if arg is None:
        return list(range(ds.n_items))
    toks = [t.strip() for t in arg.split(",") if t.strip()]
    if not toks:
        raise UsageError("--items is empty")
    return [ds.item_index(t) for t in toks]


def _spec(args, items, side="two_sided") -> BootstrapSpec:
    return BootstrapSpec(items=tuple(items), side=side, B=args.B, seed=args.seed,
                         grouping=args.grouping)


def _label(ds, i):
    return ds.labels[i] if ds.labels is not None else i


def _emit(rows: list[dict], columns, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(rows, indent=2) + "\n")
        return
    w = csv.DictWriter(out, fieldnames=list(columns), lineterminator="\n",
                       extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _ci_rows(ds, cis):
    return [{"item": _label(ds, c.item), "theta": float(c.theta), "rank": c.rank,
             "lower": c.lower, "upper": c.upper, "alpha": c.alpha, "side": c.side}
            for c in cis]


# --------------------------------------------------------------------------
# subcommands


def cmd_fit(args, out, err):
    ds = _load(args.data, args.break_mode)
    f = spectral_fit(ds, _scheme(args.scheme, ds.n_items))
    if args.format == "json":
        out.write(json.dumps(_fit_json(f, ds.labels), indent=2) + "\n")
    else:
        out.write(format_fit_csv(f, ds.labels))


def cmd_ci(args, out, err):
    ds = _load(args.data, args.break_mode)
    f = spectral_fit(ds, _scheme(args.scheme, ds.n_items))
    items = _items(ds, args.items)
    if args.side == "uniform-one":
        cis = rank_cis(ds, f, range(ds.n_items), args.alpha,
                       _spec(args, range(ds.n_items)), side="one_sided",
                       workers=args.workers)
        cis = [cis[i] for i in items]
    else:
        side = "one_sided" if args.side == "one" else "two_sided"
        cis = rank_cis(ds, f, items, args.alpha, _spec(args, items), side=side,
                       workers=args.workers)
    _emit(_ci_rows(ds, cis), INTERVAL_COLUMNS, args.format, out)


def cmd_test_topk(args, out, err):
    ds = _load(args.data, args.break_mode)
    f = spectral_fit(ds, _scheme(args.scheme, ds.n_items))
    rows = []
    for m in _items(ds, args.items):
        dec = test_top_k(ds, f, m, args.K, args.alpha, _spec(args, [m], "one_sided"),
                         workers=args.workers)
        ci = dec.details["interval"]
        rows.append({"item": _label(ds, m), "theta": ci.theta, "rank": ci.rank,
                     "lower": ci.lower, "K": args.K, "alpha": args.alpha,
                     "reject": int(dec.reject)})
    _emit(rows, ["item", "theta", "rank", "lower", "K", "alpha", "reject"],
          args.format, out)


def cmd_screen(args, out, err):
    ds = _load(args.data, args.break_mode)
    f = spectral_fit(ds, _scheme(args.scheme, ds.n_items))
    allm = range(ds.n_items)
    cis = rank_cis(ds, f, allm, args.alpha, _spec(args, allm), side="one_sided",
                   workers=args.workers)
    chosen = set(screen_top_k(ds, f, args.K, args.alpha, _spec(args, allm),
                              workers=args.workers))
    rows = _ci_rows(ds, [c for c in cis if c.item in chosen])
    _emit(rows, INTERVAL_COLUMNS, args.format, out)


def cmd_two_sample(args, out, err):
    ds1 = _load(args.data1, args.break_mode)
    ds2 = _load(args.data2, args.break_mode)
    kind, _, value = args.mode.partition(":")
    scheme = _scheme(args.scheme, ds1.n_items)
    if kind == "item":
        m = ds1.item_index(value)
        dec = two_sample_item_test(ds1, ds2, m, args.alpha, _spec(args, [m]),
                                   scheme=scheme, workers=args.workers)
        c1, c2 = dec.details["interval1"], dec.details["interval2"]
        row = {"mode": "item", "item": _label(ds1, m), "lower1": c1.lower,
               "upper1": c1.upper, "lower2": c2.lower, "upper2": c2.upper,
               "alpha": args.alpha, "reject": int(dec.reject)}
        cols = list(row)
    elif kind == "topk":
        try:
            K = int(value)
        except ValueError:
            raise UsageError(f"bad --mode {args.mode!r}") from None
        dec = two_sample_topk_test(ds1, ds2, K, args.alpha, _spec(args, [0]),
                                   scheme=scheme, workers=args.workers)
        fmt = lambda s: " ".join(str(_label(ds1, i)) for i in s)  # noqa: E731
        row = {"mode": "topk", "K": K, "set1": fmt(dec.details["set1"]),
               "set2": fmt(dec.details["set2"]),
               "intersection": fmt(dec.details["intersection"]),
               "alpha": args.alpha, "reject": int(dec.reject)}
        cols = list(row)
    else:
        raise UsageError("--mode must be item:<m> or topk:<K>")
    _emit([row], cols, args.format, out)


def cmd_simulate(args, out, err):
    overrides = {}
    if args.config:
        overrides.update(load_scenario_config(args.config))
    scenario = args.scenario or overrides.pop("scenario", None)
    overrides.pop("scenario", None)
    if scenario is None:
        raise UsageError("simulate needs --scenario")
    if args.D is not None:
        overrides["D"] = args.D
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.B is not None:
        overrides["B"] = args.B
    if args.scheme is not None:
        overrides["schemes"] = args.scheme.replace("two-step", "two_step")
    for kv in args.set or []:
        key, sep, value = kv.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        overrides[key.strip()] = value.strip()
    step = [0]

    def progress(done, total):
        pct = 10 * done // total
        if pct > step[0] or done == total:
            step[0] = pct
            err.write(f"{scenario}: {done}/{total} replications\n")

    report = monte_carlo_run(scenario, overrides, seed=args.seed,
                             workers=args.workers, progress=progress)
    if args.emit_ppplot:
        rows = [{"alpha": r["alpha"], "exceedance": r["exceedance"]}
                for r in report.rows if "exceedance" in r]
        if not rows:
            raise UsageError("--emit-ppplot needs the PPplot scenario")
        _emit(rows, ["alpha", "exceedance"], args.format, out)
        return
    if report.failures:
        err.write(f"{report.failures} replications failed and were excluded\n")
    if args.format == "json":
        out.write(json.dumps({"scenario": report.scenario, "title": report.title,
                              "reps": report.reps, "failures": report.failures,
                              "seed": report.seed, "rows": report.rows},
                             indent=2, default=_json_default) + "\n")
    else:
        out.write(report.to_csv())


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def cmd_diagnose(args, out, err):
    ds = _load(args.data, args.break_mode)
    diag = check_rankability(ds, compute_spectrum=args.spectrum)
    d = diag.as_dict()
    if args.format == "json":
        d["n_items"] = ds.n_items
        d["n_comparisons"] = ds.n_comparisons
        out.write(json.dumps(d, indent=2) + "\n")
        return
    rows = [{"item": _label(ds, i), "count": int(diag.per_item_counts[i]),
             "wins": int(diag.per_item_win_counts[i]),
             "losses": int(diag.per_item_loss_counts[i])} for i in range(ds.n_items)]
    out.write(f"# n_items={ds.n_items}\n# n_comparisons={ds.n_comparisons}\n")
    out.write(f"# n_dagger={diag.n_dagger}\n# n_ddagger={diag.n_ddagger}\n")
    out.write(f"# ratio_check={diag.ratio_check!r}\n")
    out.write(f"# strongly_connected={str(diag.strongly_connected).lower()}\n")
    if diag.omega_spectrum is not None:
        out.write(f"# omega_spectrum={diag.omega_spectrum[0]!r},"
                  f"{diag.omega_spectrum[1]!r}\n")
    for flag in diag.flags:
        out.write(f"# flag: {flag}\n")
    _emit(rows, ["item", "count", "wins", "losses"], "csv", out)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spectral-rank",
                description="Spectral ranking and rank inference for multiway comparisons.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, data=True):
        if data:
            sp.add_argument("--data", required=True, help="comparison CSV, '-' for stdin")
        sp.add_argument("--break", dest="break_mode", choices=["multilevel"],
                        help="break rank:a>b>c rows into nested selections")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--workers", type=int, default=1)

    def inference(sp):
        sp.add_argument("--scheme", default="two-step",
                        help="constant | vanilla | oracle:<file> | two-step")
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--B", type=int, default=500)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--grouping", choices=["per_comparison", "per_hyperedge"],
                        default="per_comparison")

    s = sub.add_parser("fit", help="estimate scores")
    common(s)
    s.add_argument("--scheme", default="two-step")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("ci", help="simultaneous rank confidence intervals")
    common(s)
    inference(s)
    s.add_argument("--items")
    s.add_argument("--side", choices=["one", "two", "uniform-one"], default="two")
    s.set_defaults(func=cmd_ci)

    s = sub.add_parser("test-topk", help="test whether items are in the top K")
    common(s)
    inference(s)
    s.add_argument("--items", required=True)
    s.add_argument("--K", type=int, required=True)
    s.set_defaults(func=cmd_test_topk)

    s = sub.add_parser("screen", help="top-K sure-screening set")
    common(s)
    inference(s)
    s.add_argument("--K", type=int, required=True)
    s.set_defaults(func=cmd_screen)

    s = sub.add_parser("two-sample", help="two-sample rank tests")
    common(s, data=False)
    inference(s)
    s.add_argument("--data1", required=True)
    s.add_argument("--data2", required=True)
    s.add_argument("--mode", required=True, help="item:<m> or topk:<K>")
    s.set_defaults(func=cmd_two_sample)

    s = sub.add_parser("simulate", help="Monte Carlo scenarios")
    s.add_argument("--scenario")
    s.add_argument("--config", help="key=value scenario file")
    s.add_argument("--D", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--B", type=int)
    s.add_argument("--scheme", help="comma-separated: vanilla, oracle, constant, two-step")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="extra scenario parameter, repeatable")
    s.add_argument("--emit-ppplot", action="store_true",
                   help="write (alpha, exceedance) pairs only")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("diagnose", help="degree counts and rankability checks")
    common(s)
    s.add_argument("--spectrum", action="store_true",
                   help="also report the plug-in Omega spectrum")
    s.set_defaults(func=cmd_diagnose)
    return p


def run(argv=None, stdin=None, stdout=None, stderr=None) -> int:
    """Execute one invocation and return its exit status."""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    old_stdin = sys.stdin
    if stdin is not None:
        sys.stdin = stdin
    try:
        args = build_parser().parse_args(argv)
        args.func(args, out, err)
        return EXIT_OK
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (FitError, NumericError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except SpectralRankError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:
        # --help exits through argparse
        return EXIT_OK if not exc.code else EXIT_USAGE
    finally:
        sys.stdin = old_stdin


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
