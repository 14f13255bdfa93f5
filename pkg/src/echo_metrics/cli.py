"""Command-line entry point: ``echo-metrics <subcommand> ... --out DIR``.

Every run writes its outputs plus a ``manifest.json`` into ``--out``.
Exit status is 0 on success, 1 on usage or validation errors and 2 on
anything unexpected.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import CLASSES, __version__
from . import association, ingest, polarization, predictor, synth, tailstats

log = logging.getLogger("echo_metrics")

PLATFORM_ALIASES = {"fb": "facebook", "facebook": "facebook", "yt": "youtube", "youtube": "youtube"}
DEFAULT_ACTIONS = "fb_likes,fb_comments,fb_shares,yt_views,yt_likes,yt_comments"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- helpers ------------------------------------------------------------------

def _platform(text):
    try:
        return PLATFORM_ALIASES[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown platform {text!r}") from None


def _xmin(text):
    if text == "auto":
        return "auto"
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("x_min must be a number or 'auto'") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("x_min must be positive")
    return v


def _floats(n):
    def parse(text):
        try:
            vals = tuple(float(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers") from None
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
        return vals
    return parse


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _parse_where(clauses):
    out = []
    for clause in clauses or ():
        col, sep, vals = clause.partition("=")
        if not sep or not col:
            raise ValueError(f"bad filter {clause!r}; expected column=value[|value...]")
        out.append((col.strip(), set(vals.split("|"))))
    return out


def read_values(path, column, where=()):
    """Numeric column from a CSV; ``column`` may be a sum like ``s+c``."""
    conditions = _parse_where(where)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        parts = [c.strip() for c in column.split("+")]
        for c in parts + [c for c, _ in conditions]:
            if c not in fields:
                raise ValueError(f"{path}: no column {c!r} (have {fields})")
        vals = []
        for row in reader:
            if all(row[c] in allowed for c, allowed in conditions):
                vals.append(sum(float(row[c]) for c in parts))
    if not vals:
        raise ValueError(f"{path}: no rows selected")
    return np.asarray(vals)


def _records(args, platform=None):
    ds = ingest.load_events(args.events, args.format)
    recs = polarization.user_polarization(ds, min_comments=getattr(args, "min_comments", 1))
    if platform is not None:
        recs = [r for r in recs if r.platform == platform]
    return recs


# -- subcommands ----------------------------------------------------------------

def cmd_synth(args, out):
    cfg = synth.GeneratorConfig(
        n_users=args.users, platform=args.platform, mixture=args.mixture,
        beta_params=args.beta, switching_length=args.switching,
        switching_fraction=args.switching_fraction,
        activity_theta=args.activity_theta, activity_xmin=args.activity_xmin,
        seed=args.seed, n_items=args.items_per_category,
    )
    ds, truth = synth.generate(cfg)
    files = [f"events.{args.format}", "ground_truth.csv"]
    ingest.write_events(ds, out / files[0], args.format)
    synth.write_ground_truth_csv(truth, out / files[1])
    if args.item_stats:
        fb, yt = synth.generate_item_stats(cfg, args.coupling)
        ingest.write_item_stats(fb + yt, out / "items.csv")
        files.append("items.csv")
    return files


def cmd_ingest(args, out):
    ds = ingest.load_events(args.events, args.format)
    ingest.write_item_stats(ds.items.values(), out / "items.csv")
    per_platform = {p: int(np.sum(ds.platform == k)) for k, p in enumerate(ingest.PLATFORMS)}
    _write_json({
        "events": len(ds), "users": ds.n_users, "items": len(ds.items),
        "malformed": ds.malformed_count, "events_per_platform": per_platform,
    }, out / "summary.json")
    return ["items.csv", "summary.json"]


def cmd_polarize(args, out):
    ds = ingest.load_events(args.events, args.format)
    recs = polarization.user_polarization(ds, min_comments=args.min_comments)
    polarization.write_users_csv(recs, out / "users.csv")
    summary = {"users": len(recs), "min_comments": args.min_comments,
               "malformed_events": ds.malformed_count, "polarized_fraction": {}}
    for p in ingest.PLATFORMS:
        sub = [r for r in recs if r.platform == p]
        if sub:
            summary["polarized_fraction"][p] = polarization.polarized_fraction(sub)
    _write_json(summary, out / "summary.json")
    return ["users.csv", "summary.json"]


def cmd_density(args, out):
    centers, dens = polarization.polarization_density(
        read_values(args.values, args.column, args.where), bins=args.bins)
    polarization.write_density_csv(centers, dens, out / "density.csv")
    return ["density.csv"]


def cmd_bc(args, out):
    rep = polarization.bimodality_coefficient(read_values(args.values, args.column, args.where))
    _write_json(rep.to_dict(), out / "bc.json")
    return ["bc.json"]


def cmd_ccdf(args, out):
    x, p = tailstats.ccdf(read_values(args.values, args.column, args.where))
    tailstats.write_ccdf_csv(x, p, out / "ccdf.csv")
    return ["ccdf.csv"]


def cmd_fitpl(args, out):
    fit = tailstats.fit_powerlaw(read_values(args.values, args.column, args.where), args.xmin)
    _write_json(fit.to_dict(), out / "fit.json")
    return ["fit.json"]


def cmd_posterior(args, out):
    vals = read_values(args.values, args.column, args.where)
    fit = tailstats.fit_powerlaw(vals, args.xmin)
    post = tailstats.posterior_exponent(vals, fit, args.iters, args.burn, args.seed, label="posterior")
    _write_json(fit.to_dict(), out / "fit.json")
    tailstats.write_chain_csv(post, out / "chain.csv")
    _write_json(post.summary(), out / "posterior.json")
    return ["fit.json", "chain.csv", "posterior.json"]


def cmd_compare(args, out):
    path_b = args.values_b or args.values_a
    va = read_values(args.values_a, args.column, args.where_a)
    vb = read_values(path_b, args.column, args.where_b)
    fa = tailstats.fit_powerlaw(va, args.xmin)
    fb = tailstats.fit_powerlaw(vb, args.xmin_b if args.xmin_b is not None else args.xmin)
    pa = tailstats.posterior_exponent(va, fa, args.iters, args.burn, args.seed, label="a")
    pb = tailstats.posterior_exponent(vb, fb, args.iters, args.burn, args.seed, label="b")
    rep = tailstats.exponent_difference(pa, pb, args.mass)
    _write_json(fa.to_dict(), out / "fit_a.json")
    _write_json(fb.to_dict(), out / "fit_b.json")
    tailstats.write_chain_csv(pa, out / "chain_a.csv")
    tailstats.write_chain_csv(pb, out / "chain_b.csv")
    _write_json(rep.to_dict(), out / "hdi.json")
    return ["fit_a.json", "fit_b.json", "chain_a.csv", "chain_b.csv", "hdi.json"]


def cmd_assoc_matrix(args, out):
    items = ingest.load_item_stats(args.items)
    m = association.correlation_matrix(items, args.actions.split(","), category=args.category)
    association.write_matrix_csv(m, out / "matrix.csv")
    return ["matrix.csv"]


def cmd_assoc_mantel(args, out):
    a = association.read_matrix_csv(args.a)
    b = association.read_matrix_csv(args.b)
    res = association.mantel_test(a, b, args.replicates, args.seed)
    _write_json(res.to_dict(), out / "mantel.json")
    return ["mantel.json"]


def cmd_predict_sweep(args, out):
    recs = _records(args, args.platform)
    rows = predictor.n_sweep(recs, predictor.parse_n_values(args.n), args.per_class,
                             args.seed, args.ridge)
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n", "class", "precision", "recall", "accuracy"))
        for n, cls, p, r, a in rows:
            w.writerow([n, cls, repr(p), repr(r), repr(a)])
    return ["sweep.csv"]


def cmd_predict_cv(args, out):
    recs = _records(args, args.platform)
    x, y = predictor.build_cohort(recs, args.n, args.per_class, args.seed)
    cv = predictor.monte_carlo_cv(x, y, args.train, args.test, args.iters, args.ridge, args.seed)
    d = cv.to_dict()
    d["n"] = args.n
    _write_json(d, out / "cv.json")
    return ["cv.json"]


def cmd_predict_transfer(args, out):
    train_args = argparse.Namespace(**vars(args))
    test_args = argparse.Namespace(**vars(args))
    if args.test_events:
        test_args.events = args.test_events
    train = predictor.build_cohort(_records(train_args, args.train_platform), args.n,
                                   args.per_class, args.seed)
    test = predictor.build_cohort(_records(test_args, args.test_platform), args.n,
                                  args.per_class, args.seed)
    model, stats = predictor.transfer(train, test, args.ridge)
    predictor.write_model_json(model, out / "model.json", n=args.n)
    _write_json({
        "train_platform": args.train_platform, "test_platform": args.test_platform,
        "n": args.n, "train_size": int(train[1].size), "test_size": int(test[1].size),
        "classes": stats.to_dict(CLASSES),
    }, out / "transfer.json")
    return ["model.json", "transfer.json"]


# -- parser ---------------------------------------------------------------------

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="echo-metrics", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    common = _Parser(add_help=False)
    common.add_argument("--out", required=True, type=Path, help="output directory")
    common.add_argument("--seed", type=int, default=0, help="master random seed")

    events = _Parser(add_help=False)
    events.add_argument("--events", required=True, help="comment-event log")
    events.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")

    values = _Parser(add_help=False)
    values.add_argument("--values", required=True, help="CSV file holding the sample")
    values.add_argument("--column", default="rho", help="column name, or a sum such as s+c")
    values.add_argument("--where", action="append", metavar="COL=V[|V]",
                        help="keep rows whose COL is one of the values (repeatable)")

    tail = _Parser(add_help=False)
    tail.add_argument("--xmin", type=_xmin, default="auto", help="tail cutoff or 'auto'")

    mcmc = _Parser(add_help=False)
    mcmc.add_argument("--iters", type=int, default=50_000, help="MCMC iterations")
    mcmc.add_argument("--burn", type=int, default=5_000, help="burn-in iterations")

    pred = _Parser(add_help=False)
    pred.add_argument("--per-class", type=int, default=400, help="users sampled per class")
    pred.add_argument("--ridge", type=float, default=predictor.DEFAULT_RIDGE)
    pred.add_argument("--min-comments", type=int, default=100,
                      help="minimum history for cohort users")

    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, parents, help):
        sp = sub.add_parser(name, parents=parents, help=help, formatter_class=fmt)
        sp.set_defaults(func=func)
        return sp

    s = add("synth", cmd_synth, [common], "generate a synthetic event log")
    s.add_argument("--users", type=int, default=1000)
    s.add_argument("--platform", type=_platform, default="facebook")
    s.add_argument("--mixture", type=_floats(3), default=(0.45, 0.10, 0.45),
                   help="science,middle,conspiracy weights")
    s.add_argument("--beta", type=_floats(2), default=(0.5, 8.0), help="a,b of the polarized components")
    s.add_argument("--switching", type=int, default=0, help="switching-phase length L")
    s.add_argument("--switching-fraction", type=float, default=1.0,
                   help="share of users with a switching phase")
    s.add_argument("--activity-theta", type=float, default=2.2)
    s.add_argument("--activity-xmin", type=float, default=8.0)
    s.add_argument("--items-per-category", type=int, default=200)
    s.add_argument("--item-stats", action="store_true", help="also write linked items.csv")
    s.add_argument("--coupling", type=float, default=0.4, help="cross-platform popularity coupling")
    s.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")

    add("ingest", cmd_ingest, [common, events], "validate an event log and summarise it")

    s = add("polarize", cmd_polarize, [common, events], "per-user polarization table")
    s.add_argument("--min-comments", type=int, default=1)

    s = add("density", cmd_density, [common, values], "histogram density of polarization")
    s.add_argument("--bins", type=int, default=50)

    add("bc", cmd_bc, [common, values], "bimodality coefficient")
    add("ccdf", cmd_ccdf, [common, values], "empirical CCDF table")
    add("fitpl", cmd_fitpl, [common, values, tail], "power-law tail fit")
    add("posterior", cmd_posterior, [common, values, tail, mcmc], "MCMC posterior of a tail exponent")

    s = add("compare", cmd_compare, [common, tail, mcmc], "HDI of the difference of two tail exponents")
    s.add_argument("--values-a", required=True)
    s.add_argument("--values-b", help="defaults to --values-a")
    s.add_argument("--column", default="s+c")
    s.add_argument("--where-a", action="append", metavar="COL=V[|V]")
    s.add_argument("--where-b", action="append", metavar="COL=V[|V]")
    s.add_argument("--xmin-b", type=_xmin, help="tail cutoff for sample b (default: --xmin)")
    s.add_argument("--mass", type=float, default=0.90, help="HDI mass")

    assoc = sub.add_parser("assoc", help="correlation matrices and Mantel test", formatter_class=fmt)
    asub = assoc.add_subparsers(dest="assoc_command", metavar="ACTION", parser_class=_Parser)
    s = asub.add_parser("matrix", parents=[common], formatter_class=fmt,
                        help="Spearman matrix of item actions")
    s.set_defaults(func=cmd_assoc_matrix)
    s.add_argument("--items", required=True, help="item-stats CSV")
    s.add_argument("--actions", default=DEFAULT_ACTIONS)
    s.add_argument("--category", choices=ingest.CATEGORIES)
    s = asub.add_parser("mantel", parents=[common], formatter_class=fmt,
                        help="Mantel test between two matrix CSVs")
    s.set_defaults(func=cmd_assoc_mantel)
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--replicates", type=int, default=10_000)

    pr = sub.add_parser("predict", help="multinomial polarization classifier", formatter_class=fmt)
    psub = pr.add_subparsers(dest="predict_command", metavar="ACTION", parser_class=_Parser)
    s = psub.add_parser("sweep", parents=[common, events, pred], formatter_class=fmt,
                        help="in-sample performance as a function of n")
    s.set_defaults(func=cmd_predict_sweep)
    s.add_argument("--n", default="1..100", help="n values: 1..100, 1,5,10 or 1..100:5")
    s.add_argument("--platform", type=_platform)
    s = psub.add_parser("cv", parents=[common, events, pred], formatter_class=fmt,
                        help="Monte-Carlo cross-validation")
    s.set_defaults(func=cmd_predict_cv)
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--train", type=int, default=1000)
    s.add_argument("--test", type=int, default=200)
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--platform", type=_platform)
    s = psub.add_parser("transfer", parents=[common, events, pred], formatter_class=fmt,
                        help="train on one platform, test on the other")
    s.set_defaults(func=cmd_predict_transfer)
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--train-platform", type=_platform, default="youtube")
    s.add_argument("--test-platform", type=_platform, default="facebook")
    s.add_argument("--test-events", help="separate log for the test platform")

    return p


def _inputs(args):
    keys = ("events", "test_events", "values", "values_a", "values_b", "items", "a", "b")
    paths = [getattr(args, k) for k in keys if getattr(args, k, None)]
    return {str(p): _sha256(p) for p in dict.fromkeys(paths)}


def _flags(args):
    return {k: (str(v) if isinstance(v, Path) else list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k != "func"}


def run(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            parser.print_usage(sys.stderr)
            raise UsageError("echo-metrics: error: a subcommand is required")
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError(f"echo-metrics: error: {' '.join(argv)}: missing action")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    name = " ".join(x for x in (args.command, getattr(args, "assoc_command", None),
                                getattr(args, "predict_command", None)) if x)
    try:
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        inputs = _inputs(args)
        outputs = args.func(args, out)
        _write_json({
            "command": name,
            "flags": _flags(args),
            "seed": args.seed,
            "inputs": inputs,
            "version": __version__,
            "outputs": sorted(outputs),
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }, out / "manifest.json")
    except (ValueError, OSError, KeyError) as exc:
        print(f"echo-metrics {name}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"echo-metrics {name}: internal error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
