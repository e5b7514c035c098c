"""``melsmooth`` command line.

Option precedence: command-line flag > ``--config`` JSON > environment
(``MELSMOOTH_SEED``) > built-in default.  The config file is a JSON object of
option names (dest form, e.g. ``"p_g"``); a nested object keyed by a
subcommand name applies to that subcommand only.  Tables are TSV with a
``#``-prefixed header row.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .augment import SmoothingPolicy, make_kernel
from .demo import make_demo_corpus
from .features import NormStats, list_feature_files, read_afv1
from .metrics import msd, msd_sweep, normalized_histogram, summary_tsv
from .pipeline import (ManifestError, augment_corpus, corpus_stats, extract_corpus, load_corpus,
                       normalize_corpus, read_manifest)

SEED_ENV = "MELSMOOTH_SEED"
COMMANDS = ("extract", "stats", "normalize", "kernel", "augment", "msd", "sweep", "serve", "make-demo")


def _odd_size(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size {text!r}")
    if value < 1 or value % 2 == 0:
        raise argparse.ArgumentTypeError("sizes must be odd")
    return value


def _size_pair(text):
    try:
        a, b = text.lower().split("x")
        return _odd_size(a), _odd_size(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size pair must look like 5x3, got {text!r}")


def _add_jobs(p):
    p.add_argument("--jobs", type=int, default=1, help="worker threads across utterances")


def _add_policy(p):
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default ${SEED_ENV} or 0)")
    p.add_argument("--n-t", dest="n_t", type=int, default=6, help="time-size candidates")
    p.add_argument("--n-f", dest="n_f", type=int, default=3, help="frequency-size candidates")
    p.add_argument("--p-g", dest="p_g", type=float, default=2.0 / 3.0, help="probability of no smoothing per axis")
    p.add_argument("--start-fraction", dest="start_fraction", type=float, default=0.75,
                   help="fraction of training before smoothing starts")
    p.add_argument("--per-step-only", dest="per_step_only", action="store_true",
                   help="one draw per step, shared by all utterances")
    p.add_argument("--domain", choices=("db", "linear"), default="db")
    p.add_argument("--kernel-shape", dest="kernel_shape", choices=("triangular", "rectangular"),
                   default="triangular")


def build_parser():
    parser = argparse.ArgumentParser(prog="melsmooth", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file providing option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["extract"] = sub.add_parser("extract", help="WAV manifest -> AFV1 features")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--report", help="report TSV path (default OUT_DIR/extract_report.tsv)")
    _add_jobs(p)

    p = subs["stats"] = sub.add_parser("stats", help="global mean/std over a feature dir")
    p.add_argument("feature_dir")
    p.add_argument("stats_path")
    _add_jobs(p)

    p = subs["normalize"] = sub.add_parser("normalize", help="apply global normalisation")
    p.add_argument("feature_dir")
    p.add_argument("stats_path")
    p.add_argument("out_dir")
    p.add_argument("--exempt-voicing", dest="exempt_voicing", action="store_true")
    _add_jobs(p)

    p = subs["kernel"] = sub.add_parser("kernel", help="dump an l_t x l_f smoothing kernel")
    p.add_argument("l_t", type=_odd_size)
    p.add_argument("l_f", type=_odd_size)
    p.add_argument("--kernel-shape", dest="kernel_shape", choices=("triangular", "rectangular"),
                   default="triangular")

    p = subs["augment"] = sub.add_parser("augment", help="smooth a feature dir for one training step")
    p.add_argument("feature_dir")
    p.add_argument("out_dir")
    p.add_argument("--step", type=int, required=True)
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--lt", type=_odd_size, help="force the time size (skips schedule and sampling)")
    p.add_argument("--lf", type=_odd_size, help="force the frequency size")
    p.add_argument("--log", help="size log TSV path (default OUT_DIR/augment_log.tsv)")
    _add_policy(p)
    _add_jobs(p)

    p = subs["msd"] = sub.add_parser("msd", help="MSD between two feature dirs")
    p.add_argument("ref_dir")
    p.add_argument("other_dir")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--range", dest="value_range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--per-utterance", dest="per_utterance", action="store_true",
                   help="also print per-utterance mean MSD")
    p.add_argument("--min-energy-db", dest="min_energy_db", type=float)

    p = subs["sweep"] = sub.add_parser("sweep", help="MSD histograms for several smoothing sizes")
    p.add_argument("ref_dir")
    p.add_argument("--sizes", type=_size_pair, nargs="+", default=[(1, 1), (3, 1), (5, 1), (5, 3)])
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--range", dest="value_range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--min-energy-db", dest="min_energy_db", type=float)
    p.add_argument("--hist-dir", dest="hist_dir", help="write one histogram TSV per size here")
    p.add_argument("--kernel-shape", dest="kernel_shape", choices=("triangular", "rectangular"),
                   default="triangular")
    _add_jobs(p)

    p = subs["serve"] = sub.add_parser("serve", help="run the batch server")
    p.add_argument("feature_dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7450)
    _add_policy(p)

    p = subs["make-demo"] = sub.add_parser("make-demo", help="write the synthetic demo corpus")
    p.add_argument("out_dir")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--corpus-seed", dest="corpus_seed", type=int, default=0)

    return parser, subs


def _apply_config(parser, subs, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    sp = subs[args.command]
    known = {a.dest for a in sp._actions if a.option_strings}
    values = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    values.update(cfg.get(args.command, {}))
    unknown = sorted(set(values) - known)
    if unknown:
        parser.error(f"config keys not valid for {args.command}: {', '.join(unknown)}")
    if "sizes" in values:
        values["sizes"] = [_size_pair(s) if isinstance(s, str) else tuple(s) for s in values["sizes"]]
    sp.set_defaults(**values)
    return parser.parse_args(argv)


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env not in (None, "") else 0


def _policy(args):
    return SmoothingPolicy(n_t=args.n_t, n_f=args.n_f, p_g=args.p_g,
                           augment_start_fraction=args.start_fraction,
                           base_seed=_resolve_seed(args.seed), per_step_only=args.per_step_only,
                           domain=args.domain, kernel_shape=args.kernel_shape)


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_extract(args):
    try:
        entries = read_manifest(args.manifest)
    except (OSError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    outcomes = extract_corpus(entries, args.out_dir, jobs=args.jobs)
    lines = ["# id\tstatus\tn_frames\terror"]
    failed = 0
    for o in outcomes:
        if o.error is None:
            lines.append(f"{o.utterance_id}\tok\t{o.n_frames}\t")
        else:
            failed += 1
            lines.append(f"{o.utterance_id}\terror\t\t{o.error}")
            print(f"error: {o.utterance_id}: {o.error}", file=sys.stderr)
    _write_text(args.report or os.path.join(args.out_dir, "extract_report.tsv"), "\n".join(lines) + "\n")
    print(f"extracted {len(outcomes) - failed}/{len(outcomes)} utterances", file=sys.stderr)
    return 1 if failed else 0


def cmd_stats(args):
    stats = corpus_stats(args.feature_dir, jobs=args.jobs)
    stats.save(args.stats_path)
    return 0


def cmd_normalize(args):
    stats = NormStats.load(args.stats_path)
    normalize_corpus(args.feature_dir, stats, args.out_dir, args.exempt_voicing, jobs=args.jobs)
    return 0


def cmd_kernel(args):
    k = make_kernel(args.l_t, args.l_f, args.kernel_shape)
    lines = ["# t\\f\t" + "\t".join(str(f) for f in range(k.l_f))]
    for t, row in enumerate(k.weights):
        lines.append(f"{t}\t" + "\t".join(repr(float(v)) for v in row))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_augment(args):
    if (args.lt is None) != (args.lf is None):
        print("error: --lt and --lf must be given together", file=sys.stderr)
        return 2
    if not 0 <= args.step < args.total:
        print("error: need 0 <= --step < --total", file=sys.stderr)
        return 2
    forced = None if args.lt is None else (args.lt, args.lf)
    rows = augment_corpus(args.feature_dir, args.out_dir, _policy(args), args.step, args.total,
                          forced, jobs=args.jobs)
    lines = ["# id\tl_t\tl_f"] + [f"{uid}\t{lt}\t{lf}" for uid, lt, lf in rows]
    _write_text(args.log or os.path.join(args.out_dir, "augment_log.tsv"), "\n".join(lines) + "\n")
    return 0


def cmd_msd(args):
    ref = dict(list_feature_files(args.ref_dir))
    other = dict(list_feature_files(args.other_dir))
    if set(ref) != set(other):
        missing = sorted(set(ref) ^ set(other))
        print(f"error: feature sets differ: {', '.join(missing[:5])}", file=sys.stderr)
        return 1
    if not ref:
        print("error: no features", file=sys.stderr)
        return 1
    pooled, per_utt = [], []
    for uid in sorted(ref):
        a, b = read_afv1(ref[uid], uid), read_afv1(other[uid], uid)
        d = msd(a.mel, b.mel).per_frame
        if args.min_energy_db is not None:
            d = d[np.asarray(a.mel).max(axis=1) >= args.min_energy_db]
        if d.size:
            pooled.append(d)
            per_utt.append((uid, float(d.mean())))
    values = np.concatenate(pooled)
    hi = float(values.max())
    value_range = tuple(args.value_range) if args.value_range else (0.0, hi if hi > 0 else 1.0)
    hist = normalized_histogram(values, args.bins, value_range)
    out = ["# n_frames\tmean\tstd\tp50\tp90",
           f"{values.size}\t{values.mean():.6f}\t{values.std():.6f}\t"
           f"{np.percentile(values, 50):.6f}\t{np.percentile(values, 90):.6f}"]
    sys.stdout.write("\n".join(out) + "\n" + hist.to_tsv())
    if args.per_utterance:
        sys.stdout.write("# id\tmean\n" + "".join(f"{u}\t{m:.6f}\n" for u, m in per_utt))
    return 0


def cmd_sweep(args):
    corpus = load_corpus(args.ref_dir)
    rows = msd_sweep(corpus, args.sizes, args.bins, tuple(args.value_range) if args.value_range else None,
                     args.min_energy_db, args.kernel_shape, jobs=args.jobs)
    sys.stdout.write(summary_tsv(rows))
    if args.hist_dir:
        os.makedirs(args.hist_dir, exist_ok=True)
        for r in rows:
            _write_text(os.path.join(args.hist_dir, f"hist_{r.l_t}x{r.l_f}.tsv"), r.histogram.to_tsv())
            _write_text(os.path.join(args.hist_dir, f"uttmean_hist_{r.l_t}x{r.l_f}.tsv"),
                        r.utterance_histogram.to_tsv())
    return 0


def cmd_serve(args):
    from .server import serve

    def ready(addr):
        print(f"serving {args.feature_dir} on {addr[0]}:{addr[1]}", file=sys.stderr, flush=True)

    serve(args.feature_dir, _policy(args), args.host, args.port, ready)
    return 0


def cmd_make_demo(args):
    path = make_demo_corpus(args.out_dir, args.n, args.corpus_seed)
    print(path)
    return 0


HANDLERS = {
    "extract": cmd_extract, "stats": cmd_stats, "normalize": cmd_normalize, "kernel": cmd_kernel,
    "augment": cmd_augment, "msd": cmd_msd, "sweep": cmd_sweep, "serve": cmd_serve,
    "make-demo": cmd_make_demo,
}


def main(argv=None) -> int:
    parser, subs = build_parser()
    args = _apply_config(parser, subs, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
