"""Command-line entry point: ``porte {toy-corpus,generate,evaluate,report,selftest}``.

Exit codes: 0 success, 1 validation or property failure, 2 I/O failure.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .dataset import read_manifest, scan_corpus
from .exceptions import PorteError
from .generate import MANIFEST_NAME, bin_counts, generate_dataset
from .metrics import (
    METRICS,
    SuREConfig,
    aggregate_report,
    bin_label,
    reports_to_csv,
    sisdr,
    sisdr_improvement,
    sure,
    wer,
)
from .mixgen import OVERLAP_BINS
from .signal import read_wav

logger = logging.getLogger("porte")

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _default_seed():
    return int(os.environ.get("PORTE_SEED", "0"))


def parse_bins(text):
    if text == "all":
        return OVERLAP_BINS
    bins = []
    for part in text.split(","):
        pct = int(part.strip().rstrip("%"))
        if pct not in (0, 20, 40, 60, 80, 100):
            raise argparse.ArgumentTypeError(f"bin {part!r} not in 0,20,40,60,80,100")
        bins.append(pct / 100.0)
    return tuple(bins)


def parse_metrics(text):
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    unknown = set(names) - set(METRICS)
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown metric(s): {', '.join(sorted(unknown))}")
    return names


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


# ------------------------------------------------------------------ commands


def cmd_toy_corpus(args):
    from .toycorpus import make_toy_corpus

    tsv = make_toy_corpus(args.out, seed=args.seed)
    print(f"toy corpus written to {args.out} (speaker table {tsv})")
    return EXIT_OK


def cmd_generate(args):
    speakers = args.speakers or os.path.join(args.corpus, "speakers.tsv")
    scan = scan_corpus(args.corpus, speakers)
    if not scan.records:
        print(f"error: no usable utterances under {args.corpus}", file=sys.stderr)
        return EXIT_FAIL
    records = generate_dataset(
        scan.records, args.out, args.count, args.seed, bins=args.bins, workers=args.workers,
        test_fraction=args.test_fraction, corpus_root=args.corpus, speaker_disjoint=args.speaker_disjoint,
    )
    counts = " ".join(f"{bin_label(r)}={n}" for r, n in bin_counts(records).items())
    print(f"generated {len(records)} mixtures (seed={args.seed}; skipped: "
          f"{scan.too_short} short, {scan.unknown_speaker} unknown speaker) {counts}")
    return EXIT_OK


def _read_transcripts(path):
    """``id<TAB>text`` TSV file, or a directory of ``<id>.txt`` files."""
    out = {}
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            if name.endswith(".txt"):
                with open(os.path.join(path, name), encoding="utf-8") as f:
                    out[name[:-4]] = f.read()
        return out
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rid, _, text = line.rstrip("\n").partition("\t")
                out[rid] = text
    return out


def _pad_to(x, n):
    return np.pad(x, (0, n - len(x))) if len(x) < n else x


def _score_one(job):
    rec, root, est_path, metrics, cfg, zero_mean, transcripts = job
    ref = read_wav(os.path.join(root, rec.target_path)).samples
    mix = read_wav(os.path.join(root, rec.mixture_path)).samples
    est = read_wav(est_path).samples
    padded = len(est) != len(ref)
    n = max(len(est), len(ref))
    est, ref, mix = _pad_to(est, n), _pad_to(ref, n), _pad_to(mix, n)
    scores = {}
    if "sisdr" in metrics:
        scores["sisdr"] = sisdr(est, ref, zero_mean=zero_mean)
    if "sisdri" in metrics:
        scores["sisdri"] = sisdr_improvement(est, mix, ref, zero_mean=zero_mean)
    if "sure" in metrics:
        scores["sure"] = sure(est, ref, crop=(rec.target_t_start, rec.target_t_end), cfg=cfg,
                              sample_rate=rec.sample_rate)
    if "wer" in metrics and transcripts is not None:
        hyp, ref_text = transcripts
        scores["wer"] = wer(hyp, ref_text)
    return scores, padded


def cmd_evaluate(args):
    manifest = args.manifest or os.path.join(args.corpus or ".", MANIFEST_NAME)
    records = read_manifest(manifest)
    root = os.path.dirname(os.path.abspath(manifest))
    cfg = SuREConfig(tau_rel=args.sure_tau_rel, beta=args.sure_beta, win_ms=args.sure_win_ms, hop_ms=args.sure_hop_ms)
    hyps = refs = None
    if "wer" in args.metrics:
        if args.transcripts:
            hyps, refs = (_read_transcripts(p) for p in args.transcripts)
        else:
            logger.warning("wer requested without --transcripts; skipping it")

    jobs, missing = [], []
    for rec in records:
        est_path = os.path.join(args.estimates, f"{rec.id}_est.wav")
        if not os.path.exists(est_path):
            missing.append(rec.id)
            continue
        tr = (hyps[rec.id], refs[rec.id]) if hyps is not None and rec.id in hyps and rec.id in refs else None
        jobs.append((rec, root, est_path, args.metrics, cfg, not args.no_zero_mean, tr))
    if missing:
        print(f"warning: {len(missing)} estimate(s) missing, e.g. {missing[0]}_est.wav", file=sys.stderr)
    if not jobs:
        print(f"error: no estimates found in {args.estimates}", file=sys.stderr)
        return EXIT_FAIL

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_score_one, jobs))
    else:
        results = [_score_one(job) for job in jobs]

    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        for job, (scores, padded) in sorted(zip(jobs, results), key=lambda jr: jr[0][0].id):
            rec = job[0]
            if padded:
                logger.info("%s: estimate length differs from reference; zero-padded", rec.id)
            row = {"id": rec.id, "model": args.model, "overlap_ratio": rec.overlap_ratio_requested,
                   "seed": args.seed, "padded": padded}
            row.update(scores)
            f.write(json.dumps(row) + "\n")
    print(f"scored {len(jobs)} record(s) -> {args.out} (missing {len(missing)})")
    return EXIT_OK


def cmd_report(args):
    scored = []
    for path in args.scores:
        with open(path, encoding="utf-8") as f:
            scored += [json.loads(line) for line in f if line.strip()]
    if not scored:
        print("error: no scores to report", file=sys.stderr)
        return EXIT_FAIL
    models = list(dict.fromkeys(s.get("model", "model") for s in scored))
    reports = [
        aggregate_report([s for s in scored if s.get("model", "model") == m], model=m,
                         seed=next((s.get("seed") for s in scored if s.get("model", "model") == m), None))
        for m in models
    ]
    if args.format == "csv":
        text = reports_to_csv(reports)
    else:
        text = "[\n" + ",\n".join(r.to_json() for r in reports) + "\n]\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest

    report = run_selftest(inject_wrong_gradient=args.inject_wrong_gradient, seeds=range(args.gradient_seeds))
    report["seed"] = args.seed
    text = json.dumps(report if args.verbose else {k: v for k, v in report.items() if k != "checks"}, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# -------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    """Bad flags are a validation failure (exit 1); 2 is reserved for I/O errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="porte", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=_default_seed(),
                       help="master seed (falls back to $PORTE_SEED, then 0)")
        p.add_argument("--workers", type=positive_int, default=1)

    p = sub.add_parser("toy-corpus", help="write a small synthetic speaker corpus")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_toy_corpus)

    p = sub.add_parser("generate", help="render overlap-controlled mixtures and a manifest")
    p.add_argument("--corpus", required=True, help="directory of WAV/FLAC utterances")
    p.add_argument("--speakers", help="speaker_id<TAB>gender table (default: <corpus>/speakers.tsv)")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=positive_int, required=True)
    p.add_argument("--bins", type=parse_bins, default=OVERLAP_BINS, help="'all' or e.g. 0,40,100")
    p.add_argument("--test-fraction", type=float, default=3.0 / 39.0)
    p.add_argument("--speaker-disjoint", action="store_true")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score <id>_est.wav estimates against a manifest")
    p.add_argument("--manifest")
    p.add_argument("--corpus", help="dataset directory holding manifest.jsonl (if --manifest is omitted)")
    p.add_argument("--estimates", required=True)
    p.add_argument("--out", required=True, help="scores JSONL")
    p.add_argument("--model", default="model")
    p.add_argument("--metrics", type=parse_metrics, default=("sisdr", "sisdri", "sure"))
    p.add_argument("--transcripts", nargs=2, metavar=("HYP", "REF"),
                   help="hypothesis and reference transcripts (TSV id<TAB>text or dir of <id>.txt)")
    p.add_argument("--sure-win-ms", type=float, default=25.0)
    p.add_argument("--sure-hop-ms", type=float, default=10.0)
    p.add_argument("--sure-beta", type=float, default=0.1)
    p.add_argument("--sure-tau-rel", type=float, default=0.01)
    p.add_argument("--no-zero-mean", action="store_true", help="literal SI-SDR without mean removal")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="per-overlap-bin table from scores JSONL")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="gradient and metric property checks")
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--verbose", action="store_true", help="include every check in the JSON")
    p.add_argument("--inject-wrong-gradient", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--gradient-seeds", type=positive_int, default=20, help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PorteError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
