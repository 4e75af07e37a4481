"""Command line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 2 usage or config error, 3 data error,
4 non-convergence (only with --strict).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

from . import synthgen
from .classifier import StanceModel
from .corpus import DataError, NormalizationRules, read_corpus, select_active_users
from .netdyn import read_snapshots
from .pipeline import (
    ConfigError,
    NonConvergence,
    PipelineConfig,
    StageError,
    read_predictions,
    read_softlabels,
    run,
    stage_classify,
    stage_communities,
    stage_correlate,
    stage_filter,
    stage_ingest,
    stage_lexicon,
    stage_network,
    stage_softlabels,
    stage_switches,
    stage_train,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONV = 0, 2, 3, 4


def _network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="inputs", nargs="+", type=Path, required=True)
    p.add_argument("--seeds", type=Path, required=True, help="CSV (author_id, label)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--min-posts", type=int, default=10)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--binarized", action="store_true", help="ignore edge weights")
    p.add_argument("--n-surr", type=int, default=100)
    p.add_argument("--q-snapshots", type=int, default=1)
    p.add_argument("--swaps-per-edge", type=int, default=10)
    p.add_argument("--strict", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polardyn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize and deduplicate raw JSONL/CSV tweet files")
    p.add_argument("--in", dest="inputs", nargs="+", type=Path, required=True)
    p.add_argument("--rules", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("filter", help="keep tweets matching any Boolean query")
    p.add_argument("--in", dest="inputs", nargs="+", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--rules", type=Path, help="normalization rules applied to query terms")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("lexicon", help="expand seed lexicons, report bursty hashtags")
    p.add_argument("--in", dest="inputs", nargs="+", type=Path, required=True)
    p.add_argument("--seed-pro", type=Path, required=True)
    p.add_argument("--seed-anti", type=Path, required=True)
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--min-count", type=int, default=3)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--burst-ratio-min", type=float, default=3.0)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("train", help="cross-validate and train the stance classifier")
    p.add_argument("--in", dest="inputs", nargs="+", type=Path, required=True)
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--folds", type=int, default=20)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("classify", help="predict every tweet; daily stance proportions")
    p.add_argument("--in", dest="inputs", nargs="+", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("network", help="snapshots, label propagation, Q significance")
    _network_args(p)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("communities", help="community sizes and network switch ratios")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--snapshots", type=Path, help="directory written by 'network'")
    src.add_argument("--in", dest="inputs", nargs="+", type=Path)
    p.add_argument("--seeds", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--min-posts", type=int, default=10)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--binarized", action="store_true")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("switches", help="content polarity switches per threshold n")
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--n", type=int, nargs="+", default=[5, 10, 15, 20])
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("softlabels", help="per-user soft labels and leaning histogram")
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--t0", type=date.fromisoformat)
    p.add_argument("--tf", type=date.fromisoformat)
    p.add_argument("--bin-width", type=float, default=0.05)
    p.add_argument("--tag", help="extra file-name tag (the runner uses the config hash)")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("correlate", help="content polarity vs network soft label")
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--softlabels", type=Path, required=True)
    p.add_argument("--tag", default="")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("synth", help="write a synthetic scenario with ground truth")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", default="demo", choices=["demo", "small", "switch", "stable", "regime"])
    g.add_argument("--spec", type=Path, help="ScenarioSpec JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", type=Path, required=True)

    for name in ("report", "run"):
        p = sub.add_parser(name, help="run the whole pipeline from a config file")
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--strict", action="store_true", help="non-convergence is an error (exit 4)")
    return ap


def _corpus(paths):
    return read_corpus(paths)


def _snapshots(args):
    if args.snapshots is not None:
        snaps = read_snapshots(args.snapshots)
        if not snaps:
            raise DataError(f"no snapshots in {args.snapshots}")
        return snaps
    if args.seeds is None:
        raise ConfigError("--seeds is required with --in")
    corpus = _corpus(args.inputs)
    chain, _, _ = stage_network(corpus, args.seeds, args.seed, args.out_dir, args.window, args.step,
                                select_active_users(corpus, args.min_posts), args.max_sweeps,
                                not args.binarized, n_surr=2, q_snapshots=0)
    return chain


def dispatch(args) -> int:
    cmd = args.command
    if cmd == "ingest":
        corpus, _ = stage_ingest(args.inputs, args.rules, args.out)
        print(f"{len(corpus)} tweets ({corpus.n_duplicates} duplicates, {corpus.n_rejected} self-reposts dropped) -> {args.out}")
    elif cmd == "filter":
        rules = NormalizationRules.load(args.rules) if args.rules else None
        kept = stage_filter(_corpus(args.inputs), args.queries, rules, args.out)
        print(f"{len(kept)} tweets kept -> {args.out}")
    elif cmd == "lexicon":
        _, summary, _ = stage_lexicon(_corpus(args.inputs), args.seed_pro, args.seed_anti, args.out_dir,
                                      args.iterations, args.min_count, args.k, args.burst_ratio_min)
        print(json.dumps({k: v for k, v in summary.items() if k != "bursts"}))
    elif cmd == "train":
        _, doc, _ = stage_train(_corpus(args.inputs), args.gold, args.seed, args.out_dir, args.folds,
                                epochs=args.epochs, reg=args.reg, lr=args.lr, batch_size=args.batch_size)
        print(f"cv mean {doc['mean']:.4f} (sd {doc['std']:.4f}), train accuracy {doc['train_accuracy']:.4f}")
    elif cmd == "classify":
        stage_classify(_corpus(args.inputs), StanceModel.load(args.model), args.out_dir)
    elif cmd == "network":
        corpus = _corpus(args.inputs)
        _, qdoc, _ = stage_network(corpus, args.seeds, args.seed, args.out_dir, args.window, args.step,
                                   select_active_users(corpus, args.min_posts), args.max_sweeps,
                                   not args.binarized, args.n_surr, args.q_snapshots, args.swaps_per_edge,
                                   args.strict)
        for r in qdoc["reports"]:
            z = "inf" if r["z_infinite"] else f"{r['z']:.2f}"
            print(f"{r['day']}: Q={r['q_actual']:.4f} surrogates {r['mean']:.4f}+-{r['std']:.4f} z={z}")
    elif cmd == "communities":
        stage_communities(_snapshots(args), args.out_dir)
    elif cmd == "switches":
        summary, _ = stage_switches(read_predictions(args.predictions), args.n, args.out_dir)
        for s in summary:
            print(f"n={s['n']}: {s['users_examined']} examined, {s['pro_to_anti']} pro->anti, "
                  f"{s['anti_to_pro']} anti->pro ({100 * s['switch_rate']:.2f}%)")
    elif cmd == "softlabels":
        snaps = read_snapshots(args.snapshots)
        if not snaps:
            raise DataError(f"no snapshots in {args.snapshots}")
        t0 = args.t0 or snaps[0].day
        tf = args.tf or snaps[-1].day
        stage_softlabels(snaps, t0, tf, args.bin_width, args.out_dir, args.tag)
    elif cmd == "correlate":
        doc, _ = stage_correlate(read_predictions(args.predictions), read_softlabels(args.softlabels),
                                 args.out_dir, args.tag)
        print(json.dumps(doc))
    elif cmd == "synth":
        if args.spec is not None:
            spec = synthgen.ScenarioSpec.from_json(json.loads(args.spec.read_text(encoding="utf-8")))
            if args.seed is not None:
                spec.seed = args.seed
        else:
            spec = synthgen.preset(args.preset, args.seed or 0)
        sc = synthgen.generate(spec)
        synthgen.write_scenario(sc, args.out_dir)
        print(f"{len(sc.corpus)} tweets, {spec.n_users} users -> {args.out_dir}")
    elif cmd in ("report", "run"):
        cfg = PipelineConfig.load(args.config, args.seed)
        cfg.strict = cfg.strict or args.strict
        bundle = run(cfg)
        print(json.dumps(bundle, indent=1))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, NonConvergence):
            return EXIT_NONCONV
        if isinstance(exc.cause, ConfigError):
            return EXIT_CONFIG
        return EXIT_DATA
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (DataError, ValueError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
