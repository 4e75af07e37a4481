"""File-composable pipeline stages and the end-to-end runner.

Every stage reads and writes the documented file formats, so the CLI
subcommands and :func:`run` share one code path and produce identical
files. Randomness enters only through the integer seed each stage gets,
expanded into named per-stage streams by :func:`stream_seed`.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from . import ANTI, CLASSES, PRO, __version__
from .classifier import StanceModel, cross_validate, daily_stance_proportions, read_gold, train
from .corpus import Corpus, DataError, NormalizationRules, parse_timestamp, read_corpus, select_active_users, write_corpus, filter_corpus, post_counts
from .dynamics import (
    SoftLabel,
    community_sizes,
    content_network_correlation,
    content_polarity,
    leaning_histogram,
    soft_labels,
    switch_series,
    switches_from_sequences,
)
from .lexicon import HeuristicLabel, StanceLexicon, burst_hashtags, expand_lexicons, heuristic_label, labeled_fraction, read_term_list, write_burst_report
from .netdyn import GraphSnapshot, build_snapshots, graph_stats, modularity, propagate_chain, read_seeds, surrogate_zscore, write_snapshot
from .query import load_queries

logger = logging.getLogger(__name__)

OUTPUT_ENV = "POLARDYN_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid pipeline configuration (exit code 2)."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


class NonConvergence(RuntimeError):
    """Label propagation hit max_sweeps in strict mode (exit code 4)."""


def stream_seed(seed: int, name: str) -> int:
    """Derive a 32-bit seed for a named random stream."""
    digest = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    inputs: list[Path]
    seed: int
    seed_pro: Path
    seed_anti: Path
    network_seeds: Path
    gold: Path
    rules: Path | None = None
    queries: Path | None = None
    output_dir: Path = Path("out")
    lexicon_iterations: int = 4
    lexicon_min_count: int = 3
    burst_k: int = 30
    burst_ratio_min: float = 3.0
    epochs: int = 30
    reg: float = 1e-4
    lr: float = 0.5
    batch_size: int = 8
    cv_folds: int = 20
    min_posts: int = 10
    window: int = 3
    step: int = 1
    max_sweeps: int = 100
    weighted: bool = True
    n_thresholds: list[int] = field(default_factory=lambda: [5, 10, 15, 20])
    n_surr: int = 100
    q_snapshots: int = 1
    swaps_per_edge: int = 10
    bin_width: float = 0.05
    periods: list[tuple[date, date]] = field(default_factory=list)
    strict: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    PATH_FIELDS = ("seed_pro", "seed_anti", "network_seeds", "gold", "rules", "queries")

    @classmethod
    def from_dict(cls, doc: dict, base: Path | None = None, seed: int | None = None) -> PipelineConfig:
        base = base or Path.cwd()
        doc = dict(doc)
        if seed is not None:
            doc["seed"] = seed
        known = {f.name for f in dataclasses.fields(cls)} - {"raw"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in doc or not isinstance(doc["seed"], int):
            raise ConfigError("config needs an integer 'seed'")
        for key in ("inputs", "seed_pro", "seed_anti", "network_seeds", "gold"):
            if key not in doc:
                raise ConfigError(f"config is missing {key!r}")
        kw = dict(doc)
        inputs = kw["inputs"] if isinstance(kw["inputs"], list) else [kw["inputs"]]
        kw["inputs"] = [base / p for p in inputs]
        for key in cls.PATH_FIELDS:
            if kw.get(key) is not None:
                kw[key] = base / kw[key]
        out = os.environ.get(OUTPUT_ENV) or kw.get("output_dir", "out")
        kw["output_dir"] = base / out
        if "periods" in kw:
            try:
                kw["periods"] = [(date.fromisoformat(a), date.fromisoformat(b)) for a, b in kw["periods"]]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad periods: {exc}") from None
        cfg = cls(**kw, raw=doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path, seed: int | None = None) -> PipelineConfig:
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc, path.parent, seed)

    def validate(self) -> None:
        missing = [str(p) for p in self.inputs if not p.exists()]
        missing += [str(getattr(self, k)) for k in self.PATH_FIELDS
                    if getattr(self, k) is not None and not getattr(self, k).exists()]
        if missing:
            raise ConfigError(f"missing input files: {', '.join(missing)}")
        if self.window < 1 or self.step < 1:
            raise ConfigError("window and step must be >= 1")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.n_surr < 2:
            raise ConfigError("n_surr must be >= 2")
        if not 0 < self.bin_width <= 1:
            raise ConfigError("bin_width must be in (0, 1]")
        if any(n < 3 for n in self.n_thresholds):
            raise ConfigError("n_thresholds must all be >= 3")
        for a, b in self.periods:
            if a > b:
                raise ConfigError(f"period {a}..{b} is reversed")

    @property
    def hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def stage_ingest(inputs: Sequence[Path], rules_path: Path | None, out: Path | None = None) -> tuple[Corpus, NormalizationRules | None]:
    rules = NormalizationRules.load(rules_path) if rules_path else None
    corpus = read_corpus(inputs, rules)
    if out is not None:
        write_corpus(corpus, out)
    return corpus, rules


def stage_filter(corpus: Corpus, queries_path: Path, rules: NormalizationRules | None, out: Path | None = None) -> Corpus:
    queries = load_queries(queries_path, rules)
    if not queries:
        raise DataError(f"{queries_path}: no queries")
    kept = filter_corpus(corpus, queries)
    if out is not None:
        write_corpus(kept, out)
    return kept


def stage_active(corpus: Corpus, min_posts: int, out: Path) -> set[str]:
    active = select_active_users(corpus, min_posts)
    counts = post_counts(corpus)
    write_csv(out, ["author_id", "posts"], ((u, counts[u]) for u in sorted(active)))
    return active


def stage_lexicon(
    corpus: Corpus,
    seed_pro: Path,
    seed_anti: Path,
    out_dir: Path,
    iterations: int = 4,
    min_count: int = 3,
    burst_k: int = 30,
    burst_ratio_min: float = 3.0,
) -> tuple[StanceLexicon, dict, list[Path]]:
    lex = expand_lexicons(corpus, read_term_list(seed_pro), read_term_list(seed_anti), iterations, min_count)
    lex_path = out_dir / "lexicon.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    lex.save(lex_path)
    labels = [heuristic_label(t, lex) for t in corpus]
    written = [lex_path]
    summary = {
        "pro_terms": len(lex.pro),
        "anti_terms": len(lex.anti),
        "labeled_fraction": labeled_fraction(corpus, lex) if len(corpus) else 0.0,
        "bursts": {},
    }
    for side in (HeuristicLabel.PRO, HeuristicLabel.ANTI):
        tweets = [t for t, lab in zip(corpus, labels) if lab is side]
        bursts = burst_hashtags(tweets, burst_k, burst_ratio_min)
        p = out_dir / f"bursts_{side.value}.csv"
        write_burst_report(bursts, tweets, p)
        written.append(p)
        summary["bursts"][side.value] = [[b.hashtag, b.peak_day.isoformat(), b.peak_count] for b in bursts]
    p = write_json(out_dir / "lexicon_summary.json", summary)
    written.append(p)
    return lex, summary, written


def train_kwargs(cfg: PipelineConfig) -> dict:
    return {"epochs": cfg.epochs, "reg": cfg.reg, "lr": cfg.lr, "batch_size": cfg.batch_size}


def stage_train(
    corpus: Corpus,
    gold_path: Path,
    seed: int,
    out_dir: Path,
    cv_folds: int = 20,
    **train_kw,
) -> tuple[StanceModel, dict, list[Path]]:
    gold = read_gold(gold_path, corpus)
    report = cross_validate(gold, cv_folds, stream_seed(seed, "cv"), **train_kw)
    model = train(gold, stream_seed(seed, "train"), **train_kw)
    out_dir.mkdir(parents=True, exist_ok=True)
    mp, ep = out_dir / "model.json", out_dir / "eval.json"
    model.save(mp)
    doc = report.to_json()
    doc["train_accuracy"] = model.train_accuracy
    doc["n_gold"] = len(gold)
    write_json(ep, doc)
    return model, doc, [mp, ep]


def write_predictions(corpus: Corpus, predictions: Sequence[str], path: Path) -> Path:
    return write_csv(
        path,
        ["tweet_id", "author_id", "timestamp", "class"],
        ((t.id, t.author_id, t.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"), c) for t, c in zip(corpus, predictions)),
    )


def read_predictions(path: Path) -> list[tuple[str, str, datetime, str]]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            if r["class"] not in CLASSES:
                raise DataError(f"{path}: unknown class {r['class']!r}")
            out.append((r["tweet_id"], r["author_id"], parse_timestamp(r["timestamp"]), r["class"]))
    out.sort(key=lambda r: (r[2], r[0]))
    return out


def stage_classify(corpus: Corpus, model: StanceModel, out_dir: Path) -> tuple[list[str], list[Path]]:
    preds = model.predict_many(corpus.tweets)
    pp = write_predictions(corpus, preds, out_dir / "predictions.csv")
    daily = daily_stance_proportions(corpus, predictions=preds)
    counts: dict[date, int] = {}
    for t in corpus:
        counts[t.day] = counts.get(t.day, 0) + 1
    dp = write_csv(
        out_dir / "daily_stance.csv",
        ["day", "n", "pro", "neutral", "anti"],
        ((d.isoformat(), counts.get(d, 0), *(fr if fr else (None, None, None))) for d, fr in daily),
    )
    return preds, [pp, dp]


def stage_network(
    corpus: Corpus,
    seeds_path: Path,
    seed: int,
    out_dir: Path,
    window: int = 3,
    step: int = 1,
    users: set[str] | None = None,
    max_sweeps: int = 100,
    weighted: bool = True,
    n_surr: int = 100,
    q_snapshots: int = 1,
    swaps_per_edge: int = 10,
    strict: bool = False,
) -> tuple[list[GraphSnapshot], dict, list[Path]]:
    """Snapshots, warm-started propagation chain, per-day stats and QReports."""
    seeds = read_seeds(seeds_path)
    raw = build_snapshots(corpus, window, step, users)
    chain = propagate_chain(raw, seeds, stream_seed(seed, "propagation"), max_sweeps, weighted)
    stuck = [g.day.isoformat() for g in chain if not g.converged]
    if strict and stuck:
        raise NonConvergence(f"propagation did not converge on {stuck}")
    written: list[Path] = []
    snap_dir = out_dir / "snapshots"
    for g in chain:
        written += write_snapshot(g, snap_dir)
    stats_rows = []
    raw_sizes = {g.day: len(g.nodes) for g in raw}
    for g in chain:
        s = graph_stats(g)
        stats_rows.append((g.day.isoformat(), raw_sizes[g.day], s.n_nodes, s.n_edges, g.total_weight,
                           s.density, s.mean_degree, s.clustering, s.assortativity, int(bool(g.converged))))
    written.append(write_csv(out_dir / "graph_stats.csv",
                             ["day", "nodes_before_giant", "nodes", "edges", "total_weight", "density",
                              "mean_degree", "clustering", "assortativity", "converged"], stats_rows))
    qreports = []
    for k, g in enumerate(chain[:q_snapshots]):
        rep = surrogate_zscore(g, seeds, n_surr, stream_seed(seed, f"surrogates/{k}"), swaps_per_edge,
                               actual_labels=g.labels, weighted=weighted)
        qreports.append(rep.to_json())
    q_series = [modularity(g, g.labels, weighted) for g in chain]
    qdoc = {
        "reports": qreports,
        "q_per_snapshot": [[g.day.isoformat(), q] for g, q in zip(chain, q_series)],
        "q_mean": float(np.mean(q_series)) if q_series else None,
        "q_std": float(np.std(q_series, ddof=1)) if len(q_series) > 1 else None,
        "non_converged": [g.day.isoformat() for g in chain if not g.converged],
        "n_snapshots": len(chain),
        "skipped": sorted({g.day.isoformat() for g in raw} - {g.day.isoformat() for g in chain}),
    }
    written.append(write_json(out_dir / "qreport.json", qdoc))
    return chain, qdoc, written


def stage_communities(snapshots: Sequence[GraphSnapshot], out_dir: Path) -> list[Path]:
    sizes = community_sizes(snapshots)
    p1 = write_csv(out_dir / "community_sizes.csv", ["day", "secular", "islamist", "size"],
                   ((c.day.isoformat(), c.secular, c.islamist, c.size) for c in sizes))
    p2 = write_csv(out_dir / "network_switches.csv",
                   ["day", "ratio", "secular_to_islamist", "islamist_to_secular", "common", "changed"],
                   ((d.isoformat(), s.ratio, s.sec_to_isl, s.isl_to_sec, s.n_common, s.n_changed)
                    for d, s in switch_series(list(snapshots))))
    return [p1, p2]


def sequences_from_predictions(rows) -> dict[str, list[str]]:
    seqs: dict[str, list[str]] = {}
    for _, author, _, cls in rows:
        if cls in (PRO, ANTI):
            seqs.setdefault(author, []).append(cls)
    return seqs


def stage_switches(pred_rows, thresholds: Sequence[int], out_dir: Path) -> tuple[list[dict], list[Path]]:
    seqs = sequences_from_predictions(pred_rows)
    summary, records = [], []
    for n in thresholds:
        rep = switches_from_sequences(seqs, n)
        summary.append({"n": n, "users_examined": rep.users_examined, "pro_to_anti": rep.pro_to_anti,
                        "anti_to_pro": rep.anti_to_pro, "switch_rate": rep.switch_rate})
        records += [(n, r.user, r.n_classified, r.first_score, r.last_score, r.verdict) for r in rep.records]
    p1 = write_csv(out_dir / "switches.csv", ["n", "users_examined", "pro_to_anti", "anti_to_pro", "switch_rate"],
                   ((s["n"], s["users_examined"], s["pro_to_anti"], s["anti_to_pro"], s["switch_rate"]) for s in summary))
    p2 = write_csv(out_dir / "switch_users.csv", ["n", "user", "n_classified", "first_third_anti", "last_third_anti", "verdict"], records)
    return summary, [p1, p2]


def period_tag(t0: date, tf: date, cfg_hash: str | None) -> str:
    tag = f"{t0.isoformat()}_{tf.isoformat()}"
    return f"{tag}_{cfg_hash}" if cfg_hash else tag


def stage_softlabels(
    snapshots: Sequence[GraphSnapshot],
    t0: date,
    tf: date,
    bin_width: float,
    out_dir: Path,
    cfg_hash: str | None = None,
) -> tuple[dict[str, SoftLabel], list[Path]]:
    table = soft_labels(snapshots, t0, tf)
    tag = period_tag(t0, tf, cfg_hash)
    p1 = write_csv(out_dir / f"softlabels_{tag}.csv", ["user", "leaning", "present", "strength"],
                   ((u, s.leaning, s.present, s.strength) for u, s in table.items()))
    hist = leaning_histogram(table, bin_width)
    p2 = write_csv(out_dir / f"histogram_{tag}.csv", ["bin", "lo", "hi", "count", "mean_strength"],
                   ((k, b.lo, b.hi, b.count, b.mean_strength) for k, b in enumerate(hist)))
    return table, [p1, p2]


def read_softlabels(path: Path) -> dict[str, SoftLabel]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {r["user"]: SoftLabel(float(r["leaning"]), int(r["present"]), float(r["strength"])) for r in csv.DictReader(fh)}


def stage_correlate(pred_rows, table: dict[str, SoftLabel], out_dir: Path, tag: str = "") -> tuple[dict, list[Path]]:
    polarity = content_polarity(sequences_from_predictions(pred_rows))
    suffix = f"_{tag}" if tag else ""
    try:
        corr = content_network_correlation(polarity, table)
    except ValueError as exc:
        doc = {"r": None, "n": 0, "error": str(exc)}
        return doc, [write_json(out_dir / f"correlation{suffix}.json", doc)]
    doc = {"r": corr.r, "n": corr.n}
    p1 = write_json(out_dir / f"correlation{suffix}.json", doc)
    p2 = write_csv(out_dir / f"correlation_pairs{suffix}.csv", ["user", "content_polarity", "soft_label"], corr.pairs)
    return doc, [p1, p2]


# --------------------------------------------------------------------------
# runner
# --------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = cfg.output_dir
        self.stages: list[dict] = []
        self.outputs: list[Path] = []
        self.status = "running"
        self.failed_stage: str | None = None
        self.error: str | None = None

    def record(self, name: str, seconds: float, paths: Sequence[Path]) -> None:
        rel = [str(p.relative_to(self.root)) for p in paths]
        self.stages.append({"name": name, "seconds": round(seconds, 3), "outputs": rel})
        self.outputs += list(paths)

    def write(self) -> Path:
        cfg = self.cfg
        doc = {
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "config_hash": cfg.hash,
            "config": cfg.raw,
            "seed": cfg.seed,
            "stream_seeds": {name: stream_seed(cfg.seed, name) for name in ("cv", "train", "propagation")},
            "versions": {"polardyn": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "stages": self.stages,
            "outputs": {str(p.relative_to(self.root)): _sha256(p) for p in sorted(self.outputs)},
        }
        return write_json(self.root / "manifest.json", doc)


def run(cfg: PipelineConfig) -> dict:
    """Run every stage in dependency order and write the report bundle.

    A failing stage is re-raised as :class:`StageError` after a manifest of
    the completed stages has been written.
    """
    root = cfg.output_dir
    root.mkdir(parents=True, exist_ok=True)
    man = Manifest(cfg)
    state: dict = {}

    def step(name: str, fn: Callable[[], list[Path]]) -> None:
        t = time.perf_counter()
        try:
            paths = fn()
        except Exception as exc:
            man.status, man.failed_stage, man.error = "failed", name, str(exc)
            man.write()
            raise StageError(name, exc) from exc
        man.record(name, time.perf_counter() - t, paths)
        logger.info("stage %s done in %.2fs", name, time.perf_counter() - t)

    def ingest():
        corpus, rules = stage_ingest(cfg.inputs, cfg.rules)
        state["rules"] = rules
        state["n_ingested"] = len(corpus)
        if cfg.queries is not None:
            corpus = stage_filter(corpus, cfg.queries, rules)
        state["corpus"] = corpus
        out = root / "corpus.jsonl"
        write_corpus(corpus, out)
        return [out]

    def active():
        state["active"] = stage_active(state["corpus"], cfg.min_posts, root / "active_users.csv")
        return [root / "active_users.csv"]

    def lexicon():
        _, state["lexicon"], paths = stage_lexicon(state["corpus"], cfg.seed_pro, cfg.seed_anti, root / "lexicon",
                                                   cfg.lexicon_iterations, cfg.lexicon_min_count, cfg.burst_k,
                                                   cfg.burst_ratio_min)
        return paths

    def classifier():
        state["model"], state["eval"], paths = stage_train(state["corpus"], cfg.gold, cfg.seed, root / "classifier",
                                                          cfg.cv_folds, **train_kwargs(cfg))
        return paths

    def classify():
        _, paths = stage_classify(state["corpus"], state["model"], root / "content")
        state["pred_rows"] = read_predictions(root / "content" / "predictions.csv")
        return paths

    def network():
        chain, state["qdoc"], paths = stage_network(
            state["corpus"], cfg.network_seeds, cfg.seed, root / "network", cfg.window, cfg.step,
            state["active"], cfg.max_sweeps, cfg.weighted, cfg.n_surr, cfg.q_snapshots, cfg.swaps_per_edge, cfg.strict)
        state["chain"] = chain
        if not chain:
            raise DataError("no labeled snapshots (no reposts, or seeds absent)")
        return paths

    def communities():
        return stage_communities(state["chain"], root / "network")

    def switches():
        state["switches"], paths = stage_switches(state["pred_rows"], cfg.n_thresholds, root / "content")
        return paths

    def softlabels():
        chain = state["chain"]
        full = (chain[0].day, chain[-1].day)
        periods = [full] + [p for p in cfg.periods if p != full]
        paths, state["tables"] = [], []
        for t0, tf in periods:
            table, ps = stage_softlabels(chain, t0, tf, cfg.bin_width, root / "dynamics", cfg.hash)
            state["tables"].append(((t0, tf), table))
            paths += ps
        return paths

    def correlate():
        (t0, tf), table = state["tables"][0]
        state["correlation"], paths = stage_correlate(state["pred_rows"], table, root / "dynamics",
                                                      period_tag(t0, tf, cfg.hash))
        return paths

    def bundle():
        doc = {
            "config_hash": cfg.hash,
            "seed": cfg.seed,
            "tweets_ingested": state["n_ingested"],
            "tweets_after_filter": len(state["corpus"]),
            "active_users": len(state["active"]),
            "lexicon": {k: v for k, v in state["lexicon"].items() if k != "bursts"},
            "classifier": {k: state["eval"][k] for k in ("mean", "std", "confusion", "train_accuracy", "n_gold")},
            "network": {k: state["qdoc"][k] for k in ("q_mean", "q_std", "n_snapshots", "non_converged")},
            "qreports": [{k: r[k] for k in ("day", "q_actual", "mean", "std", "z", "z_infinite")} for r in state["qdoc"]["reports"]],
            "switches": state["switches"],
            "correlation": state["correlation"],
        }
        return [write_json(root / "bundle.json", doc)]

    for name, fn in [("ingest", ingest), ("active_users", active), ("lexicon", lexicon), ("train", classifier),
                     ("classify", classify), ("network", network), ("communities", communities),
                     ("switches", switches), ("softlabels", softlabels), ("correlate", correlate),
                     ("bundle", bundle)]:
        step(name, fn)
    man.status = "ok"
    man.write()
    return json.loads((root / "bundle.json").read_text(encoding="utf-8"))
