"""Synthetic corpora and graphs with known ground truth.

Text is token soup, not language: each side has its own marker words and
hashtags drawn among shared noise tokens, and the marker probability sets
how hard classification is. Reposts follow a two-community preference with
Zipf-distributed popularity inside each community, so each community has a
hub (its network seed) and the graph is sparse and disassortative.
"""

from __future__ import annotations

import bisect
import csv
import dataclasses
import json
import math
import random
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from . import ANTI, ISLAMIST, NEUTRAL, PRO, SECULAR
from .corpus import Corpus, Tweet, default_rules, write_corpus
from .dynamics import SoftLabel
from .netdyn import GraphSnapshot, write_seeds

STANCE_OF_COMMUNITY = {SECULAR: PRO, ISLAMIST: ANTI}


@dataclass
class ScenarioSpec:
    n_users: int = 1000
    n_days: int = 20
    start: date = date(2013, 6, 21)
    tweets_per_user: float = 20.0  # mean over the whole period
    exact_tweets: int | None = None  # every user gets exactly this many on-topic tweets
    n_markers: int = 20  # per side, half hashtags and half words
    n_noise: int = 400
    marker_prob: float = 0.3
    tweet_len: tuple[int, int] = (4, 12)
    separable: bool = True
    neutral_rate: float = 0.1
    offtopic_rate: float = 0.0
    secular_share: float = 0.5
    stance_align: float = 1.0  # P(user stance matches its community's default stance)
    n_switchers: int = 0
    switch_day: int = 10
    switch_direction: str = "pro_to_anti"
    repost_rate: float = 0.5
    p_in: float = 0.95
    p_out: float = 0.05
    n_network_seeds: int = 5  # top-ranked users per community
    zipf_exponent: float = 1.0
    changepoint_day: int | None = None
    volume_pre: tuple[float, float] = (1.0, 1.0)  # (secular, islamist) activity multipliers
    volume_post: tuple[float, float] = (1.0, 1.0)
    n_gold: int = 1000
    seed: int = 0

    def validate(self) -> None:
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ValueError(f"infeasible repost preference: need 0 <= p_out < p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if self.n_users < 4 or self.n_days < 1:
            raise ValueError("need at least 4 users and 1 day")
        if not 0 <= self.marker_prob <= 1:
            raise ValueError("marker_prob must be in [0, 1]")
        lo, hi = self.tweet_len
        if not 1 <= lo <= hi:
            raise ValueError("tweet_len must satisfy 1 <= lo <= hi")
        if self.switch_direction not in ("pro_to_anti", "anti_to_pro"):
            raise ValueError("switch_direction must be pro_to_anti or anti_to_pro")
        if not 1 <= self.n_network_seeds <= self.n_users // 2:
            raise ValueError("n_network_seeds must be in [1, n_users/2]")
        if self.n_switchers > self.n_users:
            raise ValueError("more switchers than users")

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["start"] = self.start.isoformat()
        d["tweet_len"] = list(self.tweet_len)
        d["volume_pre"] = list(self.volume_pre)
        d["volume_post"] = list(self.volume_post)
        return d

    @classmethod
    def from_json(cls, doc: dict) -> ScenarioSpec:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        d = dict(doc)
        if "start" in d:
            d["start"] = date.fromisoformat(d["start"])
        for key in ("tweet_len", "volume_pre", "volume_post"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def preset(name: str, seed: int = 0) -> ScenarioSpec:
    """Named scenarios used by the demo, the tests and the scripts."""
    if name == "demo":
        return ScenarioSpec(
            n_users=5000, n_days=20, tweets_per_user=20.0, neutral_rate=0.1, offtopic_rate=0.05,
            stance_align=0.85, n_switchers=100, changepoint_day=10,
            volume_pre=(1.4, 0.6), volume_post=(0.6, 1.4), seed=seed,
        )
    if name == "small":
        return ScenarioSpec(
            n_users=400, n_days=12, tweets_per_user=15.0, neutral_rate=0.1, offtopic_rate=0.05,
            stance_align=0.85, n_switchers=10, switch_day=6, changepoint_day=6,
            volume_pre=(1.4, 0.6), volume_post=(0.6, 1.4), n_gold=400, seed=seed,
        )
    if name == "switch":
        return ScenarioSpec(
            n_users=1000, exact_tweets=24, neutral_rate=0.0, n_switchers=50, repost_rate=0.0,
            n_gold=600, seed=seed,
        )
    if name == "stable":
        return ScenarioSpec(
            n_users=1000, exact_tweets=24, neutral_rate=0.0, n_switchers=0, repost_rate=0.0,
            n_gold=600, seed=seed,
        )
    if name == "regime":
        return ScenarioSpec(
            n_users=1500, n_days=20, tweets_per_user=12.0, neutral_rate=0.0, changepoint_day=10,
            volume_pre=(1.4, 0.6), volume_post=(0.6, 1.4), n_gold=600, seed=seed,
        )
    raise ValueError(f"unknown preset {name!r}")


@dataclass
class GroundTruth:
    community: dict[str, int]
    initial_stance: dict[str, str]
    switch_day: dict[str, int | None]
    tweet_class: dict[str, str]  # tweet id -> class, on-topic tweets only
    gold: list[tuple[str, str]]
    network_seeds: dict[str, int]
    lexicon_seeds: tuple[list[str], list[str]]
    markers: dict[str, list[str]]
    start: date
    n_days: int
    marker_slots: int = 0
    total_slots: int = 0

    def stance_on(self, user: str, day_index: int) -> str:
        s = self.initial_stance[user]
        sd = self.switch_day[user]
        if sd is not None and day_index >= sd:
            return ANTI if s == PRO else PRO
        return s

    @property
    def switchers(self) -> set[str]:
        return {u for u, d in self.switch_day.items() if d is not None}


@dataclass
class Scenario:
    spec: ScenarioSpec
    corpus: Corpus
    truth: GroundTruth
    queries: list[str] = field(default_factory=list)


def _vocab(prefix: str, n: int) -> list[str]:
    half = max(1, n // 2)
    return [f"#{prefix}{k}" for k in range(half)] + [f"{prefix}w{k}" for k in range(n - half)]


def _zipf_picker(users: list[str], exponent: float, rng: random.Random):
    weights = [1.0 / (r + 1) ** exponent for r in range(len(users))]
    cum = []
    acc = 0.0
    for w in weights:
        acc += w
        cum.append(acc)

    def pick(exclude: str) -> str:
        while True:
            u = users[bisect.bisect_left(cum, rng.random() * acc)]
            if u != exclude or len(users) == 1:
                return u

    return pick


def generate(spec: ScenarioSpec) -> Scenario:
    spec.validate()
    rng = random.Random(f"polardyn-synth/{spec.seed}")
    users = [f"u{k:05d}" for k in range(spec.n_users)]
    n_sec = int(round(spec.secular_share * spec.n_users))
    community = {u: (SECULAR if k < n_sec else ISLAMIST) for k, u in enumerate(users)}
    members = {SECULAR: users[:n_sec], ISLAMIST: users[n_sec:]}
    # popularity order inside each community is a seeded shuffle; rank 0 is the hub
    for c in members:
        members[c] = list(members[c])
        rng.shuffle(members[c])
    seed_users = {u: c for c in members for u in members[c][: spec.n_network_seeds]}

    stance = {}
    for u in users:
        base = STANCE_OF_COMMUNITY[community[u]]
        if u not in seed_users and rng.random() > spec.stance_align:
            base = ANTI if base == PRO else PRO
        stance[u] = base

    switch_day: dict[str, int | None] = {u: None for u in users}
    if spec.n_switchers:
        src = PRO if spec.switch_direction == "pro_to_anti" else ANTI
        pool = sorted(u for u in users if stance[u] == src and u not in seed_users)
        if len(pool) < spec.n_switchers:
            raise ValueError("not enough users of the source stance for the planted switchers")
        for u in rng.sample(pool, spec.n_switchers):
            switch_day[u] = spec.switch_day

    markers = {PRO: _vocab("pro", spec.n_markers), ANTI: _vocab("anti", spec.n_markers),
               NEUTRAL: _vocab("neu", spec.n_markers)}
    noise = [f"w{k}" for k in range(spec.n_noise)]
    offtopic = [f"off{k}" for k in range(max(10, spec.n_noise // 4))]
    pickers = {c: _zipf_picker(members[c], spec.zipf_exponent, rng) for c in members}
    same_p = spec.p_in / (spec.p_in + spec.p_out)

    def multiplier(c: int, d: int) -> float:
        if spec.changepoint_day is None or d < spec.changepoint_day:
            return spec.volume_pre[c]
        return spec.volume_post[c]

    raw: list[tuple[int, str, str, str | None, str]] = []  # (second, author, text, repost_of, class)
    marker_slots = total_slots = 0
    day_secs = 86400
    base_rate = spec.tweets_per_user / spec.n_days
    lo, hi = spec.tweet_len

    def make_text(cls: str) -> str:
        nonlocal marker_slots, total_slots
        n_tok = rng.randint(lo, hi)
        toks, n_mark = [], 0
        for _ in range(n_tok):
            if rng.random() < spec.marker_prob:
                toks.append(rng.choice(markers[cls]))
                n_mark += 1
            else:
                toks.append(rng.choice(noise))
        marker_slots += n_mark
        total_slots += n_tok
        if spec.separable and n_mark == 0:
            toks[rng.randrange(n_tok)] = rng.choice(markers[cls])
        return " ".join(toks)

    def emit(u: str, d: int) -> None:
        sec = d * day_secs + rng.randrange(day_secs)
        if spec.offtopic_rate and rng.random() < spec.offtopic_rate:
            text = " ".join(rng.choice(offtopic) for _ in range(rng.randint(lo, hi)))
            raw.append((sec, u, text, None, ""))
            return
        s = stance[u]
        if switch_day[u] is not None and d >= switch_day[u]:
            s = ANTI if s == PRO else PRO
        cls = NEUTRAL if rng.random() < spec.neutral_rate else s
        target = None
        if rng.random() < spec.repost_rate:
            c = community[u] if rng.random() < same_p else 1 - community[u]
            target = pickers[c](u)
            if target == u:
                target = None
        raw.append((sec, u, make_text(cls), target, cls))

    for u in users:
        if spec.exact_tweets is not None:
            days = sorted(rng.randrange(spec.n_days) for _ in range(spec.exact_tweets))
            for d in days:
                emit(u, d)
            continue
        for d in range(spec.n_days):
            lam = base_rate * multiplier(community[u], d)
            # Poisson draw by inversion; rates here are small
            k, p, L = 0, 1.0, math.exp(-lam)
            while True:
                p *= rng.random()
                if p <= L:
                    break
                k += 1
            for _ in range(k):
                emit(u, d)

    t0 = datetime(spec.start.year, spec.start.month, spec.start.day, tzinfo=timezone.utc)
    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    tweets, tweet_class = [], {}
    for k, (sec, u, text, target, cls) in enumerate(raw):
        tid = f"t{k:07d}"
        tweets.append(Tweet(tid, u, t0 + timedelta(seconds=sec), text, target))
        if cls:
            tweet_class[tid] = cls
    corpus = Corpus(tweets)

    on_topic = sorted(tweet_class)
    gold_ids = sorted(rng.sample(on_topic, min(spec.n_gold, len(on_topic))))
    gold = [(tid, tweet_class[tid]) for tid in gold_ids]
    lex_seeds = (markers[PRO][:3], markers[ANTI][:3])
    truth = GroundTruth(
        community=community,
        initial_stance=stance,
        switch_day=switch_day,
        tweet_class=tweet_class,
        gold=gold,
        network_seeds=dict(sorted(seed_users.items())),
        lexicon_seeds=lex_seeds,
        markers=markers,
        start=spec.start,
        n_days=spec.n_days,
        marker_slots=marker_slots,
        total_slots=total_slots,
    )
    # words first: a query line starting with '#' would read as a comment
    queries = [" OR ".join(sorted(markers[c], key=lambda m: (m.startswith("#"), m))) for c in (PRO, ANTI, NEUTRAL)]
    return Scenario(spec, corpus, truth, queries)


# --------------------------------------------------------------------------
# graph and score generators
# --------------------------------------------------------------------------


def planted_partition(n: int = 60, p_in: float = 0.2, p_out: float = 0.01, seed: int = 0):
    """Two equal blocks; undirected pairs linked with p_in / p_out, each
    edge given a random direction. Returns (graph, truth, seeds) with one
    random seed per block."""
    if not 0 <= p_out < p_in <= 1:
        raise ValueError("need 0 <= p_out < p_in <= 1")
    rng = random.Random(f"planted/{seed}")
    nodes = [f"n{k:04d}" for k in range(n)]
    truth = {v: (SECULAR if k < n // 2 else ISLAMIST) for k, v in enumerate(nodes)}
    edges = {}
    for a in range(n):
        for b in range(a + 1, n):
            p = p_in if truth[nodes[a]] == truth[nodes[b]] else p_out
            if rng.random() < p:
                i, j = (nodes[a], nodes[b]) if rng.random() < 0.5 else (nodes[b], nodes[a])
                edges[(i, j)] = 1
    seeds = {rng.choice(nodes[: n // 2]): SECULAR, rng.choice(nodes[n // 2 :]): ISLAMIST}
    return GraphSnapshot(date(2000, 1, 1), edges), truth, seeds


def aligned_scores(n_users: int = 2000, rho: float = 0.6, seed: int = 0,
                   n_snapshots: int = 20, n_tweets: int = 30):
    """Per-user content polarity and soft labels with planted correlation ``rho``.

    Latent leaning s and noise e are independent uniforms; polarity is the
    affine image in [0, 1] of rho*s + sqrt(1-rho^2)*e (standardized), so the
    population correlation is exactly rho. Both sides are then observed as
    counts: Islamist labels out of ``n_snapshots`` and Anti tweets out of
    ``n_tweets``.
    """
    if not -1 <= rho <= 1:
        raise ValueError("rho must be in [-1, 1]")
    rng = random.Random(f"aligned/{seed}")
    root3 = math.sqrt(3.0)
    span = (abs(rho) + math.sqrt(1 - rho * rho)) * root3
    polarity, table = {}, {}
    for k in range(n_users):
        s = rng.random()
        e = rng.random()
        z = rho * (s - 0.5) * 2 * root3 + math.sqrt(1 - rho * rho) * (e - 0.5) * 2 * root3
        p = (z + span) / (2 * span)
        u = f"u{k:05d}"
        isl = int(round(s * n_snapshots))
        polarity[u] = round(p * n_tweets) / n_tweets
        table[u] = SoftLabel(isl / n_snapshots, n_snapshots, 1.0 + 4.0 * rng.random())
    return polarity, table


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------


def write_scenario(sc: Scenario, out_dir: str | Path) -> dict[str, Path]:
    """Write the corpus, gold labels, seed lists, queries, rules, ground
    truth tables and a ready-to-run pipeline config into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.jsonl",
        "gold": out / "gold.csv",
        "seed_pro": out / "seeds_pro.txt",
        "seed_anti": out / "seeds_anti.txt",
        "network_seeds": out / "network_seeds.csv",
        "queries": out / "queries.txt",
        "rules": out / "rules.json",
        "scenario": out / "scenario.json",
        "truth_users": out / "truth_users.csv",
        "truth_daily": out / "truth_daily.csv",
        "truth_tweets": out / "truth_tweets.csv",
        "config": out / "config.json",
    }
    tr = sc.truth
    write_corpus(sc.corpus, paths["corpus"])
    with open(paths["gold"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tweet_id", "class"])
        w.writerows(tr.gold)
    paths["seed_pro"].write_text("\n".join(tr.lexicon_seeds[0]) + "\n", encoding="utf-8")
    paths["seed_anti"].write_text("\n".join(tr.lexicon_seeds[1]) + "\n", encoding="utf-8")
    write_seeds(tr.network_seeds, paths["network_seeds"])
    paths["queries"].write_text("// synthetic topic queries, one per side\n" + "\n".join(sc.queries) + "\n", encoding="utf-8")
    paths["rules"].write_text(json.dumps(default_rules().to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    paths["scenario"].write_text(json.dumps(sc.spec.to_json(), indent=1) + "\n", encoding="utf-8")
    with open(paths["truth_users"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "community", "initial_stance", "switch_day"])
        for u in sorted(tr.community):
            sd = tr.switch_day[u]
            w.writerow([u, tr.community[u], tr.initial_stance[u], "" if sd is None else sd])
    with open(paths["truth_daily"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "day", "stance", "community", "switch_day"])
        for u in sorted(tr.community):
            sd = tr.switch_day[u]
            for d in range(tr.n_days):
                day = (tr.start + timedelta(days=d)).isoformat()
                w.writerow([u, day, tr.stance_on(u, d), tr.community[u], "" if sd is None else sd])
    with open(paths["truth_tweets"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tweet_id", "class"])
        for tid in sorted(tr.tweet_class):
            w.writerow([tid, tr.tweet_class[tid]])
    config = {
        "inputs": [paths["corpus"].name],
        "rules": paths["rules"].name,
        "queries": paths["queries"].name,
        "seed_pro": paths["seed_pro"].name,
        "seed_anti": paths["seed_anti"].name,
        "network_seeds": paths["network_seeds"].name,
        "gold": paths["gold"].name,
        "seed": sc.spec.seed,
        "output_dir": "out",
    }
    paths["config"].write_text(json.dumps(config, indent=1) + "\n", encoding="utf-8")
    return paths
