"""Stance lexicon bootstrapping, heuristic tweet labeling, bursty hashtags."""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable

from .corpus import Corpus, Tweet


class HeuristicLabel(str, Enum):
    PRO = "pro"
    ANTI = "anti"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class StanceLexicon:
    pro: frozenset[str]
    anti: frozenset[str]
    origin: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        both = self.pro & self.anti
        if both:
            raise ValueError(f"pro and anti lexicons overlap: {sorted(both)[:5]}")
        missing = (self.pro | self.anti) - set(self.origin)
        if missing:
            raise ValueError(f"terms without origin: {sorted(missing)[:5]}")

    @classmethod
    def from_seeds(cls, pro: Iterable[str], anti: Iterable[str]) -> StanceLexicon:
        pro, anti = frozenset(t.lower() for t in pro), frozenset(t.lower() for t in anti)
        return cls(pro, anti, {t: 0 for t in pro | anti})

    def side(self, term: str) -> HeuristicLabel | None:
        if term in self.pro:
            return HeuristicLabel.PRO
        if term in self.anti:
            return HeuristicLabel.ANTI
        return None

    def __len__(self) -> int:
        return len(self.pro) + len(self.anti)

    def to_json(self) -> dict:
        out = {}
        for t in sorted(self.pro | self.anti):
            out[t] = {"side": "pro" if t in self.pro else "anti", "origin": self.origin[t]}
        return out

    @classmethod
    def from_json(cls, doc: dict) -> StanceLexicon:
        pro = frozenset(t for t, v in doc.items() if v["side"] == "pro")
        anti = frozenset(t for t, v in doc.items() if v["side"] == "anti")
        return cls(pro, anti, {t: int(v["origin"]) for t, v in doc.items()})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> StanceLexicon:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def read_term_list(path: str | Path) -> set[str]:
    """One term per line; blank lines and lines starting with '//' are ignored."""
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        s = line.strip()
        if s and not s.startswith("//"):
            terms.add(s.lower())
    return terms


def _label_terms(terms: Iterable[str], pro: frozenset[str], anti: frozenset[str]) -> HeuristicLabel:
    has_pro = has_anti = False
    for term in terms:
        if term in pro:
            has_pro = True
        elif term in anti:
            has_anti = True
    if has_pro and not has_anti:
        return HeuristicLabel.PRO
    if has_anti and not has_pro:
        return HeuristicLabel.ANTI
    return HeuristicLabel.UNLABELED


def heuristic_label(t: Tweet, lex: StanceLexicon) -> HeuristicLabel:
    """Pro iff the tweet holds pro terms and no anti terms; Anti symmetric."""
    return _label_terms(t.tokens, lex.pro, lex.anti)


def expand_lexicons(
    corpus: Corpus,
    seed_pro: Iterable[str],
    seed_anti: Iterable[str],
    iterations: int = 4,
    min_count: int = 3,
) -> StanceLexicon:
    """Grow the seed lexicons by exclusive co-occurrence.

    Each iteration labels the corpus with the current lexicon, then admits
    every term (word or hashtag) found in at least ``min_count`` tweets of
    one side and in no tweet of the other. Counts are per tweet, not per
    occurrence. Terms are never removed; ``origin`` keeps the iteration that
    admitted them.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    seed_pro, seed_anti = set(seed_pro), set(seed_anti)
    if not seed_pro or not seed_anti:
        raise ValueError("both seed lists must be non-empty")
    if seed_pro & seed_anti:
        raise ValueError(f"seed lists overlap: {sorted(seed_pro & seed_anti)}")
    lex = StanceLexicon.from_seeds(seed_pro, seed_anti)
    term_sets = [frozenset(t.tokens) for t in corpus]

    for k in range(1, iterations + 1):
        df = {HeuristicLabel.PRO: Counter(), HeuristicLabel.ANTI: Counter()}
        for terms in term_sets:
            label = _label_terms(terms, lex.pro, lex.anti)
            if label is not HeuristicLabel.UNLABELED:
                df[label].update(terms)
        pro_df, anti_df = df[HeuristicLabel.PRO], df[HeuristicLabel.ANTI]
        known = lex.pro | lex.anti
        new_pro = {t for t, n in pro_df.items() if n >= min_count and t not in anti_df and t not in known}
        new_anti = {t for t, n in anti_df.items() if n >= min_count and t not in pro_df and t not in known}
        origin = dict(lex.origin)
        origin.update({t: k for t in new_pro | new_anti})
        lex = StanceLexicon(lex.pro | new_pro, lex.anti | new_anti, origin)
        if not new_pro and not new_anti:
            break
    return lex


def labeled_fraction(corpus: Corpus, lex: StanceLexicon) -> float:
    if len(corpus) == 0:
        raise ValueError("labeled_fraction of an empty corpus")
    hits = sum(heuristic_label(t, lex) is not HeuristicLabel.UNLABELED for t in corpus)
    return hits / len(corpus)


# --------------------------------------------------------------------------
# bursts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Burst:
    hashtag: str
    peak_day: date
    peak_count: int
    ratio: float


def hashtag_day_counts(tweets: Iterable[Tweet]) -> dict[str, Counter]:
    """hashtag -> Counter(day -> number of tweets carrying the hashtag)."""
    series: dict[str, Counter] = defaultdict(Counter)
    for t in tweets:
        for tag in set(t.hashtags):
            series[tag][t.day] += 1
    return series


def burst_hashtags(
    corpus: Corpus | Iterable[Tweet],
    k: int = 30,
    burst_ratio_min: float = 3.0,
) -> list[Burst]:
    """Top-``k`` hashtags by their largest single-day tweet count.

    Tags whose peak is less than ``burst_ratio_min`` times their mean count
    over active days never burst and are dropped. Ties rank by tag.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out = []
    for tag, per_day in hashtag_day_counts(corpus).items():
        peak = max(per_day.values())
        peak_day = min(d for d, n in per_day.items() if n == peak)
        mean = sum(per_day.values()) / len(per_day)
        ratio = peak / mean
        if ratio < burst_ratio_min:
            continue
        out.append(Burst(tag, peak_day, peak, ratio))
    out.sort(key=lambda b: (-b.peak_count, b.hashtag))
    return out[:k]


def write_burst_report(bursts: list[Burst], tweets: Iterable[Tweet], path: str | Path, label: str = "") -> None:
    """CSV rows (hashtag, day, count) for every ranked tag, for plotting."""
    series = hashtag_day_counts(tweets)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "group", "hashtag", "day", "count"] if label else ["rank", "hashtag", "day", "count"])
        for rank, b in enumerate(bursts, start=1):
            for d in sorted(series[b.hashtag]):
                row = [rank, b.hashtag, d.isoformat(), series[b.hashtag][d]]
                if label:
                    row.insert(1, label)
                w.writerow(row)
