"""Tweet records, text normalization, and the immutable corpus container."""

from __future__ import annotations

import csv
import json
import logging
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)

_KEEP_EDGE = {"#", "@"}


class DataError(ValueError):
    """Malformed input data."""


# --------------------------------------------------------------------------
# normalization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldRule:
    """Map single codepoints onto a canonical representative."""

    mapping: dict[str, str]
    kind = "fold"


@dataclass(frozen=True)
class RemoveRule:
    chars: frozenset[str] = frozenset()
    categories: frozenset[str] = frozenset()
    kind = "remove"


@dataclass(frozen=True)
class ReplaceRule:
    """Replace decorative codepoints with plain strings (possibly empty)."""

    mapping: dict[str, str]
    kind = "replace"


@dataclass(frozen=True)
class ElongationRule:
    max_run: int = 2
    kind = "elongation"


Rule = FoldRule | RemoveRule | ReplaceRule | ElongationRule


def _rule_from_dict(d: dict) -> Rule:
    kind = d.get("type")
    if kind == "fold":
        return FoldRule(dict(d["map"]))
    if kind == "remove":
        return RemoveRule(frozenset(d.get("chars", [])), frozenset(d.get("categories", [])))
    if kind == "replace":
        return ReplaceRule(dict(d["map"]))
    if kind == "elongation":
        return ElongationRule(int(d["max_run"]))
    raise ValueError(f"unknown normalization rule type: {kind!r}")


def _rule_to_dict(rule: Rule) -> dict:
    if isinstance(rule, FoldRule):
        return {"type": "fold", "map": dict(sorted(rule.mapping.items()))}
    if isinstance(rule, RemoveRule):
        return {"type": "remove", "chars": sorted(rule.chars), "categories": sorted(rule.categories)}
    if isinstance(rule, ReplaceRule):
        return {"type": "replace", "map": dict(sorted(rule.mapping.items()))}
    return {"type": "elongation", "max_run": rule.max_run}


class NormalizationRules:
    """An ordered, validated list of normalization rules.

    The list is applied repeatedly until the text stops changing, so the
    result is idempotent whatever the rule order. Validation rejects rule
    sets whose character substitutions form a cycle, which is what would
    otherwise keep that loop from terminating.
    """

    MAX_PASSES = 64

    def __init__(self, rules: Sequence[Rule] = ()):
        self.rules = tuple(rules)
        self._validate()
        self._compiled = [self._compile(r) for r in self.rules]

    def _validate(self) -> None:
        graph: dict[str, set[str]] = defaultdict(set)
        for rule in self.rules:
            if isinstance(rule, ElongationRule):
                if rule.max_run < 1:
                    raise ValueError("elongation max_run must be >= 1")
            elif isinstance(rule, (FoldRule, ReplaceRule)):
                for src, dst in rule.mapping.items():
                    if len(src) != 1:
                        raise ValueError(f"{rule.kind} keys must be single codepoints, got {src!r}")
                    if isinstance(rule, FoldRule) and len(dst) > 1:
                        raise ValueError(f"fold values must be at most one codepoint, got {dst!r}")
                    graph[src].update(dst)
        # cycle check over the substitution graph (iterative DFS)
        state: dict[str, int] = {}
        for root in list(graph):
            if root in state:
                continue
            stack = [(root, iter(graph[root]))]
            state[root] = 1
            while stack:
                node, children = stack[-1]
                for child in children:
                    if state.get(child) == 1:
                        raise ValueError(f"normalization substitutions form a cycle through {child!r}")
                    if child not in state:
                        state[child] = 1
                        stack.append((child, iter(graph.get(child, ()))))
                        break
                else:
                    state[node] = 2
                    stack.pop()

    @staticmethod
    def _compile(rule: Rule):
        if isinstance(rule, FoldRule) or isinstance(rule, ReplaceRule):
            table = str.maketrans({k: v for k, v in rule.mapping.items()})
            return lambda s: s.translate(table)
        if isinstance(rule, RemoveRule):
            table = str.maketrans({c: None for c in rule.chars})
            cats = rule.categories
            if not cats:
                return lambda s: s.translate(table)

            ascii_safe = not (cats & _ASCII_CATEGORIES)

            def remove(s: str) -> str:
                s = s.translate(table)
                if ascii_safe and s.isascii():
                    return s  # skip the per-char category lookup
                return _drop_categories(s, cats)

            return remove
        pattern = re.compile(r"(.)\1{%d,}" % rule.max_run, re.DOTALL)
        repl = r"\1" * rule.max_run
        return lambda s: pattern.sub(repl, s)

    def apply(self, text: str) -> str:
        for _ in range(self.MAX_PASSES):
            out = text
            for fn in self._compiled:
                out = fn(out)
            if out == text:
                return out
            text = out
        raise RuntimeError("normalization did not reach a fixed point")

    @classmethod
    def from_json(cls, doc: dict | list) -> NormalizationRules:
        items = doc["rules"] if isinstance(doc, dict) else doc
        return cls([_rule_from_dict(d) for d in items])

    @classmethod
    def load(cls, path: str | Path) -> NormalizationRules:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {"rules": [_rule_to_dict(r) for r in self.rules]}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NormalizationRules) and self.to_json() == other.to_json()

    def __repr__(self) -> str:
        return f"NormalizationRules({list(self.rules)!r})"


_ASCII_CATEGORIES = frozenset(unicodedata.category(chr(i)) for i in range(128))


def _drop_categories(s: str, cats: frozenset[str]) -> str:
    return "".join(ch for ch in s if unicodedata.category(ch) not in cats)


def default_rules() -> NormalizationRules:
    """Example rule set: Arabic letter folding, diacritics and tatweel
    removal, a few decorative symbols, elongation capped at two."""
    return NormalizationRules(
        [
            FoldRule({"أ": "ا", "إ": "ا", "آ": "ا",
                      "ى": "ي", "ة": "ه"}),
            RemoveRule(frozenset({"ـ"}), frozenset({"Mn"})),
            ReplaceRule({"♥": " ", "❤": " ", "★": " ", " ": " "}),
            ElongationRule(2),
        ]
    )


def normalize_text(text: str, rules: NormalizationRules) -> str:
    return rules.apply(text)


# --------------------------------------------------------------------------
# tokens
# --------------------------------------------------------------------------


def _strip_punct(tok: str) -> str:
    start, end = 0, len(tok)
    while start < end and tok[start] not in _KEEP_EDGE and unicodedata.category(tok[start])[0] == "P":
        start += 1
    while end > start and tok[end - 1] not in _KEEP_EDGE and unicodedata.category(tok[end - 1])[0] == "P":
        end -= 1
    return tok[start:end]


def tokenize(text: str) -> list[str]:
    """Whitespace split, edge punctuation stripped ('#' and '@' kept), lowercased."""
    out = []
    for raw in text.split():
        tok = _strip_punct(raw).lower()
        if tok:
            out.append(tok)
    return out


def extract_hashtags(text: str) -> tuple[str, ...]:
    return tuple(t for t in tokenize(text) if t.startswith("#") and len(t) > 1)


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------


def parse_timestamp(value: str | datetime) -> datetime:
    if isinstance(value, datetime):
        ts = value
    else:
        s = value.strip()
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        try:
            ts = datetime.fromisoformat(s)
        except ValueError as exc:
            raise DataError(f"bad timestamp {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Tweet:
    id: str
    author_id: str
    timestamp: datetime
    text: str
    repost_of: str | None = None
    hashtags: tuple[str, ...] = field(init=False)
    tokens: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.repost_of is not None and self.repost_of == self.author_id:
            raise DataError(f"tweet {self.id}: self-repost by {self.author_id}")
        toks = tuple(tokenize(self.text))
        object.__setattr__(self, "tokens", toks)
        object.__setattr__(self, "hashtags", tuple(t for t in toks if t.startswith("#") and len(t) > 1))

    @property
    def day(self) -> date:
        return self.timestamp.date()

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "author_id": self.author_id,
            "timestamp": format_timestamp(self.timestamp),
            "text": self.text,
        }
        if self.repost_of is not None:
            rec["repost_of"] = self.repost_of
        return rec


def tweet_from_record(rec: dict, rules: NormalizationRules | None = None) -> Tweet:
    try:
        tid, author, ts = str(rec["id"]), str(rec["author_id"]), rec["timestamp"]
    except KeyError as exc:
        raise DataError(f"record missing field {exc.args[0]!r}: {rec!r}") from None
    text = rec.get("text") or ""
    if rules is not None:
        text = rules.apply(text)
    repost = rec.get("repost_of")
    repost = str(repost) if repost not in (None, "") else None
    return Tweet(tid, author, parse_timestamp(ts), text, repost)


class Corpus:
    """Immutable, timestamp-sorted tweet list with author and day indices.

    Duplicate ids keep the last record seen; ``n_duplicates`` counts them.
    """

    def __init__(self, tweets: Iterable[Tweet] = ()):
        by_id: dict[str, Tweet] = {}
        dups = 0
        for t in tweets:
            if t.id in by_id:
                dups += 1
            by_id[t.id] = t
        if dups:
            logger.warning("%d duplicate tweet ids (last record kept)", dups)
        self.n_duplicates = dups
        self.n_rejected = 0
        self._tweets: tuple[Tweet, ...] = tuple(sorted(by_id.values(), key=lambda t: (t.timestamp, t.id)))
        by_author: dict[str, list[int]] = defaultdict(list)
        by_day: dict[date, list[int]] = defaultdict(list)
        for i, t in enumerate(self._tweets):
            by_author[t.author_id].append(i)
            by_day[t.day].append(i)
        self._by_author = {k: tuple(v) for k, v in by_author.items()}
        self._by_day = {k: tuple(v) for k, v in sorted(by_day.items())}

    @property
    def tweets(self) -> tuple[Tweet, ...]:
        return self._tweets

    def __len__(self) -> int:
        return len(self._tweets)

    def __iter__(self) -> Iterator[Tweet]:
        return iter(self._tweets)

    def __getitem__(self, i: int) -> Tweet:
        return self._tweets[i]

    @property
    def authors(self) -> list[str]:
        return sorted(self._by_author)

    def by_author(self, author_id: str) -> list[Tweet]:
        return [self._tweets[i] for i in self._by_author.get(author_id, ())]

    def author_positions(self) -> dict[str, tuple[int, ...]]:
        return dict(self._by_author)

    @property
    def days(self) -> list[date]:
        return list(self._by_day)

    def on_day(self, d: date) -> list[Tweet]:
        return [self._tweets[i] for i in self._by_day.get(d, ())]

    def day_positions(self) -> dict[date, tuple[int, ...]]:
        return dict(self._by_day)

    def reposts(self) -> Iterator[Tweet]:
        return (t for t in self._tweets if t.repost_of is not None)

    def subset(self, keep: Iterable[Tweet]) -> Corpus:
        return Corpus(keep)

    def __repr__(self) -> str:
        return f"Corpus({len(self)} tweets, {len(self._by_author)} authors)"


# --------------------------------------------------------------------------
# file IO
# --------------------------------------------------------------------------

CSV_COLUMNS = ["id", "author_id", "timestamp", "text", "repost_of"]


def _iter_records(path: Path) -> Iterator[tuple[int, dict]]:
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                yield lineno, row
        return
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None


def read_corpus(paths: str | Path | Sequence[str | Path], rules: NormalizationRules | None = None) -> Corpus:
    """Read JSONL or CSV tweet files into a corpus, normalizing text if rules are given.

    Self-reposts are dropped and counted in ``Corpus.n_rejected``.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    tweets: list[Tweet] = []
    rejected = 0
    for p in map(Path, paths):
        for lineno, rec in _iter_records(p):
            try:
                tweets.append(tweet_from_record(rec, rules))
            except DataError as exc:
                if "self-repost" not in str(exc):
                    raise DataError(f"{p}:{lineno}: {exc}") from None
                rejected += 1
    if rejected:
        logger.warning("rejected %d self-reposts", rejected)
    c = Corpus(tweets)
    c.n_rejected = rejected
    return c


def write_corpus(corpus: Corpus | Iterable[Tweet], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for t in corpus:
                rec = t.to_record()
                rec.setdefault("repost_of", "")
                w.writerow(rec)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in corpus:
            fh.write(json.dumps(t.to_record(), ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# corpus operations
# --------------------------------------------------------------------------


def filter_corpus(corpus: Corpus, queries: Sequence) -> Corpus:
    """Keep tweets matching at least one query, in corpus order."""
    from .query import eval_query

    if not queries:
        raise ValueError("filter_corpus needs at least one query")
    return Corpus(t for t in corpus if any(eval_query(q, t) for q in queries))


def post_counts(corpus: Corpus) -> Counter:
    return Counter(t.author_id for t in corpus)


def select_active_users(corpus: Corpus, min_posts: int) -> set[str]:
    """Users with strictly more than ``min_posts`` authored or reposted items."""
    if min_posts < 1:
        raise ValueError("min_posts must be >= 1")
    return {u for u, n in post_counts(corpus).items() if n > min_posts}
