"""Time-resolved analyses joining content and network sides."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import ANTI, ISLAMIST, PRO, SECULAR
from .corpus import Corpus
from .netdyn import GraphSnapshot


@dataclass(frozen=True)
class CommunitySize:
    day: date
    secular: int
    islamist: int

    @property
    def size(self) -> int:
        return self.secular + self.islamist


def community_sizes(snapshots: Iterable[GraphSnapshot]) -> list[CommunitySize]:
    out = []
    for g in snapshots:
        counts = Counter(g.labels.get(v) for v in g.nodes)
        if counts.get(None):
            raise ValueError(f"snapshot {g.day} has {counts[None]} unlabeled nodes")
        out.append(CommunitySize(g.day, counts[SECULAR], counts[ISLAMIST]))
    return out


def majority_crossover(series: Sequence[tuple[date, float, float]]) -> date | None:
    """First day on which the second series leads after the first led on
    an earlier day; tied days in between do not reset the comparison."""
    first_led = False
    for d, a, b in series:
        if a > b:
            first_led = True
        elif b > a and first_led:
            return d
    return None


# --------------------------------------------------------------------------
# content switches
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UserSwitch:
    user: str
    n_classified: int
    first_score: float
    last_score: float
    verdict: str  # "pro_to_anti", "anti_to_pro" or "stable"


@dataclass
class SwitchReport:
    n_threshold: int
    users_examined: int
    pro_to_anti: int
    anti_to_pro: int
    records: list[UserSwitch] = field(default_factory=list)

    @property
    def switch_rate(self) -> float:
        """Fraction of examined users who switched, either direction."""
        if not self.users_examined:
            return 0.0
        return (self.pro_to_anti + self.anti_to_pro) / self.users_examined

    @property
    def switched(self) -> set[str]:
        return {r.user for r in self.records if r.verdict != "stable"}


def split_thirds(n: int) -> tuple[slice, slice]:
    """Outer thirds of a length-n sequence: first ceil(n/3), last floor(n/3)."""
    return slice(0, -(-n // 3)), slice(n - n // 3, n)


def switch_verdict(stances: Sequence[str]) -> tuple[float, float, str]:
    first, last = split_thirds(len(stances))
    head, tail = stances[first], stances[last]
    s_first = sum(s == ANTI for s in head) / len(head)
    s_last = sum(s == ANTI for s in tail) / len(tail)
    if s_first < 0.5 and s_last > 0.5:
        verdict = "pro_to_anti"
    elif s_first > 0.5 and s_last < 0.5:
        verdict = "anti_to_pro"
    else:
        verdict = "stable"
    return s_first, s_last, verdict


def user_stance_sequences(corpus: Corpus, predictions: Sequence[str]) -> dict[str, list[str]]:
    """Chronological Pro/Anti predictions per author; Neutral is dropped."""
    seqs: dict[str, list[str]] = defaultdict(list)
    for t, c in zip(corpus, predictions):
        if c == PRO or c == ANTI:
            seqs[t.author_id].append(c)
    return seqs


def content_switches(
    corpus: Corpus,
    model=None,
    n: int = 5,
    predictions: Sequence[str] | None = None,
) -> SwitchReport:
    """First-third vs last-third polarity switches among users with at least
    ``n`` Pro/Anti-classified tweets. Outer-third scores are the fraction
    Anti; a score of exactly 0.5 never counts as a side."""
    if n < 3:
        raise ValueError("n must be >= 3")
    if predictions is None:
        predictions = model.predict_many(corpus.tweets)
    seqs = user_stance_sequences(corpus, predictions)
    return switches_from_sequences(seqs, n)


def switches_from_sequences(seqs: Mapping[str, Sequence[str]], n: int) -> SwitchReport:
    if n < 3:
        raise ValueError("n must be >= 3")
    rep = SwitchReport(n, 0, 0, 0)
    for user in sorted(seqs):
        st = seqs[user]
        if len(st) < n:
            continue
        s1, s2, verdict = switch_verdict(st)
        rep.users_examined += 1
        if verdict == "pro_to_anti":
            rep.pro_to_anti += 1
        elif verdict == "anti_to_pro":
            rep.anti_to_pro += 1
        rep.records.append(UserSwitch(user, len(st), s1, s2, verdict))
    return rep


def content_polarity(seqs: Mapping[str, Sequence[str]]) -> dict[str, float]:
    """Fraction Anti among each user's Pro/Anti tweets over the whole period."""
    return {u: sum(s == ANTI for s in st) / len(st) for u, st in seqs.items() if st}


# --------------------------------------------------------------------------
# network switches
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkSwitch:
    ratio: float | None
    sec_to_isl: float | None
    isl_to_sec: float | None
    n_common: int
    n_changed: int


def network_switch_ratio(prev: Mapping[str, int | None], cur: Mapping[str, int | None]) -> NetworkSwitch:
    """Label changes over nodes common to two labelings; direction fractions
    are over the changed nodes. None marks an undefined value."""
    common = prev.keys() & cur.keys()
    if not common:
        return NetworkSwitch(None, None, None, 0, 0)
    s2i = i2s = 0
    for v in common:
        a, b = prev[v], cur[v]
        if a == b:
            continue
        if a == SECULAR and b == ISLAMIST:
            s2i += 1
        elif a == ISLAMIST and b == SECULAR:
            i2s += 1
    changed = s2i + i2s
    if changed == 0:
        return NetworkSwitch(0.0, None, None, len(common), 0)
    return NetworkSwitch(changed / len(common), s2i / changed, i2s / changed, len(common), changed)


def switch_series(snapshots: Sequence[GraphSnapshot]) -> list[tuple[date, NetworkSwitch]]:
    return [(b.day, network_switch_ratio(a.labels, b.labels)) for a, b in zip(snapshots, snapshots[1:])]


# --------------------------------------------------------------------------
# soft labels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SoftLabel:
    leaning: float
    present: int
    strength: float


def soft_labels(
    snapshots: Iterable[GraphSnapshot],
    t0: date | None = None,
    tf: date | None = None,
) -> dict[str, SoftLabel]:
    """Per user: share of their snapshots with an Islamist label, number of
    snapshots present, and reposts made per snapshot present. Only
    snapshots with ``t0 <= day <= tf`` count."""
    if t0 is not None and tf is not None and t0 > tf:
        raise ValueError("t0 must not be after tf")
    present: Counter = Counter()
    islamist: Counter = Counter()
    reposts: Counter = Counter()
    for g in snapshots:
        if (t0 is not None and g.day < t0) or (tf is not None and g.day > tf):
            continue
        out_s = g.out_strength()
        for v, lab in g.labels.items():
            if lab is None:
                continue
            present[v] += 1
            islamist[v] += lab == ISLAMIST
            reposts[v] += out_s.get(v, 0)
    return {v: SoftLabel(islamist[v] / n, n, reposts[v] / n) for v, n in sorted(present.items())}


@dataclass(frozen=True)
class HistBin:
    lo: float
    hi: float
    count: int
    mean_strength: float | None


def bin_index(value: float, bin_width: float, n_bins: int) -> int:
    # the epsilon keeps exact multiples like 0.15/0.05 out of the lower bin
    k = int(math.floor(value / bin_width + 1e-9))
    return min(max(k, 0), n_bins - 1)


def leaning_histogram(table: Mapping[str, SoftLabel], bin_width: float = 0.05) -> list[HistBin]:
    """Bins [k*bw, (k+1)*bw) over [0, 1]; the last bin also holds 1.0."""
    if not 0 < bin_width <= 1:
        raise ValueError("bin_width must be in (0, 1]")
    n_bins = max(1, int(math.ceil(1.0 / bin_width - 1e-9)))
    counts = [0] * n_bins
    sums = [0.0] * n_bins
    for sl in table.values():
        k = bin_index(sl.leaning, bin_width, n_bins)
        counts[k] += 1
        sums[k] += sl.strength
    return [
        HistBin(k * bin_width, min(1.0, (k + 1) * bin_width), counts[k], sums[k] / counts[k] if counts[k] else None)
        for k in range(n_bins)
    ]


# --------------------------------------------------------------------------
# correlation
# --------------------------------------------------------------------------


@dataclass
class Correlation:
    r: float
    n: int
    pairs: list[tuple[str, float, float]]


def content_network_correlation(polarity: Mapping[str, float], table: Mapping[str, SoftLabel]) -> Correlation:
    """Pearson r between content polarity (fraction Anti) and network soft
    label over users present in both."""
    users = sorted(polarity.keys() & table.keys())
    if len(users) < 2:
        raise ValueError(f"need at least 2 users in common, got {len(users)}")
    x = np.array([polarity[u] for u in users], dtype=float)
    y = np.array([table[u].leaning for u in users], dtype=float)
    if np.ptp(x) == 0:
        raise ValueError("content polarity has zero variance")
    if np.ptp(y) == 0:
        raise ValueError("soft label has zero variance")
    r = float(np.corrcoef(x, y)[0, 1])
    return Correlation(r, len(users), [(u, float(a), float(b)) for u, a, b in zip(users, x, y)])
