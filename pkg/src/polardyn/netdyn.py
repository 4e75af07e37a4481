"""Sliding-window repost graphs, seeded two-label propagation, modularity
and its significance against degree-preserving surrogates."""

from __future__ import annotations

import csv
import logging
import math
import random
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import ISLAMIST, SECULAR
from .corpus import Corpus, DataError

logger = logging.getLogger(__name__)

Edge = tuple[str, str]


@dataclass
class GraphSnapshot:
    """Repost graph for one window. ``edges[(i, j)] = w``: i reposted j w times.

    ``labels`` maps node -> 0 (secular), 1 (islamist) or None (unassigned).
    """

    day: date
    edges: dict[Edge, int]
    labels: dict[str, int | None] = field(default_factory=dict)
    seeds: frozenset[str] = frozenset()
    converged: bool | None = None

    @property
    def nodes(self) -> set[str]:
        out = set()
        for i, j in self.edges:
            out.add(i)
            out.add(j)
        return out

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())

    def out_strength(self) -> Counter:
        s = Counter()
        for (i, _), w in self.edges.items():
            s[i] += w
        return s

    def __repr__(self) -> str:
        return f"GraphSnapshot({self.day}, {len(self.nodes)} nodes, {len(self.edges)} edges)"


def project_undirected(edges: Mapping[Edge, int], weighted: bool = True) -> dict[Edge, int]:
    """Merge i->j and j->i into one undirected edge keyed (min, max)."""
    out: dict[Edge, int] = defaultdict(int)
    for (i, j), w in edges.items():
        if i == j:
            continue
        key = (i, j) if i < j else (j, i)
        out[key] += w
    if not weighted:
        return {k: 1 for k in out}
    return dict(out)


def adjacency(edges: Mapping[Edge, int], weighted: bool = True) -> dict[str, dict[str, int]]:
    adj: dict[str, dict[str, int]] = defaultdict(dict)
    for (a, b), w in project_undirected(edges, weighted).items():
        adj[a][b] = w
        adj[b][a] = w
    return dict(adj)


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------


def window_bounds(t: date, window_days: int) -> tuple[date, date]:
    """Inclusive day range aggregated by the snapshot at day ``t``."""
    before = window_days // 2
    after = window_days // 2 if window_days % 2 else window_days // 2 - 1
    return t - timedelta(days=before), t + timedelta(days=after)


def repost_events(corpus: Corpus, users: set[str] | None = None) -> dict[date, Counter]:
    per_day: dict[date, Counter] = defaultdict(Counter)
    for t in corpus.reposts():
        if users is not None and t.author_id not in users:
            continue
        per_day[t.day][(t.author_id, t.repost_of)] += 1
    return per_day


def build_snapshots(
    corpus: Corpus,
    window_days: int = 3,
    step_days: int = 1,
    users: set[str] | None = None,
) -> list[GraphSnapshot]:
    """One snapshot per ``step_days`` from the first to the last repost day.

    Edge weights count repost events inside the window; nodes exist only
    as edge endpoints, so silent users never appear. Empty windows are
    skipped. ``users`` restricts events to those made by the given reposters.
    """
    if window_days < 1 or step_days < 1:
        raise ValueError("window_days and step_days must be >= 1")
    per_day = repost_events(corpus, users)
    if not per_day:
        logger.warning("corpus has no repost events; no snapshots built")
        return []
    first, last = min(per_day), max(per_day)
    out = []
    t = first
    while t <= last:
        lo, hi = window_bounds(t, window_days)
        edges: Counter = Counter()
        d = lo
        while d <= hi:
            if d in per_day:
                edges.update(per_day[d])
            d += timedelta(days=1)
        if edges:
            out.append(GraphSnapshot(t, dict(sorted(edges.items()))))
        t += timedelta(days=step_days)
    return out


def connected_components(edges: Mapping[Edge, int]) -> list[set[str]]:
    adj: dict[str, list[str]] = defaultdict(list)
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen: set[str] = set()
    comps = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    comp.add(u)
                    queue.append(u)
        comps.append(comp)
    return comps


def giant_component(g: GraphSnapshot) -> GraphSnapshot:
    """Largest weakly connected component; ties go to the component holding
    the smallest node id."""
    if not g.edges:
        raise ValueError("giant_component of an empty graph")
    comps = connected_components(g.edges)
    size = max(len(c) for c in comps)
    best = min((c for c in comps if len(c) == size), key=min)
    edges = {e: w for e, w in g.edges.items() if e[0] in best}
    labels = {v: lab for v, lab in g.labels.items() if v in best}
    return GraphSnapshot(g.day, edges, labels, frozenset(g.seeds & best), g.converged)


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphStats:
    n_nodes: int
    n_edges: int
    density: float
    mean_degree: float
    clustering: float
    assortativity: float


def graph_stats(g: GraphSnapshot) -> GraphStats:
    """Density, mean degree, mean local clustering (unweighted triangles) and
    strength assortativity, all on the undirected weighted projection."""
    und = project_undirected(g.edges)
    adj: dict[str, set[str]] = defaultdict(set)
    strength: Counter = Counter()
    for (a, b), w in und.items():
        adj[a].add(b)
        adj[b].add(a)
        strength[a] += w
        strength[b] += w
    n, m = len(adj), len(und)
    density = 2.0 * m / (n * (n - 1)) if n > 1 else 0.0
    mean_deg = 2.0 * m / n if n else 0.0
    if n < 3:
        clustering = 0.0
    else:
        total = 0.0
        for v, nb in adj.items():
            k = len(nb)
            if k < 2:
                continue
            links = sum(len(adj[u] & nb) for u in nb) / 2
            total += 2.0 * links / (k * (k - 1))
        clustering = total / n
    if m:
        x = np.empty(2 * m)
        y = np.empty(2 * m)
        for idx, (a, b) in enumerate(und):
            x[2 * idx], y[2 * idx] = strength[a], strength[b]
            x[2 * idx + 1], y[2 * idx + 1] = strength[b], strength[a]
        sx, sy = x.std(), y.std()
        assort = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy)) if sx > 0 and sy > 0 else math.nan
    else:
        assort = math.nan
    return GraphStats(n, m, density, mean_deg, clustering, assort)


# --------------------------------------------------------------------------
# label propagation
# --------------------------------------------------------------------------


@dataclass
class Labeling:
    labels: dict[str, int | None]
    converged: bool
    sweeps: int
    rng_seed: int | str


def label_propagation(
    g: GraphSnapshot,
    seeds: Mapping[str, int],
    init: Mapping[str, int | None] | None = None,
    rng_seed: int | str = 0,
    max_sweeps: int = 100,
    weighted: bool = True,
) -> Labeling:
    """Two-label propagation with fixed seeds.

    Non-seed nodes start from ``init`` where given, else unassigned. Each
    sweep visits non-seed nodes in a seeded random order; a node takes the
    label with the larger total incident weight (both edge directions).
    Unassigned neighbours count for nothing, and a node without a label
    only listens to neighbours that already had one when the sweep began,
    so first assignments spread from all seeds at the same pace instead of
    racing along the visiting order. On a tie the node keeps its current
    label, or picks one at random if it has none. Stops after a sweep
    without changes, or after ``max_sweeps`` with converged=False.
    """
    adj = adjacency(g.edges, weighted)
    present = {s: lab for s, lab in seeds.items() if s in adj}
    if SECULAR not in present.values() or ISLAMIST not in present.values():
        raise ValueError(f"snapshot {g.day}: seeds of both labels must be present in the graph")
    labels: dict[str, int | None] = {}
    for v in adj:
        if v in present:
            labels[v] = present[v]
        elif init is not None and init.get(v) in (SECULAR, ISLAMIST):
            labels[v] = init[v]
        else:
            labels[v] = None
    rng = random.Random(rng_seed)
    free = sorted(v for v in adj if v not in present)
    nbrs = {v: list(adj[v].items()) for v in free}
    sweeps, converged = 0, False
    while sweeps < max_sweeps:
        sweeps += 1
        rng.shuffle(free)
        changed = 0
        fresh: set[str] = set()
        for v in free:
            w0 = w1 = 0
            blank = labels[v] is None
            for u, w in nbrs[v]:
                if blank and u in fresh:
                    continue
                lab = labels[u]
                if lab == 0:
                    w0 += w
                elif lab == 1:
                    w1 += w
            if w0 == w1:
                if w0 == 0 or labels[v] is not None:
                    continue
                new = rng.randrange(2)
            else:
                new = SECULAR if w0 > w1 else ISLAMIST
            if new != labels[v]:
                if blank:
                    fresh.add(v)
                labels[v] = new
                changed += 1
        if changed == 0:
            converged = True
            break
    return Labeling(labels, converged, sweeps, rng_seed)


def is_locally_optimal(g: GraphSnapshot, labels: Mapping[str, int | None], seeds: Mapping[str, int]) -> bool:
    """Every non-seed node holds a label of maximal incident weight."""
    adj = adjacency(g.edges)
    for v, nb in adj.items():
        if v in seeds:
            continue
        w = [0, 0]
        for u, wt in nb.items():
            if labels.get(u) is not None:
                w[labels[u]] += wt
        if w[0] == w[1] == 0:
            continue
        if labels.get(v) is None or w[labels[v]] < max(w):
            return False
    return True


# --------------------------------------------------------------------------
# modularity
# --------------------------------------------------------------------------


def modularity(g: GraphSnapshot | Mapping[Edge, int], labels: Mapping[str, int | None], weighted: bool = True) -> float:
    """Newman modularity on the undirected (weighted) projection."""
    edges = g.edges if isinstance(g, GraphSnapshot) else g
    und = project_undirected(edges, weighted)
    m = sum(und.values())
    if m == 0:
        raise ValueError("modularity undefined for a graph without edges")
    intra: Counter = Counter()
    tot: Counter = Counter()
    for (a, b), w in und.items():
        la, lb = labels[a], labels[b]
        if la is None or lb is None:
            raise ValueError("modularity needs every node labeled")
        if la == lb:
            intra[la] += w
        tot[la] += w
        tot[lb] += w
    return sum(intra[c] / m - (tot[c] / (2.0 * m)) ** 2 for c in tot)


# --------------------------------------------------------------------------
# surrogates
# --------------------------------------------------------------------------


def rewire(
    edges: Mapping[Edge, int],
    rng: random.Random,
    swaps_per_edge: int = 10,
    max_tries_factor: int = 50,
) -> dict[Edge, int]:
    """Degree-preserving double-edge swaps on the undirected projection.

    (a, b, w1), (c, d, w2) -> (a, d, w1), (c, b, w2). Swaps that would make a
    self-loop or duplicate an existing edge are redrawn.
    """
    und = project_undirected(edges)
    if len(und) < 2:
        raise ValueError("need at least two edges to rewire")
    names = sorted({v for e in und for v in e})
    index = {v: i for i, v in enumerate(names)}
    src = [index[a] for a, _ in und]
    dst = [index[b] for _, b in und]
    wts = list(und.values())
    # an undirected edge {a, b} is the integer min*n + max
    n = len(names)
    present = {a * n + b if a < b else b * n + a for a, b in zip(src, dst)}
    n_edges = len(src)
    target = swaps_per_edge * n_edges
    max_tries = max_tries_factor * target
    done = tries = 0
    rand = rng.random
    while done < target and tries < max_tries:
        tries += 1
        i = int(rand() * n_edges)
        j = int(rand() * n_edges)
        if i == j:
            continue
        a, b = src[i], dst[i]
        if rand() < 0.5:
            c, d = src[j], dst[j]
        else:
            c, d = dst[j], src[j]
        if a == d or c == b:
            continue
        e1 = a * n + d if a < d else d * n + a
        e2 = c * n + b if c < b else b * n + c
        if e1 == e2 or e1 in present or e2 in present:
            continue
        present.remove(a * n + b if a < b else b * n + a)
        present.remove(c * n + d if c < d else d * n + c)
        present.add(e1)
        present.add(e2)
        src[i], dst[i] = a, d
        src[j], dst[j] = c, b
        done += 1
    if tries >= max_tries and done < target:
        logger.warning("rewire stopped after %d tries with %d/%d swaps", tries, done, target)
    out = {}
    for a, b, w in zip(src, dst, wts):
        na, nb = names[a], names[b]
        out[(na, nb) if na < nb else (nb, na)] = w
    return out


@dataclass
class QReport:
    day: date | None
    q_actual: float
    surrogate_q: list[float]
    mean: float
    std: float
    z: float
    n_surr: int
    rng_seed: int | str
    swaps_per_edge: int

    def to_json(self) -> dict:
        return {
            "day": self.day.isoformat() if self.day else None,
            "q_actual": self.q_actual,
            "surrogate_q": self.surrogate_q,
            "mean": self.mean,
            "std": self.std,
            "z": self.z if math.isfinite(self.z) else None,
            "z_infinite": not math.isfinite(self.z),
            "n_surr": self.n_surr,
            "rng_seed": self.rng_seed,
            "swaps_per_edge": self.swaps_per_edge,
        }


def _labeled_q(edges: Mapping[Edge, int], labels: Mapping[str, int | None], weighted: bool) -> float:
    keep = {e: w for e, w in edges.items() if labels.get(e[0]) is not None and labels.get(e[1]) is not None}
    return modularity(keep, labels, weighted)


def surrogate_zscore(
    g: GraphSnapshot,
    seeds: Mapping[str, int],
    n_surr: int = 100,
    rng_seed: int = 0,
    swaps_per_edge: int = 10,
    actual_labels: Mapping[str, int | None] | None = None,
    weighted: bool = True,
) -> QReport:
    """z-score of the snapshot's propagation modularity against surrogates.

    Each surrogate is rewired and labeled by propagation from the same
    seeds with its own rng stream; its Q is taken over the nodes the
    propagation reaches (components holding a seed).
    """
    if n_surr < 2:
        raise ValueError("n_surr must be >= 2")
    if len(project_undirected(g.edges)) < 2:
        raise ValueError("graph too small to rewire (fewer than 2 edges)")
    if actual_labels is None:
        actual_labels = label_propagation(g, seeds, rng_seed=f"{rng_seed}/actual", weighted=weighted).labels
    q_actual = _labeled_q(g.edges, actual_labels, weighted)
    qs = []
    for k in range(n_surr):
        rng = random.Random(f"{rng_seed}/surrogate/{k}")
        edges = rewire(g.edges, rng, swaps_per_edge)
        lab = label_propagation(GraphSnapshot(g.day, edges), seeds, rng_seed=f"{rng_seed}/surrogate/{k}/lp", weighted=weighted)
        qs.append(_labeled_q(edges, lab.labels, weighted))
    mean = float(np.mean(qs))
    # a null whose propagation always ends one-sided gives the same Q for
    # every surrogate (it depends only on the seeds' degrees); keep that
    # exactly degenerate rather than dividing by rounding noise
    std = 0.0 if max(qs) - min(qs) <= 1e-12 else float(np.std(qs, ddof=1))
    if std > 0:
        z = (q_actual - mean) / std
    else:
        z = math.copysign(math.inf, q_actual - mean) if q_actual != mean else 0.0
    return QReport(g.day, q_actual, qs, mean, std, z, n_surr, rng_seed, swaps_per_edge)


# --------------------------------------------------------------------------
# chained propagation and file formats
# --------------------------------------------------------------------------


def propagate_chain(
    snapshots: Iterable[GraphSnapshot],
    seeds: Mapping[str, int],
    rng_seed: int = 0,
    max_sweeps: int = 100,
    weighted: bool = True,
) -> list[GraphSnapshot]:
    """Giant component + propagation per snapshot, warm-started from the
    previous snapshot's labels. Snapshots lacking a seed side are dropped
    with a warning."""
    out = []
    prev: dict[str, int | None] = {}
    for g in snapshots:
        gc = giant_component(g)
        try:
            res = label_propagation(gc, seeds, init=prev, rng_seed=f"{rng_seed}/{gc.day.isoformat()}",
                                    max_sweeps=max_sweeps, weighted=weighted)
        except ValueError as exc:
            logger.warning("skipping snapshot: %s", exc)
            continue
        gc.labels = res.labels
        gc.seeds = frozenset(s for s in seeds if s in res.labels)
        gc.converged = res.converged
        prev = res.labels
        out.append(gc)
    return out


def read_seeds(path: str | Path) -> dict[str, int]:
    names = {"0": SECULAR, "secular": SECULAR, "1": ISLAMIST, "islamist": ISLAMIST}
    seeds: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            lab = names.get((row.get("label") or "").strip().lower())
            if lab is None or not row.get("author_id"):
                raise DataError(f"{path}:{lineno}: bad seed row {row!r}")
            if seeds.get(row["author_id"], lab) != lab:
                raise DataError(f"{path}:{lineno}: seed {row['author_id']} listed with both labels")
            seeds[row["author_id"]] = lab
    if set(seeds.values()) != {SECULAR, ISLAMIST}:
        raise DataError(f"{path}: seed list needs both labels")
    return seeds


def write_seeds(seeds: Mapping[str, int], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author_id", "label"])
        for s in sorted(seeds):
            w.writerow([s, seeds[s]])


def write_snapshot(g: GraphSnapshot, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tag = g.day.isoformat()
    ep, lp = directory / f"edges_{tag}.csv", directory / f"labels_{tag}.csv"
    with open(ep, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for (i, j), wt in sorted(g.edges.items()):
            w.writerow([i, j, wt])
    with open(lp, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "label", "is_seed"])
        for v in sorted(g.nodes):
            lab = g.labels.get(v)
            w.writerow([v, "" if lab is None else lab, int(v in g.seeds)])
    return [ep, lp]


def read_snapshots(directory: str | Path) -> list[GraphSnapshot]:
    directory = Path(directory)
    out = []
    for ep in sorted(directory.glob("edges_*.csv")):
        day = date.fromisoformat(ep.stem.split("_", 1)[1])
        with open(ep, encoding="utf-8", newline="") as fh:
            edges = {(r["src"], r["dst"]): int(r["weight"]) for r in csv.DictReader(fh)}
        labels: dict[str, int | None] = {}
        seeds = set()
        lp = directory / f"labels_{day.isoformat()}.csv"
        if lp.exists():
            with open(lp, encoding="utf-8", newline="") as fh:
                for r in csv.DictReader(fh):
                    labels[r["node"]] = int(r["label"]) if r["label"] != "" else None
                    if r["is_seed"] == "1":
                        seeds.add(r["node"])
        out.append(GraphSnapshot(day, edges, labels, frozenset(seeds)))
    return out
