import math
import random
from collections import Counter
from datetime import date, timedelta

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polardyn import ISLAMIST, SECULAR
from polardyn.corpus import Corpus
from polardyn.netdyn import (
    GraphSnapshot,
    build_snapshots,
    giant_component,
    graph_stats,
    is_locally_optimal,
    label_propagation,
    modularity,
    project_undirected,
    propagate_chain,
    read_seeds,
    read_snapshots,
    rewire,
    surrogate_zscore,
    write_seeds,
    write_snapshot,
)
from polardyn.synthgen import planted_partition

from conftest import T0, mk
from oracles import double_sum_q, random_graph, reach_sets

DAY = date(2000, 1, 1)


def snap(edges, labels=None):
    return GraphSnapshot(DAY, dict(edges), dict(labels or {}))


# -- snapshots -------------------------------------------------------------------------


def test_window_of_three_covers_neighbouring_days():
    tweets = [mk("rt", author="a", day=d, repost_of="b") for d in (4, 5, 6, 7, 8)]
    snaps = {g.day: g for g in build_snapshots(Corpus(tweets), 3, 1)}
    g6 = snaps[(T0 + timedelta(days=6)).date()]
    assert g6.edges == {("a", "b"): 3}


def test_repeated_repost_gives_weight():
    tweets = [mk("rt", author="a", day=0, repost_of="b"), mk("rt", author="a", day=0, sec=5, repost_of="b")]
    (g,) = build_snapshots(Corpus(tweets), 1, 1)
    assert g.edges == {("a", "b"): 2}
    assert g.nodes == {"a", "b"}


def test_no_reposts_no_snapshots():
    assert build_snapshots(Corpus([mk("plain")]), 3, 1) == []


@pytest.mark.parametrize("w,step", [(3, 1), (2, 1), (4, 2), (1, 3), (5, 1)])
def test_snapshots_match_brute_force(w, step):
    rng = random.Random(w * 10 + step)
    users = [f"u{k}" for k in range(8)]
    tweets = []
    for k in range(300):
        a, b = rng.sample(users, 2)
        tweets.append(mk("rt", author=a, day=rng.randrange(10), sec=k, repost_of=b))
    corpus = Corpus(tweets)
    snaps = build_snapshots(corpus, w, step)
    first = min(t.day for t in tweets)
    lo_off, hi_off = w // 2, (w // 2 if w % 2 else w // 2 - 1)
    expected_days = []
    t = first
    while t <= max(t.day for t in tweets):
        events = Counter((x.author_id, x.repost_of) for x in tweets
                         if -lo_off <= (x.day - t).days <= hi_off)
        if events:
            expected_days.append(t)
            g = next(g for g in snaps if g.day == t)
            assert g.edges == dict(events)
            assert g.total_weight == sum(events.values())
        t += timedelta(days=step)
    assert [g.day for g in snaps] == expected_days


def test_snapshot_user_restriction():
    tweets = [mk("rt", author="a", repost_of="b"), mk("rt", author="c", sec=1, repost_of="a")]
    (g,) = build_snapshots(Corpus(tweets), 3, 1, users={"a"})
    assert g.edges == {("a", "b"): 1}


# -- giant component -----------------------------------------------------------------


def test_giant_component_picks_larger():
    big = {(f"a{k}", f"a{k + 1}"): 1 for k in range(6)}  # 7 nodes
    small = {("b0", "b1"): 1, ("b1", "b2"): 1}  # 3 nodes
    gc = giant_component(snap({**big, **small}))
    assert gc.nodes == {f"a{k}" for k in range(7)}


def test_giant_component_tie_and_identity():
    g = snap({("x", "y"): 1, ("b", "a"): 2})
    assert giant_component(g).nodes == {"a", "b"}
    connected = snap({("a", "b"): 1, ("c", "b"): 1})
    assert giant_component(connected).edges == connected.edges


def test_giant_component_matches_exhaustive_traversal():
    for seed in range(20):
        rng = random.Random(seed)
        edges = random_graph(rng, 200, 0.006)
        if not edges:
            continue
        gc = giant_component(snap(edges))
        comps = set(reach_sets(edges).values())
        size = max(map(len, comps))
        assert len(gc.nodes) == size
        assert gc.nodes in comps
        assert giant_component(gc).edges == gc.edges
        G = nx.Graph(list(edges))
        assert len(gc.nodes) == len(max(nx.connected_components(G), key=len))


# -- statistics ---------------------------------------------------------------------------


def test_triangle_and_star():
    tri = graph_stats(snap({("a", "b"): 1, ("b", "c"): 1, ("c", "a"): 1}))
    assert tri.density == 1 and tri.clustering == 1
    star = graph_stats(snap({("hub", f"l{k}"): 1 for k in range(6)}))
    assert star.clustering == 0 and star.assortativity < 0


def test_graph_stats_brute_force():
    rng = random.Random(1)
    edges = random_graph(rng, 500, 0.004)
    st_ = graph_stats(snap(edges))
    und = project_undirected(edges)
    nodes = sorted({v for e in und for v in e})
    idx = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    A = np.zeros((n, n), dtype=np.int64)
    W = np.zeros((n, n))
    for (a, b), w in und.items():
        A[idx[a], idx[b]] = A[idx[b], idx[a]] = 1
        W[idx[a], idx[b]] = W[idx[b], idx[a]] = w
    deg = A.sum(axis=1)
    # triangle count per node via explicit triple loop over neighbours
    cl = []
    for i in range(n):
        nb = np.flatnonzero(A[i])
        k = len(nb)
        if k < 2:
            cl.append(0.0)
            continue
        links = sum(A[u, v] for x, u in enumerate(nb) for v in nb[x + 1 :])
        cl.append(2 * links / (k * (k - 1)))
    assert st_.n_nodes == n
    assert st_.density == pytest.approx(A.sum() / (n * (n - 1)))
    assert st_.mean_degree == pytest.approx(deg.mean())
    assert st_.clustering == pytest.approx(np.mean(cl))
    s = W.sum(axis=1)
    xs, ys = [], []
    for i, j in zip(*np.nonzero(A)):
        xs.append(s[i])
        ys.append(s[j])
    assert st_.assortativity == pytest.approx(np.corrcoef(xs, ys)[0, 1])
    G = nx.Graph()
    G.add_weighted_edges_from((a, b, w) for (a, b), w in und.items())
    assert st_.clustering == pytest.approx(nx.average_clustering(G))
    assert st_.assortativity == pytest.approx(nx.degree_pearson_correlation_coefficient(G, weight="weight"))


# -- label propagation --------------------------------------------------------------------


def two_cliques(k=5):
    edges = {}
    for side in "ab":
        for i in range(k):
            for j in range(i + 1, k):
                edges[(f"{side}{i}", f"{side}{j}")] = 1
    edges[("a0", "b0")] = 1
    return edges


def test_two_cliques_take_their_seed_labels():
    g = snap(two_cliques())
    for rs in range(10):
        lab = label_propagation(g, {"a3": SECULAR, "b3": ISLAMIST}, rng_seed=rs)
        assert lab.converged
        assert all(lab.labels[f"a{i}"] == SECULAR for i in range(5))
        assert all(lab.labels[f"b{i}"] == ISLAMIST for i in range(5))


def test_all_seeds_is_identity():
    g = snap(two_cliques(3))
    seeds = {v: (SECULAR if v < "b" else ISLAMIST) for v in g.nodes}
    lab = label_propagation(g, seeds)
    assert lab.labels == seeds
    assert lab.sweeps == 1 and lab.converged


def test_missing_seed_side_is_an_error():
    with pytest.raises(ValueError):
        label_propagation(snap(two_cliques()), {"a1": SECULAR, "zzz": ISLAMIST})


def test_warm_start_keeps_seeds_and_is_locally_optimal():
    rng = random.Random(4)
    for trial in range(30):
        edges = random_graph(rng, 40, 0.08)
        g = giant_component(snap(edges))
        nodes = sorted(g.nodes)
        if len(nodes) < 4:
            continue
        seeds = {nodes[0]: SECULAR, nodes[-1]: ISLAMIST}
        init = {v: rng.choice([SECULAR, ISLAMIST, None]) for v in nodes}
        init[nodes[0]] = ISLAMIST  # a warm start that contradicts a seed
        lab = label_propagation(g, seeds, init=init, rng_seed=trial)
        assert lab.labels[nodes[0]] == SECULAR and lab.labels[nodes[-1]] == ISLAMIST
        assert lab.converged
        assert all(v is not None for v in lab.labels.values())
        assert is_locally_optimal(g, lab.labels, seeds)


def test_planted_partition_recovery():
    good = 0
    for rs in range(20):
        g, truth, seeds = planted_partition(60, 0.2, 0.01, seed=rs)
        lab = label_propagation(g, seeds, rng_seed=rs).labels
        acc = sum(lab.get(v) == truth[v] for v in truth) / len(truth)
        good += acc >= 0.95
    assert good >= 19


def test_chain_is_deterministic_and_complete():
    g, truth, seeds = planted_partition(80, 0.15, 0.01, seed=3)
    snaps = [GraphSnapshot(DAY + timedelta(days=k), dict(g.edges)) for k in range(3)]
    a = propagate_chain(snaps, seeds, rng_seed=1)
    b = propagate_chain(snaps, seeds, rng_seed=1)
    assert [x.labels for x in a] == [x.labels for x in b]
    for x in a:
        assert all(v is not None for v in x.labels.values())
        assert all(x.labels[s] == seeds[s] for s in x.seeds)


# -- modularity ---------------------------------------------------------------------------


def test_modularity_analytic_cases():
    edges = two_cliques()
    one = {v: 0 for v in snap(edges).nodes}
    assert modularity(edges, one) == pytest.approx(0.0, abs=1e-15)
    apart = {(f"a{i}", f"a{j}"): 1 for i in range(4) for j in range(i + 1, 4)}
    apart.update({(f"b{i}", f"b{j}"): 1 for i in range(4) for j in range(i + 1, 4)})
    labels = {v: int(v[0] == "b") for v in snap(apart).nodes}
    assert modularity(apart, labels) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        modularity({}, {})


def test_modularity_matches_double_sum():
    for seed in range(100):
        rng = random.Random(seed)
        edges = random_graph(rng, 50, 0.06)
        labels = {v: rng.randrange(2) for e in edges for v in e}
        for weighted in (True, False):
            assert abs(modularity(edges, labels, weighted) - double_sum_q(edges, labels, weighted)) <= 1e-12


# -- surrogates ---------------------------------------------------------------------------


def test_rewire_preserves_degrees_and_weights():
    rng = random.Random(0)
    edges = random_graph(rng, 60, 0.08)
    und = project_undirected(edges)
    out = rewire(edges, random.Random(1))

    def degrees(e):
        d = Counter()
        for a, b in e:
            d[a] += 1
            d[b] += 1
        return d

    assert degrees(out) == degrees(und)
    assert sorted(out.values()) == sorted(und.values())
    assert all(a < b for a, b in out)  # no self-loops, canonical keys
    assert len(out) == len(und)
    assert set(out) != set(und)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_rewire_degree_property(seed):
    rng = random.Random(seed)
    edges = random_graph(rng, 15, 0.3)
    if len(project_undirected(edges)) < 2:
        return
    und = project_undirected(edges)
    out = rewire(edges, random.Random(seed), swaps_per_edge=3)
    deg = lambda e: Counter(v for pair in e for v in pair)  # noqa: E731
    assert deg(out) == deg(und)


def test_surrogate_report():
    g, _, seeds = planted_partition(120, 0.2, 0.01, seed=1001)
    rep = surrogate_zscore(g, seeds, n_surr=20, rng_seed=1)
    assert len(rep.surrogate_q) == 20
    assert rep.std == pytest.approx(np.std(rep.surrogate_q, ddof=1))
    assert rep.z == pytest.approx((rep.q_actual - rep.mean) / rep.std)
    assert rep.z > 3
    again = surrogate_zscore(g, seeds, n_surr=20, rng_seed=1)
    assert again.surrogate_q == rep.surrogate_q
    with pytest.raises(ValueError):
        surrogate_zscore(g, seeds, n_surr=1)
    with pytest.raises(ValueError):
        surrogate_zscore(snap({("a", "b"): 1}), {"a": 0, "b": 1})


def test_degenerate_null_gives_infinite_z():
    g, _, seeds = planted_partition(120, 0.2, 0.01, seed=1000)
    rep = surrogate_zscore(g, seeds, n_surr=10, rng_seed=0)
    if rep.std == 0:
        assert math.isinf(rep.z) and rep.to_json()["z"] is None
    else:
        assert math.isfinite(rep.z)


def test_surrogate_q_matches_double_sum_on_one_surrogate():
    g, _, seeds = planted_partition(60, 0.2, 0.01, seed=2)
    edges = rewire(g.edges, random.Random("check"))
    lab = label_propagation(GraphSnapshot(DAY, edges), seeds, rng_seed=0).labels
    assert abs(modularity(edges, lab) - double_sum_q(edges, lab)) <= 1e-12


# -- files ------------------------------------------------------------------------------------


def test_snapshot_files_round_trip(tmp_path):
    g, _, seeds = planted_partition(30, 0.3, 0.02, seed=0)
    (lab,) = propagate_chain([g], seeds)
    write_snapshot(lab, tmp_path)
    (back,) = read_snapshots(tmp_path)
    assert back.edges == lab.edges and back.labels == lab.labels and back.seeds == lab.seeds


def test_seed_files(tmp_path):
    p = tmp_path / "s.csv"
    write_seeds({"a": 0, "b": 1}, p)
    assert read_seeds(p) == {"a": 0, "b": 1}
    p.write_text("author_id,label\nx,secular\ny,Islamist\n", encoding="utf-8")
    assert read_seeds(p) == {"x": 0, "y": 1}
    p.write_text("author_id,label\nx,0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_seeds(p)
