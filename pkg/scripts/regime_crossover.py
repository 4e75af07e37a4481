"""Daily stance and community-size crossover days on the regime-change preset.

    python scripts/regime_crossover.py --seeds 0 1 2 3 4
"""

import argparse
from datetime import timedelta

from polardyn.classifier import daily_stance_proportions, train
from polardyn.corpus import select_active_users
from polardyn.dynamics import community_sizes, majority_crossover
from polardyn.netdyn import build_snapshots, propagate_chain
from polardyn.synthgen import ScenarioSpec, generate, preset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = ap.parse_args()

    base = generate(ScenarioSpec(n_users=300, n_days=6, tweets_per_user=8, neutral_rate=0.15, n_gold=600, seed=4))
    by_id = {t.id: t for t in base.corpus}
    model = train([(by_id[tid], c) for tid, c in base.truth.gold], seed=0)

    print("seed,plant,stance_crossover,community_crossover")
    for seed in args.seeds:
        sc = generate(preset("regime", seed))
        plant = sc.spec.start + timedelta(days=sc.spec.changepoint_day)
        daily = [(d, p[0], p[2]) for d, p in daily_stance_proportions(sc.corpus, model) if p]
        chain = propagate_chain(build_snapshots(sc.corpus, 3, 1, select_active_users(sc.corpus, 10)),
                                sc.truth.network_seeds, rng_seed=seed)
        sizes = [(c.day, c.secular, c.islamist) for c in community_sizes(chain)]
        print(f"{seed},{plant},{majority_crossover(daily)},{majority_crossover(sizes)}")


if __name__ == "__main__":
    main()
