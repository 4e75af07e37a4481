"""Content-switch precision and recall against planted switchers, per threshold n.

Trains on a three-class scenario, classifies the switch preset and compares
the detected switchers with the ground truth for several seeds.

    python scripts/sweep_switch_thresholds.py --seeds 0 1 2
"""

import argparse

from polardyn import ANTI, PRO
from polardyn.classifier import train
from polardyn.dynamics import switches_from_sequences
from polardyn.synthgen import ScenarioSpec, generate, preset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--n", type=int, nargs="+", default=[5, 10, 15, 20])
    ap.add_argument("--preset", default="switch", choices=["switch", "stable"])
    args = ap.parse_args()

    base = generate(ScenarioSpec(n_users=300, n_days=6, tweets_per_user=8, neutral_rate=0.15, n_gold=600, seed=4))
    by_id = {t.id: t for t in base.corpus}
    model = train([(by_id[tid], c) for tid, c in base.truth.gold], seed=0)

    print("seed,n,examined,detected,planted,precision,recall")
    for seed in args.seeds:
        sc = generate(preset(args.preset, seed))
        seqs = {}
        for t, c in zip(sc.corpus, model.predict_many(sc.corpus.tweets)):
            if c in (PRO, ANTI):
                seqs.setdefault(t.author_id, []).append(c)
        planted = sc.truth.switchers
        for n in args.n:
            rep = switches_from_sequences(seqs, n)
            tp = len(rep.switched & planted)
            precision = tp / len(rep.switched) if rep.switched else float("nan")
            recall = tp / len(planted) if planted else float("nan")
            print(f"{seed},{n},{rep.users_examined},{len(rep.switched)},{len(planted)},{precision:.3f},{recall:.3f}")


if __name__ == "__main__":
    main()
