"""Generate the demo scenario and run the whole pipeline on it.

    python scripts/run_demo.py --out-dir /tmp/demo [--seed 0]
"""

import argparse
import json
import time
from pathlib import Path

from polardyn.pipeline import PipelineConfig, run
from polardyn.synthgen import generate, preset, write_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--preset", default="demo")
    args = ap.parse_args()

    t = time.perf_counter()
    sc = generate(preset(args.preset, args.seed))
    write_scenario(sc, args.out_dir)
    print(f"scenario: {len(sc.corpus)} tweets in {time.perf_counter() - t:.1f}s")

    t = time.perf_counter()
    bundle = run(PipelineConfig.load(args.out_dir / "config.json"))
    print(f"pipeline: {time.perf_counter() - t:.1f}s")
    manifest = json.loads((args.out_dir / "out" / "manifest.json").read_text())
    for stage in manifest["stages"]:
        print(f"  {stage['name']:<13}{stage['seconds']:8.2f}s")
    print(json.dumps(bundle, indent=1))


if __name__ == "__main__":
    main()
