"""Generate the planted-cluster corpus and run the full pipeline on it.

    python3 scripts/run_synthetic.py --workdir run/synth --seed 0
"""

import argparse
import logging

from simrec import pipeline, synth
from simrec.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="run/synth")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")

    base = RunConfig(seed=args.seed, workers=args.workers, workdir=args.workdir)
    paths = synth.write_synth(synth.generate(base.synth_config()), f"{args.workdir}/data")
    cfg = base.with_updates({k: str(paths[k]) for k in ("clicks", "attributes", "vectors", "new_items")})
    report = pipeline.run_pipeline(cfg)
    print(report.to_text(), end="")


if __name__ == "__main__":
    main()
