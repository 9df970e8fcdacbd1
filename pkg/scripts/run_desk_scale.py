#!/usr/bin/env python3
"""Full desk-scale experiment: label every location, train, evaluate, sweep.

Equivalent to running the CLI stages by hand:

    ristwin scenario --config configs/desk.json
    ristwin dataset  --config configs/desk.json
    ristwin train    --config configs/desk.json
    ristwin eval     --config configs/desk.json
    ristwin sweep    --config configs/desk.json   # the slow part
    ristwin report   --config configs/desk.json

The sweep trains twelve models from scratch (four sizes, three seeds) and
takes tens of minutes on one core; --skip-sweep leaves it out for a quick
single-model run.  Everything is deterministic in the config seed.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ristwin.cli import main as cli_main  # noqa: E402

STAGES = ("scenario", "dataset", "train", "eval", "sweep", "report", "verify")


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument(
        "--config",
        default=str(Path(__file__).resolve().parent.parent / "configs" / "desk.json"),
    )
    ap.add_argument("--out", help="output directory (default: the config's out_dir)")
    ap.add_argument("--seed", type=int, help="override the global seed")
    ap.add_argument("--skip-sweep", action="store_true", help="single model only")
    args = ap.parse_args(argv)

    passthrough = ["--config", args.config]
    if args.out:
        passthrough += ["--out", args.out]
    if args.seed is not None:
        passthrough += ["--seed", str(args.seed)]

    for stage in STAGES:
        if stage == "sweep" and args.skip_sweep:
            continue
        t0 = time.perf_counter()
        print(f"==> {stage}")
        rc = cli_main([stage] + passthrough)
        if rc != 0:
            print(f"stage '{stage}' failed with exit code {rc}", file=sys.stderr)
            return rc
        print(f"    done in {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(run())
