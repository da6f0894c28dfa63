"""Run generate -> extract -> score -> judge end to end with offline simulated agents.

Nothing leaves the machine.  Useful as a smoke test of a checkout and as a
template for wiring real endpoints (swap the config for one with
``"kind": "openai"`` backends).

    python scripts/simulated_pipeline.py --out /tmp/eventline-demo --n 20 --sample 4
"""

import argparse
import json
import os
import sys
from pathlib import Path

from eventline.cli import main as cli

HERE = Path(__file__).resolve().parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, required=True, help="fresh directory for config and outputs")
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--sample", type=int, default=4)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    os.environ.setdefault("SOURCE_DATE_EPOCH", "1700000000")
    config = json.loads((HERE.parent / "configs" / "simulated.json").read_text())
    config["paths"] = {"corpus_file": "out/corpus.jsonl", "output_dir": "out"}
    config["seed"] = args.seed
    args.out.mkdir(parents=True, exist_ok=True)
    config_path = args.out / "config.json"
    config_path.write_text(json.dumps(config, indent=2))

    steps = [["generate", "--n", str(args.n)], ["extract"], ["score"], ["judge", "--sample", str(args.sample)]]
    for step in steps:
        code = cli([step[0], "--config", str(config_path), *step[1:]])
        if code != 0:
            sys.exit(f"{step[0]} exited with {code}")

    out = args.out / "out"
    aggregate = json.loads((out / "scores.jsonl").read_text().splitlines()[-1])
    tally = json.loads((out / "preference_tally.json").read_text())
    print(f"mean F1 {aggregate['f1']:.4f} over {aggregate['n']} timelines")
    print(f"structured preferred {tally['structured_wins']}/{tally['total']}, "
          f"inconsistent {tally['inconsistent']}")


if __name__ == "__main__":
    main()
