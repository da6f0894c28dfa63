"""Compare per-generator corpus statistics with published reference averages.

Deviations are reported, never treated as failures: the reference figures
do not state their token or citation-counting conventions.

    python scripts/calibrate_corpus.py corpus.jsonl
    python scripts/calibrate_corpus.py corpus.jsonl --by-tag      # group on generator_tag
"""

import argparse
from collections import defaultdict

from eventline.corpusgen import corpus_stats, read_corpus

# generator: (avg judgment length, events per case, precedents per case, unique vocab)
REFERENCE = {
    "deepseek-r1": (1010.96, 27.0, 6.0, 34623),
    "gpt-4": (552.92, 19.0, 3.0, 17080),
}
FIELDS = ("length", "events", "precedents", "vocab")
TOLERANCE = 0.15


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("corpus")
    parser.add_argument("--by-tag", action="store_true",
                        help="group by generator_tag (tags must be deepseek-r1 / gpt-4) instead of halves")
    args = parser.parse_args()

    records = read_corpus(args.corpus)
    if args.by_tag:
        groups = defaultdict(list)
        for r in records:
            groups[r.generator_tag].append(r)
    else:
        half = len(records) // 2
        groups = {"deepseek-r1": records[:half], "gpt-4": records[half:]}

    for name, ref in REFERENCE.items():
        if not groups.get(name):
            print(f"{name}: no records")
            continue
        got = corpus_stats(groups[name]).key()
        print(f"{name} ({len(groups[name])} records)")
        for label, value, target in zip(FIELDS, got, ref):
            deviation = (value - target) / target
            gate = "  (checked)" if label in ("events", "precedents") else ""
            flag = "ok" if abs(deviation) <= TOLERANCE else "off"
            print(f"  {label:<11} {value:>10.2f} vs {target:>10.2f}  {deviation:+7.1%}  {flag}{gate}")


if __name__ == "__main__":
    main()
