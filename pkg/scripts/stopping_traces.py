"""Replay confidence traces through the refinement loop and print where each stops.

    python scripts/stopping_traces.py                 # built-in traces
    python scripts/stopping_traces.py 0.5,0.6,0.6,0.6 0.9,0.8,0.85,0.7
"""

import argparse
import json

from eventline.gateway import ScriptedBackend
from eventline.refinery import RefinementConfig, run_refinement
from eventline.schema import JudgmentDocument
from eventline.templates import load_templates

DEFAULT_TRACES = [
    [0.80, 0.80, 0.80],
    [0.90, 0.85, 0.88, 0.89],
    [0.50 + 0.05 * i for i in range(10)],
    [0.9, 0.7, 0.7, 0.7],
    [0.5, 0.8, 0.7, 0.8, 0.8],
]


def timeline(i):
    return json.dumps([{"Timestamp": f"{i + 1} March 2021", "Event": f"draft {i}", "Judge": "N/A",
                        "Precedent": "N/A"}])


def feedback(c):
    keys = ["narrative_relevance", "temporal_accuracy", "chronological_flow", "event_detail", "repetition",
            "character_identification", "confidence_score"]
    return json.dumps({**{k: c for k in keys}, "critique": "scripted"})


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("traces", nargs="*", help="comma-separated confidence values")
    parser.add_argument("--max-iterations", type=int, default=10)
    parser.add_argument("--patience", type=int, default=3)
    parser.add_argument("--tolerance", type=int, default=3)
    args = parser.parse_args()

    traces = [[float(x) for x in t.split(",")] for t in args.traces] or DEFAULT_TRACES
    config = RefinementConfig(args.max_iterations, args.patience, args.tolerance)
    templates = load_templates()
    doc = JudgmentDocument("trace", "scripted judgment")
    print(f"{'trace':<48} {'stop':<15} {'iters':>5} {'selected':>8}")
    for trace in traces:
        # pad so the loop never runs out of script before a rule fires
        padded = trace + [trace[-1]] * config.max_iterations
        result = run_refinement(doc, ScriptedBackend([timeline(i) for i in range(len(padded))]),
                                ScriptedBackend([feedback(c) for c in padded]), templates, config)
        shown = ",".join(f"{c:.2f}" for c in trace)
        print(f"{shown:<48} {result.stop_reason.value:<15} {result.iterations_run:>5} {result.selected_index:>8}")


if __name__ == "__main__":
    main()
