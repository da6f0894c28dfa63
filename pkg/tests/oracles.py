"""Independent reference computations used to freeze expected values.

Nothing here imports the code under test.
"""

from __future__ import annotations

from collections import Counter


def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def brute_force_greedy(candidate, reference):
    """Full similarity table, then row / column maxima, with plain loops."""
    table = [[dot(c, r) for r in reference] for c in candidate]
    precision = sum(max(row) for row in table) / len(candidate)
    recall = sum(max(table[i][j] for i in range(len(candidate))) for j in range(len(reference))) / len(reference)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def exact_match_greedy(candidate_tokens, reference_tokens):
    """Greedy score under a one-hot embedder: a token scores 1 iff it occurs on the other side."""
    ref, cand = set(reference_tokens), set(candidate_tokens)
    precision = sum(1 for t in candidate_tokens if t in ref) / len(candidate_tokens)
    recall = sum(1 for t in reference_tokens if t in cand) / len(reference_tokens)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def trace_stopping(confidences, max_iterations=10, patience=3, tolerance=3):
    """Step-by-step replay of the stopping rules over a confidence trace.

    Returns (stop_reason, iterations_run, selected_index).  Written separately
    from the library so the two can be compared.
    """
    best = None
    best_at = None
    stale = 0
    seen = []
    for i, c in enumerate(confidences):
        c = round(c + 1e-12, 2)
        seen.append(c)
        if best is None or c > best:
            best, best_at, stale = c, i, 0
        else:
            stale += 1
        tol = len(seen) >= tolerance and len(set(seen[-tolerance:])) == 1
        if tol:
            return "tolerance", i + 1, best_at
        if stale >= patience:
            return "patience", i + 1, best_at
        if i + 1 >= max_iterations:
            return "max_iterations", i + 1, best_at
    raise ValueError("trace ended before any stopping rule fired")


def corpus_counts(judgments, precedents_per_doc, events_per_doc):
    """Hand-countable corpus statistics from raw lists."""
    n = len(judgments)
    length = sum(len(j.split()) for j in judgments) / n
    vocab = Counter(t.lower() for j in judgments for t in j.split())
    return length, sum(events_per_doc) / n, sum(precedents_per_doc) / n, len(vocab)
