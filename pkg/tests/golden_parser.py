"""Golden cases for payload extraction, timeline parsing and feedback parsing.

Each case: (name, op, raw completion, expected).  ``expected`` is either
``{"error": <exception class name>, ...attrs}`` or the exact output.
"""

import json

FS, TC, SQ = "fence-stripped", "trailing-comma-removed", "smart-quotes-normalized"


def ev(ts, text, judge="N/A", precedent="N/A"):
    return {"Timestamp": ts, "Event": text, "Judge": judge, "Precedent": precedent}


A = ev("January 2020", "Proxima Inc. acquired a stake in Zenith Corp")
B = ev("February 2020", "Minority shareholders filed a complaint", precedent="Furlong Steel Ltd. v. Cherry Steel Corp. 5 SCC 739")
C = ev("March 2022", "Appeal to the High Court", judge="Justice R. Khanna")
SCORES8 = {k: 0.8 for k in ("narrative_relevance", "temporal_accuracy", "chronological_flow", "event_detail",
                            "repetition", "character_identification", "confidence")}


def fb(**kw):
    body = {"narrative_relevance": 0.8, "temporal_accuracy": 0.8, "chronological_flow": 0.8, "event_detail": 0.8,
            "repetition": 0.8, "character_identification": 0.8, "confidence_score": 0.8, "critique": "ok"}
    body.update(kw)
    return {k: v for k, v in body.items() if v is not None}


CASES = [
    # --- payload extraction
    ("fenced-array", "payload", 'Here is the timeline:\n```json\n[{"a": 1}]\n```',
     {"text": '[{"a": 1}]', "repairs": [FS]}),
    ("trailing-comma", "payload", "[1, 2, 3,]", {"text": "[1, 2, 3]", "repairs": [TC]}),
    ("refusal", "payload", "I cannot produce a timeline.", {"error": "NoPayloadFound"}),
    ("object-in-prose", "payload", 'Sure! {"x": [1, 2]} Hope this helps.', {"text": '{"x": [1, 2]}', "repairs": []}),
    ("nested-trailing-commas", "payload", '{"a": [1, 2,], "b": {"c": 3,},}',
     {"text": '{"a": [1, 2], "b": {"c": 3}}', "repairs": [TC]}),
    ("smart-quote-delimiters", "payload", "[{“a”: “b”}]", {"text": '[{"a": "b"}]', "repairs": [SQ]}),
    ("brackets-inside-string", "payload", '{"t": "see [note] }"}', {"text": '{"t": "see [note] }"}', "repairs": []}),
    ("skip-unbalanced-opener", "payload", 'Note [draft\n["ok"]', {"text": '["ok"]', "repairs": []}),
    ("unbalanced-only", "payload", '[{"Timestamp": "x"', {"error": "NoPayloadFound"}),
    ("bare-fence", "payload", '```\n{"k": true}\n```', {"text": '{"k": true}', "repairs": [FS]}),
    ("all-three-repairs", "payload", "```json\n[“a”, “b”,]\n```", {"text": '["a", "b"]', "repairs": [FS, SQ, TC]}),
    ("comma-in-string-kept", "payload", '["a,]", 1,]', {"text": '["a,]", 1]', "repairs": [TC]}),
    ("unrepairable-returned-as-is", "payload", "{'a': 1}", {"text": "{'a': 1}", "repairs": []}),
    ("smart-quotes-in-content", "payload", '["He said “hi”"]', {"text": '["He said “hi”"]', "repairs": []}),
    # --- timelines
    ("two-records-fenced", "timeline", "```json\n" + json.dumps([A, B]) + "\n```", {"events": [A, B], "repairs": [FS]}),
    ("missing-precedent", "timeline",
     json.dumps([A, {k: v for k, v in B.items() if k != "Precedent"}]),
     {"error": "TimelineSchemaError", "index": 1, "field": "precedent"}),
    ("object-not-array", "timeline", json.dumps(A), {"error": "NotAnArray"}),
    ("empty-array", "timeline", "[]", {"error": "TimelineSchemaError", "index": 0, "field": "timeline"}),
    ("blank-timestamp", "timeline", json.dumps([ev("  ", "x")]),
     {"error": "TimelineSchemaError", "index": 0, "field": "timestamp"}),
    ("trailing-comma-after-record", "timeline", json.dumps([A, C])[:-1] + ",]", {"events": [A, C], "repairs": [TC]}),
    ("refusal-timeline", "timeline", "Sorry, I can't help with that.", {"error": "NoPayloadFound"}),
    ("order-preserved", "timeline", json.dumps([C, A, B]), {"events": [C, A, B], "repairs": []}),
    ("null-judge", "timeline", json.dumps([dict(A, Judge=None)]),
     {"error": "TimelineSchemaError", "index": 0, "field": "judge"}),
    ("single-quoted-keys", "timeline", "[{'Timestamp': '2020'}]", {"error": "InvalidJSON"}),
    ("first-of-two-arrays", "timeline", "Draft: " + json.dumps([A]) + " Final: " + json.dumps([B]),
     {"events": [A], "repairs": []}),
    # --- feedback
    ("all-080", "feedback", json.dumps(fb()),
     {"scores": SCORES8, "critique": "ok", "clamped": [], "repairs": []}),
    ("confidence-over-one", "feedback", json.dumps(fb(confidence_score=1.2)),
     {"scores": dict(SCORES8, confidence=1.0), "critique": "ok", "clamped": [("confidence", 1.2, 1.0)], "repairs": []}),
    ("missing-confidence", "feedback", json.dumps(fb(confidence_score=None)), {"error": "MissingConfidence"}),
    ("negative-repetition", "feedback", "Scores:\n" + json.dumps(fb(repetition=-0.3)),
     {"scores": dict(SCORES8, repetition=0.0), "critique": "ok", "clamped": [("repetition", -0.3, 0.0)],
      "repairs": []}),
    ("three-decimals-fenced", "feedback",
     "```json\n" + json.dumps(fb(event_detail=0.876, chronological_flow=0.125, temporal_accuracy="0.5")) + "\n```",
     {"scores": dict(SCORES8, event_detail=0.88, chronological_flow=0.13, temporal_accuracy=0.5), "critique": "ok",
      "clamped": [], "repairs": [FS]}),
    ("no-critique-smart-quotes", "feedback", json.dumps(fb(critique=None)).replace('"', "“", 1).replace('"', "”", 1),
     {"scores": SCORES8, "critique": "", "clamped": [], "repairs": [SQ]}),
    ("non-numeric-score", "feedback", json.dumps(fb(narrative_relevance="high")),
     {"error": "FeedbackSchemaError", "field": "narrative_relevance"}),
    ("refusal-feedback", "feedback", "I am unable to evaluate this.", {"error": "NoPayloadFound"}),
]


def run_case(op, raw, expected):
    """Run one golden case; return None on match or a description of the mismatch."""
    from eventline import parsing

    diag = parsing.ParseDiagnostics()
    try:
        if op == "payload":
            got = {"text": parsing.extract_json_payload(raw, diag), "repairs": diag.repairs_applied}
        elif op == "timeline":
            timeline, diag = parsing.read_timeline(raw)
            got = {"events": timeline.to_json(), "repairs": diag.repairs_applied}
        else:
            report, diag = parsing.parse_feedback(raw)
            got = {"scores": report.scores(), "critique": report.critique,
                   "clamped": diag.clamped_fields, "repairs": diag.repairs_applied}
    except parsing.ParseError as e:
        if "error" not in expected:
            return f"unexpected {type(e).__name__}: {e}"
        if type(e).__name__ != expected["error"]:
            return f"raised {type(e).__name__}, expected {expected['error']}"
        for attr in ("index", "field"):
            if attr in expected and getattr(e, attr) != expected[attr]:
                return f"{attr}={getattr(e, attr)!r}, expected {expected[attr]!r}"
        return None
    if "error" in expected:
        return f"returned {got!r}, expected {expected['error']}"
    return None if got == expected else f"got {got!r}"
