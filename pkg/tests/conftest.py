import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from eventline.schema import EventRecord, EventTimeline  # noqa: E402
from eventline.templates import load_templates  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def templates():
    return load_templates()


def event(ts="January 2020", ev="Stake acquired", judge="N/A", precedent="N/A"):
    return {"Timestamp": ts, "Event": ev, "Judge": judge, "Precedent": precedent}


def timeline_json(*labels):
    return json.dumps([event(f"{i + 1} March 2021", f"event {label}") for i, label in enumerate(labels)])


def feedback_json(confidence, **overrides):
    body = {
        "narrative_relevance": 0.8,
        "temporal_accuracy": 0.8,
        "chronological_flow": 0.8,
        "event_detail": 0.8,
        "repetition": 0.8,
        "character_identification": 0.8,
        "confidence_score": confidence,
        "critique": "ok",
    }
    body.update(overrides)
    return json.dumps(body)


_field_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=0, max_size=40
)
_non_blank = _field_text.filter(lambda s: s.strip())

event_records = st.builds(EventRecord, timestamp=_non_blank, event=_non_blank, judge=_field_text,
                          precedent=_field_text)
timelines = st.lists(event_records, min_size=1, max_size=6).map(lambda evs: EventTimeline(tuple(evs)))

_words = st.sampled_from(["court", "appeal", "filed", "March", "2020", "Justice", "Rao", "v.", "SCC", "held",
                          "order", "bail", "writ", "tax", "land", "N/A"])
wordy_text = st.lists(_words, min_size=1, max_size=8).map(" ".join)
wordy_records = st.builds(EventRecord, timestamp=wordy_text, event=wordy_text, judge=wordy_text,
                          precedent=st.one_of(st.just("N/A"), wordy_text))
wordy_timelines = st.lists(wordy_records, min_size=1, max_size=5).map(lambda evs: EventTimeline(tuple(evs)))


STOPPING_TRACES = [
    # (confidences, (stop_reason, iterations_run, selected_index)), traced by hand with default config
    ([0.80, 0.80, 0.80], ("tolerance", 3, 0)),
    ([0.90, 0.85, 0.88, 0.89], ("patience", 4, 0)),
    ([0.50 + 0.05 * i for i in range(10)], ("max_iterations", 10, 9)),
    ([0.5, 0.6, 0.6, 0.6], ("tolerance", 4, 1)),
    ([0.9, 0.7, 0.7, 0.7], ("tolerance", 4, 0)),
    ([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.8, 0.8], ("tolerance", 10, 7)),
    ([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.6, 0.5, 0.65], ("patience", 10, 6)),
    ([0.6, 0.6, 0.5, 0.6], ("patience", 4, 0)),
    ([0.5, 0.7, 0.6, 0.8, 0.75, 0.79, 0.78], ("patience", 7, 3)),
    ([0.4, 0.9, 0.5, 0.5, 0.5], ("tolerance", 5, 1)),
    ([0.1, 0.3, 0.2, 0.4, 0.35, 0.5, 0.45, 0.6, 0.55, 0.7], ("max_iterations", 10, 9)),
    ([0.801, 0.804, 0.8], ("tolerance", 3, 0)),
    ([0.5, 0.8, 0.7, 0.8, 0.8], ("patience", 5, 1)),
    ([0.6, 0.6, 0.7, 0.7, 0.7], ("tolerance", 5, 2)),
]


def scripted_refinement(confidences, config=None, tmpl=None):
    """Run the loop with one scripted timeline and feedback per iteration.

    Iteration ``i`` returns a timeline whose single event is ``event it{i}``.
    Returns (result, extraction backend, feedback backend).
    """
    from eventline.gateway import ScriptedBackend
    from eventline.refinery import RefinementConfig, run_refinement
    from eventline.schema import JudgmentDocument

    extractor = ScriptedBackend([timeline_json(f"it{i}") for i in range(len(confidences))], name="extractor")
    critic = ScriptedBackend([feedback_json(c, critique=f"critique {i}") for i, c in enumerate(confidences)],
                             name="critic")
    result = run_refinement(JudgmentDocument("doc-x", "The court heard the matter."), extractor, critic,
                            tmpl or load_templates(), config or RefinementConfig())
    return result, extractor, critic
