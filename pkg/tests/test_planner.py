import pytest

from ctqa.errors import (
    HubMissingRegionError,
    IllegalTransitionError,
    MalformedDecisionError,
    UnknownRegionError,
)
from ctqa.llm import LlmReply
from ctqa.memory import QueryHub
from ctqa.mockllm import MockPlannerLlm
from ctqa.planner import (
    Action,
    Phase,
    PlannerState,
    TaskDecision,
    classify_task,
    extract_json_block,
    rewrite_query,
    select_query,
    step,
)
from ctqa.prompts import load_template, render
from ctqa.regions import RegionId, canonicalize_region, display_name


class BrokenLlm:
    def __init__(self):
        self.calls = 0

    def chat(self, messages, *, adapter_id=None, vision_ref=None):
        self.calls += 1
        return LlmReply(text="sorry, no json here")


# ---------------------------------------------------------------------------
# region canonicalization


def test_all_display_names_canonicalize():
    for region in RegionId:
        assert canonicalize_region(display_name(region)) is region


def test_canonicalize_is_case_and_punctuation_insensitive():
    assert canonicalize_region("HEART.") is RegionId.HEART
    assert canonicalize_region("trachea & bronchi") is RegionId.TRACHEA_BRONCHI


def test_canonicalize_rejects_unknown():
    with pytest.raises(UnknownRegionError):
        canonicalize_region("spleen")


def test_canonicalize_idempotent_on_canonical_names():
    for region in RegionId:
        assert canonicalize_region(region.value) is region


# ---------------------------------------------------------------------------
# classification


def test_classify_heart_question():
    decision = classify_task("Is there fluid around the heart?", MockPlannerLlm())
    assert decision.task_type == "QA"
    assert decision.target_regions == (RegionId.HEART,)


def test_classify_report_request():
    decision = classify_task("Generate a radiology report for this scan.", MockPlannerLlm())
    assert decision.task_type == "Report"
    assert decision.target_regions == ()


def test_classify_multi_region():
    decision = classify_task("Compare the heart and the pleura.", MockPlannerLlm())
    assert set(decision.target_regions) == {RegionId.HEART, RegionId.PLEURA}


def test_classify_is_deterministic():
    q = "Is there any abnormality in the lung?"
    assert classify_task(q, MockPlannerLlm()) == classify_task(q, MockPlannerLlm())


def test_classify_malformed_after_retry():
    llm = BrokenLlm()
    with pytest.raises(MalformedDecisionError):
        classify_task("Is there fluid around the heart?", llm)
    assert llm.calls == 2  # one retry with the JSON-only nudge


def test_classify_unknown_region_not_retried():
    class WrongRegionLlm:
        def __init__(self):
            self.calls = 0

        def chat(self, messages, *, adapter_id=None, vision_ref=None):
            self.calls += 1
            return LlmReply(text='{"task_type": "QA", "target_region": ["spleen"]}')

    llm = WrongRegionLlm()
    with pytest.raises(UnknownRegionError):
        classify_task("Is the spleen normal?", llm)
    assert llm.calls == 1


def test_extract_json_block():
    assert extract_json_block('prefix {"a": {"b": 1}} suffix') == '{"a": {"b": 1}}'
    assert extract_json_block("no braces") is None
    assert extract_json_block("{unbalanced") is None


def test_report_decision_must_have_empty_regions():
    with pytest.raises(MalformedDecisionError):
        TaskDecision("Report", (RegionId.LUNG,))


# ---------------------------------------------------------------------------
# prompt rendering


def test_rendered_prompt_contains_query_exactly_once():
    template = load_template("task_classification")
    for query in (
        "Is there fluid around the heart?",
        "does the {{user_question}} trick work?",  # injection attempt stays inert
    ):
        rendered = render(template, {"user_question": query})
        assert rendered.count(query) == 1


def test_unknown_placeholders_stay_verbatim():
    rendered = render(load_template("query_rewriting"), {"user_question": "q", "region": "Lung"})
    assert "{{generated_question}}" in rendered


# ---------------------------------------------------------------------------
# query rewriting


def test_rewrite_ambiguous_falls_to_abnormality_template():
    out = rewrite_query("anything wrong with the lungs?", RegionId.LUNG, MockPlannerLlm())
    assert out == "What are the abnormalities in the lung?"


def test_rewrite_size_intent():
    out = rewrite_query("how big is the nodule in the lung?", RegionId.LUNG, MockPlannerLlm())
    assert out == "What is the approximate size of the nodule in the lung?"


def test_rewrite_unnamed_abnormality_uses_placeholder():
    out = rewrite_query("how big is it?", RegionId.LUNG, MockPlannerLlm())
    assert out == "What is the approximate size of the abnormality in the lung?"


def test_rewrite_falls_back_when_backend_rambles():
    class RamblingLlm:
        def chat(self, messages, *, adapter_id=None, vision_ref=None):
            return LlmReply(text="I think you should ask a doctor.")

    out = rewrite_query("hmm?", RegionId.PLEURA, RamblingLlm())
    assert out == "What are the abnormalities in the pleura?"


# ---------------------------------------------------------------------------
# query selection


def test_select_query_canonical_and_stable():
    hub = QueryHub.default()
    first = select_query(RegionId.LUNG, hub)
    assert first == "Is there any abnormality in the lung?"
    assert select_query(RegionId.LUNG, hub) == first


def test_select_query_missing_region():
    hub = QueryHub.default()
    del hub.canonical[RegionId.BREAST]
    with pytest.raises(HubMissingRegionError):
        select_query(RegionId.BREAST, hub)


# ---------------------------------------------------------------------------
# state machine


def test_classify_transition():
    state = step(PlannerState(), Action("classify", {"task_type": "QA"}))
    assert state.phase is Phase.CLASSIFIED
    assert state.task_type == "QA"
    assert [a.kind for a in state.trace] == ["classify"]


def test_done_is_terminal():
    state = PlannerState(phase=Phase.DONE)
    for kind in ("classify", "normalize", "dispatch", "aggregate", "answer", "finalize"):
        with pytest.raises(IllegalTransitionError):
            step(state, Action(kind))


def test_illegal_out_of_order_action():
    with pytest.raises(IllegalTransitionError):
        step(PlannerState(), Action("dispatch"))


def test_full_qa_episode_trace():
    state = PlannerState()
    for kind in ("classify", "normalize", "dispatch", "answer"):
        state = step(state, Action(kind))
    assert state.phase is Phase.DONE
    assert [a.kind for a in state.trace] == ["classify", "normalize", "dispatch", "answer"]


def test_report_episode_passes_through_aggregating():
    state = PlannerState()
    for kind in ("classify", "normalize", "dispatch", "aggregate", "finalize"):
        state = step(state, Action(kind))
    assert state.phase is Phase.DONE


def test_phase_sequence_strictly_increases():
    state = PlannerState()
    phases = [state.phase]
    for kind in ("classify", "normalize", "dispatch", "aggregate", "finalize"):
        state = step(state, Action(kind))
        phases.append(state.phase)
    assert all(a < b for a, b in zip(phases, phases[1:]))
