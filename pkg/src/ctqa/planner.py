"""Task recognition, anatomical routing, and query normalization.

The planner is a small state machine: each episode moves through the phases
received -> classified -> normalized -> dispatched -> aggregating -> done,
where QA episodes jump straight from dispatched to done and only report
episodes pass through aggregating. Every move appends an action record to the
trace; the phase sequence of any completed trace is strictly increasing.

All language work is delegated to a pluggable chat client, so the planner is
deterministic whenever the client is (the test stack uses the rule mock in
:mod:`ctqa.mockllm`).
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace

from .errors import IllegalTransitionError, MalformedDecisionError
from .llm import LlmClient
from .prompts import load_template, render
from .regions import RegionId, canonicalize_region, display_name, spoken_name

# The predefined clinical question templates rewriting may target.
REWRITE_TEMPLATES = (
    "What are the abnormalities in the {region}?",
    "What is the approximate size of the {abnormality} in the {region}?",
    "Where is the {abnormality} located in the image?",
    "Can {abnormality} be identified in the {region}?",
)

_REWRITE_PATTERNS = [
    re.compile("^" + re.escape(t).replace(r"\{region\}", "(.+)").replace(r"\{abnormality\}", "(.+)") + "$")
    for t in REWRITE_TEMPLATES
]


class Phase(enum.IntEnum):
    RECEIVED = 0
    CLASSIFIED = 1
    NORMALIZED = 2
    DISPATCHED = 3
    AGGREGATING = 4
    DONE = 5


@dataclass(frozen=True)
class TaskDecision:
    task_type: str  # "QA" | "Report"
    target_regions: tuple[RegionId, ...]

    def __post_init__(self):
        if self.task_type not in ("QA", "Report"):
            raise MalformedDecisionError(f"task_type must be QA or Report, got {self.task_type!r}")
        if self.task_type == "Report" and self.target_regions:
            raise MalformedDecisionError("Report decisions carry no target regions")


@dataclass(frozen=True)
class Action:
    kind: str
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PlannerState:
    phase: Phase = Phase.RECEIVED
    task_type: str | None = None
    target_regions: tuple[RegionId, ...] = ()
    trace: tuple[Action, ...] = ()


# action kind -> (phases it is legal in, successor phase)
_TRANSITIONS: dict[str, tuple[tuple[Phase, ...], Phase]] = {
    "classify": ((Phase.RECEIVED,), Phase.CLASSIFIED),
    "normalize": ((Phase.CLASSIFIED,), Phase.NORMALIZED),
    "dispatch": ((Phase.NORMALIZED,), Phase.DISPATCHED),
    "aggregate": ((Phase.DISPATCHED,), Phase.AGGREGATING),
    "answer": ((Phase.DISPATCHED,), Phase.DONE),
    "finalize": ((Phase.DISPATCHED, Phase.AGGREGATING), Phase.DONE),
}


def step(state: PlannerState, action: Action, env: dict | None = None) -> PlannerState:
    """Apply one action; returns the successor state with the action traced."""
    try:
        legal_phases, next_phase = _TRANSITIONS[action.kind]
    except KeyError:
        raise IllegalTransitionError(f"unknown action kind {action.kind!r}") from None
    if state.phase not in legal_phases:
        raise IllegalTransitionError(
            f"action {action.kind!r} not legal in phase {state.phase.name}"
        )
    recorded = action if not env else Action(action.kind, {**action.detail, "env": env})
    updates: dict = {"phase": next_phase, "trace": state.trace + (recorded,)}
    if action.kind == "classify":
        updates["task_type"] = action.detail.get("task_type")
        updates["target_regions"] = tuple(action.detail.get("target_regions", ()))
    return replace(state, **updates)


def extract_json_block(text: str) -> str | None:
    """First balanced {...} block in the text, or None.

    Backends tend to wrap the requested JSON in prose or code fences; a simple
    depth counter finds the object. Braces inside JSON strings would confuse
    it, but the classification schema never produces any.
    """
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    for idx in range(start, len(text)):
        if text[idx] == "{":
            depth += 1
        elif text[idx] == "}":
            depth -= 1
            if depth == 0:
                return text[start : idx + 1]
    return None


def _parse_decision(reply_text: str) -> TaskDecision:
    block = extract_json_block(reply_text)
    if block is None:
        raise MalformedDecisionError(f"no JSON object in reply: {reply_text!r}")
    try:
        data = json.loads(block)
    except json.JSONDecodeError as exc:
        raise MalformedDecisionError(f"unparseable JSON in reply: {exc}") from exc
    task_type = data.get("task_type")
    if task_type not in ("QA", "Report"):
        raise MalformedDecisionError(f"bad task_type {task_type!r}")
    raw_regions = data.get("target_region", [])
    if not isinstance(raw_regions, list):
        raise MalformedDecisionError(f"target_region must be a list, got {raw_regions!r}")
    if task_type == "Report":
        return TaskDecision("Report", ())
    regions = tuple(canonicalize_region(r) for r in raw_regions)
    return TaskDecision("QA", regions)


def classify_task(query: str, llm: LlmClient, template_dir: str | None = None) -> TaskDecision:
    """Render the classification template, ask the backend, parse the JSON.

    One retry with an "output JSON only" system nudge before giving up.
    Region strings in the reply are canonicalized; unknown ones are an error,
    not a retry (the reply parsed fine, the content is wrong).
    """
    if not query.strip():
        raise MalformedDecisionError("query must be nonempty")
    prompt = render(load_template("task_classification", template_dir), {"user_question": query})
    reply = llm.chat([{"role": "user", "content": prompt}])
    try:
        return _parse_decision(reply.text)
    except MalformedDecisionError:
        nudged = [
            {"role": "system", "content": "Output JSON only."},
            {"role": "user", "content": prompt},
        ]
        return _parse_decision(llm.chat(nudged).text)


def rewrite_query(query: str, region: RegionId, llm: LlmClient, template_dir: str | None = None) -> str:
    """Standardize a free-form question against the predefined templates.

    The backend's suggestion is accepted only if it instantiates one of the
    four templates; anything else falls back to the broadest clinically safe
    default, template 1 with the region name.
    """
    prompt = render(
        load_template("query_rewriting", template_dir),
        {"user_question": query, "region": display_name(region)},
    )
    reply = llm.chat([{"role": "user", "content": prompt}])
    candidate = reply.text.strip()
    marker = "Rewritten Clinical Query:"
    if marker in candidate:
        candidate = candidate.split(marker, 1)[1].strip()
    candidate = candidate.splitlines()[0].strip() if candidate else ""
    if any(pattern.match(candidate) for pattern in _REWRITE_PATTERNS):
        return candidate
    return REWRITE_TEMPLATES[0].format(region=spoken_name(region))


def select_query(region: RegionId, hub) -> str:
    """The fixed canonical question for a region, from the query hub."""
    return hub.canonical_question(region)
