"""Deterministic rule-driven chat backends for offline runs and tests.

The mocks speak the same message-list interface as the HTTP client and key
off marker phrases in the rendered prompt to decide which template they are
answering. Replies are pure functions of the prompt (and adapter id), so any
pipeline built on them is reproducible byte for byte.
"""
from __future__ import annotations

import re

from .llm import LlmReply, Message
from .planner import REWRITE_TEMPLATES
from .regions import canonicalize_region, find_regions_in_text, spoken_name
from .sentences import NORMAL_SENTENCES

# Abnormality nouns the rule mock can lift out of a question.
_ABNORMALITY_WORDS = (
    "nodule",
    "effusion",
    "fluid",
    "opacity",
    "opacities",
    "atelectasis",
    "consolidation",
    "calculus",
    "lesion",
    "mass",
    "thickening",
    "emphysema",
    "hernia",
    "calcification",
    "bronchiectasis",
    "fibrosis",
    "pneumothorax",
    "cardiomegaly",
    "lymphadenopathy",
    "fracture",
)

_SIZE_CUES = ("how big", "how large", "size", "diameter", "measuring", "measure")
_LOCATION_CUES = ("where", "located", "location", "which part", "which lobe")
_PRESENCE_CUES = ("is there", "are there", "be identified", "identify", "any sign", "presence")


def _field(prompt: str, label: str) -> str:
    match = re.search(rf"^{re.escape(label)}\s*(.*)$", prompt, flags=re.MULTILINE)
    return match.group(1).strip() if match else ""


def _first_abnormality(question: str) -> str | None:
    lowered = question.lower()
    best: tuple[int, str] | None = None
    for word in _ABNORMALITY_WORDS:
        pos = lowered.find(word)
        if pos >= 0 and (best is None or pos < best[0]):
            best = (pos, word)
    return best[1] if best else None


class MockPlannerLlm:
    """Stands in for the strong general planner model."""

    backend_id = "mock-planner"

    def chat(self, messages: list[Message], *, adapter_id=None, vision_ref=None) -> LlmReply:
        prompt = messages[-1]["content"]
        if "classifies the user's intent" in prompt:
            text = self._classify(prompt)
        elif "standardize diagnostic questions" in prompt:
            text = self._rewrite(prompt)
        elif "answer the user's original question" in prompt:
            text = self._answer(prompt)
        elif "board-certified radiologist" in prompt:
            text = self._report(prompt)
        else:
            text = "I can only handle chest CT planning prompts."
        return LlmReply(text=text, backend_id=self.backend_id)

    def _classify(self, prompt: str) -> str:
        query = _field(prompt, "User Query:")
        if re.search(r"\breports?\b", query, flags=re.IGNORECASE):
            decision = '{"task_type": "Report", "target_region": []}'
        else:
            regions = find_regions_in_text(query)
            names = ", ".join(f'"{spoken_name(r).title()}"' for r in regions)
            decision = f'{{"task_type": "QA", "target_region": [{names}]}}'
        # Wrapped in prose on purpose: callers must extract the JSON block.
        return f"Sure, here is the classification.\n```json\n{decision}\n```"

    def _rewrite(self, prompt: str) -> str:
        question = _field(prompt, "User Question:")
        region_raw = _field(prompt, "Target Anatomical Region:")
        try:
            region = spoken_name(canonicalize_region(region_raw))
        except Exception:
            region = region_raw.lower()
        lowered = question.lower()
        abnormality = _first_abnormality(question) or "abnormality"
        if any(cue in lowered for cue in _SIZE_CUES):
            rewritten = REWRITE_TEMPLATES[1].format(abnormality=abnormality, region=region)
        elif any(cue in lowered for cue in _LOCATION_CUES):
            rewritten = REWRITE_TEMPLATES[2].format(abnormality=abnormality)
        elif any(cue in lowered for cue in _PRESENCE_CUES) and abnormality != "abnormality":
            rewritten = REWRITE_TEMPLATES[3].format(abnormality=abnormality, region=region)
        else:
            rewritten = REWRITE_TEMPLATES[0].format(region=region)
        return f"Rewritten Clinical Query: {rewritten}"

    def _answer(self, prompt: str) -> str:
        reference = _field(prompt, "Reference Answer:")
        return f"Answer: {reference}"

    def _report(self, prompt: str) -> str:
        start = prompt.find("Input structured finding:")
        end = prompt.find("Examples:")
        block = prompt[start + len("Input structured finding:") : end if end > start else None]
        statements = []
        for line in block.strip().splitlines():
            line = line.strip()
            if not line:
                continue
            statements.append(line.split(": ", 1)[1] if ": " in line else line)
        return " ".join(statements)


class MockRegionLlm:
    """Stands in for the adapter-carrying multimodal reasoning backend.

    Answers every question with the region's canonical normal sentence; the
    vision reference is deliberately ignored (this backend sees no pixels).
    """

    backend_id = "mock-region"

    def chat(self, messages: list[Message], *, adapter_id=None, vision_ref=None) -> LlmReply:
        if adapter_id is None:
            return LlmReply(text="No adapter selected.", backend_id=self.backend_id)
        region = canonicalize_region(adapter_id)
        return LlmReply(text=NORMAL_SENTENCES[region], backend_id=self.backend_id)


class EchoRegionLlm:
    """Test double whose statement quotes both the region and the question."""

    backend_id = "echo-region"

    def chat(self, messages: list[Message], *, adapter_id=None, vision_ref=None) -> LlmReply:
        question = messages[-1]["content"]
        return LlmReply(
            text=f"[{adapter_id}] In response to '{question}': no acute finding.",
            backend_id=self.backend_id,
        )
