"""Decompose historical reports into per-region findings and build the store."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..errors import BackendUnavailableError, EmbeddingFailureError
from ..regions import REPORT_ORDER, RegionId, display_name, spoken_name
from ..sentences import ANCHOR_SENTENCES, NORMAL_SENTENCES
from .embedder import EmbeddingClient, encode_findings
from .store import ExemplarStore

logger = logging.getLogger(__name__)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def _normalize_sentence(sentence: str) -> str:
    return re.sub(r"\s+", " ", sentence.strip().lower())


_ANCHORS_NORMALIZED = {_normalize_sentence(s): region for s, region in ANCHOR_SENTENCES.items()}

_SECTION_LABELS: dict[str, RegionId] = {}
for _region in RegionId:
    _SECTION_LABELS[display_name(_region).lower()] = _region
    _SECTION_LABELS[spoken_name(_region)] = _region
    _SECTION_LABELS[_region.value] = _region


class RegionSplitter:
    """Segment a report into the ten region findings.

    Two passes: explicitly labeled sections ("Lung: ...") win when present;
    otherwise sentences are walked in order, anchor sentences (the standard
    normal-description set) switch the current region, and any other sentence
    falls to the nearest preceding region. Reports in which no region can be
    located at all are unsplittable. Missing regions are filled with the
    region's canonical normal sentence.
    """

    def split(self, report_text: str) -> dict[RegionId, str] | None:
        sections = self._split_labeled(report_text)
        if sections is None:
            sections = self._split_anchored(report_text)
        if not sections:
            return None
        for region in REPORT_ORDER:
            sections.setdefault(region, NORMAL_SENTENCES[region])
        return sections

    def _split_labeled(self, text: str) -> dict[RegionId, str] | None:
        sections: dict[RegionId, list[str]] = {}
        current: RegionId | None = None
        matched_any = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            label, _, rest = line.partition(":")
            region = _SECTION_LABELS.get(label.strip().lower())
            if region is not None:
                matched_any = True
                current = region
                if rest.strip():
                    sections.setdefault(region, []).append(rest.strip())
            elif current is not None:
                sections.setdefault(current, []).append(line)
        if not matched_any:
            return None
        return {region: " ".join(parts) for region, parts in sections.items()}

    def _split_anchored(self, text: str) -> dict[RegionId, str]:
        sections: dict[RegionId, list[str]] = {}
        pending: list[str] = []
        current: RegionId | None = None
        for sentence in _SENTENCE_SPLIT.split(text.strip()):
            sentence = sentence.strip()
            if not sentence:
                continue
            anchored = _ANCHORS_NORMALIZED.get(_normalize_sentence(sentence))
            if anchored is not None:
                current = anchored
            if current is None:
                pending.append(sentence)  # preamble joins the first located region
                continue
            sections.setdefault(current, [])
            if pending:
                sections[current] = pending + sections[current]
                pending = []
            sections[current].append(sentence)
        return {region: " ".join(parts) for region, parts in sections.items()}


@dataclass
class CorpusBuildResult:
    store: ExemplarStore
    accepted: int
    skipped_unsplittable: int
    skipped_embedding: int


def build_corpus(
    reports: list[str], splitter: RegionSplitter, emb: EmbeddingClient
) -> CorpusBuildResult:
    """One exemplar per splittable report; embedding failures skip the record."""
    store = ExemplarStore(dim=emb.dim)
    accepted = unsplittable = embed_failed = 0
    for text in reports:
        sections = splitter.split(text)
        if sections is None:
            unsplittable += 1
            continue
        findings = [sections[region] for region in REPORT_ORDER]
        try:
            key = encode_findings(findings, emb)
        except (EmbeddingFailureError, BackendUnavailableError) as exc:
            embed_failed += 1
            logger.warning("skipping report, embedding failed: %s", exc)
            continue
        store.add(key, findings, text)
        accepted += 1
    if unsplittable:
        logger.info("skipped %d unsplittable reports", unsplittable)
    return CorpusBuildResult(
        store=store,
        accepted=accepted,
        skipped_unsplittable=unsplittable,
        skipped_embedding=embed_failed,
    )
